use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::panel::RespondentId;
use crate::util::{mean, sample_std};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageInput {
    pub id: RespondentId,
    /// Number of prior answers.
    pub prior: usize,
    /// Number of target answers.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageScore {
    pub id: RespondentId,
    pub prior: usize,
    pub target: usize,
    pub z_prior: f64,
    pub z_target: f64,
    /// z_prior + z_target
    pub score: f64,
}

/// Within-stratum z-scores; zero when the standard deviation is zero or
/// undefined (fewer than two members).
fn z_scores(values: &[f64]) -> Vec<f64> {
    let m = mean(values).unwrap_or(0.0);
    match sample_std(values) {
        Some(sd) if sd > 0.0 => values.iter().map(|v| (v - m) / sd).collect(),
        _ => vec![0.0; values.len()],
    }
}

/// Orders stratum members by answer coverage.
///
/// Members are shuffled with `seed`, then stably sorted descending by the
/// coverage score, the product prior * target, the target count and the prior
/// count. Remaining exact ties keep the shuffled order.
pub fn rank_within_stratum(members: &[CoverageInput], seed: u64) -> Vec<CoverageScore> {
    let priors: Vec<f64> = members.iter().map(|m| m.prior as f64).collect();
    let targets: Vec<f64> = members.iter().map(|m| m.target as f64).collect();
    let zp = z_scores(&priors);
    let zt = z_scores(&targets);
    let mut scored: Vec<CoverageScore> = members
        .iter()
        .zip(zp.into_iter().zip(zt))
        .map(|(m, (z_prior, z_target))| CoverageScore {
            id: m.id.clone(),
            prior: m.prior,
            target: m.target,
            z_prior,
            z_target,
            score: z_prior + z_target,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scored.shuffle(&mut rng);
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| (b.prior * b.target).cmp(&(a.prior * a.target)))
            .then_with(|| b.target.cmp(&a.target))
            .then_with(|| b.prior.cmp(&a.prior))
    });
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn input(id: &str, prior: usize, target: usize) -> CoverageInput {
        CoverageInput {
            id: RespondentId::new(id),
            prior,
            target,
        }
    }

    #[test]
    fn z_scores_follow_sample_sd() {
        let members = [input("a", 10, 5), input("b", 20, 5), input("c", 30, 5)];
        let ranked = rank_within_stratum(&members, 1);
        assert_eq!(ranked[0].id.as_str(), "c");
        assert_eq!(ranked[2].id.as_str(), "a");
        assert!((ranked[0].z_prior - 1.0).abs() < 1e-12);
        assert!((ranked[1].z_prior).abs() < 1e-12);
        assert!((ranked[2].z_prior + 1.0).abs() < 1e-12);
        assert!(ranked.iter().all(|r| r.z_target == 0.0));
    }

    #[test]
    fn single_member_has_zero_scores() {
        let ranked = rank_within_stratum(&[input("solo", 3, 9)], 0);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].z_prior, 0.0);
        assert_eq!(ranked[0].z_target, 0.0);
    }

    #[test]
    fn product_breaks_score_ties() {
        // z-scores sum to zero for both, product decides
        let members = [input("a", 1, 3), input("b", 3, 1), input("c", 2, 2)];
        let ranked = rank_within_stratum(&members, 5);
        assert_eq!(ranked[0].id.as_str(), "c");
    }

    #[test]
    fn identical_members_follow_the_seed() {
        let members: Vec<_> = (0..6).map(|i| input(&format!("r{i}"), 4, 4)).collect();
        let a = rank_within_stratum(&members, 77);
        let b = rank_within_stratum(&members, 77);
        assert_eq!(a, b);
        let orders: std::collections::BTreeSet<Vec<String>> = (0..10)
            .map(|s| rank_within_stratum(&members, s).into_iter().map(|r| r.id.0).collect())
            .collect();
        assert!(orders.len() > 1);
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation(pairs in prop::collection::vec((0usize..50, 0usize..50), 0..30), seed in any::<u64>()) {
            let members: Vec<_> = pairs.iter().enumerate().map(|(i, (p, t))| input(&format!("r{i}"), *p, *t)).collect();
            let ranked = rank_within_stratum(&members, seed);
            let mut got: Vec<_> = ranked.iter().map(|r| r.id.clone()).collect();
            got.sort();
            let mut want: Vec<_> = members.iter().map(|m| m.id.clone()).collect();
            want.sort();
            prop_assert_eq!(got, want);
            for w in ranked.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
        }
    }
}

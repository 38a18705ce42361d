//! Metrics against independent brute-force implementations on random
//! small instances.
//!
//! Checks are plain functions, wrapped as tests at the bottom, so the
//! acceptance harness can run the same code.

use persona_core::metrics::{adjusted_rand_index, empirical_pair, js_distance, weighted_f1, Encoded, Evaluation, ResponseMatrix};
use persona_core::panel::{AnswerCode, Catalog, Category, QuestionMeta, Representation, StudyKey};
use persona_core::sampling::{AgeGroup, Gender, HouseholdStage, Stratum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_f1(truth: &[i64], pred: &[Option<i64>]) -> f64 {
    // a missing prediction becomes a label no truth value can carry
    let pred: Vec<i64> = pred.iter().map(|p| p.unwrap_or(i64::MIN)).collect();
    let mut labels: Vec<i64> = truth.to_vec();
    labels.sort();
    labels.dedup();
    let n = truth.len() as f64;
    let mut total = 0.0;
    for l in labels {
        let support = truth.iter().filter(|&&t| t == l).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == l).count() as f64;
        let tp = truth.iter().zip(&pred).filter(|(&t, &p)| t == l && p == l).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = tp / support;
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        total += support * f1;
    }
    total / n
}

pub fn weighted_f1_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let k = rng.gen_range(1..6);
        let truth: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
        let pred: Vec<Option<i64>> =
            (0..n).map(|_| if rng.gen_bool(0.15) { None } else { Some(rng.gen_range(1..=k + 1)) }).collect();
        let got = weighted_f1(
            &truth.iter().map(|&t| AnswerCode::Category(t)).collect::<Vec<_>>(),
            &pred.iter().map(|p| p.map(AnswerCode::Category)).collect::<Vec<_>>(),
        );
        assert!((got - brute_f1(&truth, &pred)).abs() < 1e-9, "{truth:?} {pred:?}");
    }
}

fn brute_jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut js = 0.0;
    for i in 0..p.len() {
        let m = 0.5 * (p[i] + q[i]);
        if p[i] > 0.0 {
            js += 0.5 * p[i] * (p[i].ln() - m.ln()) / std::f64::consts::LN_2;
        }
        if q[i] > 0.0 {
            js += 0.5 * q[i] * (q[i].ln() - m.ln()) / std::f64::consts::LN_2;
        }
    }
    js.max(0.0).sqrt()
}

pub fn jsd_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let k = rng.gen_range(1..7);
        let a: Vec<AnswerCode> = (0..rng.gen_range(1..30)).map(|_| AnswerCode::Category(rng.gen_range(0..k))).collect();
        let b: Vec<AnswerCode> = (0..rng.gen_range(1..30)).map(|_| AnswerCode::Category(rng.gen_range(0..k + 2))).collect();
        let (p, q) = empirical_pair(&a, &b);
        // empirical shares over the union of observed answers
        let mut support: Vec<AnswerCode> = a.iter().chain(&b).copied().collect();
        support.sort();
        support.dedup();
        let share = |xs: &[AnswerCode], v: AnswerCode| xs.iter().filter(|&&x| x == v).count() as f64 / xs.len() as f64;
        let bp: Vec<f64> = support.iter().map(|&v| share(&a, v)).collect();
        let bq: Vec<f64> = support.iter().map(|&v| share(&b, v)).collect();
        assert!((js_distance(&p, &q) - brute_jsd(&bp, &bq)).abs() < 1e-9);

        let raw_p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let raw_q: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (sp, sq): (f64, f64) = (raw_p.iter().sum(), raw_q.iter().sum());
        let p: Vec<f64> = raw_p.iter().map(|x| x / sp).collect();
        let q: Vec<f64> = raw_q.iter().map(|x| x / sq).collect();
        assert!((js_distance(&p, &q) - brute_jsd(&p, &q)).abs() < 1e-9);
    }
}

fn catalog(cols: usize, k: i64) -> Catalog {
    Catalog::new(
        (0..cols)
            .map(|c| QuestionMeta {
                variable_name: format!("q{c}"),
                label: format!("question {c}"),
                representation: Representation::Nominal,
                question_type: "t".into(),
                categories: (1..=k).map(|code| Category { code, label: code.to_string() }).collect(),
                numeric_bounds: None,
                study_key: StudyKey::core("s"),
                domain: "d".into(),
            })
            .collect(),
    )
    .unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, k: i64, missing: f64) -> ResponseMatrix {
    let mut m = ResponseMatrix::new((0..rows).map(|r| format!("r{r}")).collect(), (0..cols).map(|c| format!("q{c}")).collect());
    for r in 0..rows {
        for c in 0..cols {
            if !rng.gen_bool(missing) {
                m.set(r, c, Some(AnswerCode::Category(rng.gen_range(1..=k))));
            }
        }
    }
    m
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn mmd_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stratum = Stratum::new(AgeGroup::from_age(40), Gender::Female, HouseholdStage::SingleWithoutChildren);
    for _ in 0..50 {
        let (n, cols, k) = (rng.gen_range(3..12), rng.gen_range(1..5), rng.gen_range(2..5));
        let cat = catalog(cols, k);
        let x = random_matrix(&mut rng, n, cols, k, 0.0);
        let y = random_matrix(&mut rng, n, cols, k, 0.2);
        let ex = Encoded::new(&x, &cat).unwrap();
        let ey = Encoded::new(&y, &cat).unwrap();
        let xs: Vec<Vec<f64>> = (0..n).map(|r| ex.dense(r)).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|r| ey.dense(r)).collect();

        let pooled: Vec<&Vec<f64>> = xs.iter().chain(&ys).collect();
        let mut d: Vec<f64> = Vec::new();
        for i in 0..pooled.len() {
            for j in i + 1..pooled.len() {
                d.push(sq(pooled[i], pooled[j]));
            }
        }
        d.sort_by(f64::total_cmp);
        let med = if d.len() % 2 == 1 { d[d.len() / 2] } else { 0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2]) };
        let gamma = if med > 0.0 { 1.0 / med } else { 1.0 };

        let kern = |a: &[f64], b: &[f64]| (-gamma * sq(a, b)).exp();
        let mean_k = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            let mut s = 0.0;
            for u in a {
                for v in b {
                    s += kern(u, v);
                }
            }
            s / (a.len() * b.len()) as f64
        };
        let mmd2 = mean_k(&xs, &xs) + mean_k(&ys, &ys) - 2.0 * mean_k(&xs, &ys);
        let want = (0.5 * mmd2).max(0.0).sqrt();

        let eval = Evaluation::new(&x, &y, &cat, vec![&stratum; n]).unwrap();
        let rows = eval.all_rows();
        let fixed = eval.mmd(&rows, Some(gamma)).unwrap();
        assert!((fixed.value - want).abs() < 1e-6, "{} vs {want}", fixed.value);
        let heuristic = eval.mmd(&rows, None).unwrap();
        assert!((heuristic.gamma - gamma).abs() < 1e-9 * gamma.max(1.0));
        assert!((heuristic.value - want).abs() < 1e-6);
    }
}

/// Pair-counting form of the adjusted Rand index.
fn brute_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (ss * dd - sd * ds) / den
    }
}

pub fn ari_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.gen_range(2..30);
        let (ka, kb) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..kb)).collect();
        let got = adjusted_rand_index(&a, &b);
        let want = brute_ari(&a, &b);
        assert!((got - want).abs() < 1e-9, "{a:?} {b:?}: {got} vs {want}");
    }
}

pub fn ari_of_independent_partitions_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 200;
    let mean: f64 = (0..trials)
        .map(|_| {
            let a: Vec<usize> = (0..200).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<usize> = (0..200).map(|_| rng.gen_range(0..3)).collect();
            adjusted_rand_index(&a, &b)
        })
        .sum::<f64>()
        / trials as f64;
    assert!(mean.abs() < 0.05, "mean ARI {mean}");
}

#[cfg(test)]
mod tests {
    #[test]
    fn weighted_f1_matches_brute_force() {
        super::weighted_f1_matches_brute_force()
    }

    #[test]
    fn jsd_matches_brute_force() {
        super::jsd_matches_brute_force()
    }

    #[test]
    fn mmd_matches_brute_force() {
        super::mmd_matches_brute_force()
    }

    #[test]
    fn ari_matches_brute_force() {
        super::ari_matches_brute_force()
    }

    #[test]
    fn ari_of_independent_partitions_is_near_zero() {
        super::ari_of_independent_partitions_is_near_zero()
    }
}

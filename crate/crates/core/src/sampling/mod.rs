//! Stratified proportional respondent sampling.
//!
//! Strata are age group x gender x household stage cells. Sparse strata (fewer
//! than [`MIN_STRATUM_SIZE`] eligible respondents) are dropped, the sample size
//! is apportioned by largest remainder, and each stratum contributes its
//! best-covered respondents.

mod allocation;
mod ranking;
mod stratum;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{eligible_respondents, Panel, RespondentId, TaskSplit};
use crate::util::derive_seed;

pub use allocation::{
    allocate_largest_remainder, allocation_accuracy, AllocationAccuracy, AllocationPlan,
    AllocationRow,
};
pub use ranking::{rank_within_stratum, CoverageInput, CoverageScore};
pub use stratum::{derive_stratum, AgeGroup, DemographicAxis, Gender, HouseholdStage, Stratum};

/// Strata with fewer eligible respondents are excluded from allocation.
pub const MIN_STRATUM_SIZE: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("cannot allocate {requested} respondents from {available} available in allocatable strata")]
    Infeasible { requested: usize, available: usize },
    #[error("allocation accuracy is undefined for an empty population")]
    EmptyPopulation,
    #[error("sample cell `{0}` is missing from the population table")]
    UnknownCell(String),
}

/// The selected respondents with the plan that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Sorted respondent ids.
    pub respondents: Vec<RespondentId>,
    pub strata: BTreeMap<RespondentId, Stratum>,
    pub plan: AllocationPlan<Stratum>,
}

impl Sample {
    pub fn stratum_counts(&self) -> BTreeMap<Stratum, usize> {
        let mut counts = BTreeMap::new();
        for id in &self.respondents {
            *counts.entry(self.strata[id]).or_insert(0) += 1;
        }
        counts
    }

    pub fn contains(&self, id: &RespondentId) -> bool {
        self.strata.contains_key(id)
    }
}

/// Eligibility, stratification, allocation and within-stratum ranking.
pub fn select_sample(
    split: &TaskSplit,
    panel: &Panel,
    n: usize,
    seed: u64,
) -> Result<Sample, SamplingError> {
    let eligible = eligible_respondents(split, panel);
    select_from(split, panel, &eligible, n, seed)
}

pub(crate) fn select_from(
    split: &TaskSplit,
    panel: &Panel,
    eligible: &BTreeSet<RespondentId>,
    n: usize,
    seed: u64,
) -> Result<Sample, SamplingError> {
    let mut members: BTreeMap<Stratum, Vec<CoverageInput>> = BTreeMap::new();
    for id in eligible {
        let respondent = panel.respondent(id).expect("eligible respondents come from the panel");
        let stratum = derive_stratum(&respondent.background);
        members.entry(stratum).or_default().push(CoverageInput {
            id: id.clone(),
            prior: split.prior(id).len(),
            target: split.targets(id).len(),
        });
    }
    let available: BTreeMap<Stratum, usize> =
        members.iter().map(|(s, m)| (*s, m.len())).collect();
    let plan = AllocationPlan::for_population(&available, n, MIN_STRATUM_SIZE)?;

    let mut respondents = Vec::with_capacity(n);
    let mut strata = BTreeMap::new();
    for row in &plan.rows {
        let Some(take) = row.allocated.filter(|&k| k > 0) else {
            continue;
        };
        let stratum_seed = derive_seed(seed, &[&row.stratum.key()]);
        let ranked = rank_within_stratum(&members[&row.stratum], stratum_seed);
        for score in ranked.into_iter().take(take) {
            strata.insert(score.id.clone(), row.stratum);
            respondents.push(score.id);
        }
    }
    respondents.sort();
    Ok(Sample {
        respondents,
        strata,
        plan,
    })
}

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::SamplingError;

/// One stratum of an allocation plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow<K> {
    pub stratum: K,
    /// Eligible respondents N_h.
    pub available: usize,
    /// Proportional quota a_h* = N_h / N * n over allocatable strata; `None`
    /// for excluded strata.
    pub quota: Option<f64>,
    /// Allocated count n_h; `None` when the stratum was excluded as sparse.
    pub allocated: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan<K> {
    pub rows: Vec<AllocationRow<K>>,
    pub n: usize,
}

impl<K: Ord + Clone + Display> AllocationPlan<K> {
    /// Excludes strata below `min_size`, then allocates `n` over the rest.
    pub fn for_population(
        available: &BTreeMap<K, usize>,
        n: usize,
        min_size: usize,
    ) -> Result<Self, SamplingError> {
        let included: BTreeMap<K, usize> = available
            .iter()
            .filter(|(_, &count)| count >= min_size)
            .map(|(k, &c)| (k.clone(), c))
            .collect();
        let mut plan = allocate_largest_remainder(&included, n)?;
        for (k, &count) in available {
            if count < min_size {
                plan.rows.push(AllocationRow {
                    stratum: k.clone(),
                    available: count,
                    quota: None,
                    allocated: None,
                });
            }
        }
        plan.rows.sort_by(|a, b| a.stratum.cmp(&b.stratum));
        Ok(plan)
    }

    pub fn allocated(&self) -> BTreeMap<K, usize> {
        self.rows
            .iter()
            .map(|r| (r.stratum.clone(), r.allocated.unwrap_or(0)))
            .collect()
    }

    pub fn available(&self) -> BTreeMap<K, usize> {
        self.rows.iter().map(|r| (r.stratum.clone(), r.available)).collect()
    }
}

/// Largest-remainder proportional allocation of `n` slots over `available`.
///
/// Every stratum first receives the floor of its quota; leftover slots go to
/// the largest fractional remainders. Remainders are compared exactly as
/// integer numerators (N_h * n mod N); equal remainders prefer the larger
/// stratum, then the smaller key. Allocations above N_h are clamped and the
/// overflow is reassigned among the unclamped strata by the same rule.
pub fn allocate_largest_remainder<K: Ord + Clone + Display>(
    available: &BTreeMap<K, usize>,
    n: usize,
) -> Result<AllocationPlan<K>, SamplingError> {
    let total: usize = available.values().sum();
    if n > total {
        return Err(SamplingError::Infeasible {
            requested: n,
            available: total,
        });
    }
    let keys: Vec<&K> = available.keys().collect();
    let caps: Vec<usize> = available.values().copied().collect();
    let mut allocated = vec![0usize; keys.len()];
    let mut open: Vec<bool> = caps.iter().map(|&c| c > 0).collect();
    let mut remaining = n;

    // Each round apportions `remaining` slots over the open strata by their
    // sizes; a round only repeats when some stratum hit its cap.
    while remaining > 0 {
        let pool: u128 = (0..keys.len()).filter(|&i| open[i]).map(|i| caps[i] as u128).sum();
        debug_assert!(pool > 0);
        let mut extra = vec![0usize; keys.len()];
        let mut rem: Vec<(usize, u128)> = Vec::new();
        let mut given = 0usize;
        for i in (0..keys.len()).filter(|&i| open[i]) {
            let num = caps[i] as u128 * remaining as u128;
            extra[i] = (num / pool) as usize;
            given += extra[i];
            rem.push((i, num % pool));
        }
        rem.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| caps[b.0].cmp(&caps[a.0]))
                .then_with(|| keys[a.0].cmp(keys[b.0]))
        });
        for &(i, _) in rem.iter().take(remaining - given) {
            extra[i] += 1;
        }
        remaining = 0;
        for i in 0..keys.len() {
            let want = allocated[i] + extra[i];
            if want >= caps[i] {
                remaining += want - caps[i];
                allocated[i] = caps[i];
                open[i] = false;
            } else {
                allocated[i] = want;
            }
        }
    }

    let rows = keys
        .iter()
        .zip(caps.iter().zip(allocated))
        .map(|(k, (&cap, alloc))| AllocationRow {
            stratum: (*k).clone(),
            available: cap,
            quota: Some(if total == 0 { 0.0 } else { cap as f64 * n as f64 / total as f64 }),
            allocated: Some(alloc),
        })
        .collect();
    Ok(AllocationPlan { rows, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationAccuracy {
    /// Mean absolute discrepancy between sampled and expected counts.
    pub mad: f64,
    /// Maximum absolute discrepancy.
    pub max_d: f64,
    pub cells: usize,
}

/// Compares sampled cell counts with proportional expectations
/// `Population_c / sum(Population) * n`. Cells absent from `sample_counts`
/// count as zero.
pub fn allocation_accuracy<K: Ord + Display>(
    sample_counts: &BTreeMap<K, usize>,
    population_counts: &BTreeMap<K, usize>,
    n: usize,
) -> Result<AllocationAccuracy, SamplingError> {
    let total: usize = population_counts.values().sum();
    if population_counts.is_empty() || total == 0 {
        return Err(SamplingError::EmptyPopulation);
    }
    if let Some(k) = sample_counts.keys().find(|k| !population_counts.contains_key(k)) {
        return Err(SamplingError::UnknownCell(k.to_string()));
    }
    let deviations: Vec<f64> = population_counts
        .iter()
        .map(|(k, &pop)| {
            let expected = pop as f64 / total as f64 * n as f64;
            let got = sample_counts.get(k).copied().unwrap_or(0) as f64;
            (got - expected).abs()
        })
        .collect();
    let mad = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let max_d = deviations.iter().copied().fold(0.0, f64::max);
    Ok(AllocationAccuracy {
        mad,
        max_d,
        cells: deviations.len(),
    })
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MetricsError;
use crate::util::{derive_seed, sample_std};

/// Redraws allowed per resample when the metric is undefined on it.
pub const REDRAW_BUDGET: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// Metric on the full sample.
    pub value: f64,
    /// Sample standard deviation over resamples.
    pub se: f64,
    pub resamples: usize,
}

/// Respondent indices for resample `index`, drawn with replacement.
pub fn resample_indices(n: usize, seed: u64, index: usize, redraw: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        &["bootstrap", &index.to_string(), &redraw.to_string()],
    ));
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Bootstrap standard error over `resamples` respondent resamples. `metric`
/// receives row indices (with repeats) and returns `None` when undefined.
/// Every resample has its own RNG stream, so the result does not depend on
/// thread scheduling.
pub fn bootstrap_se<F>(n: usize, resamples: usize, seed: u64, metric: F) -> Result<Estimate, MetricsError>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if resamples < 2 {
        return Err(MetricsError::Undefined("bootstrap needs at least 2 resamples".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let value = metric(&all).ok_or_else(|| MetricsError::Undefined("metric undefined on the full sample".into()))?;
    let values = (0..resamples)
        .into_par_iter()
        .map(|i| {
            (0..REDRAW_BUDGET)
                .find_map(|redraw| metric(&resample_indices(n, seed, i, redraw)))
                .ok_or_else(|| {
                    MetricsError::Undefined(format!("metric undefined on resample {i} after {REDRAW_BUDGET} draws"))
                })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Estimate {
        value,
        se: sample_std(&values).unwrap_or(0.0),
        resamples,
    })
}

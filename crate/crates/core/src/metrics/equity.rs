use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::sampling::{DemographicAxis, Stratum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParity {
    pub axis: DemographicAxis,
    pub group: String,
    pub respondents: usize,
    pub accuracy: f64,
    /// ACC_g / ACC_all, the demographic parity index of the group.
    pub parity_index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquityReport {
    /// Mean over all groups on all three axes of |ACC_g / ACC_all − 1|.
    pub value: f64,
    pub overall_accuracy: f64,
    pub groups: Vec<GroupParity>,
}

/// DPI mean absolute deviation. `accuracy[i]` is respondent i's match rate
/// and `strata[i]` their stratum; groups are formed per axis (marginally).
pub fn equity_dpi_mad(accuracy: &[f64], strata: &[&Stratum]) -> Result<EquityReport, MetricsError> {
    assert_eq!(accuracy.len(), strata.len(), "accuracy and strata must align");
    if accuracy.is_empty() {
        return Err(MetricsError::Undefined("equity needs at least one respondent".into()));
    }
    let overall = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
    if overall <= 0.0 {
        return Err(MetricsError::Undefined("overall accuracy is 0, parity index undefined".into()));
    }
    let mut sums: BTreeMap<(DemographicAxis, &'static str), (f64, usize)> = BTreeMap::new();
    for (acc, s) in accuracy.iter().zip(strata) {
        for (axis, label) in s.axis_labels() {
            let e = sums.entry((axis, label)).or_default();
            e.0 += acc;
            e.1 += 1;
        }
    }
    let groups: Vec<GroupParity> = sums
        .into_iter()
        .map(|((axis, group), (sum, n))| {
            let accuracy = sum / n as f64;
            GroupParity {
                axis,
                group: group.to_string(),
                respondents: n,
                accuracy,
                parity_index: accuracy / overall,
            }
        })
        .collect();
    let value = groups.iter().map(|g| (g.parity_index - 1.0).abs()).sum::<f64>() / groups.len() as f64;
    Ok(EquityReport {
        value,
        overall_accuracy: overall,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{AgeGroup, Gender, HouseholdStage};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_groups_on_one_axis() {
        let a = Stratum::new(AgeGroup::From18To34, Gender::Female, HouseholdStage::FamilyWithChildren);
        let b = Stratum::new(AgeGroup::From18To34, Gender::Male, HouseholdStage::FamilyWithChildren);
        // gender groups at 0.6 / 0.4, other axes one group at parity
        let r = equity_dpi_mad(&[0.6, 0.4], &[&a, &b]).unwrap();
        assert_abs_diff_eq!(r.overall_accuracy, 0.5, epsilon = 1e-12);
        let dev: Vec<f64> = r.groups.iter().map(|g| (g.parity_index - 1.0).abs()).collect();
        assert_eq!(dev.len(), 4);
        assert_abs_diff_eq!(dev.iter().sum::<f64>(), 0.4, epsilon = 1e-12);
        // the gender axis on its own: (0.2 + 0.2) / 2
        let gender: Vec<&GroupParity> = r.groups.iter().filter(|g| g.axis == DemographicAxis::Gender).collect();
        let mad = gender.iter().map(|g| (g.parity_index - 1.0).abs()).sum::<f64>() / gender.len() as f64;
        assert_abs_diff_eq!(mad, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn parity_is_zero() {
        let a = Stratum::new(AgeGroup::Over65, Gender::Female, HouseholdStage::OtherUnknown);
        let b = Stratum::new(AgeGroup::From35To49, Gender::Male, HouseholdStage::SingleWithoutChildren);
        assert_eq!(equity_dpi_mad(&[0.7, 0.7], &[&a, &b]).unwrap().value, 0.0);
        assert!(equity_dpi_mad(&[0.0, 0.0], &[&a, &b]).is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::panel::{Background, BackgroundValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "18-34")]
    From18To34,
    #[serde(rename = "35-49")]
    From35To49,
    #[serde(rename = "50-64")]
    From50To64,
    #[serde(rename = "65+")]
    Over65,
    /// Age unknown; such respondents form their own (usually sparse) strata.
    #[serde(rename = "unknown")]
    Unknown,
}

impl AgeGroup {
    pub const KNOWN: [AgeGroup; 4] = [
        AgeGroup::From18To34,
        AgeGroup::From35To49,
        AgeGroup::From50To64,
        AgeGroup::Over65,
    ];

    /// Bucket edges 35, 50 and 65 are inclusive lower bounds. Ages below 18
    /// fall into the youngest bucket.
    pub fn from_age(age: i64) -> Self {
        match age {
            i64::MIN..=34 => AgeGroup::From18To34,
            35..=49 => AgeGroup::From35To49,
            50..=64 => AgeGroup::From50To64,
            _ => AgeGroup::Over65,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::From18To34 => "18-34",
            AgeGroup::From35To49 => "35-49",
            AgeGroup::From50To64 => "50-64",
            AgeGroup::Over65 => "65+",
            AgeGroup::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    /// Other or unknown.
    Other,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HouseholdStage {
    CoupleWithoutChildren,
    FamilyWithChildren,
    SingleWithoutChildren,
    OtherUnknown,
}

impl HouseholdStage {
    pub const ALL: [HouseholdStage; 4] = [
        HouseholdStage::CoupleWithoutChildren,
        HouseholdStage::FamilyWithChildren,
        HouseholdStage::SingleWithoutChildren,
        HouseholdStage::OtherUnknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HouseholdStage::CoupleWithoutChildren => "couple_without_children",
            HouseholdStage::FamilyWithChildren => "family_with_children",
            HouseholdStage::SingleWithoutChildren => "single_without_children",
            HouseholdStage::OtherUnknown => "other_unknown",
        }
    }
}

macro_rules! display_via_as_str {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    )*};
}

display_via_as_str!(AgeGroup, Gender, HouseholdStage);

/// Joint demographic cell: age group x gender x household stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stratum {
    pub age_group: AgeGroup,
    pub gender: Gender,
    pub household_stage: HouseholdStage,
}

impl Stratum {
    pub fn new(age_group: AgeGroup, gender: Gender, household_stage: HouseholdStage) -> Self {
        Self {
            age_group,
            gender,
            household_stage,
        }
    }

    /// Stable text key, also used for lexicographic tie-breaking.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.age_group, self.gender, self.household_stage)
    }

    /// Marginal group labels on the three stratification axes.
    pub fn axis_labels(&self) -> [(DemographicAxis, &'static str); 3] {
        [
            (DemographicAxis::Gender, self.gender.as_str()),
            (DemographicAxis::AgeGroup, self.age_group.as_str()),
            (DemographicAxis::HouseholdStage, self.household_stage.as_str()),
        ]
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for Stratum {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(format!("stratum `{s}` must be age/gender/household"));
        }
        let de = |v: &str| serde_json::Value::String(v.to_string());
        let age_group = serde_json::from_value(de(parts[0])).map_err(|e| e.to_string())?;
        let gender = serde_json::from_value(de(parts[1])).map_err(|e| e.to_string())?;
        let household_stage = serde_json::from_value(de(parts[2])).map_err(|e| e.to_string())?;
        Ok(Self::new(age_group, gender, household_stage))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemographicAxis {
    Gender,
    AgeGroup,
    HouseholdStage,
}

impl DemographicAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            DemographicAxis::Gender => "gender",
            DemographicAxis::AgeGroup => "age_group",
            DemographicAxis::HouseholdStage => "household_stage",
        }
    }
}

display_via_as_str!(DemographicAxis);

/// Derives the sampling stratum from background variables.
///
/// Age comes from `age`. Gender codes 1/2 map to male/female, anything else
/// (including unknown) to other. Household stage uses `partner` and
/// `children_in_household`: any children gives family_with_children, a
/// partner without children a couple, neither a single; an unknown flag
/// gives other_unknown.
pub fn derive_stratum(background: &Background) -> Stratum {
    let age_group = match background.get("age") {
        BackgroundValue::Known(age) => AgeGroup::from_age(age),
        BackgroundValue::Unknown => AgeGroup::Unknown,
    };
    let gender = match background.get("gender") {
        BackgroundValue::Known(1) => Gender::Male,
        BackgroundValue::Known(2) => Gender::Female,
        _ => Gender::Other,
    };
    let household_stage = match (
        background.get("partner").known(),
        background.get("children_in_household").known(),
    ) {
        (Some(_), Some(children)) if children > 0 => HouseholdStage::FamilyWithChildren,
        (Some(partner), Some(_)) if partner != 0 => HouseholdStage::CoupleWithoutChildren,
        (Some(_), Some(_)) => HouseholdStage::SingleWithoutChildren,
        _ => HouseholdStage::OtherUnknown,
    };
    Stratum::new(age_group, gender, household_stage)
}

use std::fmt;

/// Background variable schema: name, description and optional value labels.
///
/// The panel provides 34 sociodemographic variables per respondent. Their
/// exact names are not public, so this list is a representative stand-in with
/// a fixed order; prompts and files always use this order.
pub struct BackgroundVariable {
    pub name: &'static str,
    pub description: &'static str,
    pub labels: &'static [(i64, &'static str)],
}

const YES_NO: &[(i64, &str)] = &[(0, "no"), (1, "yes")];

const INCOME: &[(i64, &str)] = &[
    (1, "no income"),
    (2, "EUR 500 or less"),
    (3, "EUR 501 to 1000"),
    (4, "EUR 1001 to 1500"),
    (5, "EUR 1501 to 2000"),
    (6, "EUR 2001 to 2500"),
    (7, "EUR 2501 to 3000"),
    (8, "EUR 3001 to 3500"),
    (9, "EUR 3501 to 4000"),
    (10, "EUR 4001 to 5000"),
    (11, "more than EUR 5000"),
];

macro_rules! var {
    ($name:expr, $desc:expr) => {
        BackgroundVariable {
            name: $name,
            description: $desc,
            labels: &[],
        }
    };
    ($name:expr, $desc:expr, $labels:expr) => {
        BackgroundVariable {
            name: $name,
            description: $desc,
            labels: $labels,
        }
    };
}

pub const BACKGROUND_VARIABLES: [BackgroundVariable; 34] = [
    var!("gender", "gender", &[(1, "male"), (2, "female"), (3, "other")]),
    var!("birth_year", "year of birth"),
    var!("age", "age in years"),
    var!(
        "position_in_household",
        "position within the household",
        &[
            (1, "household head"),
            (2, "wedded partner"),
            (3, "unwedded partner"),
            (4, "parent"),
            (5, "child living at home"),
            (6, "housemate"),
            (7, "family member or boarder"),
        ]
    ),
    var!("household_size", "number of household members"),
    var!("children_in_household", "number of children living in the household"),
    var!("partner", "lives with a partner", YES_NO),
    var!(
        "civil_status",
        "civil status",
        &[
            (1, "married"),
            (2, "separated"),
            (3, "divorced"),
            (4, "widow or widower"),
            (5, "never married"),
        ]
    ),
    var!(
        "domestic_situation",
        "domestic situation",
        &[
            (1, "single"),
            (2, "cohabiting without children"),
            (3, "cohabiting with children"),
            (4, "single with children"),
            (5, "other"),
        ]
    ),
    var!(
        "dwelling_type",
        "type of dwelling",
        &[(1, "self-owned"), (2, "rental"), (3, "sub-rented"), (4, "cost-free")]
    ),
    var!(
        "urbanicity",
        "urban character of place of residence",
        &[
            (1, "extremely urban"),
            (2, "very urban"),
            (3, "moderately urban"),
            (4, "slightly urban"),
            (5, "not urban"),
        ]
    ),
    var!(
        "primary_occupation",
        "primary occupation",
        &[
            (1, "paid employment"),
            (2, "self-employed"),
            (3, "job seeker"),
            (4, "student"),
            (5, "homemaker"),
            (6, "pensioner"),
            (7, "disabled"),
            (8, "other"),
        ]
    ),
    var!("personal_gross_income", "personal gross monthly income bracket", INCOME),
    var!("personal_net_income", "personal net monthly income bracket", INCOME),
    var!("household_gross_income", "household gross monthly income bracket", INCOME),
    var!("household_net_income", "household net monthly income bracket", INCOME),
    var!(
        "education_cbs",
        "highest level of education (CBS categories)",
        &[
            (1, "primary school"),
            (2, "vmbo"),
            (3, "havo/vwo"),
            (4, "mbo"),
            (5, "hbo"),
            (6, "wo"),
        ]
    ),
    var!("education_diploma", "highest diploma obtained", YES_NO),
    var!(
        "origin",
        "migration background",
        &[
            (0, "Dutch background"),
            (1, "first generation, western"),
            (2, "first generation, non-western"),
            (3, "second generation, western"),
            (4, "second generation, non-western"),
        ]
    ),
    var!("province", "province of residence"),
    var!("age_youngest_child", "age of the youngest child in the household"),
    var!("age_oldest_child", "age of the oldest child in the household"),
    var!("children_total", "number of children ever had"),
    var!("household_head_age", "age of the household head"),
    var!(
        "employment_status",
        "employment status",
        &[(1, "full-time"), (2, "part-time"), (3, "not employed")]
    ),
    var!("sector", "sector of employment"),
    var!("working_hours", "contractual working hours per week"),
    var!("home_ownership", "owns the home", YES_NO),
    var!(
        "religion",
        "religious denomination",
        &[
            (0, "none"),
            (1, "Roman Catholic"),
            (2, "Protestant"),
            (3, "Islam"),
            (4, "other"),
        ]
    ),
    var!(
        "health_self_rating",
        "self-rated health",
        &[(1, "poor"), (2, "moderate"), (3, "good"), (4, "very good"), (5, "excellent")]
    ),
    var!("internet_access", "has internet access at home", YES_NO),
    var!("car_ownership", "household owns a car", YES_NO),
    var!("pet_ownership", "household has pets", YES_NO),
    var!("panel_entry_year", "year of joining the panel"),
];

pub fn variable_position(name: &str) -> Option<usize> {
    BACKGROUND_VARIABLES.iter().position(|v| v.name == name)
}

/// One background value; missing values stay explicit so the block keeps its
/// fixed 34-variable shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackgroundValue {
    Known(i64),
    Unknown,
}

impl BackgroundValue {
    pub fn known(self) -> Option<i64> {
        match self {
            BackgroundValue::Known(v) => Some(v),
            BackgroundValue::Unknown => None,
        }
    }

    pub fn parse(raw: &str) -> Result<Self, String> {
        let raw = raw.trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("unknown") {
            return Ok(BackgroundValue::Unknown);
        }
        raw.parse::<i64>()
            .map(BackgroundValue::Known)
            .map_err(|_| format!("`{raw}` is neither an integer code nor `unknown`"))
    }
}

impl fmt::Display for BackgroundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackgroundValue::Known(v) => write!(f, "{v}"),
            BackgroundValue::Unknown => f.write_str("unknown"),
        }
    }
}

/// The 34 background values of a respondent, in [`BACKGROUND_VARIABLES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    values: [BackgroundValue; 34],
}

impl Background {
    pub fn unknown() -> Self {
        Self {
            values: [BackgroundValue::Unknown; 34],
        }
    }

    pub fn from_values(values: [BackgroundValue; 34]) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[BackgroundValue; 34] {
        &self.values
    }

    pub fn get(&self, name: &str) -> BackgroundValue {
        variable_position(name)
            .map(|i| self.values[i])
            .unwrap_or(BackgroundValue::Unknown)
    }

    /// # Panics
    /// If `name` is not one of the 34 background variables.
    pub fn set(&mut self, name: &str, value: BackgroundValue) {
        let i = variable_position(name)
            .unwrap_or_else(|| panic!("unknown background variable `{name}`"));
        self.values[i] = value;
    }

    /// True when at least one variable is known.
    pub fn is_non_empty(&self) -> bool {
        self.values.iter().any(|v| matches!(v, BackgroundValue::Known(_)))
    }

    /// `name: value-label` lines in schema order; unknowns render as "unknown".
    pub fn render(&self) -> String {
        BACKGROUND_VARIABLES
            .iter()
            .zip(self.values.iter())
            .map(|(var, value)| {
                let shown = match value {
                    BackgroundValue::Unknown => "unknown".to_string(),
                    BackgroundValue::Known(code) => var
                        .labels
                        .iter()
                        .find(|(c, _)| c == code)
                        .map(|(_, l)| l.to_string())
                        .unwrap_or_else(|| code.to_string()),
                };
                format!("{}: {}", var.name, shown)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

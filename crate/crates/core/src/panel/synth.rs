//! Deterministic synthetic panel generator.
//!
//! Produces a panel with the same shape as the real data (respondents with 34
//! background variables, core and single-wave question catalogs, long-format
//! answers over several years) together with the ground truth used by test
//! oracles: which respondents are eligible for each task and the per-question
//! answer distributions the answers were drawn from.
//!
//! Config files are TOML. Every key is optional except `respondents`:
//!
//! ```toml
//! respondents = 200
//! first_year = 2019          # first fielding year
//! cutoff_year = 2023         # temporal cutoff
//! min_categories = 2         # category count range for categorical questions
//! max_categories = 5
//! numeric_share = 0.0        # share of numeric_range questions (bounds 0..10)
//! prior_coverage = [0.5, 1.0]   # per-respondent answered share of prior questions
//! target_coverage = [0.5, 1.0]  # per-respondent answered share of target questions
//! domains = ["Health", "Politics and Values"]
//!
//! [core]
//! studies = 3
//! questions_per_study = 10
//!
//! [single_wave]
//! studies_before_cutoff = 4
//! studies_after_cutoff = 3
//! questions_per_study = 8
//!
//! [answers]
//! kind = "dirichlet"        # or "uniform"
//! concentration = 0.7
//! stratum_signal = 0.5      # probability an answer follows the stratum's preferred category
//!
//! [ineligible]
//! empty_background = 0.02   # per-respondent probabilities of each defect
//! no_prior = 0.03
//! no_targets = 0.03
//!
//! [[strata]]                # shares must sum to 1 (within 1e-9)
//! age_group = "35-49"
//! gender = "female"
//! household_stage = "family_with_children"
//! share = 1.0
//! ```
//!
//! When `strata` is omitted the 24 age x gender x household cells are
//! weighted by a fixed reference population.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::background::{BackgroundValue, BACKGROUND_VARIABLES};
use super::{
    AnswerCode, AnswerRecord, Background, Catalog, Category, Panel, PanelError, QuestionMeta,
    Representation, Respondent, RespondentId, StudyKey, StudyType,
};
use crate::sampling::{AgeGroup, Gender, HouseholdStage, Stratum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub respondents: usize,
    #[serde(default = "defaults::first_year")]
    pub first_year: i32,
    #[serde(default = "defaults::cutoff_year")]
    pub cutoff_year: i32,
    #[serde(default = "defaults::min_categories")]
    pub min_categories: usize,
    #[serde(default = "defaults::max_categories")]
    pub max_categories: usize,
    #[serde(default)]
    pub numeric_share: f64,
    #[serde(default = "defaults::coverage")]
    pub prior_coverage: [f64; 2],
    #[serde(default = "defaults::coverage")]
    pub target_coverage: [f64; 2],
    #[serde(default = "defaults::domains")]
    pub domains: Vec<String>,
    #[serde(default)]
    pub core: CoreCatalog,
    #[serde(default)]
    pub single_wave: WaveCatalog,
    #[serde(default)]
    pub answers: AnswerModel,
    #[serde(default)]
    pub ineligible: IneligibleShares,
    #[serde(default = "default_strata")]
    pub strata: Vec<StratumShare>,
}

mod defaults {
    pub fn first_year() -> i32 {
        2019
    }
    pub fn cutoff_year() -> i32 {
        2023
    }
    pub fn min_categories() -> usize {
        2
    }
    pub fn max_categories() -> usize {
        5
    }
    pub fn coverage() -> [f64; 2] {
        [0.5, 1.0]
    }
    pub fn domains() -> Vec<String> {
        [
            "Health",
            "Family and Household",
            "Work and Schooling",
            "Politics and Values",
            "Economic Situation",
            "Leisure and Social Integration",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreCatalog {
    pub studies: usize,
    pub questions_per_study: usize,
}

impl Default for CoreCatalog {
    fn default() -> Self {
        Self {
            studies: 3,
            questions_per_study: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveCatalog {
    pub studies_before_cutoff: usize,
    pub studies_after_cutoff: usize,
    pub questions_per_study: usize,
}

impl Default for WaveCatalog {
    fn default() -> Self {
        Self {
            studies_before_cutoff: 4,
            studies_after_cutoff: 3,
            questions_per_study: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Uniform,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerModel {
    pub kind: AnswerKind,
    #[serde(default = "AnswerModel::default_concentration")]
    pub concentration: f64,
    #[serde(default)]
    pub stratum_signal: f64,
}

impl AnswerModel {
    fn default_concentration() -> f64 {
        0.7
    }
}

impl Default for AnswerModel {
    fn default() -> Self {
        Self {
            kind: AnswerKind::Dirichlet,
            concentration: Self::default_concentration(),
            stratum_signal: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IneligibleShares {
    #[serde(default)]
    pub empty_background: f64,
    #[serde(default)]
    pub no_prior: f64,
    #[serde(default)]
    pub no_targets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumShare {
    pub age_group: AgeGroup,
    pub gender: Gender,
    pub household_stage: HouseholdStage,
    pub share: f64,
}

/// Reference cell sizes (age x gender x household, couple/family/single order).
const REFERENCE_CELLS: [[usize; 3]; 8] = [
    [159, 338, 146],
    [98, 245, 104],
    [88, 419, 128],
    [104, 298, 113],
    [362, 327, 169],
    [294, 297, 174],
    [495, 36, 375],
    [642, 56, 254],
];

fn default_strata() -> Vec<StratumShare> {
    let total: usize = REFERENCE_CELLS.iter().flatten().sum();
    let stages = [
        HouseholdStage::CoupleWithoutChildren,
        HouseholdStage::FamilyWithChildren,
        HouseholdStage::SingleWithoutChildren,
    ];
    let mut out = Vec::new();
    for (row, cells) in REFERENCE_CELLS.iter().enumerate() {
        let age_group = AgeGroup::KNOWN[row / 2];
        let gender = if row % 2 == 0 { Gender::Female } else { Gender::Male };
        for (stage, &count) in stages.iter().zip(cells) {
            out.push(StratumShare {
                age_group,
                gender,
                household_stage: *stage,
                share: count as f64 / total as f64,
            });
        }
    }
    out
}

impl SynthConfig {
    pub fn with_respondents(respondents: usize) -> Self {
        Self {
            respondents,
            first_year: defaults::first_year(),
            cutoff_year: defaults::cutoff_year(),
            min_categories: defaults::min_categories(),
            max_categories: defaults::max_categories(),
            numeric_share: 0.0,
            prior_coverage: defaults::coverage(),
            target_coverage: defaults::coverage(),
            domains: defaults::domains(),
            core: CoreCatalog::default(),
            single_wave: WaveCatalog::default(),
            answers: AnswerModel::default(),
            ineligible: IneligibleShares::default(),
            strata: default_strata(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PanelError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PanelError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let err = |m: String| Err(PanelError::Config(m));
        if self.respondents == 0 {
            return err("respondents must be positive".into());
        }
        if self.first_year >= self.cutoff_year {
            return err("first_year must precede cutoff_year".into());
        }
        if self.min_categories < 2 || self.min_categories > self.max_categories {
            return err("category range must satisfy 2 <= min_categories <= max_categories".into());
        }
        if !(0.0..=1.0).contains(&self.numeric_share) {
            return err("numeric_share must lie in [0, 1]".into());
        }
        for (name, [lo, hi]) in [("prior_coverage", self.prior_coverage), ("target_coverage", self.target_coverage)] {
            if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                return err(format!("{name} must satisfy 0 < lo <= hi <= 1"));
            }
        }
        if self.domains.is_empty() {
            return err("at least one domain is required".into());
        }
        if self.core.studies == 0 || self.core.questions_per_study == 0 {
            return err("core catalog must have studies and questions".into());
        }
        let w = &self.single_wave;
        if w.studies_before_cutoff == 0 || w.studies_after_cutoff == 0 || w.questions_per_study == 0 {
            return err("single-wave catalog needs studies on both sides of the cutoff".into());
        }
        if self.answers.kind == AnswerKind::Dirichlet && self.answers.concentration <= 0.0 {
            return err("dirichlet concentration must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.answers.stratum_signal) {
            return err("stratum_signal must lie in [0, 1]".into());
        }
        let i = &self.ineligible;
        for (name, p) in [("empty_background", i.empty_background), ("no_prior", i.no_prior), ("no_targets", i.no_targets)] {
            if !(0.0..1.0).contains(&p) {
                return err(format!("ineligible.{name} must lie in [0, 1)"));
            }
        }
        if self.strata.is_empty() {
            return err("strata must not be empty".into());
        }
        if self.strata.iter().any(|s| s.share.is_nan() || s.share < 0.0) {
            return err("stratum shares must be non-negative".into());
        }
        let total: f64 = self.strata.iter().map(|s| s.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return err(format!("stratum shares sum to {total}, expected 1"));
        }
        Ok(())
    }
}

/// Ground truth recorded while generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub eligible_core: BTreeSet<RespondentId>,
    pub eligible_single_wave: BTreeSet<RespondentId>,
    /// Per variable: (answer, probability) of the population-level distribution
    /// answers were drawn from when no stratum signal applies.
    pub distributions: BTreeMap<String, Vec<(AnswerCode, f64)>>,
    pub strata: BTreeMap<RespondentId, Stratum>,
}

impl SynthTruth {
    pub fn eligible(&self, task: super::Task) -> &BTreeSet<RespondentId> {
        match task {
            super::Task::CorePrediction => &self.eligible_core,
            super::Task::SingleWavePrediction => &self.eligible_single_wave,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: Panel,
    pub truth: SynthTruth,
}

const TOPICS: &[&[&str]] = &[
    &["health", "sleep", "exercise", "doctor visits", "smoking", "diet"],
    &["family", "children", "partner", "household chores", "parents", "childcare"],
    &["work", "job security", "colleagues", "income", "education", "training"],
    &["politics", "government", "parliament", "immigration", "democracy", "elections"],
    &["finances", "savings", "housing costs", "debt", "pension", "mortgage"],
    &["leisure", "volunteering", "sports", "friends", "holidays", "neighbors"],
];

const STEMS: &[(&str, &str, Representation)] = &[
    ("How satisfied are you with your", "", Representation::Ordinal),
    ("How important is", "to you personally", Representation::Ordinal),
    ("How often do you worry about", "", Representation::Ordinal),
    ("Which statement best describes your view on", "", Representation::Nominal),
    ("Did you change anything regarding", "in the past year", Representation::Binary),
    ("It is true that I am concerned about", "", Representation::TrueFalse),
];

fn category_labels(representation: Representation, n: usize) -> Vec<String> {
    match representation {
        Representation::Binary => vec!["no".into(), "yes".into()],
        Representation::TrueFalse => vec!["false".into(), "true".into()],
        Representation::Ordinal => {
            let scale = [
                "not at all",
                "slightly",
                "somewhat",
                "moderately",
                "very much",
                "extremely",
                "completely",
            ];
            (0..n).map(|i| scale[i * (scale.len() - 1) / (n - 1).max(1)].to_string()).collect()
        }
        _ => (0..n).map(|i| format!("option {}", (b'a' + i as u8) as char)).collect(),
    }
}

struct Draft {
    meta: QuestionMeta,
    /// Support in code order.
    support: Vec<AnswerCode>,
    base: Vec<f64>,
    year: Option<i32>,
}

fn sample_distribution(model: &AnswerModel, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model.kind {
        AnswerKind::Uniform => vec![1.0 / k as f64; k],
        AnswerKind::Dirichlet => {
            let gamma = Gamma::new(model.concentration, 1.0).expect("validated concentration");
            let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng).max(1e-12)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|d| d / total).collect()
        }
    }
}

fn draw_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn build_question(
    config: &SynthConfig,
    study_key: StudyKey,
    domain_idx: usize,
    q: usize,
    year: Option<i32>,
    rng: &mut ChaCha8Rng,
) -> Draft {
    let topics = TOPICS[domain_idx % TOPICS.len()];
    let topic = topics[q % topics.len()];
    let numeric = rng.gen::<f64>() < config.numeric_share;
    let (stem, tail, mut representation) = STEMS[(q / topics.len() + domain_idx + q) % STEMS.len()];
    let label = if numeric {
        representation = Representation::NumericRange;
        format!("On a scale from 0 to 10, how would you rate your {topic}?")
    } else if tail.is_empty() {
        format!("{stem} {topic}?")
    } else {
        format!("{stem} {topic} {tail}?")
    };
    let n_categories = match representation {
        Representation::Binary | Representation::TrueFalse => 2,
        Representation::NumericRange => 11,
        _ => rng.gen_range(config.min_categories.max(3).min(config.max_categories)..=config.max_categories),
    };
    let (categories, support, numeric_bounds) = if representation == Representation::NumericRange {
        let support: Vec<AnswerCode> = (0..=10).map(|v| AnswerCode::Numeric(v as f64)).collect();
        (Vec::new(), support, Some((0.0, 10.0)))
    } else {
        let cats: Vec<Category> = category_labels(representation, n_categories)
            .into_iter()
            .enumerate()
            .map(|(i, label)| Category {
                code: if matches!(representation, Representation::Binary | Representation::TrueFalse) {
                    i as i64
                } else {
                    i as i64 + 1
                },
                label,
            })
            .collect();
        let support = cats.iter().map(|c| AnswerCode::Category(c.code)).collect();
        (cats, support, None)
    };
    let base = sample_distribution(&config.answers, support.len(), rng);
    let variable_name = format!("{}_{:03}", study_key.id, q + 1);
    let question_type = if matches!(representation, Representation::Binary | Representation::TrueFalse) {
        "behavior"
    } else {
        "attitude"
    };
    Draft {
        meta: QuestionMeta {
            variable_name,
            label,
            representation,
            question_type: question_type.to_string(),
            categories,
            numeric_bounds,
            study_key,
            domain: config.domains[domain_idx % config.domains.len()].clone(),
        },
        support,
        base,
        year,
    }
}

#[derive(Clone, Copy, Default)]
struct Defects {
    empty_background: bool,
    no_core_prior: bool,
    no_wave_prior: bool,
    no_core_targets: bool,
    no_wave_targets: bool,
}

fn synth_background(stratum: &Stratum, cutoff_year: i32, rng: &mut ChaCha8Rng) -> Background {
    let mut b = Background::unknown();
    let known = BackgroundValue::Known;
    let age = match stratum.age_group {
        AgeGroup::From18To34 => rng.gen_range(18..=34),
        AgeGroup::From35To49 => rng.gen_range(35..=49),
        AgeGroup::From50To64 => rng.gen_range(50..=64),
        AgeGroup::Over65 | AgeGroup::Unknown => rng.gen_range(65..=90),
    };
    // Fill every variable with a plausible value first, then set the
    // stratum-defining ones.
    for var in BACKGROUND_VARIABLES.iter() {
        let value = if var.labels.is_empty() {
            rng.gen_range(0..=12)
        } else {
            var.labels[rng.gen_range(0..var.labels.len())].0
        };
        b.set(var.name, known(value));
    }
    b.set("age", known(age));
    b.set("birth_year", known(cutoff_year as i64 - age));
    b.set("household_head_age", known(age + rng.gen_range(-3..=3)));
    b.set("panel_entry_year", known(rng.gen_range(2008..=cutoff_year as i64 - 1)));
    b.set(
        "gender",
        match stratum.gender {
            Gender::Male => known(1),
            Gender::Female => known(2),
            Gender::Other => known(3),
        },
    );
    let (partner, children) = match stratum.household_stage {
        HouseholdStage::FamilyWithChildren => (known(rng.gen_range(0..=1)), known(rng.gen_range(1..=3))),
        HouseholdStage::CoupleWithoutChildren => (known(1), known(0)),
        HouseholdStage::SingleWithoutChildren => (known(0), known(0)),
        HouseholdStage::OtherUnknown => (BackgroundValue::Unknown, BackgroundValue::Unknown),
    };
    b.set("partner", partner);
    b.set("children_in_household", children);
    if stratum.age_group == AgeGroup::Unknown {
        b.set("age", BackgroundValue::Unknown);
        b.set("birth_year", BackgroundValue::Unknown);
    }
    b
}

/// Picks `ceil(frac * n)` distinct indices (at least one), frac drawn from `range`.
fn coverage_subset(n: usize, range: [f64; 2], rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let frac = if range[0] == range[1] { range[0] } else { rng.gen_range(range[0]..=range[1]) };
    let k = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn generate_synthetic_panel(config: &SynthConfig, seed: u64) -> Result<SyntheticPanel, PanelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Catalog: core studies, then pre-cutoff and post-cutoff single-wave studies.
    let mut drafts: Vec<Draft> = Vec::new();
    for s in 0..config.core.studies {
        let key = StudyKey::core(format!("c{:02}", s + 1));
        for q in 0..config.core.questions_per_study {
            drafts.push(build_question(config, key.clone(), s, q, None, &mut rng));
        }
    }
    let span = (config.cutoff_year - config.first_year) as usize;
    let w = &config.single_wave;
    for s in 0..(w.studies_before_cutoff + w.studies_after_cutoff) {
        let year = if s < w.studies_before_cutoff {
            config.first_year + (s % span) as i32
        } else {
            config.cutoff_year + ((s - w.studies_before_cutoff) % 2) as i32
        };
        let key = StudyKey::single_wave(format!("w{:03}", s + 1));
        for q in 0..w.questions_per_study {
            drafts.push(build_question(config, key.clone(), s + 1, q, Some(year), &mut rng));
        }
    }

    // Strata preferences: each stratum favors one support index per question.
    let strata_cum: Vec<f64> = config
        .strata
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.share;
            Some(*acc)
        })
        .collect();

    let mut respondents = Vec::with_capacity(config.respondents);
    let mut answers = Vec::new();
    let mut truth = SynthTruth {
        eligible_core: BTreeSet::new(),
        eligible_single_wave: BTreeSet::new(),
        distributions: drafts
            .iter()
            .map(|d| {
                (
                    d.meta.variable_name.clone(),
                    d.support.iter().copied().zip(d.base.iter().copied()).collect(),
                )
            })
            .collect(),
        strata: BTreeMap::new(),
    };

    let core_idx: Vec<usize> = (0..drafts.len()).filter(|&i| drafts[i].meta.study_key.kind == StudyType::Core).collect();
    let wave_pre: Vec<usize> = (0..drafts.len())
        .filter(|&i| drafts[i].year.is_some_and(|y| y < config.cutoff_year))
        .collect();
    let wave_post: Vec<usize> = (0..drafts.len())
        .filter(|&i| drafts[i].year.is_some_and(|y| y >= config.cutoff_year))
        .collect();

    for r in 0..config.respondents {
        let id = RespondentId::new(format!("R{:05}", r + 1));
        let u: f64 = rng.gen();
        let s_idx = strata_cum.iter().position(|&c| u < c).unwrap_or(config.strata.len() - 1);
        let share = &config.strata[s_idx];
        let stratum = Stratum::new(share.age_group, share.gender, share.household_stage);

        let ie = &config.ineligible;
        let defects = Defects {
            empty_background: rng.gen::<f64>() < ie.empty_background,
            no_core_prior: rng.gen::<f64>() < ie.no_prior,
            no_wave_prior: rng.gen::<f64>() < ie.no_prior,
            no_core_targets: rng.gen::<f64>() < ie.no_targets,
            no_wave_targets: rng.gen::<f64>() < ie.no_targets,
        };

        let background = if defects.empty_background {
            Background::unknown()
        } else {
            synth_background(&stratum, config.cutoff_year, &mut rng)
        };

        let answer = |draft: &Draft, rng: &mut ChaCha8Rng| -> AnswerCode {
            let k = draft.support.len();
            let i = if rng.gen::<f64>() < config.answers.stratum_signal {
                // Stratum-preferred category, shifted per question.
                (s_idx + preference_offset(&draft.meta.variable_name)) % k
            } else {
                draw_index(&draft.base, rng)
            };
            draft.support[i]
        };

        let push = |year: i32, draft: &Draft, rng: &mut ChaCha8Rng, out: &mut Vec<AnswerRecord>| {
            out.push(AnswerRecord {
                respondent_id: id.clone(),
                variable_name: draft.meta.variable_name.clone(),
                year,
                answer: answer(draft, rng),
            });
        };

        // Core history: one wave per year before the cutoff.
        if !defects.no_core_prior {
            for year in config.first_year..config.cutoff_year {
                for &i in &coverage_subset(core_idx.len(), config.prior_coverage, &mut rng) {
                    push(year, &drafts[core_idx[i]], &mut rng, &mut answers);
                }
            }
        }
        if !defects.no_wave_prior {
            for &i in &coverage_subset(wave_pre.len(), config.prior_coverage, &mut rng) {
                let d = &drafts[wave_pre[i]];
                push(d.year.expect("wave year"), d, &mut rng, &mut answers);
            }
        }
        if !defects.no_core_targets {
            for &i in &coverage_subset(core_idx.len(), config.target_coverage, &mut rng) {
                push(config.cutoff_year, &drafts[core_idx[i]], &mut rng, &mut answers);
            }
        }
        if !defects.no_wave_targets {
            for &i in &coverage_subset(wave_post.len(), config.target_coverage, &mut rng) {
                let d = &drafts[wave_post[i]];
                push(d.year.expect("wave year"), d, &mut rng, &mut answers);
            }
        }

        if !defects.empty_background && !defects.no_wave_prior && !defects.no_core_targets {
            truth.eligible_core.insert(id.clone());
        }
        if !defects.empty_background && !defects.no_core_prior && !defects.no_wave_targets {
            truth.eligible_single_wave.insert(id.clone());
        }
        truth.strata.insert(id.clone(), stratum);
        respondents.push(Respondent { id, background });
    }

    let catalog = Catalog::new(drafts.into_iter().map(|d| d.meta).collect())?;
    let panel = Panel::new(respondents, catalog, answers)?;
    Ok(SyntheticPanel { panel, truth })
}

/// Rotates stratum preferences across questions.
fn preference_offset(variable: &str) -> usize {
    variable.bytes().map(usize::from).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_must_sum_to_one() {
        let mut cfg = SynthConfig::with_respondents(10);
        cfg.strata = vec![
            StratumShare {
                age_group: AgeGroup::From18To34,
                gender: Gender::Male,
                household_stage: HouseholdStage::FamilyWithChildren,
                share: 0.5,
            },
            StratumShare {
                age_group: AgeGroup::Over65,
                gender: Gender::Female,
                household_stage: HouseholdStage::FamilyWithChildren,
                share: 0.6,
            },
        ];
        assert!(matches!(generate_synthetic_panel(&cfg, 1), Err(PanelError::Config(_))));
    }

    #[test]
    fn default_strata_sum_to_one() {
        let cfg = SynthConfig::with_respondents(10);
        assert_eq!(cfg.strata.len(), 24);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_rejects_unknown_keys() {
        assert!(SynthConfig::from_toml("respondents = 5\nfoo = 1\n").is_err());
        let cfg = SynthConfig::from_toml("respondents = 5\n[answers]\nkind = \"uniform\"\n").unwrap();
        assert_eq!(cfg.answers.kind, AnswerKind::Uniform);
        assert_eq!(cfg.respondents, 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::with_respondents(40);
        let a = generate_synthetic_panel(&cfg, 7).unwrap();
        let b = generate_synthetic_panel(&cfg, 7).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.truth, b.truth);
        let c = generate_synthetic_panel(&cfg, 8).unwrap();
        assert_ne!(a.panel.answers(), c.panel.answers());
    }
}

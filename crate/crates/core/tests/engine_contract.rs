//! Validation pipeline, retry caps, profile caching, batching and the
//! baseline runner, exercised through the public API.
//!
//! Checks are plain functions, wrapped as tests at the bottom, so the
//! acceptance harness can run the same code.

use std::collections::BTreeMap;
use std::sync::Arc;

use persona_core::engine::mock::{ProfileMockBackend, ScriptedBackend, UniformBackend};
use persona_core::engine::{
    balanced_sizes, partition_subbatches, predict_subbatch, run_baseline, validate_response, BackendError, FailureStage, Unit,
};
use persona_core::metrics::weighted_f1;
use persona_core::panel::{AnswerCode, AnswerRecord, Catalog, Category, QuestionMeta, Representation, RespondentId, StudyKey, StudyType};
use persona_core::persona::{render_baseline_prompt, ProfileCache, ProfileCacheKey, PROFILE_ATTEMPTS, PROFILE_HEADINGS};
use persona_core::engine::PREDICTION_ATTEMPTS;

fn ordinal(name: &str, k: i64, study: &str) -> QuestionMeta {
    QuestionMeta {
        variable_name: name.into(),
        label: format!("how often {name}"),
        representation: Representation::Ordinal,
        question_type: "behavior".into(),
        categories: (1..=k).map(|code| Category { code, label: format!("level {code}") }).collect(),
        numeric_bounds: None,
        study_key: StudyKey::core(study),
        domain: "d".into(),
    }
}

fn catalog() -> Catalog {
    let mut numeric = ordinal("n1", 0, "s");
    numeric.representation = Representation::NumericRange;
    numeric.numeric_bounds = Some((0.0, 10.0));
    Catalog::new(vec![ordinal("q1", 5, "s"), ordinal("q2", 5, "s"), numeric]).unwrap()
}

fn expected() -> Vec<String> {
    vec!["q1".into(), "q2".into(), "n1".into()]
}

const VALID: &str = r#"{"predictions":[{"variable_name":"q1","predicted_answer":2},{"variable_name":"q2","predicted_answer":5},{"variable_name":"n1","predicted_answer":7.5}]}"#;

pub fn crafted_suite_hits_each_stage_exactly_once() {
    let cat = catalog();
    let suite = [
        "Sure! Here are my answers: q1 = 2",
        r#"{"predictions":[{"variable_name":"q1","predicted_answer":2}],"notes":"extra"}"#,
        r#"{"predictions":[{"variable_name":"q1","predicted_answer":2},{"variable_name":"q2","predicted_answer":5}]}"#,
        r#"{"predictions":[{"variable_name":"q1","predicted_answer":9},{"variable_name":"q2","predicted_answer":5},{"variable_name":"n1","predicted_answer":7.5}]}"#,
    ];
    let mut hits: BTreeMap<FailureStage, usize> = BTreeMap::new();
    for (i, raw) in suite.iter().enumerate() {
        let outcome = validate_response(raw, &expected(), &cat);
        let (stage, _) = outcome.failure.clone().expect("crafted response must fail");
        // stages short-circuit: exactly the earlier stages passed
        assert_eq!(outcome.passed, FailureStage::VALIDATION[..i].to_vec());
        assert!(outcome.predictions.is_none());
        *hits.entry(stage).or_default() += 1;
    }
    let want: BTreeMap<FailureStage, usize> = FailureStage::VALIDATION.iter().map(|s| (*s, 1)).collect();
    assert_eq!(hits, want);

    let ok = validate_response(&format!("```json\n{VALID}\n```"), &expected(), &cat);
    assert!(ok.is_ok());
    assert_eq!(ok.passed, FailureStage::VALIDATION.to_vec());
    assert_eq!(ok.predictions.unwrap()["n1"], AnswerCode::Numeric(7.5));
}

pub fn coverage_rejects_additions_and_duplicates() {
    let cat = catalog();
    let extra = r#"{"predictions":[{"variable_name":"q1","predicted_answer":2},{"variable_name":"q2","predicted_answer":5},{"variable_name":"n1","predicted_answer":1},{"variable_name":"zz","predicted_answer":1}]}"#;
    let dup = r#"{"predictions":[{"variable_name":"q1","predicted_answer":2},{"variable_name":"q1","predicted_answer":3},{"variable_name":"q2","predicted_answer":5},{"variable_name":"n1","predicted_answer":1}]}"#;
    for raw in [extra, dup] {
        assert_eq!(validate_response(raw, &expected(), &cat).failure.unwrap().0, FailureStage::Coverage);
    }
    let out_of_bounds = VALID.replace("7.5", "10.5");
    assert_eq!(validate_response(&out_of_bounds, &expected(), &cat).failure.unwrap().0, FailureStage::TypeRange);
}

fn batch(cat: &Catalog) -> Vec<&QuestionMeta> {
    expected().iter().map(|v| cat.get(v).unwrap()).collect()
}

pub fn success_after_three_failures_uses_four_attempts() {
    let cat = catalog();
    let questions = batch(&cat);
    let prompt = render_baseline_prompt(&questions);
    let backend = ScriptedBackend::new(vec![
        Ok("not json".into()),
        Err(BackendError::Transport("connection reset".into())),
        Ok(r#"{"predictions":[]}"#.into()),
        Ok(VALID.into()),
        Ok("never reached".into()),
    ]);
    let unit = Unit::Respondent("r1".into());
    let records = predict_subbatch(&prompt, &unit, &questions, &cat, &backend, PREDICTION_ATTEMPTS);
    assert_eq!(PREDICTION_ATTEMPTS, 4);
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.attempts == 4 && r.predicted.is_some() && r.failure_stage.is_none()));

    let calls = backend.calls();
    assert_eq!(calls.len(), 4, "no call after the successful attempt");
    assert_eq!(calls.iter().map(|c| c.attempt).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!(calls[0].user, prompt.user);
    // each retry carries the rejected response back to the model
    assert!(calls[1].user.contains("not json"));
    assert!(calls[3].user.contains(r#"{"predictions":[]}"#));
}

pub fn exhausted_subbatch_becomes_missing_and_scores_as_wrong() {
    let cat = catalog();
    let questions = batch(&cat);
    let prompt = render_baseline_prompt(&questions);
    let bad = VALID.replace(":2}", ":9}");
    let backend = ScriptedBackend::new(vec![Ok(bad)]);
    let unit = Unit::Respondent("r1".into());
    let records = predict_subbatch(&prompt, &unit, &questions, &cat, &backend, PREDICTION_ATTEMPTS);
    assert_eq!(backend.calls().len(), 4);
    for r in &records {
        assert_eq!(r.predicted, None);
        assert_eq!(r.attempts, 4);
        assert_eq!(r.failure_stage, Some(FailureStage::TypeRange));
    }

    // The same truth scored against a perfect and an exhausted run.
    let truth = vec![AnswerCode::Category(2), AnswerCode::Category(5)];
    assert_eq!(weighted_f1(&truth, &[Some(truth[0]), Some(truth[1])]), 1.0);
    let missing: Vec<Option<AnswerCode>> = records.iter().take(2).map(|r| r.predicted).collect();
    assert_eq!(weighted_f1(&truth, &missing), 0.0);
}

fn history() -> Vec<AnswerRecord> {
    (0..5)
        .map(|i| AnswerRecord {
            respondent_id: RespondentId::new("r1"),
            variable_name: if i % 2 == 0 { "q1".into() } else { "q2".into() },
            year: 2015 + i,
            answer: AnswerCode::Category(1 + i as i64 % 5),
        })
        .collect()
}

fn key(model: &str) -> ProfileCacheKey {
    ProfileCacheKey {
        respondent_id: "r1".into(),
        source: "panel".into(),
        cutoff_year: 2023,
        input_scope: StudyType::SingleWave,
        model: model.into(),
    }
}

pub fn profile_generation_caps_at_three_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog();
    assert_eq!(PROFILE_ATTEMPTS, 3);

    let missing_heading = PROFILE_HEADINGS[..6].join("\nsome text\n");
    let always_bad = ScriptedBackend::new(vec![Ok(missing_heading.clone())]);
    let cache = ProfileCache::new(dir.path());
    assert!(cache.get_or_generate(&key("bad"), &history(), &cat, &always_bad).is_err());
    assert_eq!(always_bad.calls().len(), 3);
    assert!(!cache.path_for(&key("bad")).exists());

    let good = PROFILE_HEADINGS.join("\nsteady and consistent\n");
    let third_time = ScriptedBackend::new(vec![
        Ok(missing_heading),
        Err(BackendError::Transport("timeout".into())),
        Ok(good.clone()),
    ]);
    let profile = cache.get_or_generate(&key("flaky"), &history(), &cat, &third_time).unwrap();
    assert_eq!(third_time.calls().len(), 3);
    assert_eq!(profile.text, good);
    assert_eq!(std::fs::read_to_string(cache.path_for(&key("flaky"))).unwrap(), good);
}

pub fn concurrent_profile_requests_make_one_call() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog();
    let cache = Arc::new(ProfileCache::new(dir.path()));
    let backend = ProfileMockBackend::new();
    let texts: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..16)
            .map(|_| s.spawn(|| cache.get_or_generate(&key("m"), &history(), &cat, &backend).unwrap().text))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(backend.call_count(), 1);
    assert!(texts.iter().all(|t| *t == texts[0]));
    assert_eq!(std::fs::read_to_string(cache.path_for(&key("m"))).unwrap(), texts[0]);
}

pub fn batching_equation_holds_exhaustively() {
    let started = std::time::Instant::now();
    let pool: Vec<QuestionMeta> = (0..200).map(|i| ordinal(&format!("v{i}"), 2, "s")).collect();
    for n in 1..=200usize {
        let questions: Vec<&QuestionMeta> = pool[..n].iter().collect();
        for b in 1..=40usize {
            let plans = partition_subbatches(&questions, b);
            assert_eq!(plans.len(), 1);
            let plan = &plans[0];
            let big_b = n.div_ceil(b);
            let n_batch = n.div_ceil(big_b);
            assert_eq!((plan.n_questions, plan.n_batches, plan.realized_size), (n, big_b, n_batch));
            assert_eq!(plan.batches.len(), big_b);
            assert!(n_batch <= b);
            assert!(plan.batches.iter().all(|c| !c.is_empty() && c.len() <= n_batch));
            let flat: Vec<&str> = plan.batches.iter().flatten().map(|q| q.variable_name.as_str()).collect();
            let want: Vec<&str> = questions.iter().map(|q| q.variable_name.as_str()).collect();
            assert_eq!(flat, want, "N={n} b={b}");
            assert_eq!(balanced_sizes(n, big_b).iter().sum::<usize>(), n);
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

pub fn batching_groups_by_study() {
    let qs = [ordinal("a1", 2, "x"), ordinal("b1", 2, "y"), ordinal("a2", 2, "x"), ordinal("b2", 2, "y"), ordinal("a3", 2, "x")];
    let refs: Vec<&QuestionMeta> = qs.iter().collect();
    let plans = partition_subbatches(&refs, 2);
    let names: Vec<Vec<Vec<&str>>> = plans
        .iter()
        .map(|p| p.batches.iter().map(|b| b.iter().map(|q| q.variable_name.as_str()).collect()).collect())
        .collect();
    assert_eq!(names, vec![vec![vec!["a1", "a2"], vec!["a3"]], vec![vec!["b1", "b2"]]]);
}

pub fn uniform_baseline_is_close_to_uniform() {
    let questions: Vec<QuestionMeta> = (0..5).map(|i| ordinal(&format!("u{i}"), 4, "s")).collect();
    let cat = Arc::new(Catalog::new(questions.clone()).unwrap());
    let backend = UniformBackend::new(cat.clone(), 11);
    let refs: Vec<&QuestionMeta> = questions.iter().collect();
    let set = run_baseline(&refs, 500, &backend, &cat, 2, PREDICTION_ATTEMPTS, 4).unwrap();
    assert_eq!(set.records.len(), 2500);
    for q in &questions {
        let answers: Vec<AnswerCode> =
            set.records.iter().filter(|r| r.variable_name == q.variable_name).map(|r| r.predicted.unwrap()).collect();
        assert_eq!(answers.len(), 500);
        let tv: f64 = (1..=4)
            .map(|c| (answers.iter().filter(|a| **a == AnswerCode::Category(c)).count() as f64 / 500.0 - 0.25).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.06, "{}: TV {tv}", q.variable_name);
    }

    let once = run_baseline(&refs, 1, &backend, &cat, 2, PREDICTION_ATTEMPTS, 1).unwrap();
    assert_eq!(once.records.len(), 5);
}

#[cfg(test)]
mod tests {
    #[test]
    fn crafted_suite_hits_each_stage_exactly_once() {
        super::crafted_suite_hits_each_stage_exactly_once()
    }

    #[test]
    fn coverage_rejects_additions_and_duplicates() {
        super::coverage_rejects_additions_and_duplicates()
    }

    #[test]
    fn success_after_three_failures_uses_four_attempts() {
        super::success_after_three_failures_uses_four_attempts()
    }

    #[test]
    fn exhausted_subbatch_becomes_missing_and_scores_as_wrong() {
        super::exhausted_subbatch_becomes_missing_and_scores_as_wrong()
    }

    #[test]
    fn profile_generation_caps_at_three_attempts() {
        super::profile_generation_caps_at_three_attempts()
    }

    #[test]
    fn concurrent_profile_requests_make_one_call() {
        super::concurrent_profile_requests_make_one_call()
    }

    #[test]
    fn batching_equation_holds_exhaustively() {
        super::batching_equation_holds_exhaustively()
    }

    #[test]
    fn batching_groups_by_study() {
        super::batching_groups_by_study()
    }

    #[test]
    fn uniform_baseline_is_close_to_uniform() {
        super::uniform_baseline_is_close_to_uniform()
    }
}

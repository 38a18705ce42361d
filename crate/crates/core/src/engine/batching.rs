use crate::panel::{QuestionMeta, StudyKey};

/// Sub-batches for one study group.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBatchPlan<'a> {
    pub study_key: StudyKey,
    /// N_g: questions in the group.
    pub n_questions: usize,
    /// b: configured maximum sub-batch size.
    pub batch_size: usize,
    /// B = ⌈N_g / b⌉.
    pub n_batches: usize,
    /// N_batch = ⌈N_g / B⌉; also the retrieval K for every chunk of the group.
    pub realized_size: usize,
    pub batches: Vec<Vec<&'a QuestionMeta>>,
}

/// Splits `n` items into exactly `parts` contiguous chunk sizes, the first
/// `n mod parts` chunks one larger. Every size is ≤ ⌈n/parts⌉.
pub fn balanced_sizes(n: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let (q, r) = (n / parts, n % parts);
    (0..parts).map(|i| q + usize::from(i < r)).collect()
}

/// Groups questions by study (first-appearance order, questions kept in
/// input order) and splits each group into sub-batches of at most `b`.
pub fn partition_subbatches<'a>(questions: &[&'a QuestionMeta], b: usize) -> Vec<SubBatchPlan<'a>> {
    assert!(b >= 1, "batch size must be at least 1");
    let mut groups: Vec<(StudyKey, Vec<&'a QuestionMeta>)> = Vec::new();
    for q in questions {
        match groups.iter_mut().find(|(k, _)| *k == q.study_key) {
            Some((_, g)) => g.push(q),
            None => groups.push((q.study_key.clone(), vec![q])),
        }
    }
    groups
        .into_iter()
        .map(|(study_key, group)| {
            let n = group.len();
            let n_batches = n.div_ceil(b);
            let realized_size = n.div_ceil(n_batches);
            let mut rest = group.as_slice();
            let batches = balanced_sizes(n, n_batches)
                .into_iter()
                .map(|size| {
                    let (head, tail) = rest.split_at(size);
                    rest = tail;
                    head.to_vec()
                })
                .collect();
            SubBatchPlan {
                study_key,
                n_questions: n,
                batch_size: b,
                n_batches,
                realized_size,
                batches,
            }
        })
        .collect()
}

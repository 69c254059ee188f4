//! Johnson's rule for the two-stage flow shop and the closed-form makespan
//! of a sequence in which every job occupies a whole stage at a time.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::rational::Rational;

/// A job reduced to its two stage lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowJob {
    pub id: String,
    pub map: Rational,
    pub reduce: Rational,
}

impl FlowJob {
    pub fn new(id: impl Into<String>, map: Rational, reduce: Rational) -> Self {
        FlowJob {
            id: id.into(),
            map,
            reduce,
        }
    }

    /// Map-type jobs have `map <= reduce`; equality counts as map type.
    pub fn is_map_type(&self) -> bool {
        self.map <= self.reduce
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("job `{0}` appears more than once in the sequence")]
    DuplicateJob(String),
    #[error("sequence has {ids} ids but {durations} duration pairs")]
    LengthMismatch { ids: usize, durations: usize },
}

/// Execution order plus the stage durations aligned with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderedSequence {
    job_ids: Vec<String>,
    durations: Vec<(Rational, Rational)>,
}

impl OrderedSequence {
    pub fn new(
        job_ids: Vec<String>,
        durations: Vec<(Rational, Rational)>,
    ) -> Result<Self, SequenceError> {
        if job_ids.len() != durations.len() {
            return Err(SequenceError::LengthMismatch {
                ids: job_ids.len(),
                durations: durations.len(),
            });
        }
        let mut seen = HashSet::new();
        for id in &job_ids {
            if !seen.insert(id.as_str()) {
                return Err(SequenceError::DuplicateJob(id.clone()));
            }
        }
        Ok(OrderedSequence { job_ids, durations })
    }

    /// Sequence in the order the jobs are given.
    pub fn from_jobs<'a>(jobs: impl IntoIterator<Item = &'a FlowJob>) -> Result<Self, SequenceError> {
        let (ids, durations) = jobs
            .into_iter()
            .map(|j| (j.id.clone(), (j.map, j.reduce)))
            .unzip();
        OrderedSequence::new(ids, durations)
    }

    pub fn empty() -> Self {
        OrderedSequence {
            job_ids: Vec::new(),
            durations: Vec::new(),
        }
    }

    pub fn job_ids(&self) -> &[String] {
        &self.job_ids
    }

    pub fn durations(&self) -> &[(Rational, Rational)] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.job_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.job_ids.is_empty()
    }

    pub fn jobs(&self) -> impl Iterator<Item = FlowJob> + '_ {
        self.job_ids
            .iter()
            .zip(&self.durations)
            .map(|(id, &(m, r))| FlowJob::new(id.clone(), m, r))
    }

    /// Same durations, every one multiplied by `factor`.
    pub fn scaled(&self, factor: Rational) -> OrderedSequence {
        OrderedSequence {
            job_ids: self.job_ids.clone(),
            durations: self
                .durations
                .iter()
                .map(|&(m, r)| (m * factor, r * factor))
                .collect(),
        }
    }
}

/// Johnson order: map-type jobs first by non-decreasing map length, then
/// reduce-type jobs by non-increasing reduce length. Equal keys keep input
/// order.
pub fn johnson_order(jobs: &[FlowJob]) -> OrderedSequence {
    let (mut front, mut back): (Vec<(usize, &FlowJob)>, Vec<_>) =
        jobs.iter().enumerate().partition(|(_, j)| j.is_map_type());
    front.sort_by(|a, b| a.1.map.cmp(&b.1.map).then(a.0.cmp(&b.0)));
    back.sort_by(|a, b| b.1.reduce.cmp(&a.1.reduce).then(a.0.cmp(&b.0)));
    OrderedSequence::from_jobs(front.into_iter().chain(back).map(|(_, j)| j))
        .expect("input ids are distinct")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MakespanBreakdown {
    pub makespan: Rational,
    /// `K_u = Σ_{i≤u} map_i − Σ_{i<u} reduce_i` for each position `u`.
    pub prefix_terms: Vec<Rational>,
    /// Zero-based position of the first maximal `K_u`; `None` when empty.
    pub critical_u: Option<usize>,
    /// `max_u K_u`, the reduce stage's leading idle time.
    pub idle_gap: Rational,
}

/// `C_max = Σ reduce_i + max_u K_u`.
pub fn closed_form_makespan(seq: &OrderedSequence) -> MakespanBreakdown {
    let mut prefix_terms = Vec::with_capacity(seq.len());
    let mut map_sum = Rational::zero();
    let mut reduce_before = Rational::zero();
    for &(m, r) in seq.durations() {
        map_sum += m;
        prefix_terms.push(map_sum - reduce_before);
        reduce_before += r;
    }
    let mut critical_u = None;
    let mut idle_gap = Rational::zero();
    for (u, &k) in prefix_terms.iter().enumerate() {
        if critical_u.is_none() || k > idle_gap {
            critical_u = Some(u);
            idle_gap = k;
        }
    }
    MakespanBreakdown {
        makespan: reduce_before + idle_gap,
        prefix_terms,
        critical_u,
        idle_gap,
    }
}

/// Per-job completion times: `c_i = max(Σ_{k≤i} map_k, c_{i−1}) + reduce_i`.
pub fn pipeline_completion_times(seq: &OrderedSequence) -> Vec<Rational> {
    let mut map_end = Rational::zero();
    let mut done = Rational::zero();
    seq.durations()
        .iter()
        .map(|&(m, r)| {
            map_end += m;
            done = map_end.max(done) + r;
            done
        })
        .collect()
}

//! Ground-truth and theory checks: brute-force order search, the σ bound for
//! MK_JR, the worst-case instance family, order stability under slot
//! scaling, slot-ratio sweeps and cross-policy comparison reports.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::johnson::{closed_form_makespan, FlowJob, OrderedSequence};
use crate::rational::{Rational, RationalText};
use crate::schedulers::{
    balanced_pools_schedule, fix_pools_and_assignment, mk_jr_schedule, uaas_schedule, PinnedPools,
    Schedule, ScheduleError,
};
use crate::simulator::{simulate_fifo, verify_timeline, SimulationError, Timeline};
use crate::workload::{ClusterConfig, JobSpec, Workload, WorkloadError};

/// Largest instance the brute-force oracle accepts.
pub const MAX_BRUTE_FORCE_JOBS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("brute force is limited to {max} jobs, got {n}")]
    TooManyJobs { n: usize, max: usize },
    #[error("sigma is undefined: the optimal makespan is zero")]
    UndefinedSigma,
    #[error("worst-case construction needs C0 > 1, got {0}")]
    InvalidC0(Rational),
    #[error("job `{0}` has no task-level times")]
    MissingTasks(String),
    #[error("ratio sweep needs at least 2 slots, got {0}")]
    TooFewSlots(u32),
    #[error("order does not list exactly the workload's jobs")]
    OrderMismatch,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

struct Search<'a> {
    jobs: &'a [FlowJob],
    used: Vec<bool>,
    perm: Vec<usize>,
    best: Option<(Rational, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, map_end: Rational, done: Rational, rest_map: Rational, rest_reduce: Rational) {
        if self.perm.len() == self.jobs.len() {
            if self.best.as_ref().is_none_or(|(b, _)| done < *b) {
                self.best = Some((done, self.perm.clone()));
            }
            return;
        }
        if let Some((best, _)) = &self.best {
            // both bounds are admissible; pruning on >= keeps the
            // lexicographically first optimum because enumeration is ordered
            let min_reduce = (0..self.jobs.len())
                .filter(|&i| !self.used[i])
                .map(|i| self.jobs[i].reduce)
                .min()
                .unwrap_or_default();
            let lower = (done + rest_reduce).max(map_end + rest_map + min_reduce);
            if lower >= *best {
                return;
            }
        }
        for i in 0..self.jobs.len() {
            if self.used[i] {
                continue;
            }
            let job = &self.jobs[i];
            let next_map = map_end + job.map;
            let next_done = next_map.max(done) + job.reduce;
            self.used[i] = true;
            self.perm.push(i);
            self.descend(next_map, next_done, rest_map - job.map, rest_reduce - job.reduce);
            self.perm.pop();
            self.used[i] = false;
        }
    }
}

/// Exhaustive minimum makespan over all orders, with the lexicographically
/// smallest (by input position) optimal order.
pub fn brute_force_best_order(jobs: &[FlowJob]) -> Result<(OrderedSequence, Rational), AnalysisError> {
    let n = jobs.len();
    if n > MAX_BRUTE_FORCE_JOBS {
        return Err(AnalysisError::TooManyJobs {
            n,
            max: MAX_BRUTE_FORCE_JOBS,
        });
    }
    if n == 0 {
        return Ok((OrderedSequence::empty(), Rational::zero()));
    }
    let total_map: Rational = jobs.iter().map(|j| j.map).sum();
    let total_reduce: Rational = jobs.iter().map(|j| j.reduce).sum();
    let branches: Vec<(Rational, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut search = Search {
                jobs,
                used: vec![false; n],
                perm: vec![first],
                best: None,
            };
            search.used[first] = true;
            let j = &jobs[first];
            search.descend(j.map, j.map + j.reduce, total_map - j.map, total_reduce - j.reduce);
            search.best.expect("every branch reaches a leaf")
        })
        .collect();
    let (makespan, perm) = branches
        .into_iter()
        .reduce(|best, cand| if cand.0 < best.0 { cand } else { best })
        .expect("n > 0");
    let seq = OrderedSequence::from_jobs(perm.iter().map(|&i| &jobs[i]))
        .map_err(|_| AnalysisError::OrderMismatch)?;
    Ok((seq, makespan))
}

/// Jobs rescaled to the whole cluster, in submission order.
pub fn full_cluster_jobs(w: &Workload) -> Vec<FlowJob> {
    w.jobs
        .iter()
        .map(|j| {
            let s = j.at_full(&w.cluster);
            FlowJob::new(s.id, s.eff_map_duration, s.eff_reduce_duration)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SigmaReport {
    pub sigma: Rational,
    pub bound: Rational,
    pub optimal_makespan: Rational,
    pub max_prefix_map: Rational,
    pub max_prefix_reduce: Rational,
    pub mk_jr_makespan: Rational,
    /// `mk_jr_makespan <= optimal + max_prefix_map + max_prefix_reduce`.
    pub within_bound: bool,
}

fn max_prefix(values: impl Iterator<Item = Rational>) -> Rational {
    let mut sum = Rational::zero();
    let mut best: Option<Rational> = None;
    for v in values {
        sum += v;
        best = Some(best.map_or(sum, |b| b.max(sum)));
    }
    best.unwrap_or_default()
}

/// σ = (max_k Σ_{i≤k} T̂^M + max_k Σ_{i≤k} T̂^R) / Ĉ over the UAAS-rescaled
/// durations in Johnson order, plus a check of MK_JR's simulated makespan
/// against `Ĉ + max prefix map + max prefix reduce`.
pub fn sigma_bound(w: &Workload) -> Result<SigmaReport, AnalysisError> {
    let uaas = uaas_schedule(w);
    let seq = uaas.pools[0].sequence();
    let optimal = closed_form_makespan(&seq).makespan;
    if optimal.is_zero() {
        return Err(AnalysisError::UndefinedSigma);
    }
    let max_prefix_map = max_prefix(seq.durations().iter().map(|d| d.0));
    let max_prefix_reduce = max_prefix(seq.durations().iter().map(|d| d.1));
    let sigma = (max_prefix_map + max_prefix_reduce) / optimal;
    let mk_jr_makespan = simulate_fifo(&mk_jr_schedule(w))?.makespan;
    Ok(SigmaReport {
        sigma,
        bound: Rational::one() + sigma,
        optimal_makespan: optimal,
        max_prefix_map,
        max_prefix_reduce,
        mk_jr_makespan,
        within_bound: mk_jr_makespan <= optimal + max_prefix_map + max_prefix_reduce,
    })
}

/// Two whole-cluster jobs with durations `(1, C0)` and `(C0, 1)`.
pub fn worst_case_instance(c0: Rational) -> Result<Workload, AnalysisError> {
    if c0 <= Rational::one() {
        return Err(AnalysisError::InvalidC0(c0));
    }
    let cluster = ClusterConfig::new(1, 1)?;
    Ok(Workload::new(
        cluster,
        vec![
            JobSpec::new("J1", 1, 1, Rational::one(), c0),
            JobSpec::new("J2", 1, 1, c0, Rational::one()),
        ],
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityEntry {
    pub factor: Rational,
    pub cluster: ClusterConfig,
    pub uaas_order: Vec<String>,
    pub uaas_makespan: Rational,
    pub uaas_order_unchanged: bool,
    /// Makespan equals the base makespan times `factor`, exactly.
    pub makespan_scaled_exactly: bool,
    pub mk_jr_order: Vec<String>,
    pub mk_jr_order_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub base_cluster: ClusterConfig,
    pub base_uaas_order: Vec<String>,
    pub base_uaas_makespan: Rational,
    pub base_mk_jr_order: Vec<String>,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityReport {
    pub fn uaas_stable(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.uaas_order_unchanged && e.makespan_scaled_exactly)
    }
}

fn owned(ids: Vec<&str>) -> Vec<String> {
    ids.into_iter().map(str::to_owned).collect()
}

/// Re-plans UAAS and MK_JR on clusters with `slots / factor` slots per stage
/// (so durations grow by `factor`) and compares against the base cluster.
pub fn stability_check(w: &Workload, factors: &[Rational]) -> Result<StabilityReport, AnalysisError> {
    let base = uaas_schedule(w);
    let base_order = owned(base.order());
    let base_makespan = base.predicted_makespan.unwrap_or_default();
    let base_mk_jr = owned(mk_jr_schedule(w).order());
    let entries = factors
        .iter()
        .map(|&factor| {
            let cluster = w.cluster.shrunk_by(factor)?;
            let scaled = w.with_cluster(cluster);
            let uaas = uaas_schedule(&scaled);
            let makespan = uaas.predicted_makespan.unwrap_or_default();
            let uaas_order = owned(uaas.order());
            let mk_jr_order = owned(mk_jr_schedule(&scaled).order());
            Ok(StabilityEntry {
                factor,
                cluster,
                uaas_order_unchanged: uaas_order == base_order,
                makespan_scaled_exactly: makespan == base_makespan * factor,
                uaas_makespan: makespan,
                mk_jr_order_changed: mk_jr_order != base_mk_jr,
                uaas_order,
                mk_jr_order,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(StabilityReport {
        base_cluster: w.cluster,
        base_uaas_order: base_order,
        base_uaas_makespan: base_makespan,
        base_mk_jr_order: base_mk_jr,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioPoint {
    pub rho: Rational,
    pub map_slots: u32,
    pub reduce_slots: u32,
    pub makespan: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioSweepResult {
    pub points: Vec<RatioPoint>,
    pub best: RatioPoint,
}

fn jobs_in_order<'a, S: AsRef<str>>(w: &'a Workload, order: &[S]) -> Result<Vec<&'a JobSpec>, AnalysisError> {
    let mut seen = HashSet::new();
    let jobs = order
        .iter()
        .map(|id| {
            let id = id.as_ref();
            if !seen.insert(id) {
                return Err(AnalysisError::OrderMismatch);
            }
            w.job(id).ok_or(AnalysisError::OrderMismatch)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if jobs.len() != w.jobs.len() {
        return Err(AnalysisError::OrderMismatch);
    }
    Ok(jobs)
}

/// Makespan of a fixed order on `map_slots × reduce_slots` when every job
/// uses all slots: `max_k (Σ_{i≤k} W^M_i / m + Σ_{i≥k} W^R_i / r)`, with
/// stage work `W` summed from task times.
pub fn fluid_makespan(work: &[(Rational, Rational)], map_slots: u32, reduce_slots: u32) -> Rational {
    let m = Rational::from(map_slots);
    let r = Rational::from(reduce_slots);
    let mut suffix_reduce: Rational = work.iter().map(|w| w.1).sum();
    let mut prefix_map = Rational::zero();
    let mut best = Rational::zero();
    for &(wm, wr) in work {
        prefix_map += wm;
        best = best.max(prefix_map / m + suffix_reduce / r);
        suffix_reduce -= wr;
    }
    best
}

/// Evaluates every integer split `(m, total − m)` of a slot budget for a
/// fixed job order. Ties go to the smallest ρ.
pub fn ratio_sweep<S: AsRef<str>>(
    w: &Workload,
    total_slots: u32,
    order: &[S],
) -> Result<RatioSweepResult, AnalysisError> {
    if total_slots < 2 {
        return Err(AnalysisError::TooFewSlots(total_slots));
    }
    let jobs = jobs_in_order(w, order)?;
    let work = jobs
        .iter()
        .map(|j| match (&j.map_tasks, &j.reduce_tasks) {
            (Some(m), Some(r)) => Ok((m.iter().sum(), r.iter().sum())),
            _ => Err(AnalysisError::MissingTasks(j.id.clone())),
        })
        .collect::<Result<Vec<(Rational, Rational)>, _>>()?;
    let points: Vec<RatioPoint> = (1..total_slots)
        .into_par_iter()
        .map(|m| {
            let r = total_slots - m;
            RatioPoint {
                rho: Rational::new(m as i128, r as i128),
                map_slots: m,
                reduce_slots: r,
                makespan: fluid_makespan(&work, m, r),
            }
        })
        .collect();
    let best = points
        .iter()
        .min_by(|a, b| a.makespan.cmp(&b.makespan).then(a.rho.cmp(&b.rho)))
        .cloned()
        .expect("total_slots >= 2 gives at least one split");
    Ok(RatioSweepResult { points, best })
}

/// Single-pool schedule that runs `order` with every job on the whole of
/// `cluster`.
pub fn all_slots_schedule<S: AsRef<str>>(
    w: &Workload,
    cluster: ClusterConfig,
    order: &[S],
) -> Result<Schedule, AnalysisError> {
    let jobs = jobs_in_order(w, order)?;
    Ok(Schedule::custom(cluster, jobs.iter().map(|j| j.at_full(&cluster)).collect()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolSummary {
    pub map_slots: u32,
    pub reduce_slots: u32,
    pub order: Vec<String>,
    pub predicted_makespan: Option<RationalText>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyResult {
    pub policy: String,
    pub order: Vec<String>,
    pub pools: Vec<PoolSummary>,
    pub predicted_makespan: Option<RationalText>,
    /// Simulated makespan.
    pub makespan: RationalText,
    /// `(makespan − uaas) / uaas`; absent when the UAAS makespan is zero.
    pub gap_vs_uaas: Option<RationalText>,
    pub timeline_violations: usize,
    #[serde(skip)]
    pub makespan_exact: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleSummary {
    pub order: Vec<String>,
    pub makespan: RationalText,
    pub matches_uaas: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SigmaSummary {
    pub sigma: RationalText,
    pub bound: RationalText,
    pub optimal_makespan: RationalText,
    pub mk_jr_within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub map_slots: u32,
    pub reduce_slots: u32,
    pub jobs: usize,
    pub policies: Vec<PolicyResult>,
    pub sigma: Option<SigmaSummary>,
    pub oracle: Option<OracleSummary>,
    /// Reason the BalancedPools search was skipped, if it was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balanced_pools_skipped: Option<String>,
}

impl ComparisonReport {
    pub fn policy(&self, label: &str) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.policy == label)
    }
}

/// Simulates a schedule and checks the resulting timeline.
pub fn simulate_checked(schedule: &Schedule) -> Result<(Timeline, usize), AnalysisError> {
    let t = simulate_fifo(schedule)?;
    let violations = verify_timeline(&t, schedule, &schedule.cluster).len();
    Ok((t, violations))
}

fn policy_result(label: &str, schedule: &Schedule, uaas: Option<Rational>) -> Result<PolicyResult, AnalysisError> {
    let (t, violations) = simulate_checked(schedule)?;
    let makespan = t.makespan;
    let reference = uaas.unwrap_or(makespan);
    let gap = (!reference.is_zero()).then(|| RationalText::from((makespan - reference) / reference));
    Ok(PolicyResult {
        policy: label.to_owned(),
        order: owned(schedule.order()),
        pools: schedule
            .pools
            .iter()
            .map(|p| PoolSummary {
                map_slots: p.cluster.map_slots(),
                reduce_slots: p.cluster.reduce_slots(),
                order: owned(p.order()),
                predicted_makespan: p.predicted_makespan.map(Into::into),
            })
            .collect(),
        predicted_makespan: schedule.predicted_makespan.map(Into::into),
        makespan: makespan.into(),
        gap_vs_uaas: gap,
        timeline_violations: violations,
        makespan_exact: makespan,
    })
}

/// Runs every policy (and the oracle when the batch is small enough),
/// simulates each, and gathers makespans, gaps against UAAS and σ.
/// `pinned` adds a BalancedPools entry with a fixed split and assignment.
pub fn compare_report(w: &Workload, pinned: Option<&PinnedPools>) -> Result<ComparisonReport, AnalysisError> {
    let uaas = uaas_schedule(w);
    let uaas_result = policy_result("UAAS", &uaas, None)?;
    let reference = Some(uaas_result.makespan_exact);
    let mut policies = vec![
        uaas_result,
        policy_result("MK_JR", &mk_jr_schedule(w), reference)?,
    ];
    let mut skipped = None;
    match balanced_pools_schedule(w) {
        Ok(s) => policies.push(policy_result("BALANCED_POOLS", &s, reference)?),
        Err(ScheduleError::ClusterTooSmall(c)) => {
            skipped = Some(format!("cluster {c} is too small to split"));
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(p) = pinned {
        let s = fix_pools_and_assignment(w, p.first_pool, [&p.assignment[0][..], &p.assignment[1][..]])?;
        policies.push(policy_result("BALANCED_POOLS_PINNED", &s, reference)?);
    }
    let sigma = match sigma_bound(w) {
        Ok(r) => Some(SigmaSummary {
            sigma: r.sigma.into(),
            bound: r.bound.into(),
            optimal_makespan: r.optimal_makespan.into(),
            mk_jr_within_bound: r.within_bound,
        }),
        Err(AnalysisError::UndefinedSigma) => None,
        Err(e) => return Err(e),
    };
    let oracle = if w.jobs.len() <= MAX_BRUTE_FORCE_JOBS {
        let (seq, makespan) = brute_force_best_order(&full_cluster_jobs(w))?;
        Some(OracleSummary {
            order: seq.job_ids().to_vec(),
            makespan: makespan.into(),
            matches_uaas: Some(makespan) == uaas.predicted_makespan,
        })
    } else {
        None
    };
    Ok(ComparisonReport {
        map_slots: w.cluster.map_slots(),
        reduce_slots: w.cluster.reduce_slots(),
        jobs: w.jobs.len(),
        policies,
        sigma,
        oracle,
        balanced_pools_skipped: skipped,
    })
}

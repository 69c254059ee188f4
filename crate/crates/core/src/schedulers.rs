//! Scheduling policies: UAAS, MK_JR and BalancedPools.
//!
//! Each policy produces a [`Schedule`]: one or two slot pools, each holding
//! an ordered list of jobs resized to their slot allocation in that pool.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::johnson::{closed_form_makespan, johnson_order, FlowJob, OrderedSequence};
use crate::rational::Rational;
use crate::workload::{ClusterConfig, JobSpec, ScaledJob, Workload, WorkloadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    Uaas,
    MkJr,
    BalancedPools,
    Custom,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Uaas => "UAAS",
            Policy::MkJr => "MK_JR",
            Policy::BalancedPools => "BALANCED_POOLS",
            Policy::Custom => "CUSTOM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("cluster {0} is too small to split into two pools (needs at least 2 slots per stage)")]
    ClusterTooSmall(ClusterConfig),
    #[error("pool split {first} does not leave a non-empty second pool in cluster {cluster}")]
    InvalidSplit {
        first: ClusterConfig,
        cluster: ClusterConfig,
    },
    #[error("job `{0}` is assigned to more than one pool")]
    AssignedTwice(String),
    #[error("job `{0}` is not assigned to any pool")]
    Unassigned(String),
    #[error("assignment names unknown job `{0}`")]
    UnknownJob(String),
    #[error("pool slot totals exceed the cluster {0}")]
    PoolsExceedCluster(ClusterConfig),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// One slot pool and the jobs it runs, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolPlan {
    pub cluster: ClusterConfig,
    pub jobs: Vec<ScaledJob>,
    pub predicted_makespan: Option<Rational>,
}

impl PoolPlan {
    pub fn sequence(&self) -> OrderedSequence {
        OrderedSequence::new(
            self.jobs.iter().map(|j| j.id.clone()).collect(),
            self.jobs
                .iter()
                .map(|j| (j.eff_map_duration, j.eff_reduce_duration))
                .collect(),
        )
        .expect("pool jobs are distinct")
    }

    pub fn order(&self) -> Vec<&str> {
        self.jobs.iter().map(|j| j.id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub policy: Policy,
    pub cluster: ClusterConfig,
    pub pools: Vec<PoolPlan>,
    /// Closed-form prediction where the policy defines one.
    pub predicted_makespan: Option<Rational>,
}

impl Schedule {
    /// A single-pool schedule built from explicit allocations.
    pub fn custom(cluster: ClusterConfig, jobs: Vec<ScaledJob>) -> Schedule {
        Schedule {
            policy: Policy::Custom,
            cluster,
            pools: vec![PoolPlan {
                cluster,
                jobs,
                predicted_makespan: None,
            }],
            predicted_makespan: None,
        }
    }

    /// Job ids in execution order, pools concatenated.
    pub fn order(&self) -> Vec<&str> {
        self.pools.iter().flat_map(|p| p.order()).collect()
    }

    /// Predicted makespan of each pool.
    pub fn pool_makespans(&self) -> Vec<Option<Rational>> {
        self.pools.iter().map(|p| p.predicted_makespan).collect()
    }

    /// Predicted makespan of pool `index`; absent or empty pools count as zero.
    pub fn pool_makespan(&self, index: usize) -> Rational {
        self.pools
            .get(index)
            .and_then(|p| p.predicted_makespan)
            .unwrap_or_default()
    }
}

fn uaas_sequence(w: &Workload, cluster: &ClusterConfig) -> Vec<ScaledJob> {
    let scaled: Vec<ScaledJob> = w.jobs.iter().map(|j| j.at_full(cluster)).collect();
    order_scaled(scaled)
}

fn order_scaled(scaled: Vec<ScaledJob>) -> Vec<ScaledJob> {
    let flow: Vec<FlowJob> = scaled.iter().map(to_flow).collect();
    let seq = johnson_order(&flow);
    let mut by_id: HashMap<&str, &ScaledJob> = scaled.iter().map(|s| (s.id.as_str(), s)).collect();
    seq.job_ids()
        .iter()
        .map(|id| by_id.remove(id.as_str()).expect("johnson order is a permutation").clone())
        .collect()
}

fn to_flow(s: &ScaledJob) -> FlowJob {
    FlowJob::new(s.id.clone(), s.eff_map_duration, s.eff_reduce_duration)
}

fn predicted(jobs: &[ScaledJob]) -> Rational {
    let flow: Vec<FlowJob> = jobs.iter().map(to_flow).collect();
    closed_form_makespan(&OrderedSequence::from_jobs(&flow).expect("distinct ids")).makespan
}

/// Every job gets the whole cluster for each stage, then Johnson's rule.
pub fn uaas_schedule(w: &Workload) -> Schedule {
    let jobs = uaas_sequence(w, &w.cluster);
    let makespan = predicted(&jobs);
    Schedule {
        policy: Policy::Uaas,
        cluster: w.cluster,
        pools: vec![PoolPlan {
            cluster: w.cluster,
            jobs,
            predicted_makespan: Some(makespan),
        }],
        predicted_makespan: Some(makespan),
    }
}

/// Jobs keep their own demands (clamped to capacity). `T^M < T^R` jobs run
/// first by non-decreasing map length, the rest by non-increasing reduce
/// length. The ordering keys are the durations at the clamped allocation.
pub fn mk_jr_schedule(w: &Workload) -> Schedule {
    let scaled: Vec<ScaledJob> = w.jobs.iter().map(|j| j.clamped_to(&w.cluster)).collect();
    let (mut head, mut tail): (Vec<(usize, &ScaledJob)>, Vec<_>) = scaled
        .iter()
        .enumerate()
        .partition(|(_, s)| s.eff_map_duration < s.eff_reduce_duration);
    head.sort_by(|a, b| a.1.eff_map_duration.cmp(&b.1.eff_map_duration).then(a.0.cmp(&b.0)));
    tail.sort_by(|a, b| {
        b.1.eff_reduce_duration
            .cmp(&a.1.eff_reduce_duration)
            .then(a.0.cmp(&b.0))
    });
    let jobs = head.into_iter().chain(tail).map(|(_, s)| s.clone()).collect();
    Schedule {
        policy: Policy::MkJr,
        cluster: w.cluster,
        pools: vec![PoolPlan {
            cluster: w.cluster,
            jobs,
            predicted_makespan: None,
        }],
        predicted_makespan: None,
    }
}

/// Which two-pool splits BalancedPools searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitGrid {
    /// `(s, r)` with `r ≈ s·|S^R|/|S^M|`, exact whenever that is integral.
    #[default]
    Proportional,
    /// Every `(s, r)` pair with both pools non-empty.
    Exhaustive,
}

impl SplitGrid {
    fn splits(&self, cluster: &ClusterConfig) -> Vec<(u32, u32)> {
        let (m, r) = (cluster.map_slots(), cluster.reduce_slots());
        match self {
            SplitGrid::Proportional => {
                let mut out: Vec<(u32, u32)> = (1..m)
                    .map(|s| {
                        let ideal = Rational::new(s as i128 * r as i128, m as i128);
                        // round half up
                        let rr = (ideal + Rational::new(1, 2)).floor() as u32;
                        (s, rr.clamp(1, r - 1))
                    })
                    .collect();
                out.dedup();
                out
            }
            SplitGrid::Exhaustive => (1..m).flat_map(|s| (1..r).map(move |rr| (s, rr))).collect(),
        }
    }
}

fn pool_plan(cluster: ClusterConfig, jobs: &[&JobSpec]) -> PoolPlan {
    let scaled = jobs.iter().map(|j| j.clamped_to(&cluster)).collect();
    let ordered = order_scaled(scaled);
    let makespan = predicted(&ordered);
    PoolPlan {
        cluster,
        jobs: ordered,
        predicted_makespan: Some(makespan),
    }
}

fn pools_schedule(cluster: ClusterConfig, pools: Vec<PoolPlan>) -> Schedule {
    let worst = pools
        .iter()
        .filter_map(|p| p.predicted_makespan)
        .max()
        .unwrap_or_default();
    Schedule {
        policy: Policy::BalancedPools,
        cluster,
        pools,
        predicted_makespan: Some(worst),
    }
}

fn second_pool(cluster: &ClusterConfig, first: &ClusterConfig) -> Result<ClusterConfig, ScheduleError> {
    if first.map_slots() >= cluster.map_slots() || first.reduce_slots() >= cluster.reduce_slots() {
        return Err(ScheduleError::InvalidSplit {
            first: *first,
            cluster: *cluster,
        });
    }
    Ok(ClusterConfig::new(
        cluster.map_slots() - first.map_slots(),
        cluster.reduce_slots() - first.reduce_slots(),
    )?)
}

/// Greedy assignment for one split: longest jobs first, each into the pool
/// whose predicted makespan after adding it is smallest (first pool on ties).
fn assign_greedy(w: &Workload, pools: [ClusterConfig; 2]) -> (Rational, [Vec<&JobSpec>; 2]) {
    let mut order: Vec<(usize, &JobSpec)> = w.jobs.iter().enumerate().collect();
    order.sort_by(|a, b| {
        let ka = a.1.map_duration + a.1.reduce_duration;
        let kb = b.1.map_duration + b.1.reduce_duration;
        kb.cmp(&ka).then(a.0.cmp(&b.0))
    });
    let mut members: [Vec<&JobSpec>; 2] = [Vec::new(), Vec::new()];
    let mut spans = [Rational::zero(); 2];
    for (_, job) in order {
        let candidates: Vec<Rational> = (0..2)
            .map(|p| {
                let mut trial = members[p].clone();
                trial.push(job);
                pool_plan(pools[p], &trial).predicted_makespan.unwrap_or_default()
            })
            .collect();
        let pick = if candidates[1] < candidates[0] { 1 } else { 0 };
        spans[pick] = candidates[pick];
        members[pick].push(job);
    }
    (spans[0].max(spans[1]), members)
}

/// BalancedPools with the default proportional split grid.
pub fn balanced_pools_schedule(w: &Workload) -> Result<Schedule, ScheduleError> {
    balanced_pools_schedule_with(w, SplitGrid::default())
}

/// Searches two-pool splits, assigns jobs greedily for each, and keeps the
/// split with the smallest worst-pool makespan (smallest split on ties).
///
/// A batch of at most one job degenerates to a single pool holding the whole
/// cluster; the absent second pool counts as makespan zero.
pub fn balanced_pools_schedule_with(w: &Workload, grid: SplitGrid) -> Result<Schedule, ScheduleError> {
    let cluster = w.cluster;
    if w.jobs.len() <= 1 {
        let jobs: Vec<&JobSpec> = w.jobs.iter().collect();
        return Ok(pools_schedule(cluster, vec![pool_plan(cluster, &jobs)]));
    }
    if cluster.map_slots() < 2 || cluster.reduce_slots() < 2 {
        return Err(ScheduleError::ClusterTooSmall(cluster));
    }
    let splits = grid.splits(&cluster);
    let (_, (s, r), members) = splits
        .par_iter()
        .map(|&(s, r)| {
            let first = ClusterConfig::new(s, r).expect("split slots are positive");
            let second = second_pool(&cluster, &first).expect("split leaves a second pool");
            let (worst, members) = assign_greedy(w, [first, second]);
            (worst, (s, r), members)
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(ScheduleError::ClusterTooSmall(cluster))?;
    let first = ClusterConfig::new(s, r)?;
    let second = second_pool(&cluster, &first)?;
    // keep each pool's jobs in submission order before Johnson sorting
    let position: HashMap<&str, usize> =
        w.jobs.iter().enumerate().map(|(i, j)| (j.id.as_str(), i)).collect();
    let [mut a, mut b] = members;
    a.sort_by_key(|j| position[j.id.as_str()]);
    b.sort_by_key(|j| position[j.id.as_str()]);
    Ok(pools_schedule(cluster, vec![pool_plan(first, &a), pool_plan(second, &b)]))
}

/// A fixed BalancedPools configuration: the first pool's slots (the second
/// pool gets the rest) and the job ids assigned to each pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinnedPools {
    pub first_pool: ClusterConfig,
    pub assignment: [Vec<String>; 2],
}

/// Two pools with a caller-fixed split and job assignment. `first` is the
/// first pool; the second pool gets the remaining slots.
pub fn fix_pools_and_assignment<S: AsRef<str>>(
    w: &Workload,
    first: ClusterConfig,
    assignment: [&[S]; 2],
) -> Result<Schedule, ScheduleError> {
    let second = second_pool(&w.cluster, &first)?;
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (pool, ids) in assignment.iter().enumerate() {
        for id in ids.iter() {
            let id = id.as_ref();
            if w.job(id).is_none() {
                return Err(ScheduleError::UnknownJob(id.to_owned()));
            }
            if owner.insert(id, pool).is_some() {
                return Err(ScheduleError::AssignedTwice(id.to_owned()));
            }
        }
    }
    let mut members: [Vec<&JobSpec>; 2] = [Vec::new(), Vec::new()];
    for job in &w.jobs {
        match owner.get(job.id.as_str()) {
            Some(&pool) => members[pool].push(job),
            None => return Err(ScheduleError::Unassigned(job.id.clone())),
        }
    }
    Ok(pools_schedule(
        w.cluster,
        vec![pool_plan(first, &members[0]), pool_plan(second, &members[1])],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn five_job() -> Workload {
        Workload::new(
            ClusterConfig::new(30, 30).unwrap(),
            vec![
                JobSpec::new("J1", 30, 30, int(4), int(5)),
                JobSpec::new("J2", 30, 30, int(1), int(4)),
                JobSpec::new("J3", 20, 20, int(30), int(4)),
                JobSpec::new("J4", 20, 20, int(6), int(30)),
                JobSpec::new("J5", 30, 30, int(2), int(3)),
            ],
        )
    }

    fn two_job(slots: u32) -> Workload {
        Workload::new(
            ClusterConfig::new(slots, slots).unwrap(),
            vec![
                JobSpec::new("J1", 10, 1, int(9), int(10)),
                JobSpec::new("J2", 8, 1, int(11), int(15)),
            ],
        )
    }

    fn durations(s: &Schedule, pool: usize) -> Vec<(Rational, Rational)> {
        s.pools[pool]
            .jobs
            .iter()
            .map(|j| (j.eff_map_duration, j.eff_reduce_duration))
            .collect()
    }

    #[test]
    fn uaas_five_job() {
        let s = uaas_schedule(&five_job());
        assert_eq!(s.order(), ["J2", "J5", "J1", "J4", "J3"]);
        assert_eq!(s.predicted_makespan, Some(q(107, 3)));
        assert!(s.pools[0].jobs.iter().all(|j| j.alloc_map == 30 && j.alloc_reduce == 30));
    }

    #[test]
    fn uaas_two_job_before_and_after_failure() {
        let s = uaas_schedule(&two_job(10));
        assert_eq!(s.order(), ["J2", "J1"]);
        assert_eq!(s.predicted_makespan, Some(q(94, 5)));

        let s = uaas_schedule(&two_job(8));
        assert_eq!(s.order(), ["J2", "J1"]);
        assert_eq!(durations(&s, 0), [(int(11), q(15, 8)), (q(45, 4), q(5, 4))]);
        assert_eq!(s.predicted_makespan, Some(q(47, 2)));
    }

    #[test]
    fn mk_jr_orders() {
        let s = mk_jr_schedule(&five_job());
        assert_eq!(s.order(), ["J2", "J5", "J1", "J4", "J3"]);
        assert_eq!(s.predicted_makespan, None);
        assert_eq!(s.pools[0].jobs[3].alloc_map, 20);

        let s = mk_jr_schedule(&two_job(10));
        assert_eq!(s.order(), ["J1", "J2"]);
        assert_eq!(s.pools[0].jobs[0].alloc_reduce, 1);
    }

    #[test]
    fn mk_jr_tie_goes_last() {
        let w = Workload::new(
            ClusterConfig::new(4, 4).unwrap(),
            vec![
                JobSpec::new("tie", 4, 4, int(3), int(3)),
                JobSpec::new("a", 4, 4, int(5), int(6)),
            ],
        );
        assert_eq!(mk_jr_schedule(&w).order(), ["a", "tie"]);
        // UAAS counts the tie as map type
        assert_eq!(uaas_schedule(&w).order(), ["tie", "a"]);
    }

    #[test]
    fn mk_jr_clamps_over_demand() {
        let s = mk_jr_schedule(&two_job(8));
        let j1 = s.pools[0].jobs.iter().find(|j| j.id == "J1").unwrap();
        assert_eq!(j1.alloc_map, 8);
        assert_eq!(j1.eff_map_duration, q(45, 4));
    }

    #[test]
    fn pinned_pools_five_job() {
        let w = five_job();
        let s = fix_pools_and_assignment(
            &w,
            ClusterConfig::new(10, 10).unwrap(),
            [&["J1", "J2", "J5"][..], &["J3", "J4"][..]],
        )
        .unwrap();
        assert_eq!(s.pool_makespans(), [Some(int(39)), Some(int(40))]);
        assert_eq!(s.predicted_makespan, Some(int(40)));
        assert_eq!(s.pools[1].cluster, ClusterConfig::new(20, 20).unwrap());
        assert_eq!(s.pools[0].order(), ["J2", "J5", "J1"]);
        assert_eq!(s.pools[1].order(), ["J4", "J3"]);
    }

    #[test]
    fn pinned_pools_two_job() {
        let w = two_job(10);
        let s = fix_pools_and_assignment(&w, ClusterConfig::new(4, 4).unwrap(), [&["J1"][..], &["J2"][..]])
            .unwrap();
        assert_eq!(durations(&s, 0), [(q(45, 2), int(10))]);
        assert_eq!(durations(&s, 1), [(q(44, 3), int(15))]);
    }

    #[test]
    fn pinned_empty_second_pool() {
        let w = two_job(10);
        let s = fix_pools_and_assignment::<&str>(&w, ClusterConfig::new(5, 5).unwrap(), [&["J1", "J2"], &[]])
            .unwrap();
        assert_eq!(s.pools[1].predicted_makespan, Some(int(0)));
        assert!(s.pools[1].jobs.is_empty());
    }

    #[test]
    fn pinned_assignment_errors() {
        let w = two_job(10);
        let first = ClusterConfig::new(5, 5).unwrap();
        assert_eq!(
            fix_pools_and_assignment(&w, first, [&["J1", "J2"][..], &["J2"][..]]).unwrap_err(),
            ScheduleError::AssignedTwice("J2".into())
        );
        assert_eq!(
            fix_pools_and_assignment(&w, first, [&["J1"][..], &[][..]]).unwrap_err(),
            ScheduleError::Unassigned("J2".into())
        );
        assert_eq!(
            fix_pools_and_assignment(&w, first, [&["J1", "J9"][..], &["J2"][..]]).unwrap_err(),
            ScheduleError::UnknownJob("J9".into())
        );
        assert!(matches!(
            fix_pools_and_assignment(&w, ClusterConfig::new(10, 5).unwrap(), [&["J1"][..], &["J2"][..]]),
            Err(ScheduleError::InvalidSplit { .. })
        ));
    }

    #[test]
    fn balanced_single_job_leaves_second_pool_empty() {
        let w = Workload::new(
            ClusterConfig::new(6, 6).unwrap(),
            vec![JobSpec::new("only", 6, 6, int(2), int(3))],
        );
        let s = balanced_pools_schedule(&w).unwrap();
        assert_eq!(s.pools.len(), 1);
        assert_eq!(s.pools[0].cluster, w.cluster);
        assert_eq!(s.pool_makespan(0), int(5));
        assert_eq!(s.pool_makespan(1), int(0));
    }

    #[test]
    fn balanced_symmetric_pair() {
        let w = Workload::new(
            ClusterConfig::new(10, 10).unwrap(),
            vec![
                JobSpec::new("a", 5, 5, int(1), int(1)),
                JobSpec::new("b", 5, 5, int(1), int(1)),
            ],
        );
        let s = balanced_pools_schedule(&w).unwrap();
        assert_eq!(s.pools[0].cluster, ClusterConfig::new(5, 5).unwrap());
        assert_eq!(s.pools[0].predicted_makespan, s.pools[1].predicted_makespan);
        assert_eq!(s.predicted_makespan, Some(int(2)));
    }

    #[test]
    fn balanced_needs_two_slots_per_stage() {
        let w = Workload::new(
            ClusterConfig::new(1, 4).unwrap(),
            vec![
                JobSpec::new("a", 1, 1, int(1), int(1)),
                JobSpec::new("b", 1, 1, int(1), int(1)),
            ],
        );
        assert!(matches!(
            balanced_pools_schedule(&w),
            Err(ScheduleError::ClusterTooSmall(_))
        ));
    }

    #[test]
    fn balanced_five_job_never_beats_uaas() {
        let w = five_job();
        let uaas = uaas_schedule(&w).predicted_makespan.unwrap();
        for grid in [SplitGrid::Proportional, SplitGrid::Exhaustive] {
            let s = balanced_pools_schedule_with(&w, grid).unwrap();
            assert!(s.predicted_makespan.unwrap() >= uaas);
            let mut ids: Vec<&str> = s.order();
            ids.sort();
            assert_eq!(ids, ["J1", "J2", "J3", "J4", "J5"]);
        }
    }

    #[test]
    fn proportional_grid_on_uneven_cluster() {
        let grid = SplitGrid::Proportional.splits(&ClusterConfig::new(3, 2).unwrap());
        assert_eq!(grid, [(1, 1), (2, 1)]);
        let grid = SplitGrid::Proportional.splits(&ClusterConfig::new(30, 30).unwrap());
        assert!(grid.contains(&(10, 10)));
        assert_eq!(grid.len(), 29);
    }
}

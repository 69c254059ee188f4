//! Jobs, clusters and the slot-scaling rules.
//!
//! Durations follow the fluid model: a stage's work is `duration × demand`
//! slot-time units, so running it on `alloc` slots takes
//! `duration × demand / alloc`. The discrete wave model is available through
//! [`wave_duration`] for sensitivity studies only.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("invalid allocation {alloc_map}x{alloc_reduce}: both stages need at least one slot")]
    InvalidAllocation { alloc_map: u32, alloc_reduce: u32 },
    #[error("invalid cluster {map_slots}x{reduce_slots}: both stages need at least one slot")]
    InvalidCluster { map_slots: u32, reduce_slots: u32 },
    #[error("scaling factor {factor} does not map {slots} slots to a positive integer")]
    NonIntegralScale { factor: Rational, slots: u32 },
}

/// One problem found by [`validate_workload`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldViolation {
    /// `None` for workload-level problems (e.g. the cluster itself).
    pub job_id: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.job_id {
            Some(id) => write!(f, "job `{}`: {}: {}", id, self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub violations: Vec<FieldViolation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCluster")]
pub struct ClusterConfig {
    map_slots: u32,
    reduce_slots: u32,
}

#[derive(Deserialize)]
struct RawCluster {
    map_slots: u32,
    reduce_slots: u32,
}

impl TryFrom<RawCluster> for ClusterConfig {
    type Error = WorkloadError;
    fn try_from(raw: RawCluster) -> Result<Self, Self::Error> {
        ClusterConfig::new(raw.map_slots, raw.reduce_slots)
    }
}

impl ClusterConfig {
    pub fn new(map_slots: u32, reduce_slots: u32) -> Result<Self, WorkloadError> {
        if map_slots == 0 || reduce_slots == 0 {
            return Err(WorkloadError::InvalidCluster {
                map_slots,
                reduce_slots,
            });
        }
        Ok(ClusterConfig {
            map_slots,
            reduce_slots,
        })
    }

    pub fn map_slots(&self) -> u32 {
        self.map_slots
    }

    pub fn reduce_slots(&self) -> u32 {
        self.reduce_slots
    }

    /// Map-to-reduce slot ratio ρ.
    pub fn rho(&self) -> Rational {
        Rational::new(self.map_slots as i128, self.reduce_slots as i128)
    }

    /// The cluster whose slot counts are this one's divided by `factor`, so
    /// that fluid durations on it are `factor` times longer.
    pub fn shrunk_by(&self, factor: Rational) -> Result<Self, WorkloadError> {
        let shrink = |slots: u32| {
            if factor.is_zero() || factor.is_negative() {
                return Err(WorkloadError::NonIntegralScale { factor, slots });
            }
            let scaled = Rational::from(slots) / factor;
            if !scaled.is_integer() || scaled.numer() < 1 || scaled.numer() > u32::MAX as i128 {
                return Err(WorkloadError::NonIntegralScale { factor, slots });
            }
            Ok(scaled.numer() as u32)
        };
        ClusterConfig::new(shrink(self.map_slots)?, shrink(self.reduce_slots)?)
    }
}

impl fmt::Display for ClusterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.map_slots, self.reduce_slots)
    }
}

/// A job's stage demands and reference durations (at its own demand).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    pub map_demand: u32,
    pub reduce_demand: u32,
    pub map_duration: Rational,
    pub reduce_duration: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_tasks: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduce_tasks: Option<Vec<Rational>>,
}

impl JobSpec {
    pub fn new(
        id: impl Into<String>,
        map_demand: u32,
        reduce_demand: u32,
        map_duration: Rational,
        reduce_duration: Rational,
    ) -> Self {
        JobSpec {
            id: id.into(),
            map_demand,
            reduce_demand,
            map_duration,
            reduce_duration,
            map_tasks: None,
            reduce_tasks: None,
        }
    }

    /// Builds a job from per-task times; stage durations are derived with
    /// the fluid rule at the given demands.
    pub fn with_tasks(
        id: impl Into<String>,
        map_demand: u32,
        reduce_demand: u32,
        map_tasks: Vec<Rational>,
        reduce_tasks: Vec<Rational>,
    ) -> Self {
        let map_duration = fluid_or_zero(&map_tasks, map_demand);
        let reduce_duration = fluid_or_zero(&reduce_tasks, reduce_demand);
        JobSpec {
            id: id.into(),
            map_demand,
            reduce_demand,
            map_duration,
            reduce_duration,
            map_tasks: Some(map_tasks),
            reduce_tasks: Some(reduce_tasks),
        }
    }

    pub fn has_tasks(&self) -> bool {
        self.map_tasks.is_some() && self.reduce_tasks.is_some()
    }

    /// Total map work in slot-time units.
    pub fn map_work(&self) -> Rational {
        self.map_duration * Rational::from(self.map_demand)
    }

    /// Total reduce work in slot-time units.
    pub fn reduce_work(&self) -> Rational {
        self.reduce_duration * Rational::from(self.reduce_demand)
    }

    /// Allocation of `min(demand, capacity)` per stage, rescaled.
    pub fn clamped_to(&self, cluster: &ClusterConfig) -> ScaledJob {
        let alloc_map = self.map_demand.min(cluster.map_slots()).max(1);
        let alloc_reduce = self.reduce_demand.min(cluster.reduce_slots()).max(1);
        scale_durations(self, alloc_map, alloc_reduce).expect("allocation is positive")
    }

    /// Allocation of the entire cluster to both stages.
    pub fn at_full(&self, cluster: &ClusterConfig) -> ScaledJob {
        scale_durations(self, cluster.map_slots(), cluster.reduce_slots())
            .expect("cluster slots are positive")
    }
}

fn fluid_or_zero(tasks: &[Rational], slots: u32) -> Rational {
    if slots == 0 {
        Rational::zero()
    } else {
        duration_from_tasks(tasks, slots).expect("slots checked")
    }
}

/// A job resized to a concrete slot allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledJob {
    pub id: String,
    pub alloc_map: u32,
    pub alloc_reduce: u32,
    pub eff_map_duration: Rational,
    pub eff_reduce_duration: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub cluster: ClusterConfig,
    pub jobs: Vec<JobSpec>,
}

impl Workload {
    pub fn new(cluster: ClusterConfig, jobs: Vec<JobSpec>) -> Self {
        Workload { cluster, jobs }
    }

    pub fn job(&self, id: &str) -> Option<&JobSpec> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn with_cluster(&self, cluster: ClusterConfig) -> Workload {
        Workload {
            cluster,
            jobs: self.jobs.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let violations = collect_violations(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations })
        }
    }
}

/// Resizes a job to `alloc_map × alloc_reduce` slots under the fluid rule.
pub fn scale_durations(
    job: &JobSpec,
    alloc_map: u32,
    alloc_reduce: u32,
) -> Result<ScaledJob, WorkloadError> {
    if alloc_map == 0 || alloc_reduce == 0 {
        return Err(WorkloadError::InvalidAllocation {
            alloc_map,
            alloc_reduce,
        });
    }
    Ok(ScaledJob {
        id: job.id.clone(),
        alloc_map,
        alloc_reduce,
        eff_map_duration: job.map_duration.scale(job.map_demand as u64, alloc_map as u64),
        eff_reduce_duration: job
            .reduce_duration
            .scale(job.reduce_demand as u64, alloc_reduce as u64),
    })
}

/// Fluid stage duration of a task set on `slots` slots. No tasks means zero.
pub fn duration_from_tasks(task_times: &[Rational], slots: u32) -> Result<Rational, WorkloadError> {
    if slots == 0 {
        return Err(WorkloadError::InvalidAllocation {
            alloc_map: slots,
            alloc_reduce: slots,
        });
    }
    let total: Rational = task_times.iter().sum();
    Ok(total / Rational::from(slots))
}

/// Stage length when tasks run in whole waves: tasks are dealt in order to
/// the earliest-free slot. Uniform tasks give `t × ceil(tasks / slots)`.
pub fn wave_duration(task_times: &[Rational], slots: u32) -> Result<Rational, WorkloadError> {
    if slots == 0 {
        return Err(WorkloadError::InvalidAllocation {
            alloc_map: slots,
            alloc_reduce: slots,
        });
    }
    let width = (slots as usize).min(task_times.len().max(1));
    let mut free_at = vec![Rational::zero(); width];
    for &t in task_times {
        let (slot, _) = free_at
            .iter()
            .enumerate()
            .min_by_key(|&(i, at)| (*at, i))
            .expect("at least one slot");
        free_at[slot] += t;
    }
    Ok(free_at.into_iter().max().unwrap_or_default())
}

/// Wave-model counterpart of [`scale_durations`]. Jobs without task lists are
/// treated as `demand` tasks each lasting the reference duration.
pub fn scale_durations_waves(
    job: &JobSpec,
    alloc_map: u32,
    alloc_reduce: u32,
) -> Result<ScaledJob, WorkloadError> {
    if alloc_map == 0 || alloc_reduce == 0 {
        return Err(WorkloadError::InvalidAllocation {
            alloc_map,
            alloc_reduce,
        });
    }
    let stage = |tasks: &Option<Vec<Rational>>, demand: u32, duration: Rational, alloc: u32| {
        match tasks {
            Some(tasks) => wave_duration(tasks, alloc),
            None => {
                let waves = (demand as u64).div_ceil(alloc as u64);
                Ok(duration.scale(waves, 1))
            }
        }
    };
    Ok(ScaledJob {
        id: job.id.clone(),
        alloc_map,
        alloc_reduce,
        eff_map_duration: stage(&job.map_tasks, job.map_demand, job.map_duration, alloc_map)?,
        eff_reduce_duration: stage(
            &job.reduce_tasks,
            job.reduce_demand,
            job.reduce_duration,
            alloc_reduce,
        )?,
    })
}

fn collect_violations(w: &Workload) -> Vec<FieldViolation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for job in &w.jobs {
        let mut push = |field: &str, message: String| {
            out.push(FieldViolation {
                job_id: Some(job.id.clone()),
                field: field.to_owned(),
                message,
            })
        };
        if job.id.trim().is_empty() {
            push("id", "job id must not be empty".into());
        }
        if !seen.insert(job.id.as_str()) {
            push("id", "duplicate job id".into());
        }
        if job.map_demand == 0 {
            push("map_demand", "must be at least 1".into());
        }
        if job.reduce_demand == 0 {
            push("reduce_demand", "must be at least 1".into());
        }
        if job.map_duration.is_negative() {
            push("map_duration", format!("must be non-negative, got {}", job.map_duration));
        }
        if job.reduce_duration.is_negative() {
            push(
                "reduce_duration",
                format!("must be non-negative, got {}", job.reduce_duration),
            );
        }
        for (field, tasks, demand, duration) in [
            ("map_tasks", &job.map_tasks, job.map_demand, job.map_duration),
            ("reduce_tasks", &job.reduce_tasks, job.reduce_demand, job.reduce_duration),
        ] {
            let Some(tasks) = tasks else { continue };
            if let Some(bad) = tasks.iter().find(|t| t.is_negative()) {
                push(field, format!("task times must be non-negative, got {bad}"));
                continue;
            }
            if demand == 0 {
                continue;
            }
            let expected = fluid_or_zero(tasks, demand);
            if expected != duration {
                push(
                    field,
                    format!("tasks imply duration {expected} at demand {demand}, but {duration} was given"),
                );
            }
        }
    }
    out
}

/// Checks every job invariant and returns the workload unchanged when all
/// hold. Demands above cluster capacity are legal.
pub fn validate_workload(w: Workload) -> Result<Workload, ValidationError> {
    w.validate()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn int(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn scaling_five_job_j3_to_full_cluster() {
        let j3 = JobSpec::new("J3", 20, 20, int(30), int(4));
        let s = scale_durations(&j3, 30, 30).unwrap();
        assert_eq!((s.eff_map_duration, s.eff_reduce_duration), (int(20), q(8, 3)));
    }

    #[test]
    fn identity_allocation_is_identity() {
        let j1 = JobSpec::new("J1", 30, 30, int(4), int(5));
        let s = scale_durations(&j1, 30, 30).unwrap();
        assert_eq!((s.eff_map_duration, s.eff_reduce_duration), (int(4), int(5)));
    }

    #[test]
    fn scaling_two_job_j2_to_ten_slots() {
        let j2 = JobSpec::new("J2", 8, 1, int(11), int(15));
        let s = scale_durations(&j2, 10, 10).unwrap();
        assert_eq!((s.eff_map_duration, s.eff_reduce_duration), (q(44, 5), q(3, 2)));
    }

    #[test]
    fn zero_allocation_rejected() {
        let j = JobSpec::new("J", 1, 1, int(1), int(1));
        assert!(matches!(
            scale_durations(&j, 0, 1),
            Err(WorkloadError::InvalidAllocation { .. })
        ));
        assert!(scale_durations(&j, 1, 0).is_err());
    }

    #[test]
    fn clamping_over_demand_reproduces_failure_case() {
        // J1 wants 10 map slots; only 8 remain after a node failure
        let j1 = JobSpec::new("J1", 10, 1, int(9), int(10));
        let cluster = ClusterConfig::new(8, 8).unwrap();
        let s = j1.clamped_to(&cluster);
        assert_eq!(s.alloc_map, 8);
        assert_eq!(s.eff_map_duration, q(45, 4));
        assert_eq!(s.eff_reduce_duration, int(10));
    }

    #[test]
    fn task_durations() {
        assert_eq!(duration_from_tasks(&[int(9); 10], 10).unwrap(), int(9));
        assert_eq!(duration_from_tasks(&[int(5)], 1).unwrap(), int(5));
        assert_eq!(duration_from_tasks(&[int(2); 4], 2).unwrap(), int(4));
        assert_eq!(duration_from_tasks(&[], 3).unwrap(), int(0));
        assert!(duration_from_tasks(&[int(1)], 0).is_err());
    }

    #[test]
    fn wave_model_rounds_up_to_whole_waves() {
        assert_eq!(wave_duration(&[int(3); 7], 3).unwrap(), int(9));
        assert_eq!(wave_duration(&[int(3); 6], 3).unwrap(), int(6));
        assert_eq!(wave_duration(&[], 3).unwrap(), int(0));
        // J3 of five-job example as 20 tasks of 30 on 30 slots stays one wave
        let j3 = JobSpec::new("J3", 20, 20, int(30), int(4));
        let w = scale_durations_waves(&j3, 30, 30).unwrap();
        assert_eq!((w.eff_map_duration, w.eff_reduce_duration), (int(30), int(4)));
        let w = scale_durations_waves(&j3, 8, 8).unwrap();
        assert_eq!((w.eff_map_duration, w.eff_reduce_duration), (int(90), int(12)));
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

    #[test]
    fn five_job_validates() {
        assert!(validate_workload(five_job()).is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut w = five_job();
        w.jobs[1].id = "J1".into();
        let err = validate_workload(w).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].field, "id");
        assert_eq!(err.violations[0].job_id.as_deref(), Some("J1"));
    }

    #[test]
    fn zero_demand_rejected() {
        let mut w = five_job();
        w.jobs[2].map_demand = 0;
        let err = validate_workload(w).unwrap_err();
        assert_eq!(err.violations[0].field, "map_demand");
        assert_eq!(err.violations[0].job_id.as_deref(), Some("J3"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut w = five_job();
        w.jobs[0].reduce_duration = int(-1);
        w.jobs[3].reduce_demand = 0;
        w.jobs[4].map_tasks = Some(vec![int(1)]);
        let err = validate_workload(w).unwrap_err();
        let fields: Vec<_> = err.violations.iter().map(|v| v.field.as_str()).collect();
        assert_eq!(fields, ["reduce_duration", "reduce_demand", "map_tasks"]);
    }

    #[test]
    fn consistent_tasks_accepted() {
        let j = JobSpec::with_tasks("J1", 10, 1, vec![int(9); 10], vec![int(10)]);
        assert_eq!(j.map_duration, int(9));
        assert_eq!(j.reduce_duration, int(10));
        let w = Workload::new(ClusterConfig::new(10, 10).unwrap(), vec![j]);
        assert!(w.validate().is_ok());
    }

    #[test]
    fn over_capacity_demand_is_not_a_validation_error() {
        let w = Workload::new(
            ClusterConfig::new(4, 4).unwrap(),
            vec![JobSpec::new("big", 100, 100, int(1), int(1))],
        );
        assert!(w.validate().is_ok());
    }

    #[test]
    fn cluster_shrinking() {
        let c = ClusterConfig::new(10, 10).unwrap();
        assert_eq!(c.shrunk_by(q(10, 8)).unwrap(), ClusterConfig::new(8, 8).unwrap());
        assert_eq!(c.shrunk_by(q(1, 2)).unwrap(), ClusterConfig::new(20, 20).unwrap());
        assert!(c.shrunk_by(int(3)).is_err());
        assert!(c.shrunk_by(int(0)).is_err());
        assert!(ClusterConfig::new(0, 3).is_err());
        assert_eq!(c.rho(), int(1));
    }
}

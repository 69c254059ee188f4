//! Workload files.
//!
//! A workload is a TOML document:
//!
//! ```toml
//! [cluster]
//! map_slots = 30
//! reduce_slots = 30
//!
//! [[jobs]]
//! id = "J1"
//! map_demand = 30
//! reduce_demand = 30
//! map_duration = "4"        # integers, decimals ("8.8") or "p/q"
//! reduce_duration = "5"
//! # map_tasks = ["9", "9"]  # optional per-task times
//!
//! [balanced_pools]          # optional pinned BalancedPools configuration
//! first_pool = { map_slots = 10, reduce_slots = 10 }
//! assignment = [["J1", "J2", "J5"], ["J3", "J4"]]
//! ```
//!
//! When task times are given the stage duration may be omitted; it is then
//! derived at the job's demand. Written files always carry exact `p/q` text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::schedulers::PinnedPools;
use crate::workload::{ClusterConfig, FieldViolation, JobSpec, ValidationError, Workload};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    map_slots: i64,
    reduce_slots: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    id: String,
    map_demand: i64,
    reduce_demand: i64,
    map_duration: Option<Rational>,
    reduce_duration: Option<Rational>,
    map_tasks: Option<Vec<Rational>>,
    reduce_tasks: Option<Vec<Rational>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPinned {
    first_pool: RawCluster,
    assignment: [Vec<String>; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    cluster: RawCluster,
    #[serde(default)]
    jobs: Vec<RawJob>,
    balanced_pools: Option<RawPinned>,
}

#[derive(Serialize)]
struct OutDocument<'a> {
    cluster: &'a ClusterConfig,
    jobs: &'a [JobSpec],
    #[serde(skip_serializing_if = "Option::is_none")]
    balanced_pools: Option<&'a PinnedPools>,
}

/// A parsed and validated workload file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadDocument {
    pub workload: Workload,
    pub pinned_pools: Option<PinnedPools>,
}

fn violation(job_id: Option<&str>, field: &str, message: impl Into<String>) -> FieldViolation {
    FieldViolation {
        job_id: job_id.map(str::to_owned),
        field: field.to_owned(),
        message: message.into(),
    }
}

fn slot_count(value: i64, job_id: Option<&str>, field: &str, out: &mut Vec<FieldViolation>) -> u32 {
    match u32::try_from(value) {
        Ok(v) if v >= 1 => v,
        Ok(_) => {
            out.push(violation(job_id, field, "must be at least 1"));
            0
        }
        Err(_) => {
            let msg = if value < 0 { "must be at least 1" } else { "is too large" };
            out.push(violation(job_id, field, format!("{msg}, got {value}")));
            0
        }
    }
}

fn cluster_from(raw: &RawCluster, prefix: &str, out: &mut Vec<FieldViolation>) -> Option<ClusterConfig> {
    let m = slot_count(raw.map_slots, None, &format!("{prefix}.map_slots"), out);
    let r = slot_count(raw.reduce_slots, None, &format!("{prefix}.reduce_slots"), out);
    ClusterConfig::new(m, r).ok()
}

impl WorkloadDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let raw: RawDocument = toml::from_str(text).map_err(|e| FormatError::Parse(e.to_string()))?;
        let mut problems = Vec::new();
        let cluster = cluster_from(&raw.cluster, "cluster", &mut problems);

        let mut jobs = Vec::with_capacity(raw.jobs.len());
        for job in raw.jobs {
            let id = Some(job.id.as_str());
            let map_demand = slot_count(job.map_demand, id, "map_demand", &mut problems);
            let reduce_demand = slot_count(job.reduce_demand, id, "reduce_demand", &mut problems);
            let mut duration = |given: Option<Rational>, tasks: &Option<Vec<Rational>>, demand: u32, field: &str| {
                match (given, tasks) {
                    (Some(d), _) => d,
                    (None, Some(tasks)) if demand > 0 => tasks.iter().sum::<Rational>() / Rational::from(demand),
                    (None, Some(_)) => Rational::zero(),
                    (None, None) => {
                        problems.push(violation(id, field, "missing (give a duration or task times)"));
                        Rational::zero()
                    }
                }
            };
            let map_duration = duration(job.map_duration, &job.map_tasks, map_demand, "map_duration");
            let reduce_duration = duration(job.reduce_duration, &job.reduce_tasks, reduce_demand, "reduce_duration");
            jobs.push(JobSpec {
                id: job.id,
                map_demand,
                reduce_demand,
                map_duration,
                reduce_duration,
                map_tasks: job.map_tasks,
                reduce_tasks: job.reduce_tasks,
            });
        }

        let pinned_pools = raw.balanced_pools.and_then(|p| {
            cluster_from(&p.first_pool, "balanced_pools.first_pool", &mut problems).map(|first_pool| PinnedPools {
                first_pool,
                assignment: p.assignment,
            })
        });

        let Some(cluster) = cluster else {
            return Err(ValidationError { violations: problems }.into());
        };
        let workload = Workload::new(cluster, jobs);
        if let Err(e) = workload.validate() {
            problems.extend(e.violations);
        }
        if !problems.is_empty() {
            return Err(ValidationError { violations: problems }.into());
        }
        Ok(WorkloadDocument { workload, pinned_pools })
    }

    pub fn to_toml(&self) -> String {
        to_toml(&self.workload, self.pinned_pools.as_ref())
    }
}

pub fn to_toml(workload: &Workload, pinned: Option<&PinnedPools>) -> String {
    let doc = OutDocument {
        cluster: &workload.cluster,
        jobs: &workload.jobs,
        balanced_pools: pinned,
    };
    toml::to_string(&doc).expect("workload serializes to TOML")
}

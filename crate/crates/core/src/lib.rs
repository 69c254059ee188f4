//! Two-stage flow-shop scheduling for MapReduce-style batch workloads.
//!
//! The crate computes job orders that minimize the makespan of a batch
//! (UAAS: give every job the whole cluster, then apply Johnson's rule),
//! builds the MK_JR and BalancedPools baselines, replays any schedule in a
//! slot-constrained FIFO simulator, and checks results against a brute-force
//! oracle. All times are exact rationals.

pub mod analysis;
pub mod cli;
pub mod format;
pub mod generate;
pub mod johnson;
pub mod rational;
pub mod schedulers;
pub mod simulator;
pub mod workload;

pub use johnson::{
    closed_form_makespan, johnson_order, pipeline_completion_times, FlowJob, MakespanBreakdown,
    OrderedSequence,
};
pub use rational::Rational;
pub use schedulers::{
    balanced_pools_schedule, balanced_pools_schedule_with, fix_pools_and_assignment,
    mk_jr_schedule, uaas_schedule, Policy, PoolPlan, Schedule, SplitGrid,
};
pub use simulator::{emit_gantt, gantt_csv, simulate_fifo, verify_timeline, Stage, StageRun, Timeline};
pub use workload::{
    duration_from_tasks, scale_durations, validate_workload, ClusterConfig, JobSpec, ScaledJob,
    Workload,
};

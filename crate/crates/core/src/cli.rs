//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    all_slots_schedule, brute_force_best_order, compare_report, full_cluster_jobs, simulate_checked,
    stability_check, AnalysisError,
};
use crate::format::{to_toml, FormatError, WorkloadDocument};
use crate::generate::{generate_workload, GenerateConfig, GenerateError};
use crate::johnson::{closed_form_makespan, johnson_order};
use crate::rational::{Rational, RationalText};
use crate::schedulers::{
    balanced_pools_schedule, fix_pools_and_assignment, mk_jr_schedule, uaas_schedule, PoolPlan, Schedule,
    ScheduleError,
};
use crate::simulator::{gantt_csv, SimulationError};
use crate::workload::{scale_durations_waves, ClusterConfig, ValidationError, WorkloadError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", .path.display())]
    Invalid { path: PathBuf, source: ValidationError },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotFound(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Invalid { .. } => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "makespan-lab", version, about = "Makespan-minimizing schedules for two-stage batch jobs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    Uaas,
    Mkjr,
    /// BalancedPools; uses the file's pinned pools when present.
    Pools,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Io {
    /// Workload file (TOML).
    #[arg(long, short)]
    pub workload: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the job order and slot allocations of a policy.
    Schedule {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "uaas")]
        policy: PolicyChoice,
    },
    /// Replay a policy's schedule and print the Gantt chart.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "uaas")]
        policy: PolicyChoice,
        /// Stage lengths from whole task waves instead of the fluid rule.
        #[arg(long)]
        waves: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: SimulateFormat,
    },
    /// Simulate every policy and report makespans and gaps.
    Compare {
        #[command(flatten)]
        io: Io,
    },
    /// Try every map/reduce split of a slot budget for one job order.
    SweepRatio {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        total_slots: u32,
        /// Policy whose order is kept fixed.
        #[arg(long, value_enum, default_value = "uaas")]
        policy: PolicyChoice,
    },
    /// Exhaustive search for the best order on the whole cluster.
    Oracle {
        #[command(flatten)]
        io: Io,
    },
    /// Write a random workload.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1")]
        duration_min: Rational,
        #[arg(long, default_value = "50")]
        duration_max: Rational,
        #[arg(long, default_value_t = 1)]
        demand_min: u32,
        #[arg(long, default_value_t = u32::MAX)]
        demand_max: u32,
        #[arg(long, default_value_t = 30)]
        map_slots: u32,
        #[arg(long, default_value_t = 30)]
        reduce_slots: u32,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check whether the orders survive shrinking the cluster.
    Stability {
        #[command(flatten)]
        io: Io,
        /// Shrink factor; repeat for several.
        #[arg(long = "scale", required = true)]
        scales: Vec<Rational>,
    },
}

#[derive(Serialize)]
struct JobOut<'a> {
    id: &'a str,
    alloc_map: u32,
    alloc_reduce: u32,
    eff_map_duration: RationalText,
    eff_reduce_duration: RationalText,
}

#[derive(Serialize)]
struct PoolOut<'a> {
    map_slots: u32,
    reduce_slots: u32,
    predicted_makespan: Option<RationalText>,
    jobs: Vec<JobOut<'a>>,
}

#[derive(Serialize)]
struct ScheduleOut<'a> {
    policy: String,
    map_slots: u32,
    reduce_slots: u32,
    order: Vec<&'a str>,
    predicted_makespan: Option<RationalText>,
    pools: Vec<PoolOut<'a>>,
}

impl<'a> ScheduleOut<'a> {
    fn new(s: &'a Schedule) -> Self {
        ScheduleOut {
            policy: s.policy.to_string(),
            map_slots: s.cluster.map_slots(),
            reduce_slots: s.cluster.reduce_slots(),
            order: s.order(),
            predicted_makespan: s.predicted_makespan.map(Into::into),
            pools: s.pools.iter().map(pool_out).collect(),
        }
    }
}

fn pool_out(p: &PoolPlan) -> PoolOut<'_> {
    PoolOut {
        map_slots: p.cluster.map_slots(),
        reduce_slots: p.cluster.reduce_slots(),
        predicted_makespan: p.predicted_makespan.map(Into::into),
        jobs: p
            .jobs
            .iter()
            .map(|j| JobOut {
                id: &j.id,
                alloc_map: j.alloc_map,
                alloc_reduce: j.alloc_reduce,
                eff_map_duration: j.eff_map_duration.into(),
                eff_reduce_duration: j.eff_reduce_duration.into(),
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct SimulationOut<'a> {
    schedule: ScheduleOut<'a>,
    makespan: RationalText,
    timeline_violations: usize,
    completion_times: Vec<(&'a str, RationalText)>,
}

#[derive(Serialize)]
struct OracleOut {
    order: Vec<String>,
    makespan: RationalText,
    uaas_order: Vec<String>,
    uaas_makespan: RationalText,
    matches_uaas: bool,
}

pub fn load_workload(path: &Path) -> Result<WorkloadDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => CliError::NotFound(path.to_owned()),
        _ => CliError::Io {
            path: path.to_owned(),
            source,
        },
    })?;
    WorkloadDocument::parse(&text).map_err(|e| match e {
        FormatError::Parse(message) => CliError::Parse {
            path: path.to_owned(),
            message,
        },
        FormatError::Invalid(source) => CliError::Invalid {
            path: path.to_owned(),
            source,
        },
    })
}

fn build_schedule(doc: &WorkloadDocument, policy: PolicyChoice) -> Result<Schedule, CliError> {
    let w = &doc.workload;
    Ok(match policy {
        PolicyChoice::Uaas => uaas_schedule(w),
        PolicyChoice::Mkjr => mk_jr_schedule(w),
        PolicyChoice::Pools => match &doc.pinned_pools {
            Some(p) => fix_pools_and_assignment(w, p.first_pool, [&p.assignment[0], &p.assignment[1]])?,
            None => balanced_pools_schedule(w)?,
        },
    })
}

/// Re-derives every stage length from whole task waves at the same allocation.
fn with_waves(doc: &WorkloadDocument, mut schedule: Schedule) -> Result<Schedule, CliError> {
    for pool in &mut schedule.pools {
        for job in &mut pool.jobs {
            let spec = doc.workload.job(&job.id).expect("scheduled job exists");
            *job = scale_durations_waves(spec, job.alloc_map, job.alloc_reduce)?;
        }
        pool.predicted_makespan = None;
    }
    schedule.predicted_makespan = None;
    Ok(schedule)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes to JSON");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        }),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Runs one command, writing to `stdout` unless `--out` is given.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Schedule { io, policy } => {
            let doc = load_workload(&io.workload)?;
            let schedule = build_schedule(&doc, policy)?;
            emit(io.out.as_deref(), &json(&ScheduleOut::new(&schedule)), stdout)
        }
        Command::Simulate {
            io,
            policy,
            waves,
            format,
        } => {
            let doc = load_workload(&io.workload)?;
            let mut schedule = build_schedule(&doc, policy)?;
            if waves {
                schedule = with_waves(&doc, schedule)?;
            }
            let (timeline, violations) = simulate_checked(&schedule)?;
            let text = match format {
                SimulateFormat::Csv => gantt_csv(&timeline),
                SimulateFormat::Json => {
                    let done = timeline.completion_times();
                    let completion_times = schedule
                        .order()
                        .into_iter()
                        .map(|id| (id, done[id].into()))
                        .collect();
                    json(&SimulationOut {
                        schedule: ScheduleOut::new(&schedule),
                        makespan: timeline.makespan.into(),
                        timeline_violations: violations,
                        completion_times,
                    })
                }
            };
            emit(io.out.as_deref(), &text, stdout)
        }
        Command::Compare { io } => {
            let doc = load_workload(&io.workload)?;
            let report = compare_report(&doc.workload, doc.pinned_pools.as_ref())?;
            emit(io.out.as_deref(), &json(&report), stdout)
        }
        Command::SweepRatio {
            io,
            total_slots,
            policy,
        } => {
            let doc = load_workload(&io.workload)?;
            let schedule = build_schedule(&doc, policy)?;
            let order = schedule.order();
            let result = crate::analysis::ratio_sweep(&doc.workload, total_slots, &order)?;
            emit(io.out.as_deref(), &json(&result), stdout)
        }
        Command::Oracle { io } => {
            let doc = load_workload(&io.workload)?;
            let jobs = full_cluster_jobs(&doc.workload);
            let (best, makespan) = brute_force_best_order(&jobs)?;
            let uaas = johnson_order(&jobs);
            let uaas_makespan = closed_form_makespan(&uaas).makespan;
            // The UAAS order replayed in the simulator, as a cross-check.
            let replay = all_slots_schedule(&doc.workload, doc.workload.cluster, uaas.job_ids())?;
            let (timeline, _) = simulate_checked(&replay)?;
            debug_assert_eq!(timeline.makespan, uaas_makespan);
            let out = OracleOut {
                order: best.job_ids().to_vec(),
                makespan: makespan.into(),
                uaas_order: uaas.job_ids().to_vec(),
                uaas_makespan: uaas_makespan.into(),
                matches_uaas: makespan == uaas_makespan,
            };
            emit(io.out.as_deref(), &json(&out), stdout)
        }
        Command::Gen {
            seed,
            n,
            duration_min,
            duration_max,
            demand_min,
            demand_max,
            map_slots,
            reduce_slots,
            out,
        } => {
            let cluster = ClusterConfig::new(map_slots, reduce_slots)?;
            let config = GenerateConfig::new(seed, n, cluster)
                .durations(duration_min, duration_max)
                .demands(demand_min, demand_max);
            let workload = generate_workload(&config)?;
            emit(out.as_deref(), &to_toml(&workload, None), stdout)
        }
        Command::Stability { io, scales } => {
            let doc = load_workload(&io.workload)?;
            let report = stability_check(&doc.workload, &scales)?;
            emit(io.out.as_deref(), &json(&report), stdout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn gen_is_reproducible() {
        let args = ["makespan-lab", "gen", "--seed", "9", "--n", "4", "--map-slots", "6", "--reduce-slots", "3"];
        let mut a = Vec::new();
        let mut b = Vec::new();
        run(Cli::parse_from(args), &mut a).unwrap();
        run(Cli::parse_from(args), &mut b).unwrap();
        assert_eq!(a, b);
        let doc = WorkloadDocument::parse(std::str::from_utf8(&a).unwrap()).unwrap();
        assert_eq!(doc.workload.jobs.len(), 4);
    }

    #[test]
    fn missing_file_exit_code() {
        let cli = Cli::parse_from(["makespan-lab", "compare", "--workload", "/nonexistent/x.workload"]);
        assert_eq!(run(cli, &mut Vec::new()).unwrap_err().exit_code(), 2);
    }
}

//! Discrete-event FIFO replay of a [`Schedule`] against finite slot pools.
//!
//! Each stage holds its full slot allocation from start to end (gang
//! allocation). Jobs enter each stage strictly in sequence order: a job that
//! does not fit blocks every job behind it, even if those would fit.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::rational::{Rational, DECIMAL_DIGITS};
use crate::schedulers::Schedule;
use crate::workload::ClusterConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Map,
    Reduce,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Map => "MAP",
            Stage::Reduce => "REDUCE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulationError {
    #[error("job `{job_id}` needs {needed} {stage} slots but pool {pool} has {capacity}")]
    Capacity {
        job_id: String,
        pool: usize,
        stage: Stage,
        needed: u32,
        capacity: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageRun {
    pub job_id: String,
    pub pool: usize,
    pub stage: Stage,
    pub start: Rational,
    pub end: Rational,
    pub slots_used: u32,
}

/// Slots in use from `at` until the next step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OccupancyStep {
    pub at: Rational,
    pub in_use: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Timeline {
    pub runs: Vec<StageRun>,
    pub makespan: Rational,
    /// Cluster-wide map slot occupancy, summed over pools.
    pub map_occupancy: Vec<OccupancyStep>,
    pub reduce_occupancy: Vec<OccupancyStep>,
}

impl Timeline {
    pub fn empty() -> Timeline {
        Timeline {
            runs: Vec::new(),
            makespan: Rational::zero(),
            map_occupancy: Vec::new(),
            reduce_occupancy: Vec::new(),
        }
    }

    pub fn run(&self, job_id: &str, stage: Stage) -> Option<&StageRun> {
        self.runs.iter().find(|r| r.job_id == job_id && r.stage == stage)
    }

    /// Completion time of each job's reduce stage.
    pub fn completion_times(&self) -> HashMap<&str, Rational> {
        self.runs
            .iter()
            .filter(|r| r.stage == Stage::Reduce)
            .map(|r| (r.job_id.as_str(), r.end))
            .collect()
    }

    fn from_runs(runs: Vec<StageRun>) -> Timeline {
        let makespan = runs.iter().map(|r| r.end).max().unwrap_or_default();
        let map_occupancy = occupancy(runs.iter().filter(|r| r.stage == Stage::Map));
        let reduce_occupancy = occupancy(runs.iter().filter(|r| r.stage == Stage::Reduce));
        Timeline {
            runs,
            makespan,
            map_occupancy,
            reduce_occupancy,
        }
    }
}

fn occupancy<'a>(runs: impl Iterator<Item = &'a StageRun>) -> Vec<OccupancyStep> {
    let mut delta: BTreeMap<Rational, i64> = BTreeMap::new();
    for r in runs.filter(|r| r.end > r.start) {
        *delta.entry(r.start).or_default() += r.slots_used as i64;
        *delta.entry(r.end).or_default() -= r.slots_used as i64;
    }
    let mut level = 0i64;
    let mut out: Vec<OccupancyStep> = Vec::new();
    for (at, d) in delta {
        level += d;
        if out.last().map(|s| s.in_use as i64) != Some(level) {
            out.push(OccupancyStep {
                at,
                in_use: level as u32,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Completion {
    at: Rational,
    seq: usize,
    stage: Stage,
    slots: u32,
}

/// Per-pool event loop state.
struct PoolSim<'a> {
    pool: usize,
    plan: &'a crate::schedulers::PoolPlan,
    now: Rational,
    events: BinaryHeap<Reverse<Completion>>,
    free_map: u32,
    free_reduce: u32,
    next_map: usize,
    next_reduce: usize,
    map_done: Vec<bool>,
    runs: Vec<StageRun>,
}

impl<'a> PoolSim<'a> {
    fn new(pool: usize, plan: &'a crate::schedulers::PoolPlan) -> Self {
        PoolSim {
            pool,
            plan,
            now: Rational::zero(),
            events: BinaryHeap::new(),
            free_map: plan.cluster.map_slots(),
            free_reduce: plan.cluster.reduce_slots(),
            next_map: 0,
            next_reduce: 0,
            map_done: vec![false; plan.jobs.len()],
            runs: Vec::new(),
        }
    }

    fn start(&mut self, seq: usize, stage: Stage) {
        let job = &self.plan.jobs[seq];
        let (slots, duration) = match stage {
            Stage::Map => (job.alloc_map, job.eff_map_duration),
            Stage::Reduce => (job.alloc_reduce, job.eff_reduce_duration),
        };
        match stage {
            Stage::Map => self.free_map -= slots,
            Stage::Reduce => self.free_reduce -= slots,
        }
        let end = self.now + duration;
        self.runs.push(StageRun {
            job_id: job.id.clone(),
            pool: self.pool,
            stage,
            start: self.now,
            end,
            slots_used: slots,
        });
        self.events.push(Reverse(Completion {
            at: end,
            seq,
            stage,
            slots,
        }));
    }

    /// Starts every stage that is at the head of its queue and fits.
    fn admit(&mut self) -> bool {
        let jobs = &self.plan.jobs;
        let mut started = false;
        while self.next_map < jobs.len() && jobs[self.next_map].alloc_map <= self.free_map {
            self.start(self.next_map, Stage::Map);
            self.next_map += 1;
            started = true;
        }
        while self.next_reduce < jobs.len()
            && self.map_done[self.next_reduce]
            && jobs[self.next_reduce].alloc_reduce <= self.free_reduce
        {
            self.start(self.next_reduce, Stage::Reduce);
            self.next_reduce += 1;
            started = true;
        }
        started
    }

    fn run(mut self) -> Vec<StageRun> {
        loop {
            // completions at `now` first, then admissions, until quiescent
            loop {
                let mut progressed = false;
                while let Some(Reverse(ev)) = self.events.peek().copied() {
                    if ev.at > self.now {
                        break;
                    }
                    self.events.pop();
                    match ev.stage {
                        Stage::Map => {
                            self.free_map += ev.slots;
                            self.map_done[ev.seq] = true;
                        }
                        Stage::Reduce => self.free_reduce += ev.slots,
                    }
                    progressed = true;
                }
                progressed |= self.admit();
                if !progressed {
                    break;
                }
            }
            match self.events.peek() {
                Some(Reverse(ev)) => self.now = ev.at,
                None => break,
            }
        }
        debug_assert_eq!(self.next_reduce, self.plan.jobs.len());
        self.runs
    }
}

/// Replays the schedule pool by pool and returns the resulting timeline.
pub fn simulate_fifo(schedule: &Schedule) -> Result<Timeline, SimulationError> {
    for (pool, plan) in schedule.pools.iter().enumerate() {
        for job in &plan.jobs {
            for (stage, needed, capacity) in [
                (Stage::Map, job.alloc_map, plan.cluster.map_slots()),
                (Stage::Reduce, job.alloc_reduce, plan.cluster.reduce_slots()),
            ] {
                if needed > capacity || needed == 0 {
                    return Err(SimulationError::Capacity {
                        job_id: job.id.clone(),
                        pool,
                        stage,
                        needed,
                        capacity,
                    });
                }
            }
        }
    }
    let runs = schedule
        .pools
        .iter()
        .enumerate()
        .flat_map(|(pool, plan)| PoolSim::new(pool, plan).run())
        .collect();
    Ok(Timeline::from_runs(runs))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TimelineViolation {
    /// Slots in use exceed capacity over `[from, to)`. `pool` is `None` for
    /// the cluster-wide check.
    Capacity {
        pool: Option<usize>,
        stage: Stage,
        from: Rational,
        to: Rational,
        in_use: u32,
        capacity: u32,
    },
    /// Reduce started before the job's own map ended.
    StageOrder { job_id: String },
    /// A job started a stage before the job ahead of it in its pool.
    Overtaking { job_id: String, stage: Stage },
    /// Run length or slot count disagrees with the schedule.
    Duration { job_id: String, stage: Stage },
    MissingRun { job_id: String, stage: Stage },
    DuplicateRun { job_id: String, stage: Stage },
    UnknownJob { job_id: String },
}

impl fmt::Display for TimelineViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimelineViolation::Capacity {
                pool,
                stage,
                from,
                to,
                in_use,
                capacity,
            } => {
                let scope = pool.map_or("cluster".to_owned(), |p| format!("pool {p}"));
                write!(f, "{scope}: {in_use} {stage} slots in use over [{from}, {to}) exceeds {capacity}")
            }
            TimelineViolation::StageOrder { job_id } => {
                write!(f, "job `{job_id}`: reduce starts before its map ends")
            }
            TimelineViolation::Overtaking { job_id, stage } => {
                write!(f, "job `{job_id}`: {stage} starts ahead of an earlier job")
            }
            TimelineViolation::Duration { job_id, stage } => {
                write!(f, "job `{job_id}`: {stage} run does not match its allocation")
            }
            TimelineViolation::MissingRun { job_id, stage } => {
                write!(f, "job `{job_id}`: no {stage} run")
            }
            TimelineViolation::DuplicateRun { job_id, stage } => {
                write!(f, "job `{job_id}`: more than one {stage} run")
            }
            TimelineViolation::UnknownJob { job_id } => {
                write!(f, "job `{job_id}` is not in the schedule")
            }
        }
    }
}

fn capacity_violations<'a>(
    runs: impl Iterator<Item = &'a StageRun>,
    pool: Option<usize>,
    stage: Stage,
    capacity: u32,
    out: &mut Vec<TimelineViolation>,
) {
    let runs: Vec<&StageRun> = runs.collect();
    let steps = occupancy(runs.iter().copied());
    let mut open: Option<(Rational, u32)> = None;
    for step in &steps {
        match (&mut open, step.in_use > capacity) {
            (None, true) => open = Some((step.at, step.in_use)),
            (Some((_, peak)), true) => *peak = (*peak).max(step.in_use),
            (Some((from, peak)), false) => {
                out.push(TimelineViolation::Capacity {
                    pool,
                    stage,
                    from: *from,
                    to: step.at,
                    in_use: *peak,
                    capacity,
                });
                open = None;
            }
            (None, false) => {}
        }
    }
}

/// Checks a timeline against its schedule and cluster. Returns every
/// violation found; an empty list means the timeline is valid.
pub fn verify_timeline(
    t: &Timeline,
    schedule: &Schedule,
    cluster: &ClusterConfig,
) -> Vec<TimelineViolation> {
    let mut out = Vec::new();

    let mut location: HashMap<&str, (usize, usize)> = HashMap::new();
    for (p, plan) in schedule.pools.iter().enumerate() {
        for (i, job) in plan.jobs.iter().enumerate() {
            location.insert(job.id.as_str(), (p, i));
        }
    }

    let mut by_key: HashMap<(&str, Stage), &StageRun> = HashMap::new();
    for run in &t.runs {
        let Some(&(p, i)) = location.get(run.job_id.as_str()) else {
            out.push(TimelineViolation::UnknownJob {
                job_id: run.job_id.clone(),
            });
            continue;
        };
        if by_key.insert((run.job_id.as_str(), run.stage), run).is_some() {
            out.push(TimelineViolation::DuplicateRun {
                job_id: run.job_id.clone(),
                stage: run.stage,
            });
        }
        let job = &schedule.pools[p].jobs[i];
        let (slots, duration) = match run.stage {
            Stage::Map => (job.alloc_map, job.eff_map_duration),
            Stage::Reduce => (job.alloc_reduce, job.eff_reduce_duration),
        };
        if run.pool != p || run.slots_used != slots || run.end - run.start != duration {
            out.push(TimelineViolation::Duration {
                job_id: run.job_id.clone(),
                stage: run.stage,
            });
        }
    }

    for plan in &schedule.pools {
        let mut prev_start: [Option<Rational>; 2] = [None, None];
        for job in &plan.jobs {
            let map = by_key.get(&(job.id.as_str(), Stage::Map));
            let reduce = by_key.get(&(job.id.as_str(), Stage::Reduce));
            for (k, stage, run) in [(0, Stage::Map, map), (1, Stage::Reduce, reduce)] {
                match run {
                    None => out.push(TimelineViolation::MissingRun {
                        job_id: job.id.clone(),
                        stage,
                    }),
                    Some(run) => {
                        if prev_start[k].is_some_and(|prev| run.start < prev) {
                            out.push(TimelineViolation::Overtaking {
                                job_id: job.id.clone(),
                                stage,
                            });
                        }
                        prev_start[k] = Some(run.start);
                    }
                }
            }
            if let (Some(m), Some(r)) = (map, reduce) {
                if r.start < m.end {
                    out.push(TimelineViolation::StageOrder {
                        job_id: job.id.clone(),
                    });
                }
            }
        }
    }

    for (p, plan) in schedule.pools.iter().enumerate() {
        for (stage, capacity) in [
            (Stage::Map, plan.cluster.map_slots()),
            (Stage::Reduce, plan.cluster.reduce_slots()),
        ] {
            let runs = t.runs.iter().filter(|r| r.pool == p && r.stage == stage);
            capacity_violations(runs, Some(p), stage, capacity, &mut out);
        }
    }
    if schedule.pools.len() > 1 {
        for (stage, capacity) in [
            (Stage::Map, cluster.map_slots()),
            (Stage::Reduce, cluster.reduce_slots()),
        ] {
            let runs = t.runs.iter().filter(|r| r.stage == stage);
            capacity_violations(runs, None, stage, capacity, &mut out);
        }
    }
    out
}

pub const GANTT_HEADER: &str = "job_id,stage,start_decimal,start_exact,end_decimal,end_exact,slots";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GanttRow {
    pub job_id: String,
    pub stage: Stage,
    pub start_decimal: String,
    pub start_exact: String,
    pub end_decimal: String,
    pub end_exact: String,
    pub slots: u32,
}

impl fmt::Display for GanttRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.job_id,
            self.stage,
            self.start_decimal,
            self.start_exact,
            self.end_decimal,
            self.end_exact,
            self.slots
        )
    }
}

/// One row per stage run, ordered by start time (then end, pool, stage).
pub fn emit_gantt(t: &Timeline) -> Vec<GanttRow> {
    let mut runs: Vec<&StageRun> = t.runs.iter().collect();
    runs.sort_by(|a, b| {
        (a.start, a.end, a.pool, a.stage, &a.job_id).cmp(&(b.start, b.end, b.pool, b.stage, &b.job_id))
    });
    runs.into_iter()
        .map(|r| GanttRow {
            job_id: r.job_id.clone(),
            stage: r.stage,
            start_decimal: r.start.to_decimal(DECIMAL_DIGITS),
            start_exact: r.start.to_string(),
            end_decimal: r.end.to_decimal(DECIMAL_DIGITS),
            end_exact: r.end.to_string(),
            slots: r.slots_used,
        })
        .collect()
}

/// Gantt rows as CSV text with [`GANTT_HEADER`].
pub fn gantt_csv(t: &Timeline) -> String {
    let mut out = String::from(GANTT_HEADER);
    out.push('\n');
    for row in emit_gantt(t) {
        out.push_str(&row.to_string());
        out.push('\n');
    }
    out
}

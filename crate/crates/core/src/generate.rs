//! Seeded random workloads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rational::Rational;
use crate::workload::{ClusterConfig, JobSpec, Workload};

/// Generated durations are multiples of `1 / DURATION_GRID`.
pub const DURATION_GRID: i128 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("job count must be at least 1")]
    NoJobs,
    #[error("empty duration range [{0}, {1}]")]
    EmptyDurationRange(Rational, Rational),
    #[error("duration range must be non-negative, got [{0}, {1}]")]
    NegativeDuration(Rational, Rational),
    #[error("demand range [{lo}, {hi}] has no value in 1..={capacity}")]
    EmptyDemandRange { lo: u32, hi: u32, capacity: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateConfig {
    pub seed: u64,
    pub n: usize,
    pub duration_range: (Rational, Rational),
    /// Clipped per stage to `1..=capacity`; only an upper end of 0 is empty.
    pub demand_range: (u32, u32),
    pub cluster: ClusterConfig,
}

impl GenerateConfig {
    pub fn new(seed: u64, n: usize, cluster: ClusterConfig) -> Self {
        GenerateConfig {
            seed,
            n,
            duration_range: (Rational::one(), Rational::from_integer(50)),
            demand_range: (1, u32::MAX),
            cluster,
        }
    }

    pub fn durations(mut self, lo: Rational, hi: Rational) -> Self {
        self.duration_range = (lo, hi);
        self
    }

    pub fn demands(mut self, lo: u32, hi: u32) -> Self {
        self.demand_range = (lo, hi);
        self
    }

    /// Every job demands the whole cluster.
    pub fn full_demand(self) -> Self {
        let top = self.cluster.map_slots().max(self.cluster.reduce_slots());
        self.demands(top, top)
    }
}

fn demand_bounds(range: (u32, u32), capacity: u32) -> Result<(u32, u32), GenerateError> {
    let lo = range.0.clamp(1, capacity);
    let hi = range.1.min(capacity);
    if lo > hi {
        return Err(GenerateError::EmptyDemandRange {
            lo: range.0,
            hi: range.1,
            capacity,
        });
    }
    Ok((lo, hi))
}

fn draw_duration(rng: &mut ChaCha8Rng, lo: Rational, hi: Rational) -> Rational {
    if lo == hi {
        return lo;
    }
    let grid = Rational::from_integer(DURATION_GRID);
    let (first, last) = ((lo * grid).ceil(), (hi * grid).floor());
    if first > last {
        return lo;
    }
    Rational::new(rng.gen_range(first..=last), DURATION_GRID)
}

/// Draws `n` jobs. Identical configs give identical workloads.
pub fn generate_workload(config: &GenerateConfig) -> Result<Workload, GenerateError> {
    if config.n == 0 {
        return Err(GenerateError::NoJobs);
    }
    let (lo, hi) = config.duration_range;
    if lo > hi {
        return Err(GenerateError::EmptyDurationRange(lo, hi));
    }
    if lo.is_negative() {
        return Err(GenerateError::NegativeDuration(lo, hi));
    }
    let map_bounds = demand_bounds(config.demand_range, config.cluster.map_slots())?;
    let reduce_bounds = demand_bounds(config.demand_range, config.cluster.reduce_slots())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jobs = (1..=config.n)
        .map(|i| {
            let map_demand = rng.gen_range(map_bounds.0..=map_bounds.1);
            let reduce_demand = rng.gen_range(reduce_bounds.0..=reduce_bounds.1);
            let map_duration = draw_duration(&mut rng, lo, hi);
            let reduce_duration = draw_duration(&mut rng, lo, hi);
            JobSpec::new(format!("J{i}"), map_demand, reduce_demand, map_duration, reduce_duration)
        })
        .collect();
    Ok(Workload::new(config.cluster, jobs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster() -> ClusterConfig {
        ClusterConfig::new(12, 6).unwrap()
    }

    #[test]
    fn same_seed_same_workload() {
        let c = GenerateConfig::new(42, 3, cluster());
        let a = generate_workload(&c).unwrap();
        assert_eq!(a, generate_workload(&c).unwrap());
        assert_eq!(a.jobs.len(), 3);
        assert_ne!(a, generate_workload(&GenerateConfig::new(43, 3, cluster())).unwrap());
    }

    #[test]
    fn values_stay_in_range() {
        let c = GenerateConfig::new(7, 200, cluster()).durations(Rational::new(1, 2), Rational::from_integer(9));
        let w = generate_workload(&c).unwrap();
        assert!(w.validate().is_ok());
        for j in &w.jobs {
            assert!((1..=12).contains(&j.map_demand));
            assert!((1..=6).contains(&j.reduce_demand));
            for d in [j.map_duration, j.reduce_duration] {
                assert!(d >= Rational::new(1, 2) && d <= Rational::from_integer(9));
                assert!(d.denom() <= 100);
            }
        }
    }

    #[test]
    fn degenerate_duration_range() {
        let five = Rational::from_integer(5);
        let w = generate_workload(&GenerateConfig::new(1, 4, cluster()).durations(five, five)).unwrap();
        assert!(w.jobs.iter().all(|j| j.map_duration == five && j.reduce_duration == five));
    }

    #[test]
    fn single_job() {
        let w = generate_workload(&GenerateConfig::new(1, 1, cluster())).unwrap();
        assert_eq!(w.jobs.len(), 1);
    }

    #[test]
    fn full_demand_uses_whole_cluster() {
        let w = generate_workload(&GenerateConfig::new(3, 5, cluster()).full_demand()).unwrap();
        assert!(w.jobs.iter().all(|j| j.map_demand == 12 && j.reduce_demand == 6));
    }

    #[test]
    fn bad_parameters() {
        let c = GenerateConfig::new(1, 0, cluster());
        assert_eq!(generate_workload(&c).unwrap_err(), GenerateError::NoJobs);
        let c = GenerateConfig::new(1, 2, cluster()).durations(Rational::from_integer(3), Rational::from_integer(2));
        assert!(matches!(generate_workload(&c), Err(GenerateError::EmptyDurationRange(..))));
        let c = GenerateConfig::new(1, 2, cluster()).demands(0, 0);
        assert!(matches!(generate_workload(&c), Err(GenerateError::EmptyDemandRange { capacity: 12, .. })));
        let c = GenerateConfig::new(1, 2, cluster()).demands(7, 9);
        let w = generate_workload(&c).unwrap();
        assert!(w.jobs.iter().all(|j| j.reduce_demand == 6 && (7..=9).contains(&j.map_demand)));
    }
}

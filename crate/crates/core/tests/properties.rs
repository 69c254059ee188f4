use itertools::Itertools;
use proptest::prelude::*;

use makespan_lab::analysis::{all_slots_schedule, brute_force_best_order, simulate_checked};
use makespan_lab::format::{to_toml, WorkloadDocument};
use makespan_lab::generate::{generate_workload, GenerateConfig};
use makespan_lab::{
    balanced_pools_schedule, closed_form_makespan, duration_from_tasks, johnson_order, mk_jr_schedule,
    pipeline_completion_times, scale_durations, simulate_fifo, uaas_schedule, verify_timeline, ClusterConfig,
    FlowJob, JobSpec, OrderedSequence, Rational, Schedule, Workload,
};

fn rational() -> impl Strategy<Value = Rational> {
    (0i128..=40, 1i128..=4).prop_map(|(n, d)| Rational::new(n, d))
}

fn flow_jobs(max: usize) -> impl Strategy<Value = Vec<FlowJob>> {
    prop::collection::vec((rational(), rational()), 1..=max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (m, r))| FlowJob::new(format!("J{}", i + 1), m, r))
            .collect()
    })
}

fn workload(max_jobs: usize) -> impl Strategy<Value = Workload> {
    (1u32..=8, 1u32..=8).prop_flat_map(move |(m, r)| {
        prop::collection::vec((1..=m, 1..=r, rational(), rational()), 1..=max_jobs).prop_map(move |jobs| {
            let cluster = ClusterConfig::new(m, r).unwrap();
            let jobs = jobs
                .into_iter()
                .enumerate()
                .map(|(i, (dm, dr, tm, tr))| JobSpec::new(format!("J{}", i + 1), dm, dr, tm, tr))
                .collect();
            Workload::new(cluster, jobs)
        })
    })
}

// Straight two-machine recurrence, written independently of the library.
fn recurrence(jobs: &[&FlowJob]) -> Rational {
    let mut map_end = Rational::zero();
    let mut done = Rational::zero();
    for j in jobs {
        map_end += j.map;
        done = done.max(map_end) + j.reduce;
    }
    done
}

fn permutation_optimum(jobs: &[FlowJob]) -> Rational {
    jobs.iter()
        .permutations(jobs.len())
        .map(|p| recurrence(&p))
        .min()
        .unwrap()
}

fn assert_clean(schedule: &Schedule) -> Rational {
    let t = simulate_fifo(schedule).unwrap();
    let violations = verify_timeline(&t, schedule, &schedule.cluster);
    assert!(violations.is_empty(), "{violations:?}");
    t.makespan
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn johnson_matches_exhaustive_search(jobs in flow_jobs(6)) {
        let best = permutation_optimum(&jobs);
        let johnson = closed_form_makespan(&johnson_order(&jobs)).makespan;
        prop_assert_eq!(johnson, best);
        let (order, brute) = brute_force_best_order(&jobs).unwrap();
        prop_assert_eq!(brute, best);
        prop_assert_eq!(closed_form_makespan(&order).makespan, best);
    }

    #[test]
    fn closed_form_equals_recurrence(jobs in flow_jobs(8)) {
        let seq = OrderedSequence::from_jobs(&jobs).unwrap();
        let expected = recurrence(&jobs.iter().collect::<Vec<_>>());
        prop_assert_eq!(closed_form_makespan(&seq).makespan, expected);
        prop_assert_eq!(*pipeline_completion_times(&seq).last().unwrap(), expected);
    }

    #[test]
    fn johnson_order_is_a_sorted_permutation(jobs in flow_jobs(10)) {
        let seq = johnson_order(&jobs);
        let mut ids = seq.job_ids().to_vec();
        ids.sort();
        let mut expected: Vec<_> = jobs.iter().map(|j| j.id.clone()).collect();
        expected.sort();
        prop_assert_eq!(ids, expected);

        let ordered: Vec<FlowJob> = seq.jobs().collect();
        let split = ordered.iter().take_while(|j| j.is_map_type()).count();
        prop_assert!(ordered[split..].iter().all(|j| !j.is_map_type()));
        prop_assert!(ordered[..split].windows(2).all(|w| w[0].map <= w[1].map));
        prop_assert!(ordered[split..].windows(2).all(|w| w[0].reduce >= w[1].reduce));
    }

    #[test]
    fn johnson_order_survives_uniform_scaling(jobs in flow_jobs(8), k in 1i128..=12, d in 1i128..=5) {
        let factor = Rational::new(k, d);
        let base = johnson_order(&jobs);
        let scaled: Vec<FlowJob> = jobs
            .iter()
            .map(|j| FlowJob::new(j.id.clone(), j.map * factor, j.reduce * factor))
            .collect();
        let again = johnson_order(&scaled);
        prop_assert_eq!(again.job_ids(), base.job_ids());
        prop_assert_eq!(
            closed_form_makespan(&again).makespan,
            closed_form_makespan(&base).makespan * factor
        );
    }

    #[test]
    fn simulator_matches_closed_form(w in workload(8), seed in any::<u64>()) {
        let mut ids: Vec<&str> = w.jobs.iter().map(|j| j.id.as_str()).collect();
        let rotate = (seed as usize) % ids.len();
        ids.rotate_left(rotate);
        let schedule = all_slots_schedule(&w, w.cluster, &ids).unwrap();
        let seq = schedule.pools[0].sequence();
        prop_assert_eq!(assert_clean(&schedule), closed_form_makespan(&seq).makespan);
    }

    #[test]
    fn simulation_is_deterministic(w in workload(6)) {
        let s = mk_jr_schedule(&w);
        prop_assert_eq!(simulate_fifo(&s).unwrap(), simulate_fifo(&s).unwrap());
    }

    #[test]
    fn appending_a_job_keeps_earlier_runs(w in workload(6), extra in (1u32..=8, 1u32..=8, rational(), rational())) {
        let base = mk_jr_schedule(&w);
        let before = simulate_fifo(&base).unwrap();
        let job = JobSpec::new("extra", extra.0.min(w.cluster.map_slots()), extra.1.min(w.cluster.reduce_slots()), extra.2, extra.3);
        let mut longer = base.clone();
        longer.pools[0].jobs.push(job.clamped_to(&w.cluster));
        let after = simulate_fifo(&longer).unwrap();
        prop_assert!(after.makespan >= before.makespan);
        for run in &before.runs {
            prop_assert_eq!(Some(run), after.run(&run.job_id, run.stage));
        }
    }

    #[test]
    fn scaling_round_trips(tm in rational(), tr in rational(), dm in 1u32..=16, dr in 1u32..=16, am in 1u32..=16, ar in 1u32..=16) {
        let job = JobSpec::new("J", dm, dr, tm, tr);
        let s = scale_durations(&job, am, ar).unwrap();
        prop_assert_eq!(s.eff_map_duration * Rational::from(am), tm * Rational::from(dm));
        prop_assert_eq!(s.eff_reduce_duration * Rational::from(ar), tr * Rational::from(dr));
        let resized = JobSpec::new("J", am, ar, s.eff_map_duration, s.eff_reduce_duration);
        let back = scale_durations(&resized, dm, dr).unwrap();
        prop_assert_eq!((back.eff_map_duration, back.eff_reduce_duration), (tm, tr));
    }

    #[test]
    fn task_duration_is_inverse_in_slots(tasks in prop::collection::vec(rational(), 0..12), s in 1u32..=10, k in 1u32..=5) {
        let wide = duration_from_tasks(&tasks, s * k).unwrap();
        let narrow = duration_from_tasks(&tasks, s).unwrap();
        prop_assert_eq!(wide * Rational::from(k), narrow);
    }

    #[test]
    fn rational_text_round_trips(n in -10_000i128..10_000, d in 1i128..1_000) {
        let x = Rational::new(n, d);
        prop_assert_eq!(x.to_string().parse::<Rational>().unwrap(), x);
    }

    #[test]
    fn generated_workloads_round_trip(seed in any::<u64>(), n in 1usize..12, m in 1u32..=20, r in 1u32..=20) {
        let cluster = ClusterConfig::new(m, r).unwrap();
        let w = generate_workload(&GenerateConfig::new(seed, n, cluster)).unwrap();
        prop_assert!(w.validate().is_ok());
        let doc = WorkloadDocument::parse(&to_toml(&w, None)).unwrap();
        prop_assert_eq!(doc.workload, w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn uaas_is_never_beaten(w in workload(6)) {
        let uaas = uaas_schedule(&w);
        let best = assert_clean(&uaas);
        prop_assert_eq!(Some(best), uaas.predicted_makespan);
        prop_assert!(best <= assert_clean(&mk_jr_schedule(&w)));
        if let Ok(pools) = balanced_pools_schedule(&w) {
            prop_assert!(best <= assert_clean(&pools));
            let (_, violations) = simulate_checked(&pools).unwrap();
            prop_assert_eq!(violations, 0);
        }
    }
}

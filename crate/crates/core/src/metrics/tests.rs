use super::*;

use approx::assert_relative_eq;
use proptest::prelude::*;

fn record(episode: usize, t: usize, events: Vec<Event>, agents: usize) -> TrajectoryRecord {
    TrajectoryRecord {
        episode,
        seed: 9,
        t,
        positions: vec![[0.0; 3]; agents],
        actions: vec![10; agents],
        rewards: vec![0.5; agents],
        team_reward: 0.5 * agents as f64,
        energy_kwh: vec![150.0 - t as f64; agents],
        events,
    }
}

fn episode_with(services: &[usize], landings: &[usize]) -> EpisodeMetrics {
    let agents = services
        .iter()
        .zip(landings)
        .map(|(&s, &l)| AgentEpisode {
            services_delivered: s,
            landings: l,
            distinct_vertiports: l.min(2),
            collision_events: 0,
            energy_trace: vec![],
            cumulative_reward: 0.0,
        })
        .collect();
    EpisodeMetrics {
        episode: 0,
        seed: 0,
        team_reward: 0.0,
        agents,
    }
}

#[test]
fn landings_and_distinct_types() {
    let land = |v| Event::Landed { uam: 0, vertiport: v };
    let recs = vec![
        record(0, 1, vec![land(0)], 2),
        record(
            0,
            2,
            vec![
                land(2),
                Event::Delivered {
                    uam: 0,
                    passenger: 3,
                    vertiport: 2,
                },
            ],
            2,
        ),
        record(0, 3, vec![land(0), Event::Collision { uam: 1 }], 2),
    ];
    let m = EpisodeMetrics::from_records(&recs).unwrap();
    assert_eq!(m.agents[0].landings, 3);
    assert_eq!(m.agents[0].distinct_vertiports, 2);
    assert_eq!(m.agents[0].services_delivered, 1);
    assert_eq!(m.agents[1].collision_events, 1);
    assert_eq!(m.agents[1].landings, 0);
    assert_eq!(m.agents[0].energy_trace, vec![149.0, 148.0, 147.0]);
    assert_relative_eq!(m.team_reward, 3.0);
    assert_relative_eq!(m.agents[1].cumulative_reward, 1.5);
}

#[test]
fn one_episode_three_services() {
    let q = service_quality(&[episode_with(&[3, 0], &[1, 1])]).unwrap();
    assert_eq!(q.per_agent[0].services, 3.0);
}

#[test]
fn landings_averaged_over_episodes() {
    let q = service_quality(&[episode_with(&[0], &[2]), episode_with(&[0], &[4])]).unwrap();
    assert_eq!(q.per_agent[0].landings, 3.0);
}

#[test]
fn empty_episode_list_is_usage_error() {
    assert!(matches!(service_quality(&[]), Err(Error::Usage(_))));
}

#[test]
fn identical_agents_zero_variance() {
    let v = fairness_variance(&[episode_with(&[2, 2, 2], &[1, 1, 1])]).unwrap();
    assert_eq!(v.services, 0.0);
    assert_eq!(v.landings, 0.0);
}

#[test]
fn two_agent_population_variance() {
    let v = fairness_variance(&[episode_with(&[1, 3], &[0, 0])]).unwrap();
    assert_eq!(v.services, 1.0);
}

#[test]
fn three_agent_table_by_hand() {
    // Per-agent service means over two episodes: (0+2)/2 = 1, (1+3)/2 = 2, (5+7)/2 = 6.
    // Mean 3; squared deviations 4, 1, 9; population variance 14/3.
    let eps = [
        episode_with(&[0, 1, 5], &[1, 1, 1]),
        episode_with(&[2, 3, 7], &[1, 3, 2]),
    ];
    let v = fairness_variance(&eps).unwrap();
    assert_relative_eq!(v.services, 14.0 / 3.0, max_relative = 1e-15);
    // Landings means 1, 2, 1.5: variance (0.25 + 0.25 + 0) / 3.
    assert_relative_eq!(v.landings, 1.0 / 6.0, max_relative = 1e-15);
}

#[test]
fn single_agent_fairness_rejected() {
    assert!(matches!(
        fairness_variance(&[episode_with(&[1], &[1])]),
        Err(Error::Usage(_))
    ));
}

#[test]
fn constant_series_converges_to_constant() {
    assert_relative_eq!(convergence_value(&[0.4; 37]), 0.4, max_relative = 1e-15);
    for v in moving_average(&[0.4; 37], 50) {
        assert_relative_eq!(v, 0.4, max_relative = 1e-15);
    }
}

#[test]
fn window_one_is_identity() {
    let s = [1.0, -2.0, 5.0, 0.25];
    assert_eq!(moving_average(&s, 1), s.to_vec());
}

#[test]
fn ramp_final_tenth() {
    let ramp: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
    assert_relative_eq!(convergence_value(&ramp), 0.95, max_relative = 1e-12);
}

#[test]
fn trailing_window_values() {
    assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
}

#[test]
fn reward_curve_from_csv() {
    let text =
        "epoch,epsilon,mean_reward,per_agent_reward_1,buffer_size,wall_ms\n0,0.2,1.0,1.0,60,0\n1,0.2,3.0,3.0,120,0\n";
    let c = reward_curve(text.as_bytes(), 2).unwrap();
    assert_eq!(c.epochs, vec![0, 1]);
    assert_eq!(c.smoothed, vec![1.0, 2.0]);
    assert_eq!(c.convergence, 3.0);
}

#[test]
fn malformed_csv_reports_line() {
    let text = "epoch,mean_reward\n0,1.0\n1,abc\n";
    match reward_curve(text.as_bytes(), 5) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    let ragged = "epoch,mean_reward\n0,1.0\n1,2.0,7\n";
    match reward_curve(ragged.as_bytes(), 5) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(
        reward_curve("epoch,x\n0,1\n".as_bytes(), 5),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn trajectory_log_parse_error_has_line() {
    let good = serde_json::to_string(&record(0, 1, vec![], 2)).unwrap();
    let text = format!("{good}\n{{not json\n");
    match read_trajectories(text.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn episodes_grouped_in_order() {
    let recs = vec![
        record(4, 1, vec![], 2),
        record(4, 2, vec![], 2),
        record(7, 1, vec![], 2),
    ];
    let eps = episodes_from_records(&recs).unwrap();
    assert_eq!(eps.iter().map(|e| e.episode).collect::<Vec<_>>(), vec![4, 7]);
    assert_eq!(eps[0].agents[0].energy_trace.len(), 2);
}

#[test]
fn wilcoxon_all_positive_ten() {
    // Only the all-positive sign pattern reaches W+ = 55: p = 1/1024.
    let w = wilcoxon_signed_rank(&(1..=10).map(f64::from).collect::<Vec<_>>());
    assert_eq!(w.n, 10);
    assert_eq!(w.w_plus, 55.0);
    assert_relative_eq!(w.p_value, 1.0 / 1024.0, max_relative = 1e-15);
}

#[test]
fn wilcoxon_small_case_by_enumeration() {
    // d = [1, -2, 3]: ranks 1, 2, 3, W+ = 4. Positive-rank subsets reaching 4:
    // {1,3}, {2,3}, {1,2,3}, so 3 of 8.
    let w = wilcoxon_signed_rank(&[1.0, -2.0, 3.0]);
    assert_eq!(w.w_plus, 4.0);
    assert_relative_eq!(w.p_value, 3.0 / 8.0, max_relative = 1e-15);
}

#[test]
fn wilcoxon_ties_and_zeros() {
    // Zero dropped; |d| = 1, 1, 2 → ranks 1.5, 1.5, 3. W+ = 1.5 + 3 = 4.5.
    // Sums over sign patterns: 0, 1.5, 1.5, 3, 3, 4.5, 4.5, 6 → P(W+ >= 4.5) = 3/8.
    let w = wilcoxon_signed_rank(&[0.0, 1.0, -1.0, 2.0]);
    assert_eq!(w.n, 3);
    assert_eq!(w.w_plus, 4.5);
    assert_relative_eq!(w.p_value, 3.0 / 8.0, max_relative = 1e-15);
}

#[test]
fn summary_outputs() {
    let eps = [episode_with(&[1, 3], &[2, 2])];
    let rows = vec![
        SummaryRow::new("commnet_ctde", 1, 0.5, &eps).unwrap(),
        SummaryRow::new("monte_carlo", 1, 0.1, &eps).unwrap(),
    ];
    let mut csv_out = Vec::new();
    write_summary_csv(&rows, &mut csv_out).unwrap();
    let text = String::from_utf8(csv_out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("algorithm,seed,convergence_reward"));
    let mut json = Vec::new();
    write_summary_json(&rows, &mut json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["commnet_ctde"]["1"]["services_variance"], 1.0);
}

proptest! {
    #[test]
    fn metrics_are_pure(seed in 0u64..1000, steps in 1usize..20) {
        let recs: Vec<_> = (0..steps)
            .map(|t| {
                let ev = if (seed + t as u64).is_multiple_of(3) {
                    vec![Event::Delivered { uam: t % 2, passenger: t, vertiport: 1 }]
                } else {
                    vec![]
                };
                record(0, t + 1, ev, 2)
            })
            .collect();
        let a = EpisodeMetrics::from_records(&recs).unwrap();
        let b = EpisodeMetrics::from_records(&recs).unwrap();
        prop_assert_eq!(&a, &b);
        let delivered = recs.iter().flat_map(|r| &r.events).filter(|e| matches!(e, Event::Delivered { .. })).count();
        prop_assert_eq!(a.total_services(), delivered);
    }

    #[test]
    fn wilcoxon_p_value_is_a_probability(d in proptest::collection::vec(-5.0f64..5.0, 0..15)) {
        let w = wilcoxon_signed_rank(&d);
        prop_assert!(w.p_value > 0.0 && w.p_value <= 1.0);
    }
}

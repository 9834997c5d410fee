use super::*;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::nn::log_softmax;

fn config(obs_dim: usize, hidden: usize, comm_layers: usize, num_actions: usize) -> CommNetConfig {
    CommNetConfig {
        obs_dim,
        hidden,
        comm_layers,
        num_actions,
    }
}

fn random_obs<R: Rng>(rng: &mut R, agents: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..agents)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn objective(
    policy: &CommNetPolicy,
    params: &[f64],
    obs: &[Vec<f64>],
    weights: &[f64],
    actions: &[usize],
    communicate: bool,
) -> f64 {
    let mut p = policy.clone();
    p.params_mut().copy_from_slice(params);
    let cache = p.forward_joint(obs, communicate).unwrap();
    (0..obs.len())
        .map(|j| weights[j] * log_softmax(cache.logits(j))[actions[j]])
        .sum()
}

fn fd_gradient(
    policy: &CommNetPolicy,
    obs: &[Vec<f64>],
    weights: &[f64],
    actions: &[usize],
    communicate: bool,
) -> Vec<f64> {
    let h = 1e-5;
    let mut params = policy.params().to_vec();
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + h;
            let up = objective(policy, &params, obs, weights, actions, communicate);
            params[i] = orig - h;
            let down = objective(policy, &params, obs, weights, actions, communicate);
            params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn analytic_gradient(
    policy: &CommNetPolicy,
    obs: &[Vec<f64>],
    weights: &[f64],
    actions: &[usize],
    communicate: bool,
) -> Vec<f64> {
    let cache = policy.forward_joint(obs, communicate).unwrap();
    let grads: Vec<Vec<f64>> = (0..obs.len())
        .map(|j| {
            score_gradient(&cache.probs()[j], actions[j])
                .into_iter()
                .map(|g| g * weights[j])
                .collect()
        })
        .collect();
    policy.backward_joint(&cache, &grads).unwrap()
}

fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn zero_encoder_weights_give_bias_for_every_agent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policy = CommNetPolicy::new(config(4, 2, 1, 3), &mut rng).unwrap();
    let params = policy.params_mut();
    params[..8].fill(0.0);
    params[8] = 0.3;
    params[9] = 1.7;
    let obs = random_obs(&mut rng, 3, 4);
    for o in &obs {
        assert_eq!(policy.encode(o).unwrap(), vec![0.3, 1.7]);
    }
}

#[test]
fn hand_set_encoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut policy = CommNetPolicy::new(config(4, 2, 0, 3), &mut rng).unwrap();
    #[rustfmt::skip]
    let enc = [
        1.0, -1.0, 0.5, 2.0,
        -0.5, 0.25, 1.0, -1.0,
        0.1, -0.2,
    ];
    policy.params_mut()[..10].copy_from_slice(&enc);
    // Row 0: 1 − 2 + 1.5 + 8 + 0.1 = 8.6. Row 1: −0.5 + 0.5 + 3 − 4 − 0.2 = −1.2 → 0.
    let h = policy.encode(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_relative_eq!(h[0], 8.6, max_relative = 1e-14);
    assert_eq!(h[1], 0.0);
}

#[test]
fn identical_observations_identical_hidden() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let policy = CommNetPolicy::new(config(5, 8, 2, 4), &mut rng).unwrap();
    let o: Vec<f64> = (0..5).map(|i| i as f64 * 0.3 - 0.5).collect();
    let cache = policy.forward_joint(&[o.clone(), o.clone(), o], true).unwrap();
    assert_eq!(cache.probs()[0], cache.probs()[1]);
    assert_eq!(cache.probs()[1], cache.probs()[2]);
}

#[test]
fn comm_mean_two_agents_swaps() {
    let h1 = [1.0, -2.0, 3.0];
    let h2 = [0.5, 4.0, -1.0];
    let hidden: Vec<&[f64]> = vec![&h1, &h2];
    assert_eq!(comm_mean(&hidden, 0), h2.to_vec());
    assert_eq!(comm_mean(&hidden, 1), h1.to_vec());
}

#[test]
fn comm_mean_of_equal_vectors() {
    let h = [0.25, -1.5];
    let hidden: Vec<&[f64]> = vec![&h; 5];
    for j in 0..5 {
        assert_eq!(comm_mean(&hidden, j), h.to_vec());
    }
}

#[test]
fn comm_mean_single_agent_is_zero() {
    let h = [3.0, 4.0];
    let hidden: Vec<&[f64]> = vec![&h];
    assert_eq!(comm_mean(&hidden, 0), vec![0.0, 0.0]);
}

#[test]
fn distributions_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let policy = CommNetPolicy::new(config(7, 16, 2, 11), &mut rng).unwrap();
    let cache = policy.forward_joint(&random_obs(&mut rng, 4, 7), true).unwrap();
    for p in cache.probs() {
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        assert!(p.iter().all(|&x| x > 0.0));
    }
}

#[test]
fn other_agent_observation_changes_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let policy = CommNetPolicy::new(config(6, 16, 2, 5), &mut rng).unwrap();
    let mut obs = random_obs(&mut rng, 3, 6);
    let before = policy.forward_joint(&obs, true).unwrap();
    obs[1][0] += 0.5;
    obs[1][3] -= 0.5;
    let after = policy.forward_joint(&obs, true).unwrap();
    assert!(max_relative_error(&before.probs()[0], &after.probs()[0]) > 1e-6);
}

#[test]
fn without_communication_policy_is_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let policy = CommNetPolicy::new(config(6, 16, 2, 5), &mut rng).unwrap();
    let mut obs = random_obs(&mut rng, 3, 6);
    let before = policy.forward_joint(&obs, false).unwrap();
    obs[1][0] += 0.5;
    obs[2][4] -= 0.7;
    let after = policy.forward_joint(&obs, false).unwrap();
    assert_eq!(before.probs()[0], after.probs()[0]);
}

#[test]
fn zero_comm_layers_match_dnn_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = config(6, 12, 0, 5);
    let comm = TeamPolicy::commnet(cfg, 3, 0.01, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let dnn = TeamPolicy::dnn(cfg, 3, 0.01, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let obs = random_obs(&mut rng, 3, 6);
    assert_eq!(
        comm.forward(&obs).unwrap().all_probs(),
        dnn.forward(&obs).unwrap().all_probs()
    );
}

#[test]
fn dnn_is_commnet_with_zero_comm_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = config(6, 12, 2, 5);
    let dnn = TeamPolicy::dnn(cfg, 4, 0.01, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let obs = random_obs(&mut rng, 4, 6);
    let team = dnn.forward(&obs).unwrap();
    // Running each agent alone gives an empty mean, i.e. a zero vector.
    let policy = &dnn.groups()[0].policy;
    for (j, o) in obs.iter().enumerate() {
        let solo = policy.forward_joint(std::slice::from_ref(o), true).unwrap();
        assert_eq!(solo.probs()[0], team.probs(j));
    }
}

#[test]
fn argmax_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    assert_eq!(select_action(&[0.1, 0.7, 0.2], 0.0, &mut rng, SelectionMode::Argmax), 1);
}

#[test]
fn one_hot_distribution_always_selected() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = [0.0, 0.0, 1.0, 0.0];
    for _ in 0..1000 {
        assert_eq!(select_action(&p, 0.0, &mut rng, SelectionMode::Sample), 2);
    }
}

#[test]
fn full_exploration_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = [0.9, 0.05, 0.01, 0.01, 0.01, 0.01, 0.01, 0.0, 0.0, 0.0, 0.0];
    let draws = 100_000;
    let mut counts = [0usize; 11];
    for _ in 0..draws {
        counts[select_action(&p, 1.0, &mut rng, SelectionMode::Sample)] += 1;
    }
    let expected = draws as f64 / 11.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new(10.0).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 {chi2}, p {p_value}");
}

#[test]
fn sampling_follows_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let p = [0.5, 0.3, 0.2];
    let mut counts = [0usize; 3];
    for _ in 0..60_000 {
        counts[select_action(&p, 0.0, &mut rng, SelectionMode::Sample)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(p)
        .map(|(&c, q)| (c as f64 - 60_000.0 * q).powi(2) / (60_000.0 * q))
        .sum();
    assert!(1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2) > 0.01);
}

#[test]
fn epsilon_schedule_reaches_floor_at_5300() {
    let s = EpsilonSchedule::default();
    assert_eq!(s.at(0), 0.275);
    assert_relative_eq!(s.at(1000), 0.225, max_relative = 1e-12);
    assert!(s.at(5299) > 0.01);
    assert_eq!(s.at(5300), 0.01);
    assert_eq!(s.at(9000), 0.01);
    assert_eq!(s.floor_epoch(), 5300);
}

#[test]
fn joint_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < 100 {
        let cfg = config(
            rng.random_range(2..5),
            rng.random_range(2..5),
            rng.random_range(0..3),
            rng.random_range(2..5),
        );
        let policy = CommNetPolicy::new(cfg, &mut rng).unwrap();
        let obs = random_obs(&mut rng, 3, cfg.obs_dim);
        let cache = policy.forward_joint(&obs, true).unwrap();
        if cache.relu_margin() < 1e-3 {
            continue;
        }
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let actions: Vec<usize> = (0..3).map(|_| rng.random_range(0..cfg.num_actions)).collect();
        let analytic = analytic_gradient(&policy, &obs, &weights, &actions, true);
        let numeric = fd_gradient(&policy, &obs, &weights, &actions, true);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "instance {checked}: max relative error {err}");
        checked += 1;
    }
}

#[test]
fn zero_score_gradients_give_zero_parameter_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let policy = CommNetPolicy::new(config(5, 8, 2, 4), &mut rng).unwrap();
    let cache = policy.forward_joint(&random_obs(&mut rng, 3, 5), true).unwrap();
    let grad = policy.backward_joint(&cache, &vec![vec![0.0; 4]; 3]).unwrap();
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn encoder_gradient_flows_through_other_agents() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = config(4, 6, 1, 3);
    loop {
        let mut policy = CommNetPolicy::new(cfg, &mut rng).unwrap();
        let encoder_weights = cfg.obs_dim * cfg.hidden;
        for b in &mut policy.params_mut()[encoder_weights..encoder_weights + cfg.hidden] {
            *b = rng.random_range(-0.5..0.5);
        }
        let mut obs = random_obs(&mut rng, 3, 4);
        // Agent 0 sees zeros, so its own branch contributes nothing to the
        // encoder weight gradient: anything nonzero there came through agents 1 and 2.
        obs[0] = vec![0.0; 4];
        let cache = policy.forward_joint(&obs, true).unwrap();
        if cache.relu_margin() < 1e-3 {
            continue;
        }
        let weights = [1.0, 0.0, 0.0];
        let actions = [1, 0, 0];
        let analytic = analytic_gradient(&policy, &obs, &weights, &actions, true);
        let numeric = fd_gradient(&policy, &obs, &weights, &actions, true);
        let cross = analytic[..encoder_weights].iter().map(|g| g.abs()).fold(0.0, f64::max);
        if cross == 0.0 {
            // Every rectifier on the path is closed for this draw; try another.
            continue;
        }
        assert!(max_relative_error(&analytic[..encoder_weights], &numeric[..encoder_weights]) < 1e-4);
        let local = analytic_gradient(&policy, &obs, &weights, &actions, false);
        assert!(local[..encoder_weights].iter().all(|&g| g == 0.0));
        break;
    }
}

#[test]
fn stale_cache_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut policy = CommNetPolicy::new(config(3, 4, 1, 2), &mut rng).unwrap();
    let cache = policy.forward_joint(&random_obs(&mut rng, 2, 3), true).unwrap();
    policy.params_mut()[0] += 0.1;
    assert!(matches!(
        policy.backward_joint(&cache, &[vec![1.0, -1.0], vec![0.0, 0.0]]),
        Err(Error::StaleCache(_))
    ));
}

#[test]
fn observation_shape_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let policy = CommNetPolicy::new(config(3, 4, 1, 2), &mut rng).unwrap();
    assert!(matches!(
        policy.forward_joint(&[vec![1.0, 2.0]], true),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn shared_parameters_move_every_agent() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut policy = CommNetPolicy::new(config(4, 8, 2, 5), &mut rng).unwrap();
    let obs = random_obs(&mut rng, 4, 4);
    let before = policy.forward_joint(&obs, true).unwrap();
    let n = policy.param_count();
    policy.params_mut()[n - 1] += 0.5;
    let after = policy.forward_joint(&obs, true).unwrap();
    for j in 0..4 {
        assert_ne!(before.probs()[j], after.probs()[j]);
    }
}

#[test]
fn hybrid_two_agents_commnet_side_has_no_peer() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let team = TeamPolicy::hybrid(config(4, 6, 2, 3), 2, 0.01, &mut rng).unwrap();
    let cache = team.forward(&random_obs(&mut rng, 2, 4)).unwrap();
    assert!(cache.group(0).comm_vector(0, 0).iter().all(|&c| c == 0.0));
}

#[test]
fn hybrid_four_agents_peer_mean_is_the_other_commnet_agent() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let team = TeamPolicy::hybrid(config(4, 6, 2, 3), 4, 0.01, &mut rng).unwrap();
    let cache = team.forward(&random_obs(&mut rng, 4, 4)).unwrap();
    let g = cache.group(0);
    assert_eq!(g.num_agents(), 2);
    assert_eq!(g.comm_vector(0, 0), g.hidden(0, 1));
    assert_eq!(g.comm_vector(1, 0), g.hidden(1, 1));
}

#[test]
fn hybrid_dnn_half_ignores_commnet_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let team = TeamPolicy::hybrid(config(4, 6, 2, 3), 4, 0.01, &mut rng).unwrap();
    let mut obs = random_obs(&mut rng, 4, 4);
    let before = team.forward(&obs).unwrap();
    obs[0][1] += 1.0;
    obs[1][2] -= 1.0;
    let after = team.forward(&obs).unwrap();
    assert_eq!(before.probs(2), after.probs(2));
    assert_eq!(before.probs(3), after.probs(3));
}

#[test]
fn hybrid_rejects_odd_fleet() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    assert!(matches!(
        TeamPolicy::hybrid(config(4, 6, 2, 3), 3, 0.01, &mut rng),
        Err(Error::Config(_))
    ));
}

#[test]
fn records_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let team = TeamPolicy::hybrid(config(4, 6, 2, 3), 4, 0.01, &mut rng).unwrap();
    let records = team.to_records();
    assert_eq!(records.len(), 8);
    let mut other = TeamPolicy::hybrid(config(4, 6, 2, 3), 4, 0.01, &mut rng).unwrap();
    other.load_records(&records).unwrap();
    for (a, b) in team.groups().iter().zip(other.groups()) {
        assert_eq!(a.policy.params(), b.policy.params());
    }
    let mut wrong = TeamPolicy::hybrid(config(4, 7, 2, 3), 4, 0.01, &mut rng).unwrap();
    assert!(matches!(wrong.load_records(&records), Err(Error::Checkpoint(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn comm_mean_ignores_order_of_peers(seed in any::<u64>(), agents in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hs = random_obs(&mut rng, agents, 5);
        let refs: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
        let c = comm_mean(&refs, 0);
        let mut peers: Vec<&[f64]> = refs[1..].to_vec();
        peers.reverse();
        peers.rotate_left(1);
        let mut shuffled = vec![refs[0]];
        shuffled.extend(peers);
        let c2 = comm_mean(&shuffled, 0);
        for (a, b) in c.iter().zip(&c2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn joint_pass_is_permutation_equivariant(seed in any::<u64>(), agents in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = CommNetPolicy::new(config(5, 8, 2, 4), &mut rng).unwrap();
        let obs = random_obs(&mut rng, agents, 5);
        let mut perm: Vec<usize> = (0..agents).collect();
        for i in (1..agents).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&k| obs[k].clone()).collect();
        let a = policy.forward_joint(&obs, true).unwrap();
        let b = policy.forward_joint(&permuted, true).unwrap();
        for (i, &k) in perm.iter().enumerate() {
            for (x, y) in b.probs()[i].iter().zip(&a.probs()[k]) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn selected_action_in_range(seed in any::<u64>(), eps in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = crate::nn::softmax(&(0..11).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        prop_assert!(select_action(&p, eps, &mut rng, SelectionMode::Sample) < 11);
    }
}

use std::sync::Arc;

use empower_core::agents::losses::*;
use empower_core::agents::returns::*;
use empower_core::agents::*;
use empower_core::grid::*;
use empower_core::nn::{gradcheck, Mlp};
use empower_core::rng::{stream, SimRng};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_net(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    let n = Mlp::zeros(sizes).unwrap().n_params();
    Mlp::from_params(sizes, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rebuild(net: &Mlp, p: &[f64]) -> Mlp {
    Mlp::from_params(net.sizes(), p.to_vec()).unwrap()
}

struct MiniBatch {
    obs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    weights: Vec<f64>,
}

fn mini_batch(rng: &mut ChaCha8Rng, n: usize) -> MiniBatch {
    MiniBatch {
        obs: (0..n)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        actions: (0..n).map(|_| rng.gen_range(0..5)).collect(),
        weights: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

const SIZES: [usize; 4] = [4, 6, 6, 5];

#[test]
fn policy_gradient_loss_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = unit_net(&SIZES, &mut rng);
    let b = mini_batch(&mut rng, 6);
    for entropy in [0.0, 0.1] {
        let (_, g) = weighted_log_prob_loss(&net, &b.obs, &b.actions, &b.weights, entropy);
        let f = |p: &[f64]| weighted_log_prob_loss(&rebuild(&net, p), &b.obs, &b.actions, &b.weights, entropy).0;
        let r = gradcheck::check(f, net.params(), &g, 1e-4);
        assert!(r.passes(1e-4), "{r:?}");
    }
}

#[test]
fn value_and_q_losses_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let v = unit_net(&[4, 6, 6, 1], &mut rng);
    let q = unit_net(&SIZES, &mut rng);
    let b = mini_batch(&mut rng, 6);
    let (_, g) = value_mse_loss(&v, &b.obs, &b.weights);
    let r = gradcheck::check(
        |p| value_mse_loss(&rebuild(&v, p), &b.obs, &b.weights).0,
        v.params(),
        &g,
        1e-4,
    );
    assert!(r.passes(1e-4), "{r:?}");
    let (_, g) = q_regression_loss(&q, &b.obs, &b.actions, &b.weights);
    let r = gradcheck::check(
        |p| q_regression_loss(&rebuild(&q, p), &b.obs, &b.actions, &b.weights).0,
        q.params(),
        &g,
        1e-4,
    );
    assert!(r.passes(1e-4), "{r:?}");
}

#[test]
fn ppo_loss_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pol = unit_net(&SIZES, &mut rng);
    let val = unit_net(&[4, 6, 6, 1], &mut rng);
    let b = mini_batch(&mut rng, 8);
    // old log-probs spread so that some ratios fall outside the clip range
    let old: Vec<f64> = b
        .obs
        .iter()
        .zip(&b.actions)
        .map(|(o, &a)| policy_dist(&pol, o).log_prob(a) + rng.gen_range(-0.5..0.5))
        .collect();
    let returns: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = PpoBatch {
        obs: &b.obs,
        actions: &b.actions,
        old_log_probs: &old,
        advantages: &b.weights,
        returns: &returns,
    };
    let (_, gp, gv, parts) = ppo_loss(&pol, &val, batch, 0.2, 0.5, 0.01);
    assert!(parts.clip_fraction > 0.0 && parts.clip_fraction < 1.0);
    let r = gradcheck::check(
        |p| ppo_loss(&rebuild(&pol, p), &val, batch, 0.2, 0.5, 0.01).0,
        pol.params(),
        &gp,
        1e-4,
    );
    assert!(r.passes(1e-4), "{r:?}");
    let r = gradcheck::check(
        |p| ppo_loss(&pol, &rebuild(&val, p), batch, 0.2, 0.5, 0.01).0,
        val.params(),
        &gv,
        1e-4,
    );
    assert!(r.passes(1e-4), "{r:?}");
}

#[test]
fn ppo_on_policy_start_and_inactive_clip() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let pol = unit_net(&SIZES, &mut rng);
    let val = unit_net(&[4, 6, 6, 1], &mut rng);
    let b = mini_batch(&mut rng, 10);
    let old: Vec<f64> = b
        .obs
        .iter()
        .zip(&b.actions)
        .map(|(o, &a)| policy_dist(&pol, o).log_prob(a))
        .collect();
    let returns = vec![0.0; 10];
    let batch = PpoBatch {
        obs: &b.obs,
        actions: &b.actions,
        old_log_probs: &old,
        advantages: &b.weights,
        returns: &returns,
    };
    let (_, _, _, parts) = ppo_loss(&pol, &val, batch, 0.2, 0.5, 0.0);
    let mean_adv = b.weights.iter().sum::<f64>() / 10.0;
    assert!((parts.surrogate - mean_adv).abs() < 1e-12);
    assert_eq!(parts.clip_fraction, 0.0);
    // ratios within [0.8, 1.2]: a huge clip range changes nothing
    let shifted: Vec<f64> = old
        .iter()
        .enumerate()
        .map(|(i, o)| o + 0.1 * ((i % 3) as f64 - 1.0))
        .collect();
    let batch = PpoBatch {
        old_log_probs: &shifted,
        ..batch
    };
    let (l1, g1, _, _) = ppo_loss(&pol, &val, batch, 0.2, 0.5, 0.0);
    let (l2, g2, _, _) = ppo_loss(&pol, &val, batch, 10.0, 0.5, 0.0);
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
}

/// Expected REINFORCE gradient on a two-cell corridor, by enumerating every
/// start state and action sequence of a two-step episode.
fn expected_gradient(policy: &Mlp, baseline: &dyn Fn(usize) -> f64) -> Vec<f64> {
    let layout = GridLayout::parse("pair", "..").unwrap();
    let mdp = TabularMdp::build(&layout, SlipSpec::deterministic());
    let enc = Encoder::new(&mdp, EncodingKind::OneHotPosition);
    let obs = |s: usize| enc.encode(s, None).unwrap().values;
    let gamma = 0.9;
    let mut total = vec![0.0; policy.n_params()];
    for s0 in 0..2 {
        for a0 in 0..5 {
            for a1 in 0..5 {
                let s1 = mdp.next_state(s0, a0);
                let s2 = mdp.next_state(s1, a1);
                let rewards = [goal_reward(s1, 1), goal_reward(s2, 1)];
                let g = rewards_to_go(&rewards, gamma);
                let p0 = policy_dist(policy, &obs(s0));
                let p1 = policy_dist(policy, &obs(s1));
                let prob = 0.5 * p0.probs()[a0] * p1.probs()[a1];
                let weights = [g[0] - baseline(s0), g[1] - baseline(s1)];
                let (_, grad) = weighted_log_prob_loss(policy, &[obs(s0), obs(s1)], &[a0, a1], &weights, 0.0);
                for (t, gi) in total.iter_mut().zip(&grad) {
                    // the loss averages over two steps and is negated
                    *t += prob * -2.0 * gi;
                }
            }
        }
    }
    total
}

#[test]
fn baseline_leaves_expected_gradient_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let policy = unit_net(&[2, 5], &mut rng);
    let plain = expected_gradient(&policy, &|_| 0.0);
    let constant = expected_gradient(&policy, &|_| 3.7);
    let per_state = expected_gradient(&policy, &|s| [0.4, -1.3][s]);
    let norm = plain.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm > 1e-3);
    for other in [&constant, &per_state] {
        let diff = plain
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff / norm < 1e-10, "relative difference {}", diff / norm);
        let argmax = |v: &[f64]| argmax(&v.iter().map(|x| x.abs()).collect::<Vec<_>>());
        assert_eq!(argmax(&plain), argmax(other));
    }
}

fn corridor() -> TabularMdp {
    TabularMdp::build(
        &GridLayout::parse("corridor", "...").unwrap(),
        SlipSpec::deterministic(),
    )
}

/// Policy evaluation of the uniform policy by fixed-point iteration.
fn uniform_policy_values(mdp: &TabularMdp, goal: usize, gamma: f64) -> Vec<f64> {
    let mut v = vec![0.0; mdp.n_states()];
    for _ in 0..2_000 {
        v = (0..mdp.n_states())
            .map(|s| {
                (0..5)
                    .map(|a| {
                        let s2 = mdp.next_state(s, a);
                        0.2 * (goal_reward(s2, goal) + gamma * v[s2])
                    })
                    .sum()
            })
            .collect();
    }
    v
}

/// Optimal action values by value iteration.
fn optimal_q(mdp: &TabularMdp, goal: usize, gamma: f64) -> Vec<[f64; 5]> {
    let mut q = vec![[0.0; 5]; mdp.n_states()];
    for _ in 0..2_000 {
        let v: Vec<f64> = q
            .iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        for (s, row) in q.iter_mut().enumerate() {
            for (a, qa) in row.iter_mut().enumerate() {
                let s2 = mdp.next_state(s, a);
                *qa = goal_reward(s2, goal) + gamma * v[s2];
            }
        }
    }
    q
}

#[test]
fn td_error_vanishes_in_expectation_under_true_values() {
    let mdp = corridor();
    let v = uniform_policy_values(&mdp, 2, 0.9);
    for s in 0..3 {
        let mean_delta: f64 = (0..5)
            .map(|a| {
                let s2 = mdp.next_state(s, a);
                0.2 * td_error(goal_reward(s2, 2), v[s], v[s2], false, 0.9)
            })
            .sum();
        assert!(mean_delta.abs() < 1e-9);
    }
}

fn runner(mdp: &Arc<TabularMdp>, n_envs: usize, goal: usize, encoding: EncodingKind, seed: u64) -> EpisodeRunner {
    let cfg = RunnerConfig {
        n_envs,
        episode_length: EPISODE_LENGTH,
        encoding,
        goal: GoalMode::Fixed(goal),
        display_goal: None,
        reward: RewardSource::GoalIndicator,
    };
    EpisodeRunner::new(mdp.clone(), cfg, seed).unwrap()
}

#[test]
fn actor_critic_critic_learns_policy_values() {
    let mdp = Arc::new(corridor());
    let mut cfg = AgentConfig::defaults(Algorithm::ActorCritic);
    cfg.hidden = vec![];
    cfg.gamma = 0.9;
    // a frozen (uniform) actor isolates the critic
    cfg.actor_lr = 1e-300;
    cfg.entropy_coef = 0.0;
    cfg.critic_lr = 2e-3;
    let mut agent = ActorCritic::new(cfg, 3, 5, 1).unwrap();
    agent.policy_mut().unwrap().net.params_mut().fill(0.0);
    let mut r = runner(&mdp, 16, 2, EncodingKind::OneHotPosition, 1);
    agent.train_until(&mut r, 800_000).unwrap();
    let oracle = uniform_policy_values(&mdp, 2, 0.9);
    let ck = agent.checkpoint();
    let value = &ck.model("value").unwrap().net;
    for s in 0..3 {
        let mut o = vec![0.0; 3];
        o[s] = 1.0;
        let v = value.forward(&o).unwrap()[0];
        assert!(
            (v - oracle[s]).abs() < 0.05 * oracle[s].abs().max(1.0),
            "state {s}: {v} vs {}",
            oracle[s]
        );
    }
}

#[test]
fn gae_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let n = 8;
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let boundary: Vec<bool> = (0..n).map(|t| t == n - 1 || (trial % 2 == 1 && t == 3)).collect();
        let terminal = vec![false; n];
        let (gamma, lam) = (0.97, 0.9);
        let got = gae(&r, &v, &nv, &terminal, &boundary, gamma, lam).unwrap();
        for t in 0..n {
            let mut expected = 0.0;
            let mut k = 0;
            loop {
                let delta = r[t + k] + gamma * nv[t + k] - v[t + k];
                expected += (gamma * lam).powi(k as i32) * delta;
                if boundary[t + k] {
                    break;
                }
                k += 1;
            }
            assert!((got.advantages[t] - expected).abs() < 1e-12);
            assert!((got.returns[t] - expected - v[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn ppo_buffer_cannot_be_reused() {
    let mut rng = stream(2, &[]);
    let mut cfg = AgentConfig::defaults(Algorithm::Ppo);
    cfg.hidden = vec![];
    let mut policy = Model::init(2, &[], 5, &mut rng).unwrap();
    let mut value = Model::init(2, &[], 1, &mut rng).unwrap();
    let mut buf = RolloutBuffer::new(1, 0);
    for t in 0..4 {
        buf.push(
            0,
            Transition {
                obs: vec![1.0, 0.0],
                action: t % 5,
                reward: 1.0,
                next_obs: vec![0.0, 1.0],
                log_prob: -5f64.ln(),
                value: 0.0,
                truncated: t == 3,
            },
        );
    }
    ppo_update(&mut policy, &mut value, &mut buf, 0, &cfg, &mut rng).unwrap();
    assert_eq!(
        ppo_update(&mut policy, &mut value, &mut buf, 0, &cfg, &mut rng).unwrap_err(),
        AgentError::StaleBuffer
    );
    let mut old = RolloutBuffer::new(1, 0);
    assert_eq!(
        ppo_update(&mut policy, &mut value, &mut old, 1, &cfg, &mut rng).unwrap_err(),
        AgentError::StaleBuffer
    );
}

fn all_transitions(mdp: &TabularMdp, goal: usize) -> ReplayBuffer {
    let mut replay = ReplayBuffer::new(1_000);
    for s in 0..mdp.n_states() {
        for a in 0..5 {
            let s2 = mdp.next_state(s, a);
            replay.push(ReplayEntry {
                state: s,
                goal: Some(goal),
                action: a,
                reward: goal_reward(s2, goal),
                next_state: s2,
                terminal: false,
                truncated: false,
            });
        }
    }
    replay
}

fn one_hot(n: usize) -> impl Fn(usize, Option<usize>) -> Vec<f64> {
    move |s, _| {
        let mut o = vec![0.0; n];
        o[s] = 1.0;
        o
    }
}

#[test]
fn dqn_with_zero_discount_regresses_rewards() {
    let mdp = corridor();
    let replay = all_transitions(&mdp, 2);
    let mut cfg = AgentConfig::defaults(Algorithm::Dqn);
    cfg.gamma = 0.0;
    cfg.critic_lr = 0.05;
    cfg.dqn.seed_steps = 15;
    let mut rng = stream(4, &[]);
    let mut q = Model::init(3, &[], 5, &mut rng).unwrap();
    let target = q.net.clone();
    for _ in 0..3_000 {
        dqn_update(&mut q, &target, &replay, &one_hot(3), &cfg, &mut rng).unwrap();
    }
    for s in 0..3 {
        let values = q.forward(&one_hot(3)(s, None));
        for (a, v) in values.iter().enumerate() {
            assert!((v - goal_reward(mdp.next_state(s, a), 2)).abs() < 1e-3);
        }
    }
    let small = ReplayBuffer::new(10);
    assert!(matches!(
        dqn_update(&mut q, &target, &small, &one_hot(3), &cfg, &mut rng),
        Err(AgentError::InsufficientReplay { .. })
    ));
}

#[test]
fn tabular_dqn_reaches_value_iteration_fixed_point() {
    let mdp = corridor();
    let replay = all_transitions(&mdp, 2);
    let mut cfg = AgentConfig::defaults(Algorithm::Dqn);
    cfg.gamma = 0.9;
    cfg.critic_lr = 0.02;
    cfg.dqn.seed_steps = 15;
    let mut rng = stream(6, &[]);
    let mut q = Model::init(3, &[], 5, &mut rng).unwrap();
    let mut target = q.net.clone();
    for round in 0..400 {
        // Adam jitters on the scale of its step size, so anneal it
        cfg.critic_lr = match round {
            0..=199 => 0.02,
            200..=299 => 1e-3,
            _ => 1e-4,
        };
        for _ in 0..100 {
            dqn_update(&mut q, &target, &replay, &one_hot(3), &cfg, &mut rng).unwrap();
        }
        // full target refresh once the online net has fitted the current targets
        if round < 399 {
            target = q.net.clone();
        }
    }
    let oracle = optimal_q(&mdp, 2, 0.9);
    for s in 0..3 {
        let values = q.forward(&one_hot(3)(s, None));
        for a in 0..5 {
            assert!(
                (values[a] - oracle[s][a]).abs() < 1e-3,
                "Q({s},{a}) = {} vs {}",
                values[a],
                oracle[s][a]
            );
        }
    }
}

fn bc_setup(targets: &[Vec<f64>]) -> (Model, Vec<Vec<f64>>, SimRng) {
    let n = targets.len();
    let obs = (0..n).map(|s| one_hot(n)(s, None)).collect();
    let mut rng = stream(9, &[]);
    let policy = Model::init(n, &[], targets[0].len(), &mut rng).unwrap();
    (policy, obs, rng)
}

#[test]
fn behavior_cloning_reproduces_targets() {
    let targets = vec![
        vec![0.9, 0.1],
        vec![0.1, 0.9],
        vec![0.5, 0.5],
        vec![0.75, 0.25],
        vec![1.0, 0.0],
    ];
    let (mut policy, obs, mut rng) = bc_setup(&targets);
    let cfg = BcConfig {
        steps: 3_000,
        batch_size: 256,
        lr: 3e-3,
    };
    behavior_clone(&mut policy, &obs, &targets, &cfg, &mut rng).unwrap();
    for (o, t) in obs.iter().zip(&targets) {
        let p = policy_dist(&policy.net, o);
        assert!(total_variation(p.probs(), t) <= 0.05, "{:?} vs {t:?}", p.probs());
    }
    assert!(policy_dist(&policy.net, &obs[4]).probs()[0] > 0.95);
}

#[test]
fn behavior_cloning_uniform_target_keeps_entropy() {
    let targets = vec![vec![0.2; 5]; 4];
    let (mut policy, obs, mut rng) = bc_setup(&targets);
    let stats = behavior_clone(&mut policy, &obs, &targets, &BcConfig::default(), &mut rng).unwrap();
    assert!((stats.entropy - 5f64.ln()).abs() < 0.01, "{}", stats.entropy);
    assert!(behavior_clone(&mut policy, &obs, &targets[..2], &BcConfig::default(), &mut rng).is_err());
}

#[test]
fn entropy_bonus_alone_drives_policy_to_uniform() {
    let mut rng = stream(12, &[]);
    let mut policy = Model::init(1, &[], 5, &mut rng).unwrap();
    policy.net.params_mut()[..5].copy_from_slice(&[2.0, -1.0, 0.5, 0.0, 1.0]);
    let obs = vec![vec![1.0]];
    for _ in 0..2_000 {
        let (_, g) = weighted_log_prob_loss(&policy.net, &obs, &[0], &[0.0], 0.1);
        policy.apply(&g, 0.01).unwrap();
    }
    let p = policy_dist(&policy.net, &obs[0]);
    assert!((p.entropy() - 5f64.ln()).abs() < 1e-4);
}

/// Mean return of `episodes` frozen-policy episodes, computed here rather
/// than through the pipeline.
fn eval_return(agent: &dyn Agent, mdp: &Arc<TabularMdp>, goal: usize, encoding: EncodingKind, seed: u64) -> f64 {
    let mut r = runner(mdp, 25, goal, encoding, seed);
    let mut rng = stream(seed, &[99]);
    let mut total = 0.0;
    for _ in 0..EPISODE_LENGTH {
        let acts: Vec<usize> = r.observations().iter().map(|o| agent.act(o, &mut rng)).collect();
        total += r.step(&acts).unwrap().rewards.iter().sum::<f64>();
    }
    total / 25.0
}

#[test]
fn all_algorithms_improve_on_small_room() {
    let mdp = Arc::new(TabularMdp::build(
        &GridLayout::builtin("open5").unwrap(),
        SlipSpec::deterministic(),
    ));
    let goal = mdp.state_at(1, 3).unwrap();
    for alg in Algorithm::ALL {
        let mut cfg = AgentConfig::defaults(alg);
        cfg.hidden = vec![];
        match alg {
            Algorithm::Ppo => {
                cfg.actor_lr = 3e-3;
                cfg.critic_lr = 3e-3;
                cfg.ppo.rollout_length = 256;
            }
            Algorithm::Dqn => {
                cfg.critic_lr = 1e-2;
                cfg.dqn.eps_decay_steps = 20_000;
            }
            _ => {
                cfg.actor_lr = 0.05;
                cfg.critic_lr = 0.05;
            }
        }
        let (mut before, mut after) = (0.0, 0.0);
        for seed in 0..3 {
            let mut r = runner(&mdp, cfg.n_envs, goal, cfg.encoding, seed);
            let mut agent = make_agent(&cfg, r.obs_dim(), 5, seed).unwrap();
            before += eval_return(agent.as_ref(), &mdp, goal, cfg.encoding, 1000 + seed);
            agent.train_until(&mut r, 200_000).unwrap();
            after += eval_return(agent.as_ref(), &mdp, goal, cfg.encoding, 1000 + seed);
        }
        println!("{alg}: {:.2} -> {:.2}", before / 3.0, after / 3.0);
        assert!(after > before + 3.0, "{alg} did not improve: {before} -> {after}");
    }
}

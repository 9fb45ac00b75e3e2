use hredq_core::env::{AnyEnv, GoalEnv, PointPush, PointReach};
use hredq_core::replay::{HerBuffer, Transition};
use hredq_core::rng::{stream, Stream};
use rand::Rng;

fn rollout<E: GoalEnv, R: Rng>(env: &mut E, id: u64, rng: &mut R) -> Vec<Transition> {
    let mut obs = env.reset(rng);
    let mut out = Vec::new();
    loop {
        let action = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let step = env.step(&action).unwrap();
        out.push(Transition {
            state: obs.state.clone(),
            action,
            reward: step.reward,
            next_state: step.observation.state.clone(),
            desired_goal: obs.desired_goal.clone(),
            achieved_goal_next: step.observation.achieved_goal.clone(),
            t_index: out.len(),
            episode_id: id,
            goal_source: None,
        });
        obs = step.observation;
        if step.done {
            return out;
        }
    }
}

fn oracle_reward(achieved: &[f64], goal: &[f64]) -> f64 {
    let d = ((achieved[0] - goal[0]).powi(2) + (achieved[1] - goal[1]).powi(2)).sqrt();
    if d <= 0.05 + 1e-12 {
        0.0
    } else {
        -1.0
    }
}

#[test]
fn relabeled_transitions_are_correct_on_both_tasks() {
    let mut rng = stream(200, Stream::Env);
    let mut relabel_rng = stream(200, Stream::Relabel);
    for id in ["point_reach", "point_push"] {
        let mut env = AnyEnv::from_id(id).unwrap();
        let last = env.spec().episode_length;
        let mut buffer = HerBuffer::new(1_000_000, 1).unwrap();
        for e in 0..500 {
            let episode = rollout(&mut env, e, &mut rng);
            let before = buffer.len();
            let stored = buffer
                .store_episode(&episode, &env, &mut relabel_rng)
                .unwrap();
            assert_eq!(stored, 2 * (last + 1));
            assert_eq!(buffer.len() - before, stored);
            let new: Vec<&Transition> = buffer.iter_oldest_first().skip(before).collect();
            let (originals, relabels) = new.split_at(last + 1);
            for (o, src) in originals.iter().zip(&episode) {
                assert_eq!(*o, src);
            }
            for r in relabels {
                let u = r.goal_source.expect("relabeled copies record their source");
                let t = r.t_index;
                assert!(
                    u > t || (u == t && t == last),
                    "{id}: source {u} for step {t}"
                );
                assert_eq!(r.desired_goal, episode[u].achieved_goal_next);
                assert_eq!(
                    r.reward,
                    oracle_reward(&r.achieved_goal_next, &r.desired_goal)
                );
                let orig = &episode[t];
                assert_eq!(
                    (&r.state, &r.action, &r.next_state),
                    (&orig.state, &orig.action, &orig.next_state)
                );
            }
        }
    }
}

#[test]
fn future_indices_are_uniform() {
    // for step 0 of a 51-step episode the source is uniform on 1..=50
    let mut env = PointReach::new();
    let mut rng = stream(201, Stream::Env);
    let episode = rollout(&mut env, 0, &mut rng);
    let mut counts = [0u64; 51];
    let mut relabel_rng = stream(201, Stream::Relabel);
    let trials = 20_000;
    for _ in 0..trials {
        let mut full = HerBuffer::new(200, 1).unwrap();
        full.store_episode(&episode, &env, &mut relabel_rng)
            .unwrap();
        // originals occupy 0..=50; the relabel of step 0 comes next
        let first = full.iter_oldest_first().nth(51).unwrap();
        assert_eq!(first.t_index, 0);
        counts[first.goal_source.unwrap()] += 1;
    }
    assert_eq!(counts[0], 0);
    let expected = trials as f64 / 50.0;
    let chi2: f64 = counts[1..]
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9% quantile of chi-square with 49 degrees of freedom is about 85.4
    assert!(chi2 < 85.4, "chi-square {chi2}");
}

#[test]
fn sampling_is_uniform_over_stored_transitions() {
    let mut env = PointReach::new();
    let mut rng = stream(202, Stream::Env);
    let mut buffer = HerBuffer::new(102, 1).unwrap();
    let episode = rollout(&mut env, 0, &mut rng);
    buffer.store_episode(&episode, &env, &mut rng).unwrap();
    let n = buffer.len();
    let mut counts = vec![0u64; n];
    let mut sample_rng = stream(202, Stream::Buffer);
    let draws = 1_000_000;
    for _ in 0..draws / 1000 {
        for i in buffer.sample_indices(1000, &mut sample_rng).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = draws as f64 / n as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9% quantile of chi-square with 101 degrees of freedom is about 150.7
    assert!(chi2 < 150.7, "chi-square {chi2}");
    let sigma = (expected * (1.0 - 1.0 / n as f64)).sqrt();
    let outside = counts
        .iter()
        .filter(|&&c| (c as f64 - expected).abs() > 3.0 * sigma)
        .count();
    assert!(outside <= 2, "{outside} bins outside 3 sigma");
}

#[test]
fn pushing_straight_through_the_block() {
    // agent at the origin, block 0.1 to the right: contact once the gap of
    // 0.03 closes, after which the block stays one contact distance ahead
    let mut env = PointPush::new();
    env.start_at([0.0, 0.0], [0.1, 0.0], [0.4, 0.0]);
    let mut agent_x = 0.0;
    let mut vel = 0.0f64;
    let mut first_success = None;
    // ten steps keep the block well inside the arena
    for t in 0..10 {
        let out = env.step(&[1.0, 0.0]).unwrap();
        agent_x += vel;
        vel = (vel + 0.05).min(0.05);
        let block_x = env.block()[0];
        assert!((out.observation.state[0] - agent_x).abs() < 1e-12);
        let expected_block = (agent_x + 0.07).max(0.1);
        assert!(
            (block_x - expected_block).abs() < 1e-12,
            "step {t}: {block_x} vs {expected_block}"
        );
        assert_eq!(out.observation.state[6], block_x - out.observation.state[0]);
        if out.success && first_success.is_none() {
            first_success = Some(t);
        }
    }
    // the agent sits at 0.05 t, so the block first gets within 0.05 of the
    // goal at step 6 (block at 0.37)
    assert_eq!(first_success, Some(6));
}

#[test]
fn random_exploration_rarely_solves_push() {
    let mut env = PointPush::new();
    let mut rng = stream(203, Stream::Env);
    let episodes = 2000;
    let mut solved = 0;
    for e in 0..episodes {
        let ep = rollout(&mut env, e, &mut rng);
        if ep.last().unwrap().reward == 0.0 {
            solved += 1;
        }
    }
    let rate = solved as f64 / episodes as f64;
    assert!(rate < 0.05, "random success rate {rate}");
}

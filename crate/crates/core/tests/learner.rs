use pdoa::domain::{l1_distance, OfflineDataset, PreferenceVector};
use pdoa::env::{cmo_grid, generate_dataset, mean_returns, rollout, scalarized_value_iteration, BehaviorPolicySet};
use pdoa::learner::{
    fit_return_predictor, train_regularized, train_return_conditioned, AdaptedPolicy, PolicyBundle,
    RegularizedConfig, RegularizedModel, ReturnConditionedConfig, SimplexLattice,
};
use pdoa::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expert_data(episodes: usize) -> OfflineDataset {
    generate_dataset("cmo-grid", &cmo_grid(), &BehaviorPolicySet::expert(), episodes, 7)
        .unwrap()
        .without_constraints()
        .unwrap()
}

fn regularized(ds: &OfflineDataset) -> PolicyBundle {
    let g = cmo_grid();
    PolicyBundle::Regularized(train_regularized(ds, g.n_states, g.n_actions, &RegularizedConfig::default()).unwrap())
}

#[test]
fn node_values_track_dp_oracle() {
    let g = cmo_grid();
    let ds = expert_data(3);
    let PolicyBundle::Regularized(m) = regularized(&ds) else { unreachable!() };
    for w in BehaviorPolicySet::default_preferences() {
        let k = m.lattice.nodes().position(|n| l1_distance(&n, w.as_slice()) < 1e-9).unwrap();
        let learned = w.scalarize(m.node_v(k, g.initial_state));
        let oracle = w.scalarize(&scalarized_value_iteration(&g, &w).unwrap().value);
        assert!((learned - oracle).abs() <= 0.1 * oracle.abs(), "{w:?}: {learned} vs {oracle}");
    }
}

#[test]
fn return_predictor_tracks_oracle_returns() {
    let g = cmo_grid();
    let ds = expert_data(3);
    let p = fit_return_predictor(&ds, 0.05).unwrap();
    for w in BehaviorPolicySet::default_preferences() {
        let sol = scalarized_value_iteration(&g, &w).unwrap();
        let oracle = mean_returns(&rollout(&g, &sol.policy, 1, 0)).return_vector;
        let pred = p.predict(w.as_slice());
        let norm: f64 = oracle.iter().map(|x| x.abs()).sum();
        assert!(l1_distance(&pred, &oracle) <= 0.1 * norm, "{w:?}: {pred:?} vs {oracle:?}");
    }
}

#[test]
fn action_distributions_are_normalized() {
    let ds = expert_data(2);
    let g = cmo_grid();
    let reg = regularized(&ds);
    let rc = PolicyBundle::ReturnConditioned(
        train_return_conditioned(&ds, g.n_states, g.n_actions, &ReturnConditionedConfig::default()).unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let s = rng.random_range(0..g.n_states);
        let w1: f64 = rng.random();
        let w = [w1, 1.0 - w1];
        for b in [&reg, &rc] {
            let p = b.action_probs(s, &w, None).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|x| *x >= 0.0));
            let lp = b.policy_logprob(s, 0, &w, None).unwrap();
            assert!(lp.is_finite() && lp >= 1e-6f64.ln());
        }
    }
}

#[test]
fn regularized_values_consistent_and_interpolation_exact_at_nodes() {
    let ds = expert_data(2);
    let PolicyBundle::Regularized(m) = regularized(&ds) else { unreachable!() };
    let bundle = PolicyBundle::Regularized(m.clone());
    for (k, node) in m.lattice.nodes().enumerate() {
        if node[0] < 0.5 {
            // outside the label support queries are projected
            continue;
        }
        for s in [0, 9, 18, 27] {
            assert_eq!(bundle.v_value(s, &node).unwrap(), m.node_v(k, s));
            let pi = bundle.action_probs(s, &node, None).unwrap();
            for i in 0..2 {
                let v: f64 = (0..m.n_actions).map(|a| pi[a] * bundle.q_value(s, a, &node).unwrap()[i]).sum();
                assert!((v - m.node_v(k, s)[i]).abs() < 1e-6);
            }
        }
    }
}

/// Two-node lattice over one state and one action with hand-set tables.
fn two_node_model(q0: [f64; 2], q1: [f64; 2]) -> PolicyBundle {
    PolicyBundle::Regularized(RegularizedModel {
        lattice: SimplexLattice::new(2, 1).unwrap(),
        n_states: 1,
        n_actions: 1,
        temperature: 0.1,
        bandwidth: 0.15,
        gamma: 0.9,
        behavior_logits: vec![0.0, 0.0],
        q: [q0, q1].concat(),
        v: [q0, q1].concat(),
        support_lo: vec![0.0, 0.0],
        support_hi: vec![1.0, 1.0],
    })
}

#[test]
fn interpolation_between_nodes() {
    let b = two_node_model([1.0, 0.0], [0.0, 1.0]);
    let mid = b.q_value(0, 0, &[0.5, 0.5]).unwrap();
    assert!((mid[0] - 0.5).abs() < 1e-12 && (mid[1] - 0.5).abs() < 1e-12);
    let same = two_node_model([0.3, 0.7], [0.3, 0.7]);
    let v = same.q_value(0, 0, &[0.37, 0.63]).unwrap();
    assert!((v[0] - 0.3).abs() < 1e-12 && (v[1] - 0.7).abs() < 1e-12);
}

#[test]
fn single_preference_rollout_matches_behavior() {
    let g = cmo_grid();
    let w = PreferenceVector::new(vec![0.7, 0.3]).unwrap();
    let set = BehaviorPolicySet {
        preferences: vec![w.clone()],
        epsilon: 0.0,
        lambda_grid: vec![],
    };
    let ds = generate_dataset("cmo-grid", &g, &set, 5, 1).unwrap().without_constraints().unwrap();
    let behavior = ds.trajectories[0].return_vector().to_vec();
    let b = regularized(&ds);
    let label = ds.trajectories[0].label().unwrap().as_slice().to_vec();
    let policy = AdaptedPolicy::new(&b, &label).unwrap();
    let got = mean_returns(&rollout(&g, &policy, 20, 2)).return_vector;
    let norm: f64 = behavior.iter().map(|x| x.abs()).sum();
    assert!(l1_distance(&got, &behavior) <= 0.05 * norm, "{got:?} vs {behavior:?}");
}

#[test]
fn return_conditioned_has_no_values() {
    let ds = expert_data(1);
    let g = cmo_grid();
    let rc = PolicyBundle::ReturnConditioned(
        train_return_conditioned(&ds, g.n_states, g.n_actions, &ReturnConditionedConfig::default()).unwrap(),
    );
    assert!(matches!(rc.q_value(0, 0, &[0.5, 0.5]), Err(Error::Unsupported { .. })));
    assert!(matches!(rc.v_value(0, &[0.5, 0.5]), Err(Error::Unsupported { .. })));
    assert!(matches!(rc.policy_logprob(99, 0, &[0.5, 0.5], None), Err(Error::OutOfRange { .. })));
}

#[test]
fn bundles_round_trip_through_json() {
    let ds = expert_data(1);
    let g = cmo_grid();
    let reg = regularized(&ds);
    let rc = PolicyBundle::ReturnConditioned(
        train_return_conditioned(&ds, g.n_states, g.n_actions, &ReturnConditionedConfig::default()).unwrap(),
    );
    for b in [reg, rc] {
        let mut buf = Vec::new();
        b.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"format_version\":1"));
        let back = PolicyBundle::read_json(buf.as_slice()).unwrap();
        assert_eq!(back.kind(), b.kind());
        for s in [0, 5, 20] {
            assert_eq!(
                back.action_probs(s, &[0.8, 0.2], None).unwrap(),
                b.action_probs(s, &[0.8, 0.2], None).unwrap()
            );
        }
    }
    assert!(PolicyBundle::read_json(r#"{"format_version":99,"kind":"regularized"}"#.as_bytes()).is_err());
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not asserted, so the line-per-criterion report
//! is always complete. Set `PDOA_ACCEPTANCE_STRICT=1` to turn any FAIL into a
//! nonzero exit.

mod common;

use std::time::Instant;

use pdoa::adapt::{conservative_estimate, demo_reward_term, estimate_gradient, AdaptationConfig, DemoBatch};
use pdoa::baseline::bc_train;
use pdoa::domain::{
    augment_dataset, fit_preference_prior, GaussianPreferenceDistribution, OfflineDataset, PreferenceVector,
};
use pdoa::env::{augmented_preference_search, cmo_grid, generate_dataset, BehaviorPolicySet, CmoMdpSpec, DEFAULT_LAMBDA_GRID};
use pdoa::eval::{
    evaluate_targets, hypervolume, hypervolume_monte_carlo, pareto_filter, target_demos, EvalConfig, EvalContext,
    Evaluation, Method, TargetSet,
};
use pdoa::learner::{train_regularized, PolicyBundle, RegularizedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: [u64; 3] = [1, 2, 3];
const EPISODES_PER_PREF: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome, failures: &mut usize) {
    println!("criterion {id} {}: {name} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    if !o.pass {
        *failures += 1;
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct Trained {
    mdp: CmoMdpSpec,
    raw: OfflineDataset,
    learn: OfflineDataset,
    bundle: PolicyBundle,
    prior: GaussianPreferenceDistribution,
}

fn train(behaviors: &BehaviorPolicySet, constrained: bool, seed: u64) -> Trained {
    let mdp = cmo_grid();
    let raw = generate_dataset("cmo-grid", &mdp, behaviors, EPISODES_PER_PREF, seed).unwrap();
    let learn = if constrained {
        augment_dataset(&raw).unwrap()
    } else {
        raw.without_constraints().unwrap()
    };
    let model = train_regularized(&learn, mdp.n_states, mdp.n_actions, &RegularizedConfig::default()).unwrap();
    let prior = fit_preference_prior(&learn).unwrap();
    Trained {
        mdp,
        raw,
        learn,
        bundle: PolicyBundle::Regularized(model),
        prior,
    }
}

fn method<'a>(ev: &'a Evaluation, m: Method, alpha: Option<f64>) -> &'a pdoa::eval::MethodSummary {
    ev.summary
        .methods
        .iter()
        .find(|s| s.method == m && s.alpha == alpha)
        .unwrap()
}

/// Criteria 1 and 6 on expert data, criterion 5 on the first seed's data.
fn expert_criteria() -> (Outcome, Outcome, Outcome) {
    let start = Instant::now();
    let adapt = AdaptationConfig::unconstrained(2);
    let mut l1 = Vec::new();
    let mut ratio = Vec::new();
    let mut u128 = Vec::new();
    let mut u16 = Vec::new();
    let mut grid_hits = None;
    for seed in SEEDS {
        let t = train(&BehaviorPolicySet::expert(), false, seed);
        let targets = TargetSet::preference_grid(&t.learn, 11).unwrap();
        let ctx = EvalContext {
            bundle: &t.bundle,
            mdp: &t.mdp,
            dataset: &t.learn,
            prior: &t.prior,
            baseline: None,
        };
        let cfg = EvalConfig {
            methods: vec![Method::Pdoa, Method::Oracle],
            ..EvalConfig::default()
        };
        let ev = evaluate_targets(&ctx, &targets, &adapt, &cfg, seed).unwrap();
        let pdoa = method(&ev, Method::Pdoa, Some(1.0));
        l1.push(pdoa.preference_error.unwrap());
        ratio.push(pdoa.average_utility / method(&ev, Method::Oracle, None).average_utility);
        u128.push(pdoa.average_utility);
        let small = EvalConfig {
            demo_size: 16,
            ..EvalConfig::default()
        };
        let ev16 = evaluate_targets(&ctx, &targets, &adapt, &small, seed).unwrap();
        u16.push(method(&ev16, Method::Pdoa, Some(1.0)).average_utility);
        if grid_hits.is_none() {
            grid_hits = Some(demo_grid_hits(&t, &targets, seed));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let (l1m, rm) = (mean(&l1), mean(&ratio));
    let c1 = Outcome {
        pass: l1m <= 0.15 && rm >= 0.9 && secs <= 600.0,
        detail: format!("mean L1 {l1m:.3} (<= 0.15), utility / oracle {rm:.3} (>= 0.9), {secs:.0} s for 3 seeds incl. criterion 6 runs"),
    };
    let (a, b) = (mean(&u128), mean(&u16));
    let c6 = Outcome {
        pass: a >= b * 0.98,
        detail: format!("average utility M=128 {a:.3} vs M=16 {b:.3}"),
    };
    let hits = grid_hits.unwrap();
    let c5 = Outcome {
        pass: hits >= 9,
        detail: format!("{hits}/11 targets with grid argmax within one lattice cell"),
    };
    (c1, c5, c6)
}

/// Targets whose demo-term argmax over a 0.01 grid on the label support lies
/// within one learner lattice cell (0.1 in the first weight) of the target.
fn demo_grid_hits(t: &Trained, targets: &TargetSet, seed: u64) -> usize {
    let cell = 1.0 / RegularizedConfig::default().divisions as f64;
    let delta = AdaptationConfig::unconstrained(2).delta;
    targets
        .targets()
        .iter()
        .enumerate()
        .filter(|(i, target)| {
            let td = target_demos(&t.learn, target, *i, 128, 2, seed).unwrap();
            let batch = DemoBatch::new(&t.bundle, &td.demos).unwrap();
            let best = (50..=100)
                .map(|k| k as f64 / 100.0)
                .map(|w| (w, demo_reward_term(&t.bundle, &batch, &[w, 1.0 - w], delta).unwrap()))
                .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                .0;
            (best - target.preference().unwrap()[0]).abs() <= cell + 1e-9
        })
        .count()
}

/// Criteria 2 and 9 on the amateur constrained testbed.
fn constrained_criteria() -> (Outcome, Outcome) {
    let behaviors = BehaviorPolicySet::amateur().with_lambda_grid(&DEFAULT_LAMBDA_GRID);
    let alphas = [1.0, 0.7, 0.5];
    let mut violations = [0usize; 3];
    let mut max_costs: Vec<Vec<f64>> = Vec::new();
    let mut thresholds = Vec::new();
    let mut hv_pdoa = Vec::new();
    let mut hv_bc = Vec::new();
    for seed in SEEDS {
        let t = train(&behaviors, true, seed);
        let bc = bc_train(&t.raw, t.mdp.n_states, t.mdp.n_actions).unwrap();
        let targets = TargetSet::constrained_grid(&t.raw, 6, 6).unwrap();
        thresholds = targets.thresholds().into_iter().map(|b| b[0]).collect();
        let ctx = EvalContext {
            bundle: &t.bundle,
            mdp: &t.mdp,
            dataset: &t.raw,
            prior: &t.prior,
            baseline: Some(&bc),
        };
        let cfg = EvalConfig {
            alphas: alphas.to_vec(),
            methods: vec![Method::Pdoa, Method::BcFinetune],
            ..EvalConfig::default()
        };
        let ev = evaluate_targets(&ctx, &targets, &AdaptationConfig::constrained(2, 1), &cfg, seed).unwrap();
        for (i, a) in alphas.iter().enumerate() {
            violations[i] += method(&ev, Method::Pdoa, Some(*a)).violating_groups;
        }
        max_costs.push(
            ev.summary
                .groups
                .iter()
                .filter(|g| g.method == Method::Pdoa && g.alpha == Some(0.7))
                .map(|g| g.max_cost[0])
                .collect(),
        );
        hv_pdoa.push(method(&ev, Method::Pdoa, Some(0.7)).hypervolume);
        hv_bc.push(method(&ev, Method::BcFinetune, None).hypervolume);
    }
    let span = thresholds.iter().cloned().fold(0.0, f64::max);
    let severe = thresholds
        .iter()
        .enumerate()
        .filter(|(g, b)| {
            let avg = mean(&max_costs.iter().map(|m| m[*g]).collect::<Vec<_>>());
            avg > **b + 0.1 * span
        })
        .count();
    let monotone = violations.windows(2).all(|w| w[1] <= w[0]);
    let c2 = Outcome {
        pass: monotone && severe <= 1,
        detail: format!(
            "violating groups over 3 seeds at alpha 1.0/0.7/0.5: {}/{}/{}; groups over threshold by > 10% at alpha 0.7: {severe}",
            violations[0], violations[1], violations[2]
        ),
    };
    let (p, b) = (mean(&hv_pdoa), mean(&hv_bc));
    let c9 = Outcome {
        pass: p >= 1.2 * b,
        detail: format!("grouped hypervolume PDOA {p:.2} vs BC-Finetune {b:.2}, ratio {:.3} (>= 1.2)", p / b),
    };
    (c2, c9)
}

fn cvar_criterion() -> Outcome {
    let d = GaussianPreferenceDistribution::new(vec![0.5, 0.2], vec![0.3, 0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut draws: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.2 + 0.1 * z
        })
        .collect();
    draws.sort_by(|a, b| b.total_cmp(a));
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.7, 0.9] {
        let keep = (alpha * draws.len() as f64).round() as usize;
        let mc = mean(&draws[..keep]);
        let b = conservative_estimate(&d, alpha, 1, 1).unwrap()[1];
        worst = worst.max((b - mc).abs());
    }
    let exact = conservative_estimate(&d, 1.0, 1, 1).unwrap() == d.mean;
    Outcome {
        pass: worst < 1e-3 && exact,
        detail: format!("max deviation from sampled tail mean {worst:.2e}, alpha 1 returns mean exactly: {exact}"),
    }
}

fn hypervolume_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    let mut properties = true;
    for set in 0..50 {
        let dim = 2 + set % 2;
        let n = rng.random_range(3..15);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let reference = vec![0.0; dim];
        let exact = hypervolume(&pts, &reference).unwrap();
        let mc = hypervolume_monte_carlo(&pts, &reference, 1_000_000, &mut rng).unwrap();
        worst = worst.max((mc - exact).abs() / exact);
        let filtered = hypervolume(&pareto_filter(&pts), &reference).unwrap();
        let mut more = pts.clone();
        more.push((0..dim).map(|_| rng.random_range(0.0..10.0)).collect());
        properties &= (filtered - exact).abs() <= 1e-9 * exact
            && hypervolume(&more, &reference).unwrap() >= exact - 1e-9;
    }
    Outcome {
        pass: worst < 0.01 && properties,
        detail: format!("max relative gap to sampling estimate {worst:.2e} over 50 sets; monotone and filter-invariant: {properties}"),
    }
}

fn duality_criterion() -> Outcome {
    let mdp = common::four_state();
    let mut worst: f64 = 1.0;
    for w1 in [0.3, 0.5, 0.7, 0.8, 1.0] {
        for beta in [0.1, 0.3, 0.5, 0.8, 1.0, 1.5] {
            let w = PreferenceVector::new(vec![w1, 1.0 - w1]).unwrap();
            let exact = common::exhaustive_mixture_optimum(&mdp, w.as_slice(), beta).unwrap();
            let found = augmented_preference_search(&mdp, &w, &[beta], 0.01).unwrap();
            let ratio = if found.feasible { found.utility / exact } else { 0.0 };
            worst = worst.min(ratio);
        }
    }
    Outcome {
        pass: worst >= 0.95,
        detail: format!("worst augmented-search utility / exhaustive optimum {worst:.4} over 30 (w, beta) cases"),
    }
}

fn gradient_criterion() -> Outcome {
    let t = train(&BehaviorPolicySet::expert(), false, 1);
    let target = pdoa::domain::Target::Preference {
        preference: PreferenceVector::new(vec![0.7, 0.3]).unwrap(),
    };
    let td = target_demos(&t.learn, &target, 0, 128, 2, 1).unwrap();
    let batch = DemoBatch::new(&t.bundle, &td.demos).unwrap();
    let cfg = AdaptationConfig::unconstrained(2);
    let base = GaussianPreferenceDistribution::new(vec![0.65, 0.3], vec![0.1, 0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let noise: Vec<Vec<f64>> = (0..10_000)
        .map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let est = estimate_gradient(&t.bundle, &batch, &base, &t.prior, &cfg, &noise).unwrap();
    let objective = |d: &GaussianPreferenceDistribution| {
        estimate_gradient(&t.bundle, &batch, d, &t.prior, &cfg, &noise).unwrap().objective
    };
    let h: f64 = 1e-3;
    let mut fd = Vec::new();
    for log_scale in [false, true] {
        for i in 0..2 {
            let (mut up, mut dn) = (base.clone(), base.clone());
            if log_scale {
                up.stddev[i] *= h.exp();
                dn.stddev[i] *= (-h).exp();
            } else {
                up.mean[i] += h;
                dn.mean[i] -= h;
            }
            fd.push((objective(&up) - objective(&dn)) / (2.0 * h));
        }
    }
    let sf: Vec<f64> = est.grad_mean.iter().chain(&est.grad_log_std).cloned().collect();
    let err = sf.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rel = err / fd.iter().map(|x| x * x).sum::<f64>().sqrt();
    Outcome {
        pass: rel < 0.1,
        detail: format!("relative error {rel:.3} between score-function gradient {sf:.3?} and common-noise differences {fd:.3?}"),
    }
}

fn main() {
    let mut failures = 0;
    let (c1, c5, c6) = expert_criteria();
    let (c2, c9) = constrained_criteria();
    report(1, "preference alignment", &c1, &mut failures);
    report(2, "constraint behavior under conservatism", &c2, &mut failures);
    report(3, "CVaR closed form", &cvar_criterion(), &mut failures);
    report(4, "hypervolume correctness", &hypervolume_criterion(), &mut failures);
    report(5, "demo reward term peaks at the target", &c5, &mut failures);
    report(6, "demo-size trend", &c6, &mut failures);
    report(7, "dual equivalence on the 4-state MDP", &duality_criterion(), &mut failures);
    report(8, "gradient estimator sanity", &gradient_criterion(), &mut failures);
    report(9, "baseline separation", &c9, &mut failures);
    println!("{} of 9 criteria passed", 9 - failures);
    if failures > 0 && std::env::var("PDOA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

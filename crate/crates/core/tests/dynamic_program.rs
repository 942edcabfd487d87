use platform_sim::dynamics::{
    bellman_backup, check_theorems, iteration_bound, simulate_policy, stage_payoffs, transition, AxisSpec, DpConfig,
    DpSolver, DynamicModel, Efficiency, MarketState, PlatformModel, RepUtils, StagePayoff, StateGrid,
    TransitionParams, ValueFunction,
};
use platform_sim::{Controls, Objective, StaticParams};

fn mid() -> Controls {
    Controls::new(0.15, 7.0, 9.0)
}

/// Closure arithmetic written out independently of the library.
fn closure_by_hand(s: [f64; 4], c: Controls, p: &StaticParams, c_ref: f64, cap: f64) -> (f64, [f64; 3]) {
    let [r, n, w, _] = s;
    let price = ((p.theta - p.eta * c.delivery_fee - p.delta * p.delivery_time) / (2.0 * p.eta)).max(0.0);
    let q0 = (p.theta - p.eta * (price + c.delivery_fee) - p.delta * p.delivery_time).max(0.0);
    let served = (r * q0 * n / c_ref).min(w * cap);
    let u_s = (1.0 - c.commission) * price * (served / r) - p.fixed_cost;
    let u_c = (served / n) * (p.v - p.beta_time * p.delivery_time - (price + c.delivery_fee));
    let u_r = (served / w) * (c.wage - p.gamma * p.delivery_time);
    (price * served, [r * u_s, n * u_c, w * u_r])
}

#[test]
fn stage_payoffs_match_hand_closure() {
    let m = PlatformModel::canonical();
    let cl = m.closure;
    for (s, c) in [
        ([100.0, 1000.0, 150.0, 0.6], mid()),
        ([40.0, 500.0, 300.0, 0.2], Controls::new(0.05, 2.0, 15.0)),
        ([180.0, 1900.0, 20.0, 0.9], Controls::new(0.25, 12.0, 3.0)),
    ] {
        let got = stage_payoffs(&MarketState::from_array(s), &c, &m.params, &cl);
        let (gmv, groups) = closure_by_hand(s, c, &m.params, cl.c_ref, cl.cap_per_worker);
        assert!((got.gmv - gmv).abs() <= 1e-9 * gmv.abs().max(1.0));
        for k in 0..3 {
            assert!((got.groups[k] - groups[k]).abs() <= 1e-9 * groups[k].abs().max(1.0));
        }
        assert!((got.sw - groups.iter().sum::<f64>()).abs() <= 1e-9 * got.sw.abs().max(1.0));
    }
    let canon = stage_payoffs(&MarketState::canonical(), &mid(), &m.params, &cl);
    assert_eq!(canon.gmv, 19.0 * 1500.0);
    assert!((canon.sw - (100.0 * 92.25 + 1000.0 * 43.5 - 150.0 * 110.0)).abs() < 1e-9);
}

#[test]
fn empty_sides_produce_no_gmv() {
    let m = PlatformModel::canonical();
    let no_r = stage_payoffs(&MarketState::new(0.0, 1000.0, 150.0, 0.6), &mid(), &m.params, &m.closure);
    assert_eq!(no_r.gmv, 0.0);
    assert_eq!(no_r.groups[0], 0.0);
    let no_w = stage_payoffs(&MarketState::new(100.0, 1000.0, 0.0, 0.6), &mid(), &m.params, &m.closure);
    assert_eq!(no_w.gmv, 0.0);
}

#[test]
fn transition_rules() {
    let tp = PlatformModel::canonical().transition;
    let s = MarketState::new(100.0, 1000.0, 150.0, tp.phi_neutral);
    let dead = RepUtils {
        restaurant: 0.0,
        consumer: 0.0,
        worker: 0.0,
    };
    let next = transition(&s, &mid(), &tp, &dead);
    assert_eq!(next.restaurants, s.restaurants);
    assert_eq!(next.consumers, s.consumers);

    let neutral = RepUtils {
        restaurant: tp.kappa,
        consumer: 0.0,
        worker: 0.0,
    };
    let next = transition(&s, &mid(), &tp, &neutral);
    assert_eq!(next.reputation, s.reputation);
}

/// Payoff `node value + action bonus`; action 0 walks right, action 1 walks
/// left, along a three-node restaurant axis.
struct Chain;

impl DynamicModel for Chain {
    fn stage(&self, s: &MarketState, c: &Controls) -> StagePayoff {
        let g = [1.0, -2.0, 4.0][s.restaurants as usize] + if c.commission < 0.15 { 0.5 } else { 0.0 };
        StagePayoff::from_groups(g, [g, 0.0, 0.0], RepUtils::default())
    }

    fn next_state(&self, s: &MarketState, c: &Controls, _: &StagePayoff) -> MarketState {
        let r = if c.commission < 0.15 {
            (s.restaurants + 1.0).min(2.0)
        } else {
            (s.restaurants - 1.0).max(0.0)
        };
        MarketState { restaurants: r, ..*s }
    }
}

fn chain_cfg(discount: f64) -> DpConfig {
    DpConfig {
        discount,
        grid: StateGrid::new([
            AxisSpec::new(0.0, 2.0, 3),
            AxisSpec::point(0.0),
            AxisSpec::point(0.0),
            AxisSpec::point(0.0),
        ]),
        control_grid: [AxisSpec::new(0.1, 0.2, 2), AxisSpec::point(5.0), AxisSpec::point(5.0)],
        tol: 1e-12,
        max_iter: 100_000,
    }
}

fn chain_unrolled(discount: f64, steps: usize) -> [f64; 3] {
    let g = [1.0, -2.0, 4.0];
    let mut v = [0.0; 3];
    for _ in 0..steps {
        let mut nv = [0.0; 3];
        for i in 0..3 {
            let right = g[i] + 0.5 + discount * v[(i + 1).min(2)];
            let left = g[i] + discount * v[i.saturating_sub(1)];
            nv[i] = right.max(left);
        }
        v = nv;
    }
    v
}

#[test]
fn zero_continuation_is_myopic() {
    let s = DpSolver::new(&Chain, chain_cfg(0.7)).unwrap();
    let vf = ValueFunction {
        objective: Objective::Sw,
        discount: 0.7,
        values: vec![0.0; 3],
        residual_history: Vec::new(),
    };
    assert_eq!(bellman_backup(&s, &vf).values, vec![1.5, -1.5, 4.5]);
}

#[test]
fn chain_matches_unrolled_recursion() {
    let beta = 0.8;
    let s = DpSolver::new(&Chain, chain_cfg(beta)).unwrap();
    let (vf, _) = s.value_iteration(Objective::Gmv).unwrap();
    let unrolled = chain_unrolled(beta, 50);
    let bound = beta.powi(50) * 4.5 / (1.0 - beta);
    for i in 0..3 {
        assert!((vf.values[i] - unrolled[i]).abs() <= bound);
    }
}

struct Constant(f64);

impl DynamicModel for Constant {
    fn stage(&self, _: &MarketState, _: &Controls) -> StagePayoff {
        StagePayoff::from_groups(self.0, [self.0, 0.0, 0.0], RepUtils::default())
    }

    fn next_state(&self, s: &MarketState, _: &Controls, _: &StagePayoff) -> MarketState {
        *s
    }
}

fn single_node(discount: f64, tol: f64) -> DpConfig {
    DpConfig {
        discount,
        grid: StateGrid::new([AxisSpec::point(1.0); 4]),
        control_grid: [AxisSpec::point(0.1), AxisSpec::point(5.0), AxisSpec::point(5.0)],
        tol,
        max_iter: 10_000,
    }
}

#[test]
fn geometric_series_values() {
    let s = DpSolver::new(&Constant(1.0), single_node(0.5, 1e-12)).unwrap();
    let (vf, _) = s.value_iteration(Objective::Sw).unwrap();
    assert!((vf.values[0] - 2.0).abs() < 1e-10);

    let tol = 1e-6;
    let s = DpSolver::new(&Constant(1.0), single_node(0.9, tol)).unwrap();
    let (vf, _) = s.value_iteration(Objective::Sw).unwrap();
    assert!((vf.values[0] - 10.0).abs() < 1e-4);
    let analytic = ((tol * (1.0 - 0.9)).ln() / 0.9f64.ln()).ceil() as usize;
    assert!(vf.residual_history.len() <= analytic + 1);
    assert!(vf.residual_history.len() <= iteration_bound(tol, 0.9, 1.0));
}

/// A market small enough that a 200-step horizon at 0.9 truncates far
/// below 1e-5.
fn toy_cfg(discount: f64) -> DpConfig {
    DpConfig {
        discount,
        grid: StateGrid::new([
            AxisSpec::new(1.0, 3.0, 2),
            AxisSpec::new(10.0, 30.0, 2),
            AxisSpec::new(1.0, 3.0, 2),
            AxisSpec::new(0.4, 0.8, 2),
        ]),
        tol: 1e-9,
        ..DpConfig::default()
    }
}

/// Multilinear interpolation on the 2x2x2x2 toy grid, clamped to the hull.
fn interp16(v: &[f64], s: &MarketState, axes: &[AxisSpec; 4]) -> f64 {
    let x = s.as_array();
    let f: Vec<f64> = (0..4)
        .map(|k| ((x[k] - axes[k].lo) / (axes[k].hi - axes[k].lo)).clamp(0.0, 1.0))
        .collect();
    let mut total = 0.0;
    for node in 0..16 {
        let bits = [(node >> 3) & 1, (node >> 2) & 1, (node >> 1) & 1, node & 1];
        let w: f64 = (0..4).map(|k| if bits[k] == 1 { f[k] } else { 1.0 - f[k] }).product();
        total += w * v[node];
    }
    total
}

#[test]
fn toy_grid_matches_finite_horizon_dp() {
    let model = PlatformModel::canonical();
    let cfg = toy_cfg(0.9);
    let axes = cfg.grid.axes;
    let controls = cfg.control_set();
    let solver = DpSolver::new(&model, cfg).unwrap();
    for objective in Objective::ALL {
        let (vf, _) = solver.value_iteration(objective).unwrap();
        let states: Vec<MarketState> = (0..16)
            .map(|node| {
                let b = [(node >> 3) & 1, (node >> 2) & 1, (node >> 1) & 1, node & 1];
                MarketState::from_array([0, 1, 2, 3].map(|k| if b[k] == 1 { axes[k].hi } else { axes[k].lo }))
            })
            .collect();
        let mut v = vec![0.0; 16];
        for _ in 0..200 {
            v = states
                .iter()
                .map(|s| {
                    controls
                        .iter()
                        .map(|c| {
                            let st = model.stage(s, c);
                            st.value(objective) + 0.9 * interp16(&v, &model.next_state(s, c, &st), &axes)
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        for node in 0..16 {
            assert!(
                (vf.values[node] - v[node]).abs() <= 1e-5,
                "{objective:?} node {node}: {} vs {}",
                vf.values[node],
                v[node]
            );
        }
    }
}

#[test]
fn residuals_contract_and_values_grow_with_discount() {
    let solve = |beta: f64| {
        let s = DpSolver::new(&Constant(3.0), DpConfig { discount: beta, ..single_node(beta, 1e-10) }).unwrap();
        s.value_iteration(Objective::Sw).unwrap().0
    };
    let mut last = 0.0;
    for beta in [0.3, 0.6, 0.9] {
        let vf = solve(beta);
        for w in vf.residual_history.windows(2).skip(1) {
            assert!(w[1] <= w[0]);
        }
        assert!(vf.values[0] >= last);
        last = vf.values[0];
    }

    let model = PlatformModel::canonical();
    let s = DpSolver::new(&model, toy_cfg(0.7)).unwrap();
    let (vf, _) = s.value_iteration(Objective::Gmv).unwrap();
    for w in vf.residual_history.windows(2).skip(1) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    let (hi, _) = DpSolver::new(&model, toy_cfg(0.9)).unwrap().value_iteration(Objective::Gmv).unwrap();
    for (a, b) in vf.values.iter().zip(&hi.values) {
        assert!(b >= a);
    }
}

#[test]
fn rollouts_resum_exactly() {
    let model = PlatformModel::canonical();
    let s = DpSolver::new(&model, toy_cfg(0.9)).unwrap();
    let (_, policy) = s.value_iteration(Objective::Sw).unwrap();
    let s0 = MarketState::new(2.0, 20.0, 2.0, 0.6);

    let one = simulate_policy(&model, &s, &policy, s0, 1);
    let c = one.steps[0].controls;
    assert_eq!(one.discounted_sw, model.stage(&s0, &c).sw);

    let r = simulate_policy(&model, &s, &policy, s0, 60);
    let mut sum = 0.0;
    let mut groups = [0.0; 3];
    for (t, step) in r.steps.iter().enumerate() {
        let w = 0.9f64.powi(t as i32);
        sum += w * step.sw;
        for k in 0..3 {
            groups[k] += w * step.groups[k];
        }
    }
    assert!((sum - r.discounted_sw).abs() <= 1e-9 * sum.abs().max(1.0));
    assert!((groups.iter().sum::<f64>() - sum).abs() <= 1e-9 * sum.abs().max(1.0));
}

#[test]
fn stationary_state_gives_constant_trajectory() {
    let s = DpSolver::new(&Constant(2.0), single_node(0.9, 1e-9)).unwrap();
    let (_, policy) = s.value_iteration(Objective::Sw).unwrap();
    let r = simulate_policy(&Constant(2.0), &s, &policy, MarketState::new(1.0, 1.0, 1.0, 1.0), 20);
    assert!(r.steps.iter().all(|st| st.state == r.steps[0].state && st.sw == 2.0));
}

#[test]
fn identical_policies_give_zero_gaps() {
    let model = PlatformModel::canonical();
    let s = DpSolver::new(&model, toy_cfg(0.9)).unwrap();
    let (_, policy) = s.value_iteration(Objective::Sw).unwrap();
    let r = check_theorems(&s, &policy, &policy, MarketState::canonical(), 1e-6);
    assert!(r.a1.gap.abs() < 1e-6);
    assert!(r.a1.holds);
    assert_eq!(r.a2.classification, Efficiency::ParetoImprovement);
    assert!(r.a2.group_gaps.iter().all(|g| g.abs() < 1e-6));
}

#[test]
fn frozen_workers_stay_frozen() {
    let mut model = PlatformModel::canonical();
    model.transition = TransitionParams {
        xi_w: 0.0,
        ..model.transition
    };
    let cfg = DpConfig {
        grid: StateGrid::new([
            AxisSpec::new(0.0, 200.0, 5),
            AxisSpec::new(0.0, 2000.0, 5),
            AxisSpec::point(0.0),
            AxisSpec::new(0.0, 1.0, 5),
        ]),
        ..DpConfig::default()
    };
    let s = DpSolver::new(&model, cfg).unwrap();
    let (_, pg) = s.value_iteration(Objective::Gmv).unwrap();
    let (_, ps) = s.value_iteration(Objective::Sw).unwrap();
    let s0 = MarketState::new(100.0, 1000.0, 0.0, 0.6);
    let r = check_theorems(&s, &ps, &pg, s0, 1e-6);
    assert_eq!(r.a2.group_gaps[2], 0.0);
    assert!(matches!(
        r.a2.classification,
        Efficiency::ParetoImprovement | Efficiency::KaldorHicks
    ));

    let live = MarketState::new(100.0, 1000.0, 150.0, 0.6);
    let full = DpSolver::new(&model, toy_cfg(0.9)).unwrap();
    let (_, policy) = full.value_iteration(Objective::Sw).unwrap();
    let roll = simulate_policy(&model, &full, &policy, live, 30);
    assert!(roll.steps.iter().all(|st| st.state.workers == 150.0));
}

/// Canonical instance at three discount factors: SW dominance everywhere,
/// and a gap that widens once the discount factor is high enough.
#[test]
fn welfare_gap_grows_for_high_discount() {
    let model = PlatformModel::canonical();
    let betas = [0.5, 0.9, 0.99];
    let mut gaps = Vec::new();
    for beta in betas {
        let s = DpSolver::new(&model, DpConfig { discount: beta, ..DpConfig::default() }).unwrap();
        let (_, pg) = s.value_iteration(Objective::Gmv).unwrap();
        let (_, ps) = s.value_iteration(Objective::Sw).unwrap();
        let r = check_theorems(&s, &ps, &pg, MarketState::canonical(), 1e-6);
        assert!(r.a1.holds, "beta {beta}: {:?}", r.a1);
        assert!(r.a1.gap > 0.0);
        gaps.push(r.a1.gap);
    }
    eprintln!("gaps at {betas:?}: {gaps:?}");
    let start = (0..gaps.len())
        .find(|&i| gaps[i..].windows(2).all(|w| w[1] > w[0]))
        .unwrap();
    assert!(start + 2 <= gaps.len(), "no tested tail with a growing gap: {gaps:?}");
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{AxisSpec, Cell, StateGrid};
use super::DynamicModel;
use crate::params::{ControlBounds, Controls, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub discount: f64,
    pub grid: StateGrid,
    /// Commission, delivery fee and wage axes.
    pub control_grid: [AxisSpec; 3],
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig::with_bounds(&ControlBounds::default(), 5)
    }
}

impl DpConfig {
    pub fn with_bounds(bounds: &ControlBounds, points: usize) -> DpConfig {
        let axis = |r: crate::config::Range| {
            if r.0 == r.1 {
                AxisSpec::point(r.0)
            } else {
                AxisSpec::new(r.0, r.1, points)
            }
        };
        DpConfig {
            discount: 0.9,
            grid: StateGrid::default(),
            control_grid: [axis(bounds.commission), axis(bounds.delivery_fee), axis(bounds.wage)],
            tol: 1e-6,
            max_iter: 10_000,
        }
    }

    pub fn validate(&self) -> Result<(), DpError> {
        let bad = |m: String| Err(DpError::InvalidConfig(m));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} must lie strictly inside (0, 1)", self.discount));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tolerance {} must be positive", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        self.grid.validate().map_err(DpError::InvalidConfig)?;
        for (axis, name) in self.control_grid.iter().zip(["commission", "delivery_fee", "wage"]) {
            axis.validate(name).map_err(DpError::InvalidConfig)?;
        }
        if self.control_grid[0].hi >= 1.0 || self.control_grid[0].lo < 0.0 {
            return bad("commission grid must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Control triples in lexicographic (α, D, p) ascending order.
    pub fn control_set(&self) -> Vec<Controls> {
        let [a, d, p] = self.control_grid.map(|ax| ax.points());
        let mut out = Vec::with_capacity(a.len() * d.len() * p.len());
        for &x in &a {
            for &y in &d {
                for &z in &p {
                    out.push(Controls::new(x, y, z));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpError {
    #[error("invalid dynamic-programming config: {0}")]
    InvalidConfig(String),
    #[error(
        "value iteration for {objective} did not converge in {iterations} iterations (last residual {last:e})",
        last = residual_history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence {
        objective: Objective,
        iterations: usize,
        residual_history: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub objective: Objective,
    pub discount: f64,
    pub values: Vec<f64>,
    pub residual_history: Vec<f64>,
}

/// Greedy control index per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrid {
    pub actions: Vec<u32>,
    pub control_set: Vec<Controls>,
}

impl PolicyGrid {
    pub fn controls(&self, node: usize) -> Controls {
        self.control_set[self.actions[node] as usize]
    }
}

/// Precomputed stage payoffs and next-state stencils for every
/// (node, control) pair.
pub struct DpSolver {
    pub cfg: DpConfig,
    controls: Vec<Controls>,
    gmv: Vec<f64>,
    sw: Vec<f64>,
    groups: Vec<[f64; 3]>,
    cells: Vec<Cell>,
    strides: [usize; 4],
}

impl DpSolver {
    pub fn new<M: DynamicModel>(model: &M, cfg: DpConfig) -> Result<DpSolver, DpError> {
        cfg.validate()?;
        let controls = cfg.control_set();
        let nc = controls.len();
        let nodes = cfg.grid.len();
        let mut gmv = vec![0.0; nodes * nc];
        let mut sw = vec![0.0; nodes * nc];
        let mut groups = vec![[0.0; 3]; nodes * nc];
        let mut cells = vec![Cell { base: 0, frac: [0.0; 4] }; nodes * nc];
        let grid = &cfg.grid;
        gmv.par_chunks_mut(nc)
            .zip(sw.par_chunks_mut(nc))
            .zip(groups.par_chunks_mut(nc))
            .zip(cells.par_chunks_mut(nc))
            .enumerate()
            .for_each(|(node, (((g, s), gr), cl))| {
                let state = grid.node_state(node);
                for (k, c) in controls.iter().enumerate() {
                    let stage = model.stage(&state, c);
                    let next = model.next_state(&state, c, &stage);
                    g[k] = stage.gmv;
                    s[k] = stage.sw;
                    gr[k] = stage.groups;
                    cl[k] = grid.locate(&next);
                }
            });
        let strides = grid.strides();
        Ok(DpSolver {
            cfg,
            controls,
            gmv,
            sw,
            groups,
            cells,
            strides,
        })
    }

    pub fn grid(&self) -> &StateGrid {
        &self.cfg.grid
    }

    pub fn control_set(&self) -> &[Controls] {
        &self.controls
    }

    pub fn nodes(&self) -> usize {
        self.cfg.grid.len()
    }

    fn payoffs(&self, objective: Objective) -> &[f64] {
        match objective {
            Objective::Gmv => &self.gmv,
            Objective::Sw => &self.sw,
        }
    }

    /// Largest absolute stage payoff for the objective.
    pub fn max_abs_payoff(&self, objective: Objective) -> f64 {
        self.payoffs(objective).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[inline]
    fn continuation(&self, values: &[f64], idx: usize) -> f64 {
        StateGrid::interpolate_cell(values, &self.strides, &self.cells[idx])
    }

    /// One Jacobi sweep of the Bellman operator. Returns the new values and
    /// the maximizing control per node; ties go to the earliest control in
    /// lexicographic order.
    pub fn backup(&self, objective: Objective, values: &[f64]) -> (Vec<f64>, Vec<u32>) {
        let nc = self.controls.len();
        let beta = self.cfg.discount;
        let pay = self.payoffs(objective);
        (0..self.nodes())
            .into_par_iter()
            .map(|node| {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0u32;
                for k in 0..nc {
                    let idx = node * nc + k;
                    let q = pay[idx] + beta * self.continuation(values, idx);
                    if q > best {
                        best = q;
                        arg = k as u32;
                    }
                }
                (best, arg)
            })
            .unzip()
    }

    /// Iterates the Bellman operator from zero until the sup-norm change
    /// drops to `tol`.
    pub fn value_iteration(&self, objective: Objective) -> Result<(ValueFunction, PolicyGrid), DpError> {
        let mut values = vec![0.0; self.nodes()];
        let mut history = Vec::new();
        for _ in 0..self.cfg.max_iter {
            let (next, _) = self.backup(objective, &values);
            let residual = sup_distance(&next, &values);
            history.push(residual);
            values = next;
            if residual <= self.cfg.tol {
                let (_, actions) = self.backup(objective, &values);
                return Ok((
                    ValueFunction {
                        objective,
                        discount: self.cfg.discount,
                        values,
                        residual_history: history,
                    },
                    self.policy(actions),
                ));
            }
        }
        Err(DpError::NonConvergence {
            objective,
            iterations: self.cfg.max_iter,
            residual_history: history,
        })
    }

    pub fn policy(&self, actions: Vec<u32>) -> PolicyGrid {
        PolicyGrid {
            actions,
            control_set: self.controls.clone(),
        }
    }

    /// Per-node objective payoff under a fixed policy.
    pub fn policy_payoff(&self, policy: &PolicyGrid, objective: Objective) -> Vec<f64> {
        let pay = self.payoffs(objective);
        self.policy_select(policy, |idx| pay[idx])
    }

    /// Per-node payoff of one stakeholder group (0 restaurants, 1 consumers,
    /// 2 workers) under a fixed policy.
    pub fn policy_group_payoff(&self, policy: &PolicyGrid, group: usize) -> Vec<f64> {
        self.policy_select(policy, |idx| self.groups[idx][group])
    }

    fn policy_select(&self, policy: &PolicyGrid, f: impl Fn(usize) -> f64) -> Vec<f64> {
        let nc = self.controls.len();
        policy
            .actions
            .iter()
            .enumerate()
            .map(|(node, &a)| f(node * nc + a as usize))
            .collect()
    }

    /// Solves `V = g + β P_π V` by fixed-point iteration to round-off.
    pub fn evaluate_policy(&self, policy: &PolicyGrid, node_payoff: &[f64], warm: Option<&[f64]>) -> Vec<f64> {
        let nc = self.controls.len();
        let beta = self.cfg.discount;
        let mut values = warm.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; self.nodes()]);
        let mut best_residual = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..1_000_000 {
            let next: Vec<f64> = (0..self.nodes())
                .into_par_iter()
                .map(|node| {
                    let idx = node * nc + policy.actions[node] as usize;
                    node_payoff[node] + beta * self.continuation(&values, idx)
                })
                .collect();
            let residual = sup_distance(&next, &values);
            let scale = next.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            values = next;
            if residual <= 1e-14 * scale {
                break;
            }
            if residual < best_residual {
                best_residual = residual;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 50 {
                    break;
                }
            }
        }
        values
    }

    /// Howard policy iteration from `init`. A node switches control only on
    /// a strict improvement beyond round-off, so the loop terminates.
    pub fn policy_iteration(&self, objective: Objective, init: PolicyGrid, max_rounds: usize) -> (Vec<f64>, PolicyGrid, usize) {
        let nc = self.controls.len();
        let beta = self.cfg.discount;
        let pay = self.payoffs(objective);
        let mut policy = init;
        let mut values: Option<Vec<f64>> = None;
        for round in 1..=max_rounds {
            let g = self.policy_payoff(&policy, objective);
            let v = self.evaluate_policy(&policy, &g, values.as_deref());
            let improved: Vec<u32> = (0..self.nodes())
                .into_par_iter()
                .map(|node| {
                    let current = policy.actions[node];
                    let q_of = |k: usize| {
                        let idx = node * nc + k;
                        pay[idx] + beta * self.continuation(&v, idx)
                    };
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0u32;
                    for k in 0..nc {
                        let q = q_of(k);
                        if q > best {
                            best = q;
                            arg = k as u32;
                        }
                    }
                    let q_current = q_of(current as usize);
                    if best > q_current + 1e-12 * (1.0 + q_current.abs()) {
                        arg
                    } else {
                        current
                    }
                })
                .collect();
            let stable = improved == policy.actions;
            policy.actions = improved;
            values = Some(v);
            if stable {
                return (values.unwrap(), policy, round);
            }
        }
        let g = self.policy_payoff(&policy, objective);
        let v = self.evaluate_policy(&policy, &g, values.as_deref());
        (v, policy, max_rounds)
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Iterations after which a β-contraction started at zero is within `tol`,
/// plus a margin of five.
pub fn iteration_bound(tol: f64, discount: f64, v_max: f64) -> usize {
    if v_max <= 0.0 {
        return 6;
    }
    let k = ((tol * (1.0 - discount) / v_max).ln() / discount.ln()).ceil();
    k.max(0.0) as usize + 5
}

/// One application of the Bellman operator to `vf`.
pub fn bellman_backup(solver: &DpSolver, vf: &ValueFunction) -> ValueFunction {
    let (values, _) = solver.backup(vf.objective, &vf.values);
    let mut history = vf.residual_history.clone();
    history.push(sup_distance(&values, &vf.values));
    ValueFunction {
        objective: vf.objective,
        discount: solver.cfg.discount,
        values,
        residual_history: history,
    }
}

/// Builds the solver for `model` and runs value iteration.
pub fn value_iteration<M: DynamicModel>(
    objective: Objective,
    cfg: &DpConfig,
    model: &M,
) -> Result<(ValueFunction, PolicyGrid), DpError> {
    DpSolver::new(model, cfg.clone())?.value_iteration(objective)
}

#[cfg(test)]
mod tests {
    use super::super::{MarketState, PlatformModel, RepUtils, StagePayoff};
    use super::*;

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
    fn geometric_series() {
        let cfg = single_node(0.5, 1e-12);
        let (vf, _) = value_iteration(Objective::Sw, &cfg, &Constant(1.0)).unwrap();
        assert!((vf.values[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn iteration_count_meets_analytic_bound() {
        let tol = 1e-6;
        let cfg = single_node(0.9, tol);
        let (vf, _) = value_iteration(Objective::Sw, &cfg, &Constant(1.0)).unwrap();
        assert!((vf.values[0] - 10.0).abs() < 1e-5);
        let bound = ((tol * (1.0 - 0.9)).ln() / 0.9f64.ln()).ceil() as usize;
        assert!(vf.residual_history.len() <= bound, "{} > {bound}", vf.residual_history.len());
    }

    #[test]
    fn zero_continuation_is_myopic() {
        let model = PlatformModel::canonical();
        let cfg = DpConfig {
            grid: StateGrid::new([
                AxisSpec::new(0.0, 200.0, 3),
                AxisSpec::new(0.0, 2000.0, 3),
                AxisSpec::new(0.0, 300.0, 3),
                AxisSpec::new(0.0, 1.0, 3),
            ]),
            ..DpConfig::default()
        };
        let solver = DpSolver::new(&model, cfg).unwrap();
        let (v, _) = solver.backup(Objective::Gmv, &vec![0.0; solver.nodes()]);
        for (node, value) in v.iter().enumerate() {
            let state = solver.grid().node_state(node);
            let best = solver
                .control_set()
                .iter()
                .map(|c| model.stage(&state, c).gmv)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(*value, best);
        }
    }

    #[test]
    fn rejects_bad_discount() {
        let cfg = DpConfig {
            discount: 1.0,
            ..DpConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(DpError::InvalidConfig(_))));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let cfg = DpConfig {
            max_iter: 3,
            ..single_node(0.9, 1e-12)
        };
        match value_iteration(Objective::Sw, &cfg, &Constant(1.0)) {
            Err(DpError::NonConvergence {
                residual_history, ..
            }) => assert_eq!(residual_history.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}

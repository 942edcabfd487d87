use serde::{Deserialize, Serialize};

use super::solver::{DpSolver, PolicyGrid};
use super::{DynamicModel, MarketState};
use crate::params::{Controls, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub state: MarketState,
    pub controls: Controls,
    pub gmv: f64,
    pub sw: f64,
    pub groups: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub discounted_gmv: f64,
    pub discounted_sw: f64,
    pub discounted_groups: [f64; 3],
}

/// Deterministic trajectory from `s0` under a grid policy.
///
/// Off-grid states use the multilinear blend of the corner nodes' controls.
pub fn simulate_policy<M: DynamicModel>(
    model: &M,
    solver: &DpSolver,
    policy: &PolicyGrid,
    s0: MarketState,
    horizon: usize,
) -> Rollout {
    let beta = solver.cfg.discount;
    let grid = solver.grid();
    let mut state = s0;
    let mut weight = 1.0;
    let mut out = Rollout {
        steps: Vec::with_capacity(horizon),
        discounted_gmv: 0.0,
        discounted_sw: 0.0,
        discounted_groups: [0.0; 3],
    };
    for _ in 0..horizon {
        let mut blend = [0.0; 3];
        for (node, w) in grid.stencil(&state) {
            let c = policy.controls(node).as_array();
            for k in 0..3 {
                blend[k] += w * c[k];
            }
        }
        let controls = Controls::from_array(blend);
        let stage = model.stage(&state, &controls);
        out.discounted_gmv += weight * stage.gmv;
        out.discounted_sw += weight * stage.sw;
        for k in 0..3 {
            out.discounted_groups[k] += weight * stage.groups[k];
        }
        out.steps.push(RolloutStep {
            state,
            controls,
            gmv: stage.gmv,
            sw: stage.sw,
            groups: stage.groups,
        });
        state = model.next_state(&state, &controls, &stage);
        weight *= beta;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremA1Report {
    /// Discounted SW at `s0` under the SW-optimal policy.
    pub v_sw: f64,
    /// Discounted SW at `s0` under the GMV-optimal policy.
    pub v_sw_under_gmv: f64,
    pub gap: f64,
    pub holds: bool,
    /// Smallest gap over every grid node.
    pub min_node_gap: f64,
    pub violating_nodes: usize,
    pub policy_iteration_rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Efficiency {
    ParetoImprovement,
    KaldorHicks,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremA2Report {
    /// Restaurant, consumer and worker discounted totals under each policy.
    pub groups_under_sw: [f64; 3],
    pub groups_under_gmv: [f64; 3],
    pub group_gaps: [f64; 3],
    pub classification: Efficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReports {
    pub a1: TheoremA1Report,
    pub a2: TheoremA2Report,
}

/// Compares the SW-optimal and GMV-optimal policies in welfare terms.
///
/// Both sides are exact policy values on the grid. The SW policy is first
/// polished by policy iteration so it is optimal for the discretized
/// problem, which makes dominance hold node by node up to round-off.
pub fn check_theorems(
    solver: &DpSolver,
    sw_policy: &PolicyGrid,
    gmv_policy: &PolicyGrid,
    s0: MarketState,
    tol: f64,
) -> TheoremReports {
    let grid = solver.grid();
    let (v_star, pi_star, rounds) = solver.policy_iteration(Objective::Sw, sw_policy.clone(), 100);
    let g = solver.policy_payoff(gmv_policy, Objective::Sw);
    let v_gmv = solver.evaluate_policy(gmv_policy, &g, Some(&v_star));

    let gaps: Vec<f64> = v_star.iter().zip(&v_gmv).map(|(a, b)| a - b).collect();
    let min_node_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let violating_nodes = gaps.iter().filter(|&&d| d < -tol).count();
    let v_sw = grid.interpolate(&v_star, &s0);
    let v_sw_under_gmv = grid.interpolate(&v_gmv, &s0);
    let gap = v_sw - v_sw_under_gmv;

    let group_value = |policy: &PolicyGrid, k: usize| {
        let payoff = solver.policy_group_payoff(policy, k);
        grid.interpolate(&solver.evaluate_policy(policy, &payoff, None), &s0)
    };
    let mut groups_under_sw = [0.0; 3];
    let mut groups_under_gmv = [0.0; 3];
    for k in 0..3 {
        groups_under_sw[k] = group_value(&pi_star, k);
        groups_under_gmv[k] = group_value(gmv_policy, k);
    }
    let group_gaps = [0, 1, 2].map(|k| groups_under_sw[k] - groups_under_gmv[k]);
    let classification = if group_gaps.iter().all(|&d| d >= -tol) {
        Efficiency::ParetoImprovement
    } else if gap >= -tol {
        Efficiency::KaldorHicks
    } else {
        Efficiency::Neither
    };

    TheoremReports {
        a1: TheoremA1Report {
            v_sw,
            v_sw_under_gmv,
            gap,
            holds: gap >= -tol && violating_nodes == 0,
            min_node_gap,
            violating_nodes,
            policy_iteration_rounds: rounds,
        },
        a2: TheoremA2Report {
            groups_under_sw,
            groups_under_gmv,
            group_gaps,
            classification,
        },
    }
}

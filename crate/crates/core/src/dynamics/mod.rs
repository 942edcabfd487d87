//! Infinite-horizon platform model over the state (R, C, W, Φ).
//!
//! Stage payoffs reuse the one-period formulas as a per-agent kernel and
//! scale them by the state. Transitions follow the entry/exit and
//! satisfaction rules driven by realized representative utilities.

mod grid;
mod solver;
mod theorems;

pub use grid::{AxisSpec, Cell, StateGrid, AXIS_NAMES};
pub use solver::{
    bellman_backup, iteration_bound, value_iteration, DpConfig, DpError, DpSolver, PolicyGrid,
    ValueFunction,
};
pub use theorems::{
    check_theorems, simulate_policy, Efficiency, Rollout, RolloutStep, TheoremA1Report,
    TheoremA2Report, TheoremReports,
};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{consumer_utility, demand, optimal_price, restaurant_utility};
use crate::params::{Controls, Objective, StaticParams};

/// Aggregate market state. Counts are continuous relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub restaurants: f64,
    pub consumers: f64,
    pub workers: f64,
    pub reputation: f64,
}

impl MarketState {
    pub fn new(restaurants: f64, consumers: f64, workers: f64, reputation: f64) -> MarketState {
        MarketState {
            restaurants,
            consumers,
            workers,
            reputation,
        }
    }

    /// The starting point of the reference experiment: 100, 1000, 150, Φ = 0.6.
    pub fn canonical() -> MarketState {
        MarketState::new(100.0, 1000.0, 150.0, 0.6)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.restaurants, self.consumers, self.workers, self.reputation]
    }

    pub fn from_array(a: [f64; 4]) -> MarketState {
        MarketState::new(a[0], a[1], a[2], a[3])
    }

    /// Non-negative counts and reputation in `[0, 1]`.
    pub fn clamped(self) -> MarketState {
        MarketState::new(
            self.restaurants.max(0.0),
            self.consumers.max(0.0),
            self.workers.max(0.0),
            self.reputation.clamp(0.0, 1.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub xi_r: f64,
    pub xi_c: f64,
    pub xi_w: f64,
    pub xi_phi: f64,
    pub u_floor: f64,
    pub u_floor_worker: f64,
    pub phi_neutral: f64,
    pub kappa: f64,
}

impl TransitionParams {
    /// Default sensitivities with κ chosen so that `state` is reputation-neutral
    /// under `controls`.
    pub fn calibrated(
        params: &StaticParams,
        closure: &PayoffClosure,
        state: &MarketState,
        controls: &Controls,
    ) -> TransitionParams {
        let rep = stage_payoffs(state, controls, params, closure).rep_utils;
        TransitionParams {
            xi_r: 1.0,
            xi_c: 10.0,
            xi_w: 0.5,
            xi_phi: 0.05,
            u_floor: 0.0,
            u_floor_worker: 0.0,
            phi_neutral: 0.6,
            kappa: rep.restaurant + rep.consumer + rep.worker,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("xi_r", self.xi_r),
            ("xi_c", self.xi_c),
            ("xi_w", self.xi_w),
            ("xi_phi", self.xi_phi),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.phi_neutral) {
            return Err(format!("phi_neutral = {} must lie in [0, 1]", self.phi_neutral));
        }
        Ok(())
    }
}

/// Scaling constants that lift per-agent utilities to market aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffClosure {
    /// Consumer mass at which each restaurant faces its one-period demand.
    pub c_ref: f64,
    /// Orders one unit of worker capacity can deliver per period.
    pub cap_per_worker: f64,
}

impl Default for PayoffClosure {
    fn default() -> Self {
        PayoffClosure {
            c_ref: 1000.0,
            cap_per_worker: 10.0,
        }
    }
}

/// Representative per-agent utilities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RepUtils {
    pub restaurant: f64,
    pub consumer: f64,
    pub worker: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StagePayoff {
    pub gmv: f64,
    pub sw: f64,
    pub rep_utils: RepUtils,
    /// Restaurant, consumer and worker totals; they sum to `sw`.
    pub groups: [f64; 3],
}

impl StagePayoff {
    pub fn value(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Gmv => self.gmv,
            Objective::Sw => self.sw,
        }
    }

    /// Builds a payoff from group totals, for hand-made models.
    pub fn from_groups(gmv: f64, groups: [f64; 3], rep_utils: RepUtils) -> StagePayoff {
        StagePayoff {
            gmv,
            sw: groups[0] + groups[1] + groups[2],
            rep_utils,
            groups,
        }
    }
}

/// Period payoffs at `state` under `controls`.
///
/// Each restaurant prices optimally and faces one-period demand scaled by
/// `C / c_ref`. Deliveries are capped at `W · cap_per_worker`, rationed
/// evenly. Per-agent utilities stay defined on empty sides of the market as
/// the utility a marginal entrant would get.
pub fn stage_payoffs(
    state: &MarketState,
    controls: &Controls,
    params: &StaticParams,
    closure: &PayoffClosure,
) -> StagePayoff {
    let MarketState {
        restaurants: r,
        consumers: c,
        workers: w,
        ..
    } = *state;
    let price = optimal_price(controls, params).unwrap_or(0.0);
    let q0 = demand(price, controls, params);
    let per_rest = q0 * c / closure.c_ref;
    let wanted = r * per_rest;
    let capacity = w * closure.cap_per_worker;
    let served = wanted.min(capacity);

    let q_rest = if r > 0.0 { served / r } else { per_rest.min(capacity) };
    let orders_per_consumer = if c > 0.0 { served / c } else { r * q0 / closure.c_ref };
    let orders_per_worker = if w > 0.0 {
        served / w
    } else if wanted > 0.0 {
        closure.cap_per_worker
    } else {
        0.0
    };

    let u_s = restaurant_utility(price, q_rest, controls, params);
    let u_c = orders_per_consumer * consumer_utility(price, controls, params);
    let u_r = orders_per_worker * (controls.wage - params.gamma * params.delivery_time);

    StagePayoff::from_groups(
        price * served,
        [r * u_s, c * u_c, w * u_r],
        RepUtils {
            restaurant: u_s,
            consumer: u_c,
            worker: u_r,
        },
    )
}

/// One-step state update driven by the period's representative utilities.
/// Controls act only through the utilities in `stage`.
pub fn transition(state: &MarketState, _controls: &Controls, tp: &TransitionParams, stage: &RepUtils) -> MarketState {
    let entry = if stage.restaurant > tp.u_floor { 1.0 } else { 0.0 };
    let exit = if stage.restaurant < 0.0 { 1.0 } else { 0.0 };
    MarketState {
        restaurants: state.restaurants + tp.xi_r * (entry - exit),
        consumers: state.consumers + tp.xi_c * (state.reputation - tp.phi_neutral),
        workers: state.workers + tp.xi_w * (stage.worker - tp.u_floor_worker),
        reputation: state.reputation
            + tp.xi_phi * (stage.restaurant + stage.worker + stage.consumer - tp.kappa),
    }
    .clamped()
}

/// A deterministic controlled system on the 4-D state.
pub trait DynamicModel: Sync {
    fn stage(&self, state: &MarketState, controls: &Controls) -> StagePayoff;
    fn next_state(&self, state: &MarketState, controls: &Controls, stage: &StagePayoff) -> MarketState;
}

/// The platform model: one-period kernel plus utility-driven transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformModel {
    pub params: StaticParams,
    pub transition: TransitionParams,
    pub closure: PayoffClosure,
}

impl PlatformModel {
    /// Canonical parameters, calibrated so the reference state is
    /// reputation-neutral at the midpoint controls.
    pub fn canonical() -> PlatformModel {
        let params = StaticParams::canonical();
        let closure = PayoffClosure::default();
        let mid = crate::params::ControlBounds::default().midpoint();
        PlatformModel {
            params,
            transition: TransitionParams::calibrated(&params, &closure, &MarketState::canonical(), &mid),
            closure,
        }
    }
}

impl DynamicModel for PlatformModel {
    fn stage(&self, state: &MarketState, controls: &Controls) -> StagePayoff {
        stage_payoffs(state, controls, &self.params, &self.closure)
    }

    fn next_state(&self, state: &MarketState, controls: &Controls, stage: &StagePayoff) -> MarketState {
        transition(state, controls, &self.transition, &stage.rep_utils)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid() -> Controls {
        Controls::new(0.15, 7.0, 9.0)
    }

    #[test]
    fn empty_supply_side() {
        let m = PlatformModel::canonical();
        let s = stage_payoffs(&MarketState::new(0.0, 1000.0, 150.0, 0.6), &mid(), &m.params, &m.closure);
        assert_eq!(s.gmv, 0.0);
        assert_eq!(s.groups[0], 0.0);
    }

    #[test]
    fn no_capacity_no_gmv() {
        let m = PlatformModel::canonical();
        let s = stage_payoffs(&MarketState::new(100.0, 1000.0, 0.0, 0.6), &mid(), &m.params, &m.closure);
        assert_eq!(s.gmv, 0.0);
    }

    #[test]
    fn canonical_state_is_reputation_neutral() {
        let m = PlatformModel::canonical();
        let s0 = MarketState::canonical();
        let st = m.stage(&s0, &mid());
        let next = m.next_state(&s0, &mid(), &st);
        assert!((next.reputation - s0.reputation).abs() < 1e-12);
        assert_eq!(next.consumers, s0.consumers);
    }

    #[test]
    fn dead_zone_keeps_restaurants() {
        let tp = TransitionParams {
            u_floor: 5.0,
            ..PlatformModel::canonical().transition
        };
        let s = MarketState::canonical();
        for u in [0.0, 2.5, 5.0] {
            let rep = RepUtils {
                restaurant: u,
                ..RepUtils::default()
            };
            assert_eq!(transition(&s, &mid(), &tp, &rep).restaurants, s.restaurants);
        }
    }
}

//! One-period equilibrium: utilities, linear demand, the restaurant's
//! optimal price, surplus measures and a derivative-free platform optimizer.
//!
//! Worker closure: every order is delivered, so the delivered count equals
//! equilibrium demand and total worker time is `Q · t`. Each ordering
//! consumer buys a single unit, so consumer welfare is `Q` copies of the
//! representative utility.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{ControlBounds, Controls, Objective, ParamError, StaticParams};
use crate::stream::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaticError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("static optimizer did not converge after {rounds} refinement rounds (box width {width:e})")]
    NonConvergence { rounds: usize, width: f64 },
}

/// Orders at menu price `price`: `max(0, θ − η(price + D) − δt)`.
pub fn demand(price: f64, controls: &Controls, params: &StaticParams) -> f64 {
    (params.theta - params.eta * (price + controls.delivery_fee) - params.delta * params.delivery_time)
        .max(0.0)
}

/// Revenue-maximizing menu price `(θ − ηD − δt) / 2η`, floored at zero.
///
/// The commission scales restaurant revenue uniformly and so does not move
/// the argmax.
pub fn optimal_price(controls: &Controls, params: &StaticParams) -> Result<f64, StaticError> {
    check_eta(params)?;
    let num = params.theta - params.eta * controls.delivery_fee - params.delta * params.delivery_time;
    Ok((num / (2.0 * params.eta)).max(0.0))
}

/// `(1 − α)·price·quantity − C_f`.
pub fn restaurant_utility(price: f64, quantity: f64, controls: &Controls, params: &StaticParams) -> f64 {
    (1.0 - controls.commission) * price * quantity - params.fixed_cost
}

/// `v − β_time·t − (basket + D)`.
pub fn consumer_utility(basket_cost: f64, controls: &Controls, params: &StaticParams) -> f64 {
    params.v - params.beta_time * params.delivery_time - (basket_cost + controls.delivery_fee)
}

/// `p·R − γ·t`.
pub fn worker_utility(orders_delivered: f64, time_spent: f64, controls: &Controls, params: &StaticParams) -> f64 {
    controls.wage * orders_delivered - params.gamma * time_spent
}

/// Effective price at which demand vanishes, `(θ − δt)/η` floored at zero.
pub fn choke_price(params: &StaticParams) -> Result<f64, StaticError> {
    check_eta(params)?;
    Ok(((params.theta - params.delta * params.delivery_time) / params.eta).max(0.0))
}

/// Area under the demand curve between `effective_price` and the choke price.
pub fn consumer_surplus(effective_price: f64, params: &StaticParams) -> f64 {
    let Ok(p_max) = choke_price(params) else {
        return 0.0;
    };
    if effective_price >= p_max {
        return 0.0;
    }
    let gap = p_max - effective_price;
    0.5 * params.eta * gap * gap
}

fn check_eta(params: &StaticParams) -> Result<(), StaticError> {
    if params.eta > 0.0 && params.eta.is_finite() {
        Ok(())
    } else {
        Err(ParamError::Invalid {
            field: "eta",
            value: params.eta,
            reason: "must be positive",
        }
        .into())
    }
}

/// Outcome of the one-period game at given controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticOutcome {
    pub price: f64,
    pub quantity: f64,
    pub restaurant_utility: f64,
    /// Utility of one ordering consumer.
    pub consumer_utility: f64,
    /// Aggregate utility of the delivery workforce.
    pub worker_utility: f64,
    pub gmv: f64,
    pub social_welfare: f64,
}

/// Restaurant best-responds with the optimal price; all orders are delivered.
pub fn evaluate(controls: &Controls, params: &StaticParams) -> Result<StaticOutcome, StaticError> {
    let price = optimal_price(controls, params)?;
    Ok(outcome_at_price(price, controls, params))
}

fn outcome_at_price(price: f64, controls: &Controls, params: &StaticParams) -> StaticOutcome {
    let q = demand(price, controls, params);
    let u_s = restaurant_utility(price, q, controls, params);
    let u_c = consumer_utility(price, controls, params);
    let u_r = worker_utility(q, q * params.delivery_time, controls, params);
    StaticOutcome {
        price,
        quantity: q,
        restaurant_utility: u_s,
        consumer_utility: u_c,
        worker_utility: u_r,
        gmv: price * q,
        social_welfare: u_s + q * u_c + u_r,
    }
}

/// Objective value at `controls`.
pub fn objective_value(objective: Objective, controls: &Controls, params: &StaticParams) -> Result<f64, StaticError> {
    let o = evaluate(controls, params)?;
    Ok(match objective {
        Objective::Gmv => o.gmv,
        Objective::Sw => o.social_welfare,
    })
}

/// Sum of the objective over independent restaurant markets sharing one platform.
pub fn market_objective(objective: Objective, controls: &Controls, markets: &[StaticParams]) -> Result<f64, StaticError> {
    markets.iter().map(|p| objective_value(objective, controls, p)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurplusReport {
    pub consumer_surplus: f64,
    pub restaurant_surplus: f64,
    pub worker_surplus: f64,
    pub choke_price: f64,
}

/// Delivered orders and minutes spent by the workforce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub orders: f64,
    pub minutes: f64,
}

/// Surpluses at the restaurant's optimal price with the default workload.
pub fn surplus_report(controls: &Controls, params: &StaticParams) -> Result<SurplusReport, StaticError> {
    let price = optimal_price(controls, params)?;
    let q = demand(price, controls, params);
    surplus_report_with_workload(
        controls,
        params,
        Workload {
            orders: q,
            minutes: q * params.delivery_time,
        },
    )
}

pub fn surplus_report_with_workload(
    controls: &Controls,
    params: &StaticParams,
    workload: Workload,
) -> Result<SurplusReport, StaticError> {
    let price = optimal_price(controls, params)?;
    let q = demand(price, controls, params);
    Ok(SurplusReport {
        consumer_surplus: consumer_surplus(price + controls.delivery_fee, params),
        restaurant_surplus: restaurant_utility(price, q, controls, params),
        worker_surplus: worker_utility(workload.orders, workload.minutes, controls, params),
        choke_price: choke_price(params)?,
    })
}

/// Grid-refinement settings for [`solve_static`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub points_per_axis: usize,
    pub shrink: f64,
    pub min_rounds: usize,
    pub max_rounds: usize,
    /// Stop once every axis is narrower than this fraction of its original width.
    pub rel_width_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            points_per_axis: 21,
            shrink: 5.0,
            min_rounds: 3,
            max_rounds: 40,
            rel_width_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticSolution {
    pub objective: Objective,
    pub controls: Controls,
    pub value: f64,
    pub rounds: usize,
}

/// Maximizes the objective over the control box.
pub fn solve_static(
    objective: Objective,
    params: &StaticParams,
    bounds: &ControlBounds,
) -> Result<StaticSolution, StaticError> {
    solve_static_market(objective, std::slice::from_ref(params), bounds, &SolverOptions::default())
}

/// Maximizes the summed objective over several restaurant markets.
///
/// Each round scans a full tensor grid in (α, D, p) ascending order and only
/// replaces the incumbent on strict improvement, so ties resolve to the
/// lexicographically smallest triple. The box then shrinks around the
/// incumbent, clipped to the original bounds.
pub fn solve_static_market(
    objective: Objective,
    markets: &[StaticParams],
    bounds: &ControlBounds,
    opts: &SolverOptions,
) -> Result<StaticSolution, StaticError> {
    bounds.validate()?;
    for p in markets {
        p.validate()?;
    }
    let original = bounds.axes();
    let n = opts.points_per_axis.max(2);
    let mut axes = original;
    let mut best: Option<(Controls, f64)> = None;

    for round in 1..=opts.max_rounds {
        let grids: Vec<Vec<f64>> = axes.iter().map(|r| linspace(r.0, r.1, n)).collect();
        for &a in &grids[0] {
            for &d in &grids[1] {
                for &p in &grids[2] {
                    let c = Controls::new(a, d, p);
                    let value = market_objective(objective, &c, markets)?;
                    let better = match best {
                        None => true,
                        Some((bc, bv)) => value > bv || (value == bv && c.lex_cmp(&bc).is_lt()),
                    };
                    if better {
                        best = Some((c, value));
                    }
                }
            }
        }
        let (incumbent, value) = best.expect("grid is non-empty");

        let converged = axes
            .iter()
            .zip(original.iter())
            .all(|(r, o)| r.width() <= opts.rel_width_tol * o.width().max(f64::MIN_POSITIVE) || o.width() == 0.0);
        if round >= opts.min_rounds && converged {
            return Ok(StaticSolution {
                objective,
                controls: incumbent,
                value,
                rounds: round,
            });
        }

        let centre = incumbent.as_array();
        for k in 0..3 {
            let half = axes[k].width() / (2.0 * opts.shrink);
            let lo = (centre[k] - half).max(original[k].0);
            let hi = (centre[k] + half).min(original[k].1);
            axes[k] = crate::config::Range(lo, hi);
        }
    }
    Err(StaticError::NonConvergence {
        rounds: opts.max_rounds,
        width: axes.iter().map(|r| r.width()).fold(0.0, f64::max),
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Comparison of the GMV- and SW-optimal controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub gmv_optimum: Controls,
    pub sw_optimum: Controls,
    pub sw_at_sw: f64,
    pub sw_at_gmv: f64,
    pub gmv_at_sw: f64,
    pub gmv_at_gmv: f64,
    pub commission_lower_under_sw: bool,
    pub fee_higher_under_sw: bool,
    pub wage_higher_under_sw: bool,
    pub sw_dominates: bool,
}

impl LemmaReport {
    pub fn orderings_hold(&self) -> bool {
        self.commission_lower_under_sw && self.fee_higher_under_sw && self.wage_higher_under_sw
    }
}

/// Tolerance on the welfare-dominance verdict.
pub const DOMINANCE_TOL: f64 = 1e-6;

pub fn check_lemma_orderings(params: &StaticParams, bounds: &ControlBounds) -> Result<LemmaReport, StaticError> {
    let g = solve_static(Objective::Gmv, params, bounds)?;
    let s = solve_static(Objective::Sw, params, bounds)?;
    let at_g = evaluate(&g.controls, params)?;
    let at_s = evaluate(&s.controls, params)?;
    Ok(LemmaReport {
        gmv_optimum: g.controls,
        sw_optimum: s.controls,
        sw_at_sw: at_s.social_welfare,
        sw_at_gmv: at_g.social_welfare,
        gmv_at_sw: at_s.gmv,
        gmv_at_gmv: at_g.gmv,
        commission_lower_under_sw: s.controls.commission <= g.controls.commission,
        fee_higher_under_sw: s.controls.delivery_fee >= g.controls.delivery_fee,
        wage_higher_under_sw: s.controls.wage >= g.controls.wage,
        sw_dominates: at_s.social_welfare >= at_g.social_welfare - DOMINANCE_TOL,
    })
}

/// Central finite-difference gradient of the objective in (α, D, p).
pub fn objective_gradient(
    objective: Objective,
    controls: &Controls,
    params: &StaticParams,
    h: f64,
) -> Result<[f64; 3], StaticError> {
    let base = controls.as_array();
    let mut grad = [0.0; 3];
    for (k, g) in grad.iter_mut().enumerate() {
        let mut up = base;
        let mut down = base;
        up[k] += h;
        down[k] -= h;
        let f_up = objective_value(objective, &Controls::from_array(up), params)?;
        let f_down = objective_value(objective, &Controls::from_array(down), params)?;
        *g = (f_up - f_down) / (2.0 * h);
    }
    Ok(grad)
}

/// Restaurant utility as a function of its own price, controls held fixed.
fn restaurant_utility_at(price: f64, controls: &Controls, params: &StaticParams) -> f64 {
    restaurant_utility(price, demand(price, controls, params), controls, params)
}

/// Central second difference of `U_S` in the price at `A*`.
pub fn price_curvature(controls: &Controls, params: &StaticParams, h: f64) -> Result<f64, StaticError> {
    let a = optimal_price(controls, params)?;
    let f = |x| restaurant_utility_at(x, controls, params);
    Ok((f(a + h) - 2.0 * f(a) + f(a - h)) / (h * h))
}

/// Central first difference of `U_S` in the price at `A*`.
pub fn price_slope(controls: &Controls, params: &StaticParams, h: f64) -> Result<f64, StaticError> {
    let a = optimal_price(controls, params)?;
    let f = |x| restaurant_utility_at(x, controls, params);
    Ok((f(a + h) - f(a - h)) / (2.0 * h))
}

/// True when `A*` is positive and demand stays positive within `h` of it.
pub fn price_is_interior(controls: &Controls, params: &StaticParams, h: f64) -> bool {
    match optimal_price(controls, params) {
        Ok(a) => a > h && demand(a + h, controls, params) > 0.0,
        Err(_) => false,
    }
}

/// Instance families used by randomized checks and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFamily {
    /// Broad draws over every valid parameter region.
    General,
    /// Worker time cost comparable to the wage and restaurant margins thin.
    Typical,
}

/// Draws parameters and an in-box control triple.
pub fn sample_instance(
    family: InstanceFamily,
    bounds: &ControlBounds,
    rng: &mut RandomStream,
) -> (StaticParams, Controls) {
    let controls = Controls::new(
        rng.uniform(bounds.commission.0, bounds.commission.1),
        rng.uniform(bounds.delivery_fee.0, bounds.delivery_fee.1),
        rng.uniform(bounds.wage.0, bounds.wage.1),
    );
    let params = match family {
        InstanceFamily::General => StaticParams {
            theta: rng.uniform(20.0, 200.0),
            eta: rng.uniform(0.5, 5.0),
            delta: rng.uniform(0.0, 2.0),
            beta_time: rng.uniform(0.0, 1.0),
            gamma: rng.uniform(0.0, 3.0),
            v: rng.uniform(0.0, 150.0),
            fixed_cost: rng.uniform(0.0, 300.0),
            delivery_time: rng.uniform(0.0, 30.0),
        },
        InstanceFamily::Typical => {
            let theta = rng.uniform(80.0, 150.0);
            let eta = rng.uniform(1.0, 3.0);
            let delta = rng.uniform(0.5, 1.5);
            let t = rng.uniform(5.0, 20.0);
            let wage_mid = bounds.wage.midpoint();
            let gamma = wage_mid * rng.uniform(0.5, 1.5) / t;
            let beta_time = rng.uniform(0.2, 1.0);
            let v = rng.uniform(40.0, 80.0);
            let mut p = StaticParams {
                theta,
                eta,
                delta,
                beta_time,
                gamma,
                v,
                fixed_cost: 0.0,
                delivery_time: t,
            };
            let mid = bounds.midpoint();
            let revenue = evaluate(&mid, &p).map(|o| o.gmv).unwrap_or(0.0);
            p.fixed_cost = (1.0 - mid.commission) * revenue * rng.uniform(0.8, 1.0);
            p
        }
    };
    (params, controls)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon() -> StaticParams {
        StaticParams::canonical()
    }

    #[test]
    fn demand_examples() {
        let c = Controls::new(0.1, 5.0, 5.0);
        assert_eq!(demand(20.0, &c, &canon()), 40.0);
        let c12 = Controls::new(0.1, 12.0, 5.0);
        assert_eq!(demand(1000.0, &c12, &canon()), 0.0);
        let p_max = choke_price(&canon()).unwrap();
        assert_eq!(demand(p_max - 5.0, &c, &canon()), 0.0);
    }

    #[test]
    fn zero_numerator_gives_zero_price() {
        let p = StaticParams {
            theta: 2.0 * 5.0 + 1.0 * 10.0,
            ..canon()
        };
        assert_eq!(optimal_price(&Controls::new(0.1, 5.0, 5.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_eta_is_rejected() {
        let p = StaticParams { eta: 0.0, ..canon() };
        assert!(optimal_price(&Controls::new(0.1, 5.0, 5.0), &p).is_err());
        assert!(choke_price(&p).is_err());
    }

    #[test]
    fn utility_trivial_cases() {
        let zero = StaticParams {
            v: 0.0,
            beta_time: 0.0,
            delivery_time: 0.0,
            fixed_cost: 0.0,
            gamma: 0.0,
            ..canon()
        };
        let c0 = Controls::new(0.0, 0.0, 0.0);
        assert_eq!(restaurant_utility(10.0, 0.0, &c0, &zero), 0.0);
        assert_eq!(consumer_utility(0.0, &c0, &zero), 0.0);
        assert_eq!(worker_utility(7.0, 3.0, &c0, &zero), 0.0);
    }

    #[test]
    fn choke_floor() {
        let p = StaticParams {
            delta: 20.0,
            ..canon()
        };
        assert_eq!(choke_price(&p).unwrap(), 0.0);
        assert_eq!(consumer_surplus(45.0, &canon()), 0.0);
    }

    #[test]
    fn singleton_box_returns_point() {
        let c = Controls::new(0.12, 6.0, 8.0);
        let s = solve_static(Objective::Sw, &canon(), &ControlBounds::singleton(c)).unwrap();
        assert_eq!(s.controls, c);
        let r = check_lemma_orderings(&canon(), &ControlBounds::singleton(c)).unwrap();
        assert!(r.orderings_hold() && r.sw_dominates);
        assert_eq!(r.sw_at_sw, r.sw_at_gmv);
    }

    #[test]
    fn gmv_ignores_commission_and_wage() {
        let s = solve_static(Objective::Gmv, &canon(), &ControlBounds::default()).unwrap();
        assert_eq!(s.controls, ControlBounds::default().lower());
    }

    #[test]
    fn round_cap_reports_nonconvergence() {
        let opts = SolverOptions {
            max_rounds: 2,
            ..SolverOptions::default()
        };
        let err = solve_static_market(Objective::Sw, &[canon()], &ControlBounds::default(), &opts).unwrap_err();
        assert!(matches!(err, StaticError::NonConvergence { rounds: 2, .. }));
    }
}

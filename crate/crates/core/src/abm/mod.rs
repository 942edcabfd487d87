//! Agent-based market: restaurants, consumers and couriers on one platform
//! that adapts its commission, delivery fee and wage period by period.

mod agents;
mod env;
mod platform;

pub use agents::{ConsumerAgent, RestaurantAgent, RestaurantPeriod, WorkerAgent, WorkerPeriod};
pub use env::{init_env, Environment, Order, PeriodTally, Streams};
pub use platform::{Kpi, PlatformLedger, SearchState};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SimConfig, Strategy};

/// Everything recorded for one period.
///
/// `active_*` count agents that have not exited. `serving_restaurants` and
/// `working_workers` count those that actually filled or carried an order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub period: usize,
    pub gmv: f64,
    pub sw: f64,
    pub reputation: f64,
    pub active_restaurants: usize,
    pub active_workers: usize,
    pub active_consumers: usize,
    pub avg_restaurant_utility: f64,
    pub avg_consumer_utility: f64,
    pub avg_worker_utility: f64,
    pub restaurant_satisfaction: f64,
    pub worker_satisfaction: f64,
    pub consumer_satisfaction: f64,
    pub commission: f64,
    pub delivery_fee: f64,
    pub wage: f64,
    pub demand_multiplier: f64,
    pub orders: usize,
    pub late_orders: usize,
    pub on_time_rate: f64,
    pub restaurant_entries: usize,
    pub restaurant_exits: usize,
    pub worker_entries: usize,
    pub worker_exits: usize,
    pub consumer_entries: usize,
    pub consumer_exits: usize,
    pub serving_restaurants: usize,
    pub working_workers: usize,
    pub total_restaurants: usize,
    pub total_workers: usize,
    pub commission_revenue: f64,
    pub restaurant_net_revenue: f64,
    pub fee_revenue: f64,
    pub wage_bill: f64,
    pub subsidy_paid: f64,
}

impl PeriodMetrics {
    /// Column names in serialization order.
    pub const FIELDS: [&'static str; 35] = [
        "period",
        "gmv",
        "sw",
        "reputation",
        "active_restaurants",
        "active_workers",
        "active_consumers",
        "avg_restaurant_utility",
        "avg_consumer_utility",
        "avg_worker_utility",
        "restaurant_satisfaction",
        "worker_satisfaction",
        "consumer_satisfaction",
        "commission",
        "delivery_fee",
        "wage",
        "demand_multiplier",
        "orders",
        "late_orders",
        "on_time_rate",
        "restaurant_entries",
        "restaurant_exits",
        "worker_entries",
        "worker_exits",
        "consumer_entries",
        "consumer_exits",
        "serving_restaurants",
        "working_workers",
        "total_restaurants",
        "total_workers",
        "commission_revenue",
        "restaurant_net_revenue",
        "fee_revenue",
        "wage_bill",
        "subsidy_paid",
    ];

    /// All fields as floats, in `FIELDS` order.
    pub fn values(&self) -> [f64; 35] {
        [
            self.period as f64,
            self.gmv,
            self.sw,
            self.reputation,
            self.active_restaurants as f64,
            self.active_workers as f64,
            self.active_consumers as f64,
            self.avg_restaurant_utility,
            self.avg_consumer_utility,
            self.avg_worker_utility,
            self.restaurant_satisfaction,
            self.worker_satisfaction,
            self.consumer_satisfaction,
            self.commission,
            self.delivery_fee,
            self.wage,
            self.demand_multiplier,
            self.orders as f64,
            self.late_orders as f64,
            self.on_time_rate,
            self.restaurant_entries as f64,
            self.restaurant_exits as f64,
            self.worker_entries as f64,
            self.worker_exits as f64,
            self.consumer_entries as f64,
            self.consumer_exits as f64,
            self.serving_restaurants as f64,
            self.working_workers as f64,
            self.total_restaurants as f64,
            self.total_workers as f64,
            self.commission_revenue,
            self.restaurant_net_revenue,
            self.fee_revenue,
            self.wage_bill,
            self.subsidy_paid,
        ]
    }

    /// Inverse of [`values`](Self::values). Count fields are rounded.
    pub fn from_values(v: &[f64; 35]) -> PeriodMetrics {
        let count = |x: f64| x.round().max(0.0) as usize;
        PeriodMetrics {
            period: count(v[0]),
            gmv: v[1],
            sw: v[2],
            reputation: v[3],
            active_restaurants: count(v[4]),
            active_workers: count(v[5]),
            active_consumers: count(v[6]),
            avg_restaurant_utility: v[7],
            avg_consumer_utility: v[8],
            avg_worker_utility: v[9],
            restaurant_satisfaction: v[10],
            worker_satisfaction: v[11],
            consumer_satisfaction: v[12],
            commission: v[13],
            delivery_fee: v[14],
            wage: v[15],
            demand_multiplier: v[16],
            orders: count(v[17]),
            late_orders: count(v[18]),
            on_time_rate: v[19],
            restaurant_entries: count(v[20]),
            restaurant_exits: count(v[21]),
            worker_entries: count(v[22]),
            worker_exits: count(v[23]),
            consumer_entries: count(v[24]),
            consumer_exits: count(v[25]),
            serving_restaurants: count(v[26]),
            working_workers: count(v[27]),
            total_restaurants: count(v[28]),
            total_workers: count(v[29]),
            commission_revenue: v[30],
            restaurant_net_revenue: v[31],
            fee_revenue: v[32],
            wage_bill: v[33],
            subsidy_paid: v[34],
        }
    }

    pub fn field(&self, name: &str) -> Option<f64> {
        Self::FIELDS.iter().position(|f| *f == name).map(|i| self.values()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub run_index: usize,
    pub seed: u64,
    pub periods: Vec<PeriodMetrics>,
}

impl RunResult {
    pub fn last(&self) -> Option<&PeriodMetrics> {
        self.periods.last()
    }
}

/// One run of `periods` periods. Streams depend on `(seed, run_index)` only,
/// so runs with different strategies but the same index share their market
/// draws, population and shopping lotteries.
pub fn run_single(config: &SimConfig, seed: u64, run_index: usize, periods: usize) -> RunResult {
    let mut env = init_env(config, Streams::derive(seed, run_index));
    let periods = (0..periods).map(|_| env.step()).collect();
    RunResult {
        strategy: config.platform_strategy,
        run_index,
        seed,
        periods,
    }
}

/// `runs` independent runs, in parallel on the current rayon pool, ordered
/// by run index.
pub fn run_simulation(config: &SimConfig, seed: u64, runs: usize, periods: usize) -> Vec<RunResult> {
    (0..runs)
        .into_par_iter()
        .map(|i| run_single(config, seed, i, periods))
        .collect()
}

/// Paired runs for several strategies; results grouped by strategy in the
/// given order.
pub fn run_strategies(
    config: &SimConfig,
    strategies: &[Strategy],
    seed: u64,
    runs: usize,
    periods: usize,
) -> Vec<RunResult> {
    let jobs: Vec<(Strategy, usize)> = strategies
        .iter()
        .flat_map(|&s| (0..runs).map(move |i| (s, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(s, i)| {
            let cfg = SimConfig {
                platform_strategy: s,
                ..config.clone()
            };
            run_single(&cfg, seed, i, periods)
        })
        .collect()
}

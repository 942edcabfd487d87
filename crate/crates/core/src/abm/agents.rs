use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::stream::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestaurantAgent {
    pub id: usize,
    pub menu: Vec<f64>,
    pub fixed_cost: f64,
    pub quality: f64,
    pub reputation: f64,
    /// Cuisine position on the consumers' taste axis.
    pub taste: f64,
    pub region: usize,
    pub cumulative_utility: f64,
    pub active: bool,
    /// Net revenue deflated by the demand multiplier, last two periods.
    pub adjusted_revenue: [Option<f64>; 2],
    pub period: RestaurantPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RestaurantPeriod {
    pub orders: usize,
    pub gross_revenue: f64,
    pub net_revenue: f64,
    pub utility: f64,
}

impl RestaurantAgent {
    pub fn spawn(id: usize, cfg: &SimConfig, rng: &mut RandomStream) -> RestaurantAgent {
        let size = rng.uniform_int(cfg.menu_size_range.0, cfg.menu_size_range.1) as usize;
        let menu = (0..size)
            .map(|_| rng.uniform(cfg.price_range.0, cfg.price_range.1).clamp(cfg.price_min, cfg.price_max))
            .collect();
        RestaurantAgent {
            id,
            menu,
            fixed_cost: rng.uniform(cfg.fixed_cost_range.0, cfg.fixed_cost_range.1),
            quality: rng.uniform(cfg.quality_range.0, cfg.quality_range.1),
            reputation: rng.uniform(cfg.reputation_range.0, cfg.reputation_range.1),
            taste: rng.uniform(cfg.taste_preference_range.0, cfg.taste_preference_range.1),
            region: rng.index(cfg.region_options.len()),
            cumulative_utility: 0.0,
            active: true,
            adjusted_revenue: [None, None],
            period: RestaurantPeriod::default(),
        }
    }

    /// Menu item matching a consumer taste in `[0, 1]`.
    pub fn item_for(&self, taste: f64) -> f64 {
        let n = self.menu.len();
        let i = ((taste.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        self.menu[i]
    }

    pub fn mean_price(&self) -> f64 {
        self.menu.iter().sum::<f64>() / self.menu.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerAgent {
    pub id: usize,
    pub budget: f64,
    pub valuation: f64,
    pub price_sensitivity: f64,
    /// Weight on expected delivery time in the choice score; also the
    /// money cost of one minute of waiting.
    pub time_sensitivity: f64,
    pub quality_sensitivity: f64,
    pub loyalty: f64,
    pub region: usize,
    pub taste_preference: f64,
    /// Persistent draw on `[0, 1)`; the consumer shops in periods where it
    /// falls below the shopping rate.
    pub order_propensity: f64,
    pub cumulative_utility: f64,
    pub period_utility: f64,
    pub active: bool,
}

impl ConsumerAgent {
    pub fn spawn(id: usize, cfg: &SimConfig, rng: &mut RandomStream) -> ConsumerAgent {
        ConsumerAgent {
            id,
            budget: rng.uniform(cfg.consumer_budget_range.0, cfg.consumer_budget_range.1),
            valuation: rng.uniform(cfg.consumer_value_range.0, cfg.consumer_value_range.1),
            price_sensitivity: rng.uniform(cfg.price_sensitivity_range.0, cfg.price_sensitivity_range.1),
            time_sensitivity: rng.uniform(cfg.time_sensitivity_range.0, cfg.time_sensitivity_range.1),
            quality_sensitivity: rng.uniform(cfg.quality_sensitivity_range.0, cfg.quality_sensitivity_range.1),
            loyalty: rng.uniform(cfg.platform_loyalty_range.0, cfg.platform_loyalty_range.1),
            region: rng.index(cfg.region_options.len()),
            taste_preference: rng.uniform(cfg.taste_preference_range.0, cfg.taste_preference_range.1),
            order_propensity: 0.0,
            cumulative_utility: 0.0,
            period_utility: 0.0,
            active: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAgent {
    pub id: usize,
    pub time_cost_factor: f64,
    pub skill: f64,
    pub experience: f64,
    pub satisfaction: f64,
    pub cumulative_utility: f64,
    pub active: bool,
    pub period: WorkerPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkerPeriod {
    pub accepted: bool,
    pub deliveries: usize,
    pub income: f64,
    pub minutes: f64,
    pub utility: f64,
}

impl WorkerAgent {
    pub fn spawn(id: usize, cfg: &SimConfig, rng: &mut RandomStream) -> WorkerAgent {
        WorkerAgent {
            id,
            time_cost_factor: rng.uniform(cfg.time_cost_factor_range.0, cfg.time_cost_factor_range.1),
            skill: rng.uniform(cfg.skill_level_range.0, cfg.skill_level_range.1),
            experience: rng.uniform(cfg.experience_range.0, cfg.experience_range.1),
            satisfaction: rng.uniform(cfg.satisfaction_range.0, cfg.satisfaction_range.1),
            cumulative_utility: 0.0,
            active: true,
            period: WorkerPeriod::default(),
        }
    }

    /// Money cost of one working minute.
    pub fn minute_cost(&self, cfg: &SimConfig) -> f64 {
        self.time_cost_factor * cfg.worker_minute_cost
    }

    /// Inside `(exit threshold, transition zone]`.
    pub fn in_transition_zone(&self, cfg: &SimConfig) -> bool {
        self.cumulative_utility > cfg.worker_exit_threshold
            && self.cumulative_utility <= cfg.worker_transition_zone
    }
}

//! Simulation configuration.
//!
//! The file format is a flat TOML table. Keys use the canonical experiment
//! names (`n_restaurants`, `MIN_COMMISSION`, `PRICE_RANGE`, ...); ranges are
//! written as two-element arrays `[lo, hi]`. Every key is optional and falls
//! back to the canonical default. Unknown keys are rejected so typos surface
//! instead of silently running the default.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Platform objective used by the agent-based strategy update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "GMV")]
    Gmv,
    #[serde(rename = "SW")]
    Sw,
    #[serde(rename = "HYBRID")]
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Gmv, Strategy::Sw, Strategy::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Gmv => "GMV",
            Strategy::Sw => "SW",
            Strategy::Hybrid => "HYBRID",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "GMV" => Ok(Strategy::Gmv),
            "SW" => Ok(Strategy::Sw),
            "HYBRID" => Ok(Strategy::Hybrid),
            other => Err(format!(
                "unknown strategy `{other}`; valid strategies are {{GMV, SW, HYBRID}}"
            )),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn width(&self) -> f64 {
        self.1 - self.0
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.0 + self.1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.0 && x <= self.1
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.0).min(self.1)
    }
}

/// Inclusive integer interval, used for menu sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange(pub u32, pub u32);

/// Full experiment configuration.
///
/// The first block mirrors the canonical experiment dictionary key by key.
/// The trailing block holds the behavioural closure constants the agent
/// rules need but the canonical dictionary does not name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    // Environment scale.
    pub n_restaurants: usize,
    pub n_consumers: usize,
    pub n_workers: usize,
    pub n_periods: usize,
    pub strategy_update_interval: usize,
    pub platform_strategy: Strategy,
    #[serde(rename = "HYBRID_LAMBDA")]
    pub hybrid_lambda: f64,
    #[serde(rename = "DEFAULT_RUNS")]
    pub default_runs: usize,

    // Market dynamics.
    #[serde(rename = "MARKET_GROWTH_RANGE")]
    pub market_growth_range: Range,
    #[serde(rename = "COMPETITION_INTENSITY_RANGE")]
    pub competition_intensity_range: Range,
    #[serde(rename = "ECONOMIC_SHOCK_RANGE")]
    pub economic_shock_range: Range,
    #[serde(rename = "SEASONAL_FACTOR_RANGE")]
    pub seasonal_factor_range: Range,
    #[serde(rename = "NETWORK_EFFECT_RANGE")]
    pub network_effect_range: Range,

    // Platform strategy adjustment.
    #[serde(rename = "COMMISSION_ADJUSTMENT_RATE")]
    pub commission_adjustment_rate: f64,
    #[serde(rename = "DELIVERY_FEE_ADJUSTMENT_RATE")]
    pub delivery_fee_adjustment_rate: f64,
    #[serde(rename = "WAGE_ADJUSTMENT_RATE")]
    pub wage_adjustment_rate: f64,
    #[serde(rename = "MIN_COMMISSION")]
    pub min_commission: f64,
    #[serde(rename = "MAX_COMMISSION")]
    pub max_commission: f64,
    #[serde(rename = "MIN_DELIVERY_FEE")]
    pub min_delivery_fee: f64,
    #[serde(rename = "MAX_DELIVERY_FEE")]
    pub max_delivery_fee: f64,
    #[serde(rename = "MIN_WAGE")]
    pub min_wage: f64,
    #[serde(rename = "MAX_WAGE")]
    pub max_wage: f64,

    // Restaurants.
    #[serde(rename = "MENU_SIZE_RANGE")]
    pub menu_size_range: CountRange,
    #[serde(rename = "PRICE_RANGE")]
    pub price_range: Range,
    #[serde(rename = "FIXED_COST_RANGE")]
    pub fixed_cost_range: Range,
    #[serde(rename = "QUALITY_RANGE")]
    pub quality_range: Range,
    #[serde(rename = "REPUTATION_RANGE")]
    pub reputation_range: Range,
    #[serde(rename = "PRICE_MIN")]
    pub price_min: f64,
    #[serde(rename = "PRICE_MAX")]
    pub price_max: f64,
    #[serde(rename = "REVENUE_PRICE_ADJUSTMENT_FACTOR")]
    pub revenue_price_adjustment_factor: f64,
    #[serde(rename = "PRICE_GAP_ADJUSTMENT_FACTOR")]
    pub price_gap_adjustment_factor: f64,

    // Consumers.
    #[serde(rename = "CONSUMER_BUDGET_RANGE")]
    pub consumer_budget_range: Range,
    #[serde(rename = "CONSUMER_VALUE_RANGE")]
    pub consumer_value_range: Range,
    #[serde(rename = "PRICE_SENSITIVITY_RANGE")]
    pub price_sensitivity_range: Range,
    #[serde(rename = "TIME_SENSITIVITY_RANGE")]
    pub time_sensitivity_range: Range,
    #[serde(rename = "QUALITY_SENSITIVITY_RANGE")]
    pub quality_sensitivity_range: Range,
    #[serde(rename = "PLATFORM_LOYALTY_RANGE")]
    pub platform_loyalty_range: Range,
    #[serde(rename = "REGION_OPTIONS")]
    pub region_options: Vec<String>,
    #[serde(rename = "TASTE_PREFERENCE_RANGE")]
    pub taste_preference_range: Range,

    // Delivery workers.
    #[serde(rename = "TIME_COST_FACTOR_RANGE")]
    pub time_cost_factor_range: Range,
    #[serde(rename = "SKILL_LEVEL_RANGE")]
    pub skill_level_range: Range,
    #[serde(rename = "EXPERIENCE_RANGE")]
    pub experience_range: Range,
    #[serde(rename = "SATISFACTION_RANGE")]
    pub satisfaction_range: Range,

    // Exit mechanics.
    #[serde(rename = "RESTAURANT_EXIT_THRESHOLD")]
    pub restaurant_exit_threshold: f64,
    #[serde(rename = "RESTAURANT_TRANSITION_ZONE")]
    pub restaurant_transition_zone: f64,
    #[serde(rename = "WORKER_EXIT_THRESHOLD")]
    pub worker_exit_threshold: f64,
    #[serde(rename = "WORKER_TRANSITION_ZONE")]
    pub worker_transition_zone: f64,
    #[serde(rename = "EMERGENCY_SUBSIDY_RATE")]
    pub emergency_subsidy_rate: f64,

    // Behavioural closure.
    /// Units of the chosen menu item in one order.
    #[serde(rename = "BASKET_ITEMS")]
    pub basket_items: f64,
    /// Share of consumers shopping in a neutral market (demand multiplier 1).
    #[serde(rename = "BASE_ORDER_RATE")]
    pub base_order_rate: f64,
    /// Orders one worker can carry per period.
    #[serde(rename = "WORKER_CAPACITY")]
    pub worker_capacity: f64,
    /// Numerator of the base delivery time `BASE_DELIVERY_MINUTES / skill`.
    #[serde(rename = "BASE_DELIVERY_MINUTES")]
    pub base_delivery_minutes: f64,
    /// Time scale that makes the delivery-time score term dimensionless.
    #[serde(rename = "REFERENCE_DELIVERY_MINUTES")]
    pub reference_delivery_minutes: f64,
    /// Extra waiting time charged to consumers whose order found no courier.
    #[serde(rename = "LATE_PENALTY_MINUTES")]
    pub late_penalty_minutes: f64,
    /// Upper cap on the congestion ratio used for delivery-time estimates.
    #[serde(rename = "MAX_CONGESTION")]
    pub max_congestion: f64,
    /// Currency cost of one worker minute at time-cost factor 1.
    #[serde(rename = "WORKER_MINUTE_COST")]
    pub worker_minute_cost: f64,
    /// Minutes each active worker spends online per period regardless of load.
    #[serde(rename = "WORKER_STANDBY_MINUTES")]
    pub worker_standby_minutes: f64,
    /// Per-order margin demanded by workers inside their transition zone,
    /// as a fraction of `|WORKER_TRANSITION_ZONE|`.
    #[serde(rename = "WORKER_ACCEPTANCE_MARGIN_SCALE")]
    pub worker_acceptance_margin_scale: f64,
    #[serde(rename = "REPUTATION_INITIAL")]
    pub reputation_initial: f64,
    /// Neutral reputation level; entry only happens above it.
    #[serde(rename = "REPUTATION_NEUTRAL")]
    pub reputation_neutral: f64,
    #[serde(rename = "REPUTATION_SENSITIVITY")]
    pub reputation_sensitivity: f64,
    /// Sum of normalized on-time rate and satisfaction at which reputation is stationary.
    #[serde(rename = "REPUTATION_TARGET")]
    pub reputation_target: f64,
    #[serde(rename = "RESTAURANT_ENTRY_TRIALS")]
    pub restaurant_entry_trials: u32,
    #[serde(rename = "WORKER_ENTRY_TRIALS")]
    pub worker_entry_trials: u32,
    /// Trials of the consumer entry lottery above neutral reputation and of
    /// the exit lottery below it.
    #[serde(rename = "CONSUMER_CHURN_TRIALS")]
    pub consumer_churn_trials: u32,
    /// Objective changes smaller than this (in min-max normalized units) count as flat.
    #[serde(rename = "STRATEGY_DEADBAND")]
    pub strategy_deadband: f64,
    /// Observations required before KPI normalization is considered defined.
    #[serde(rename = "KPI_NORMALIZATION_FLOOR")]
    pub kpi_normalization_floor: usize,
    /// Trailing periods used to estimate KPI sensitivity to the demand multiplier.
    #[serde(rename = "KPI_ADJUSTMENT_WINDOW")]
    pub kpi_adjustment_window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_restaurants: 100,
            n_consumers: 1000,
            n_workers: 150,
            n_periods: 200,
            strategy_update_interval: 2,
            platform_strategy: Strategy::Hybrid,
            hybrid_lambda: 0.5,
            default_runs: 5,

            market_growth_range: Range(0.98, 1.02),
            competition_intensity_range: Range(0.8, 1.2),
            economic_shock_range: Range(0.90, 1.10),
            seasonal_factor_range: Range(0.9, 1.1),
            network_effect_range: Range(0.95, 1.05),

            commission_adjustment_rate: 0.03,
            delivery_fee_adjustment_rate: 0.03,
            wage_adjustment_rate: 0.03,
            min_commission: 0.05,
            max_commission: 0.25,
            min_delivery_fee: 2.0,
            max_delivery_fee: 12.0,
            min_wage: 3.0,
            max_wage: 15.0,

            menu_size_range: CountRange(4, 8),
            price_range: Range(10.0, 20.0),
            fixed_cost_range: Range(100.0, 200.0),
            quality_range: Range(0.7, 1.0),
            reputation_range: Range(0.5, 0.7),
            price_min: 8.0,
            price_max: 25.0,
            revenue_price_adjustment_factor: 0.05,
            price_gap_adjustment_factor: 0.1,

            consumer_budget_range: Range(40.0, 100.0),
            consumer_value_range: Range(50.0, 120.0),
            price_sensitivity_range: Range(0.3, 0.7),
            time_sensitivity_range: Range(0.2, 0.5),
            quality_sensitivity_range: Range(0.4, 0.8),
            platform_loyalty_range: Range(0.4, 0.8),
            region_options: ["North", "South", "East", "West"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            taste_preference_range: Range(0.0, 1.0),

            time_cost_factor_range: Range(0.6, 1.0),
            skill_level_range: Range(0.7, 1.0),
            experience_range: Range(0.1, 0.5),
            satisfaction_range: Range(0.5, 0.8),

            restaurant_exit_threshold: -300.0,
            restaurant_transition_zone: -200.0,
            worker_exit_threshold: -50.0,
            worker_transition_zone: -20.0,
            emergency_subsidy_rate: 0.10,

            basket_items: 3.0,
            base_order_rate: 0.7,
            worker_capacity: 10.0,
            base_delivery_minutes: 20.0,
            reference_delivery_minutes: 30.0,
            late_penalty_minutes: 60.0,
            max_congestion: 4.0,
            worker_minute_cost: 0.19,
            worker_standby_minutes: 100.0,
            worker_acceptance_margin_scale: 0.05,
            reputation_initial: 0.6,
            reputation_neutral: 0.6,
            reputation_sensitivity: 0.02,
            reputation_target: 1.5,
            restaurant_entry_trials: 5,
            worker_entry_trials: 8,
            consumer_churn_trials: 5,
            strategy_deadband: 0.01,
            kpi_normalization_floor: 10,
            kpi_adjustment_window: 50,
        }
    }
}

/// Named presets layered over the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// The canonical dictionary as-is (200 periods, 5 runs).
    Default,
    /// The reported experiment scale: 500 periods, 50 runs.
    PaperExperiment,
}

impl Profile {
    pub fn apply(self, config: &mut SimConfig) {
        if let Profile::PaperExperiment = self {
            config.n_periods = 500;
            config.default_runs = 50;
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Profile::Default),
            "paper-experiment" => Ok(Profile::PaperExperiment),
            other => Err(format!(
                "unknown profile `{other}`; valid profiles are {{default, paper-experiment}}"
            )),
        }
    }
}

/// One problem found while validating a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub keys: Vec<String>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.keys.join(", "), self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n{}", format_issues(.0))]
    Invalid(Vec<ConfigIssue>),
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid(issues) => issues,
            _ => &[],
        }
    }

    /// Every key named by any issue, in report order.
    pub fn keys(&self) -> Vec<&str> {
        self.issues()
            .iter()
            .flat_map(|i| i.keys.iter().map(String::as_str))
            .collect()
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SimConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<SimConfig, ConfigError> {
        let raw: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        validate_config(&raw)
    }

    pub fn from_path(path: &Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig always serializes")
    }

    /// The control box `[MIN, MAX]` per control.
    pub fn control_bounds(&self) -> crate::params::ControlBounds {
        crate::params::ControlBounds {
            commission: Range(self.min_commission, self.max_commission),
            delivery_fee: Range(self.min_delivery_fee, self.max_delivery_fee),
            wage: Range(self.min_wage, self.max_wage),
        }
    }

    /// Checks every invariant and returns all violations at once.
    pub fn check(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut issue = |keys: &[&str], message: String| {
            issues.push(ConfigIssue {
                keys: keys.iter().map(|k| k.to_string()).collect(),
                message,
            })
        };

        let ranges: [(&str, Range); 20] = [
            ("MARKET_GROWTH_RANGE", self.market_growth_range),
            ("COMPETITION_INTENSITY_RANGE", self.competition_intensity_range),
            ("ECONOMIC_SHOCK_RANGE", self.economic_shock_range),
            ("SEASONAL_FACTOR_RANGE", self.seasonal_factor_range),
            ("NETWORK_EFFECT_RANGE", self.network_effect_range),
            ("PRICE_RANGE", self.price_range),
            ("FIXED_COST_RANGE", self.fixed_cost_range),
            ("QUALITY_RANGE", self.quality_range),
            ("REPUTATION_RANGE", self.reputation_range),
            ("CONSUMER_BUDGET_RANGE", self.consumer_budget_range),
            ("CONSUMER_VALUE_RANGE", self.consumer_value_range),
            ("PRICE_SENSITIVITY_RANGE", self.price_sensitivity_range),
            ("TIME_SENSITIVITY_RANGE", self.time_sensitivity_range),
            ("QUALITY_SENSITIVITY_RANGE", self.quality_sensitivity_range),
            ("PLATFORM_LOYALTY_RANGE", self.platform_loyalty_range),
            ("TASTE_PREFERENCE_RANGE", self.taste_preference_range),
            ("TIME_COST_FACTOR_RANGE", self.time_cost_factor_range),
            ("SKILL_LEVEL_RANGE", self.skill_level_range),
            ("EXPERIENCE_RANGE", self.experience_range),
            ("SATISFACTION_RANGE", self.satisfaction_range),
        ];
        for (key, r) in ranges {
            if !(r.0.is_finite() && r.1.is_finite()) {
                issue(&[key], format!("range [{}, {}] must be finite", r.0, r.1));
            } else if r.0 > r.1 {
                issue(&[key], format!("range lower bound {} exceeds upper bound {}", r.0, r.1));
            }
        }
        if self.menu_size_range.0 > self.menu_size_range.1 {
            issue(
                &["MENU_SIZE_RANGE"],
                format!(
                    "range lower bound {} exceeds upper bound {}",
                    self.menu_size_range.0, self.menu_size_range.1
                ),
            );
        }
        if self.menu_size_range.0 == 0 {
            issue(&["MENU_SIZE_RANGE"], "restaurants need at least one dish".into());
        }

        let bounds = [
            ("MIN_COMMISSION", self.min_commission, "MAX_COMMISSION", self.max_commission),
            ("MIN_DELIVERY_FEE", self.min_delivery_fee, "MAX_DELIVERY_FEE", self.max_delivery_fee),
            ("MIN_WAGE", self.min_wage, "MAX_WAGE", self.max_wage),
            ("PRICE_MIN", self.price_min, "PRICE_MAX", self.price_max),
        ];
        for (lo_key, lo, hi_key, hi) in bounds {
            if lo > hi {
                issue(&[lo_key, hi_key], format!("{lo_key} = {lo} exceeds {hi_key} = {hi}"));
            }
        }
        if self.min_commission < 0.0 {
            issue(&["MIN_COMMISSION"], "commission cannot be negative".into());
        }
        if self.max_commission >= 1.0 {
            issue(&["MAX_COMMISSION"], "commission must stay below 1".into());
        }
        if self.min_delivery_fee < 0.0 {
            issue(&["MIN_DELIVERY_FEE"], "delivery fee cannot be negative".into());
        }
        if self.min_wage < 0.0 {
            issue(&["MIN_WAGE"], "wage cannot be negative".into());
        }
        if self.price_min <= 0.0 {
            issue(&["PRICE_MIN"], "menu prices must be positive".into());
        }

        if !(self.restaurant_exit_threshold < self.restaurant_transition_zone
            && self.restaurant_transition_zone < 0.0)
        {
            issue(
                &["RESTAURANT_EXIT_THRESHOLD", "RESTAURANT_TRANSITION_ZONE"],
                format!(
                    "need RESTAURANT_EXIT_THRESHOLD ({}) < RESTAURANT_TRANSITION_ZONE ({}) < 0",
                    self.restaurant_exit_threshold, self.restaurant_transition_zone
                ),
            );
        }
        if !(self.worker_exit_threshold < self.worker_transition_zone
            && self.worker_transition_zone < 0.0)
        {
            issue(
                &["WORKER_EXIT_THRESHOLD", "WORKER_TRANSITION_ZONE"],
                format!(
                    "need WORKER_EXIT_THRESHOLD ({}) < WORKER_TRANSITION_ZONE ({}) < 0",
                    self.worker_exit_threshold, self.worker_transition_zone
                ),
            );
        }

        if !(0.0..=1.0).contains(&self.hybrid_lambda) {
            issue(&["HYBRID_LAMBDA"], format!("{} is outside [0, 1]", self.hybrid_lambda));
        }
        if self.strategy_update_interval == 0 {
            issue(&["strategy_update_interval"], "must be at least 1".into());
        }
        if self.region_options.is_empty() {
            issue(&["REGION_OPTIONS"], "at least one region is required".into());
        }

        let nonneg = [
            ("COMMISSION_ADJUSTMENT_RATE", self.commission_adjustment_rate),
            ("DELIVERY_FEE_ADJUSTMENT_RATE", self.delivery_fee_adjustment_rate),
            ("WAGE_ADJUSTMENT_RATE", self.wage_adjustment_rate),
            ("REVENUE_PRICE_ADJUSTMENT_FACTOR", self.revenue_price_adjustment_factor),
            ("PRICE_GAP_ADJUSTMENT_FACTOR", self.price_gap_adjustment_factor),
            ("EMERGENCY_SUBSIDY_RATE", self.emergency_subsidy_rate),
            ("BASKET_ITEMS", self.basket_items),
            ("BASE_ORDER_RATE", self.base_order_rate),
            ("WORKER_CAPACITY", self.worker_capacity),
            ("LATE_PENALTY_MINUTES", self.late_penalty_minutes),
            ("MAX_CONGESTION", self.max_congestion),
            ("WORKER_MINUTE_COST", self.worker_minute_cost),
            ("WORKER_STANDBY_MINUTES", self.worker_standby_minutes),
            ("WORKER_ACCEPTANCE_MARGIN_SCALE", self.worker_acceptance_margin_scale),
            ("REPUTATION_SENSITIVITY", self.reputation_sensitivity),
            ("STRATEGY_DEADBAND", self.strategy_deadband),
        ];
        for (key, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                issue(&[key], format!("{v} must be a finite non-negative number"));
            }
        }
        for (key, v) in [
            ("BASE_DELIVERY_MINUTES", self.base_delivery_minutes),
            ("REFERENCE_DELIVERY_MINUTES", self.reference_delivery_minutes),
        ] {
            if !(v.is_finite() && v > 0.0) {
                issue(&[key], format!("{v} must be positive"));
            }
        }
        for (key, v) in [
            ("REPUTATION_INITIAL", self.reputation_initial),
            ("REPUTATION_NEUTRAL", self.reputation_neutral),
        ] {
            if !(0.0..=1.0).contains(&v) {
                issue(&[key], format!("{v} is outside [0, 1]"));
            }
        }
        if self.skill_level_range.0 <= 0.0 {
            issue(&["SKILL_LEVEL_RANGE"], "skill must be positive".into());
        }
        if self.consumer_budget_range.0 <= 0.0 {
            issue(&["CONSUMER_BUDGET_RANGE"], "budgets must be positive".into());
        }
        if self.kpi_adjustment_window < 2 {
            issue(&["KPI_ADJUSTMENT_WINDOW"], "needs at least two observations".into());
        }
        issues
    }
}

/// Builds a validated configuration from a parsed key-value document.
///
/// Missing keys take their defaults. Unknown keys, type mismatches and
/// invariant violations are all collected before failing.
pub fn validate_config(raw: &toml::Table) -> Result<SimConfig, ConfigError> {
    let defaults = default_table();
    let mut issues = Vec::new();

    let mut merged = defaults.clone();
    for (key, value) in raw {
        if !defaults.contains_key(key) {
            issues.push(ConfigIssue {
                keys: vec![key.clone()],
                message: "unknown key".into(),
            });
            continue;
        }
        // Type-check each override in isolation so every bad key is reported.
        let mut probe = defaults.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = probe.try_into::<SimConfig>() {
            issues.push(ConfigIssue {
                keys: vec![key.clone()],
                message: format!("invalid value: {}", e.message()),
            });
            continue;
        }
        merged.insert(key.clone(), value.clone());
    }
    if !issues.is_empty() {
        return Err(ConfigError::Invalid(issues));
    }

    let config: SimConfig = merged
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let issues = config.check();
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(issues))
    }
}

fn default_table() -> toml::Table {
    toml::Table::try_from(SimConfig::default()).expect("default config serializes to a table")
}

use serde::{Deserialize, Serialize};

use super::agents::{ConsumerAgent, RestaurantAgent, RestaurantPeriod, WorkerAgent, WorkerPeriod};
use super::platform::{Kpi, PlatformLedger};
use super::PeriodMetrics;
use crate::config::SimConfig;
use crate::stream::{derive_stream, RandomStream, StreamId};

#[derive(Debug, Clone)]
pub struct Streams {
    pub market: RandomStream,
    pub agents: RandomStream,
    pub choice: RandomStream,
    pub delivery: RandomStream,
}

impl Streams {
    pub fn derive(seed: u64, run_index: usize) -> Streams {
        Streams {
            market: derive_stream(seed, run_index, StreamId::Market),
            agents: derive_stream(seed, run_index, StreamId::Agents),
            choice: derive_stream(seed, run_index, StreamId::Choice),
            delivery: derive_stream(seed, run_index, StreamId::Delivery),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub consumer: usize,
    pub restaurant: usize,
    pub basket: f64,
    pub commission: f64,
    pub restaurant_net: f64,
    pub fee: f64,
    pub worker: Option<usize>,
    pub minutes: f64,
}

/// Bookkeeping for the period in progress.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeriodTally {
    pub multiplier: f64,
    pub restaurant_entries: usize,
    pub worker_entries: usize,
    pub consumer_entries: usize,
    pub consumer_exits: usize,
    pub restaurant_exits: usize,
    pub worker_exits: usize,
    pub gmv: f64,
    pub sw: f64,
    pub commission_revenue: f64,
    pub restaurant_net_revenue: f64,
    pub fee_revenue: f64,
    pub wage_bill: f64,
    pub subsidy: f64,
    /// Controls in effect during the period.
    pub commission: f64,
    pub delivery_fee: f64,
    pub wage: f64,
    pub on_time_rate: f64,
    pub consumer_satisfaction: f64,
    pub worker_satisfaction: f64,
    pub restaurant_satisfaction: f64,
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub config: SimConfig,
    pub period: usize,
    pub restaurants: Vec<RestaurantAgent>,
    pub consumers: Vec<ConsumerAgent>,
    pub workers: Vec<WorkerAgent>,
    pub platform: PlatformLedger,
    pub streams: Streams,
    /// Last period's load ratio, the basis of consumers' time expectations.
    pub congestion: f64,
    pub orders: Vec<Order>,
    pub tally: PeriodTally,
}

/// Builds the initial population from the `agents` stream: restaurants,
/// then consumers, then workers, each in id order.
pub fn init_env(config: &SimConfig, mut streams: Streams) -> Environment {
    let rng = &mut streams.agents;
    let restaurants = (0..config.n_restaurants)
        .map(|id| RestaurantAgent::spawn(id, config, rng))
        .collect();
    let mut consumers: Vec<ConsumerAgent> = (0..config.n_consumers)
        .map(|id| ConsumerAgent::spawn(id, config, rng))
        .collect();
    let workers = (0..config.n_workers)
        .map(|id| WorkerAgent::spawn(id, config, rng))
        .collect();
    for c in &mut consumers {
        c.order_propensity = streams.choice.next_f64();
    }
    Environment {
        config: config.clone(),
        period: 0,
        restaurants,
        consumers,
        workers,
        platform: PlatformLedger::new(config),
        streams,
        congestion: 0.0,
        orders: Vec::new(),
        tally: PeriodTally::default(),
    }
}

fn entry_probability(reputation: f64, neutral: f64) -> f64 {
    (2.0 * (reputation - neutral)).clamp(0.0, 1.0)
}

impl Environment {
    pub fn active_restaurants(&self) -> usize {
        self.restaurants.iter().filter(|r| r.active).count()
    }

    pub fn active_consumers(&self) -> usize {
        self.consumers.iter().filter(|c| c.active).count()
    }

    pub fn active_workers(&self) -> usize {
        self.workers.iter().filter(|w| w.active).count()
    }

    /// Clears per-period state and records the controls in effect.
    pub fn begin_period(&mut self) {
        self.period += 1;
        self.orders.clear();
        let c = self.platform.controls;
        self.tally = PeriodTally {
            commission: c.commission,
            delivery_fee: c.delivery_fee,
            wage: c.wage,
            ..PeriodTally::default()
        };
        for r in &mut self.restaurants {
            r.period = RestaurantPeriod::default();
        }
        for c in &mut self.consumers {
            c.period_utility = 0.0;
        }
        for w in &mut self.workers {
            w.period = WorkerPeriod::default();
        }
    }

    /// Draws the five market factors and the entry lotteries. Always
    /// consumes the same number of market draws, so paired runs see the same
    /// market regardless of strategy.
    ///
    /// Above neutral reputation restaurants, workers and consumers arrive;
    /// below it consumers drift away, picked by the `agents` stream.
    pub fn update_market_and_add(&mut self) {
        let cfg = &self.config;
        let m = &mut self.streams.market;
        let mut multiplier = 1.0;
        for r in [
            cfg.market_growth_range,
            cfg.competition_intensity_range,
            cfg.economic_shock_range,
            cfg.seasonal_factor_range,
            cfg.network_effect_range,
        ] {
            multiplier *= m.uniform(r.0, r.1);
        }
        self.tally.multiplier = multiplier;

        let p = entry_probability(self.platform.reputation, cfg.reputation_neutral);
        let new_r = m.binomial(cfg.restaurant_entry_trials, p) as usize;
        let new_w = m.binomial(cfg.worker_entry_trials, p) as usize;
        let new_c = m.binomial(cfg.consumer_churn_trials, p) as usize;
        let q = entry_probability(cfg.reputation_neutral, self.platform.reputation);
        let gone_c = m.binomial(cfg.consumer_churn_trials, q) as usize;
        for _ in 0..new_r {
            let id = self.restaurants.len();
            self.restaurants
                .push(RestaurantAgent::spawn(id, cfg, &mut self.streams.agents));
        }
        for _ in 0..new_w {
            let id = self.workers.len();
            self.workers.push(WorkerAgent::spawn(id, cfg, &mut self.streams.agents));
        }
        for _ in 0..new_c {
            let id = self.consumers.len();
            let mut c = ConsumerAgent::spawn(id, cfg, &mut self.streams.agents);
            c.order_propensity = self.streams.choice.next_f64();
            self.consumers.push(c);
        }
        let mut exits = 0;
        for _ in 0..gone_c {
            let active: Vec<usize> = self.consumers.iter().filter(|c| c.active).map(|c| c.id).collect();
            if active.is_empty() {
                break;
            }
            let i = active[self.streams.agents.index(active.len())];
            self.consumers[i].active = false;
            exits += 1;
        }
        self.tally.restaurant_entries = new_r;
        self.tally.worker_entries = new_w;
        self.tally.consumer_entries = new_c;
        self.tally.consumer_exits = exits;
    }

    /// Revenue-trend nudge plus a pull toward the market average price.
    pub fn update_rest_prices(&mut self) {
        let cfg = &self.config;
        let (sum, n) = self
            .restaurants
            .iter()
            .filter(|r| r.active)
            .flat_map(|r| r.menu.iter())
            .fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
        if n == 0 {
            return;
        }
        let avg = sum / n as f64;
        for r in self.restaurants.iter_mut().filter(|r| r.active) {
            let trend = match r.adjusted_revenue {
                [Some(now), Some(before)] => {
                    let scale = now.abs().max(before.abs());
                    if (now - before).abs() <= 1e-9 * scale {
                        0.0
                    } else {
                        (now - before).signum()
                    }
                }
                _ => 0.0,
            };
            for p in &mut r.menu {
                let next = *p
                    + cfg.price_gap_adjustment_factor * (avg - *p)
                    + cfg.revenue_price_adjustment_factor * *p * trend;
                *p = next.clamp(cfg.price_min, cfg.price_max);
            }
        }
    }

    /// Mean skill of active workers, or the midpoint of the skill range when
    /// nobody is active.
    fn mean_skill(&self) -> f64 {
        let (s, n) = self
            .workers
            .iter()
            .filter(|w| w.active)
            .fold((0.0, 0usize), |(s, n), w| (s + w.skill, n + 1));
        if n == 0 {
            self.config.skill_level_range.midpoint()
        } else {
            s / n as f64
        }
    }

    /// Delivery time consumers expect at a given load ratio.
    pub fn expected_minutes(&self, congestion: f64) -> f64 {
        let c = if self.active_workers() == 0 {
            self.config.max_congestion
        } else {
            congestion.min(self.config.max_congestion)
        };
        self.config.base_delivery_minutes / self.mean_skill() * (1.0 + c)
    }

    /// Choice score of restaurant `r` for consumer `c`, or `None` when the
    /// basket plus fee exceeds the budget.
    pub fn score(&self, c: &ConsumerAgent, r: &RestaurantAgent, expected_minutes: f64) -> Option<(f64, f64)> {
        let cfg = &self.config;
        let basket = cfg.basket_items * r.item_for(c.taste_preference);
        let cost = basket + self.platform.controls.delivery_fee;
        if cost > c.budget {
            return None;
        }
        let score = c.quality_sensitivity * r.quality - c.price_sensitivity * cost / c.budget
            - c.time_sensitivity * expected_minutes / cfg.reference_delivery_minutes
            + 0.5 * c.loyalty * self.platform.reputation
            + 0.25 * (1.0 - (c.taste_preference - r.taste).abs());
        Some((score, basket))
    }

    /// Consumers whose propensity falls below the shopping rate order from
    /// the best-scoring affordable restaurant in their region. Returns GMV.
    pub fn consume_order(&mut self) -> f64 {
        let shop_p = self.config.base_order_rate * self.tally.multiplier;
        let t_exp = self.expected_minutes(self.congestion);
        let regions = self.config.region_options.len();
        let mut by_region: Vec<Vec<usize>> = vec![Vec::new(); regions];
        for r in self.restaurants.iter().filter(|r| r.active) {
            by_region[r.region].push(r.id);
        }

        let alpha = self.platform.controls.commission;
        let fee = self.platform.controls.delivery_fee;
        let mut orders = Vec::new();
        for ci in 0..self.consumers.len() {
            let c = &self.consumers[ci];
            if !c.active || c.order_propensity >= shop_p {
                continue;
            }
            let mut best: Option<(f64, usize, f64)> = None;
            for &ri in &by_region[c.region] {
                if let Some((s, basket)) = self.score(c, &self.restaurants[ri], t_exp) {
                    if best.is_none_or(|(b, _, _)| s > b) {
                        best = Some((s, ri, basket));
                    }
                }
            }
            if let Some((s, ri, basket)) = best {
                if s > 0.0 {
                    let commission = alpha * basket;
                    orders.push(Order {
                        consumer: ci,
                        restaurant: ri,
                        basket,
                        commission,
                        restaurant_net: (1.0 - alpha) * basket,
                        fee,
                        worker: None,
                        minutes: 0.0,
                    });
                }
            }
        }

        let t = &mut self.tally;
        for o in &orders {
            let r = &mut self.restaurants[o.restaurant].period;
            r.orders += 1;
            r.gross_revenue += o.basket;
            r.net_revenue += o.restaurant_net;
            t.gmv += o.basket;
            t.commission_revenue += o.commission;
            t.restaurant_net_revenue += o.restaurant_net;
            t.fee_revenue += o.fee;
        }
        for r in self.restaurants.iter_mut().filter(|r| r.active) {
            r.period.utility = r.period.net_revenue - r.fixed_cost;
        }
        self.orders = orders;
        self.tally.gmv
    }

    /// Whether worker `w` takes orders this period at load `congestion`.
    pub fn accepts(&self, w: &WorkerAgent, congestion: f64) -> bool {
        let cfg = &self.config;
        let t_order = cfg.base_delivery_minutes / w.skill * (1.0 + congestion.min(cfg.max_congestion));
        let floor = if w.in_transition_zone(cfg) {
            cfg.worker_acceptance_margin_scale * cfg.worker_transition_zone.abs()
        } else {
            0.0
        };
        self.platform.controls.wage - w.minute_cost(cfg) * t_order >= floor
    }

    /// Round-robin assignment over accepting workers with spare capacity.
    /// Orders nobody takes arrive late.
    pub fn worker_deliver(&mut self) {
        let cfg = self.config.clone();
        let active: Vec<usize> = self.workers.iter().filter(|w| w.active).map(|w| w.id).collect();
        let n_orders = self.orders.len();
        let congestion = if active.is_empty() {
            cfg.max_congestion
        } else {
            (n_orders as f64 / (active.len() as f64 * cfg.worker_capacity)).min(cfg.max_congestion)
        };
        let accepting: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| self.accepts(&self.workers[i], congestion))
            .collect();
        for &i in &accepting {
            self.workers[i].period.accepted = true;
        }
        let cap = cfg.worker_capacity.floor() as usize;
        let late_minutes = self.expected_minutes(congestion) + cfg.late_penalty_minutes;
        let wage = self.platform.controls.wage;

        let mut cursor = 0usize;
        let mut open = if cap == 0 { 0 } else { accepting.len() };
        for o in &mut self.orders {
            let mut assigned = None;
            while open > 0 && assigned.is_none() {
                let wi = accepting[cursor % accepting.len()];
                cursor += 1;
                let w = &self.workers[wi];
                if w.period.deliveries < cap {
                    assigned = Some(wi);
                    if w.period.deliveries + 1 == cap {
                        open -= 1;
                    }
                }
            }
            match assigned {
                Some(wi) => {
                    let w = &mut self.workers[wi];
                    let t_order = cfg.base_delivery_minutes / w.skill * (1.0 + congestion);
                    let noise = self.streams.delivery.uniform(0.85, 1.15);
                    let minutes = t_order * noise * (1.0 - 0.2 * w.experience);
                    w.period.deliveries += 1;
                    w.period.income += wage;
                    w.period.minutes += minutes;
                    w.experience = (w.experience + 0.001).min(1.0);
                    o.worker = Some(wi);
                    o.minutes = minutes;
                }
                None => o.minutes = late_minutes,
            }
        }

        let mut on_time = 0usize;
        let mut consumer_sat = 0.0;
        for o in &self.orders {
            let c = &mut self.consumers[o.consumer];
            let u = c.valuation - c.time_sensitivity * o.minutes - (o.basket + o.fee);
            c.period_utility += u;
            consumer_sat += u / c.valuation;
            if o.worker.is_some() {
                on_time += 1;
            }
        }
        let mut worker_sat = (0.0, 0usize);
        for &i in &active {
            let w = &mut self.workers[i];
            let time_cost = w.time_cost_factor * cfg.worker_minute_cost * (w.period.minutes + cfg.worker_standby_minutes);
            w.period.utility = w.period.income - time_cost;
            self.tally.wage_bill += w.period.income;
            if w.period.income > 0.0 {
                let ratio = w.period.utility / w.period.income;
                w.satisfaction = 0.9 * w.satisfaction + 0.1 * ratio.clamp(0.0, 1.0);
                worker_sat.0 += ratio;
                worker_sat.1 += 1;
            }
        }
        self.congestion = congestion;
        if n_orders > 0 {
            self.tally.on_time_rate = on_time as f64 / n_orders as f64;
            self.tally.consumer_satisfaction = consumer_sat / n_orders as f64;
        }
        if worker_sat.1 > 0 {
            self.tally.worker_satisfaction = worker_sat.0 / worker_sat.1 as f64;
        }
    }

    /// Sum of this period's restaurant, consumer and worker utilities.
    pub fn calc_sw(&mut self) -> f64 {
        let rs: f64 = self.restaurants.iter().filter(|r| r.active).map(|r| r.period.utility).sum();
        let cs: f64 = self.consumers.iter().map(|c| c.period_utility).sum();
        let ws: f64 = self.workers.iter().filter(|w| w.active).map(|w| w.period.utility).sum();
        let (sat, n) = self
            .restaurants
            .iter()
            .filter(|r| r.active)
            .fold((0.0, 0usize), |(s, n), r| (s + r.period.utility / r.fixed_cost, n + 1));
        self.tally.restaurant_satisfaction = if n > 0 { sat / n as f64 } else { 0.0 };
        self.tally.sw = rs + cs + ws;
        self.tally.sw
    }

    /// Moves reputation toward the on-time rate plus mean normalized
    /// satisfaction, relative to the stationary target.
    pub fn update_reputation(&mut self, sw: f64, gmv: f64) {
        let t = &self.tally;
        let sat = (t.consumer_satisfaction.clamp(0.0, 1.0)
            + t.worker_satisfaction.clamp(0.0, 1.0)
            + (0.5 + 0.5 * t.restaurant_satisfaction).clamp(0.0, 1.0))
            / 3.0;
        let drive = t.on_time_rate + sat - self.config.reputation_target;
        let phi = &mut self.platform.reputation;
        *phi = (*phi + self.config.reputation_sensitivity * drive).clamp(0.0, 1.0);
        self.platform.observe(Kpi {
            gmv,
            sw,
            multiplier: self.tally.multiplier,
        });
    }

    pub fn update_strat(&mut self) {
        let interval = self.config.strategy_update_interval;
        let cfg = self.config.clone();
        self.platform.update_strategy(interval, &cfg);
    }

    /// Exit checks, emergency subsidies and the period's metrics.
    pub fn update_and_record(&mut self, gmv: f64, sw: f64) -> PeriodMetrics {
        let cfg = &self.config;
        let mut m = PeriodMetrics {
            period: self.period,
            gmv,
            sw,
            reputation: self.platform.reputation,
            commission: self.tally.commission,
            delivery_fee: self.tally.delivery_fee,
            wage: self.tally.wage,
            demand_multiplier: self.tally.multiplier,
            orders: self.orders.len(),
            late_orders: self.orders.iter().filter(|o| o.worker.is_none()).count(),
            on_time_rate: self.tally.on_time_rate,
            restaurant_entries: self.tally.restaurant_entries,
            worker_entries: self.tally.worker_entries,
            consumer_entries: self.tally.consumer_entries,
            consumer_exits: self.tally.consumer_exits,
            commission_revenue: self.tally.commission_revenue,
            restaurant_net_revenue: self.tally.restaurant_net_revenue,
            fee_revenue: self.tally.fee_revenue,
            wage_bill: self.tally.wage_bill,
            restaurant_satisfaction: self.tally.restaurant_satisfaction,
            consumer_satisfaction: self.tally.consumer_satisfaction,
            worker_satisfaction: self.tally.worker_satisfaction,
            ..PeriodMetrics::default()
        };

        let (mut ru, mut rn) = (0.0, 0usize);
        let mult = self.tally.multiplier;
        for r in self.restaurants.iter_mut().filter(|r| r.active) {
            ru += r.period.utility;
            rn += 1;
            if r.period.orders > 0 {
                m.serving_restaurants += 1;
            }
            let adj = if mult > 0.0 { r.period.net_revenue / mult } else { r.period.net_revenue };
            r.adjusted_revenue = [Some(adj), r.adjusted_revenue[0]];
            r.cumulative_utility += r.period.utility;
            if r.cumulative_utility <= cfg.restaurant_exit_threshold {
                r.active = false;
                m.restaurant_exits += 1;
            } else if r.cumulative_utility <= cfg.restaurant_transition_zone {
                let s = cfg.emergency_subsidy_rate * r.fixed_cost;
                r.cumulative_utility += s;
                m.subsidy_paid += s;
            }
        }
        let (mut wu, mut wn) = (0.0, 0usize);
        for w in self.workers.iter_mut().filter(|w| w.active) {
            wu += w.period.utility;
            wn += 1;
            if w.period.deliveries > 0 {
                m.working_workers += 1;
            }
            w.cumulative_utility += w.period.utility;
            if w.cumulative_utility <= cfg.worker_exit_threshold {
                w.active = false;
                m.worker_exits += 1;
            } else if w.cumulative_utility <= cfg.worker_transition_zone {
                let s = cfg.emergency_subsidy_rate * self.tally.wage;
                w.cumulative_utility += s;
                m.subsidy_paid += s;
            }
        }
        for c in &mut self.consumers {
            c.cumulative_utility += c.period_utility;
        }
        let cu: f64 = self.orders.iter().map(|o| self.consumers[o.consumer].period_utility).sum();
        self.platform.subsidy_paid += m.subsidy_paid;
        self.tally.subsidy = m.subsidy_paid;

        m.avg_restaurant_utility = if rn > 0 { ru / rn as f64 } else { 0.0 };
        m.avg_worker_utility = if wn > 0 { wu / wn as f64 } else { 0.0 };
        m.avg_consumer_utility = if self.orders.is_empty() { 0.0 } else { cu / self.orders.len() as f64 };
        m.active_restaurants = self.active_restaurants();
        m.active_workers = self.active_workers();
        m.active_consumers = self.active_consumers();
        m.total_restaurants = self.restaurants.len();
        m.total_workers = self.workers.len();
        m
    }

    /// One full period in the canonical step order.
    pub fn step(&mut self) -> PeriodMetrics {
        self.begin_period();
        self.update_market_and_add();
        self.update_rest_prices();
        let gmv = self.consume_order();
        if gmv > 0.0 {
            self.worker_deliver();
        }
        let sw = self.calc_sw();
        self.update_reputation(sw, gmv);
        let interval = self.config.strategy_update_interval.max(1);
        if self.period % interval == 0 {
            self.update_strat();
        }
        self.update_and_record(gmv, sw)
    }
}

use serde::{Deserialize, Serialize};

use crate::config::{SimConfig, Strategy};
use crate::params::{ControlBounds, Controls};

/// One period's platform KPIs and the demand multiplier they were earned under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kpi {
    pub gmv: f64,
    pub sw: f64,
    pub multiplier: f64,
}

/// Coordinate hill-climb state: one control moves at a time, each with a
/// remembered direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    /// 0 = commission, 1 = delivery fee, 2 = wage.
    pub active: usize,
    pub directions: [f64; 3],
    pub invocations: usize,
}

impl Default for SearchState {
    fn default() -> Self {
        SearchState {
            active: 0,
            directions: [-1.0; 3],
            invocations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformLedger {
    pub controls: Controls,
    pub bounds: ControlBounds,
    pub strategy: Strategy,
    /// Weight on GMV in the objective.
    pub lambda: f64,
    pub reputation: f64,
    pub subsidy_paid: f64,
    pub kpi_window: Vec<Kpi>,
    pub search: SearchState,
}

impl PlatformLedger {
    pub fn new(cfg: &SimConfig) -> PlatformLedger {
        let bounds = cfg.control_bounds();
        PlatformLedger {
            controls: bounds.midpoint(),
            bounds,
            strategy: cfg.platform_strategy,
            lambda: match cfg.platform_strategy {
                Strategy::Gmv => 1.0,
                Strategy::Sw => 0.0,
                Strategy::Hybrid => cfg.hybrid_lambda,
            },
            reputation: cfg.reputation_initial,
            subsidy_paid: 0.0,
            kpi_window: Vec::new(),
            search: SearchState::default(),
        }
    }

    pub fn observe(&mut self, kpi: Kpi) {
        self.kpi_window.push(kpi);
    }

    /// Objective means over the latest two windows of `interval` periods,
    /// oldest first. `None` until the history is long enough to normalize.
    pub fn window_objectives(&self, interval: usize, cfg: &SimConfig) -> Option<(f64, f64)> {
        let hist = &self.kpi_window;
        let w = interval.max(1);
        if hist.len() < (2 * w).max(cfg.kpi_normalization_floor) {
            return None;
        }
        let gmv = adjusted(hist, |k| k.gmv, cfg.kpi_adjustment_window);
        let sw = adjusted(hist, |k| k.sw, cfg.kpi_adjustment_window);
        let ng = min_max(&gmv);
        let ns = min_max(&sw);
        let j: Vec<f64> = ng
            .iter()
            .zip(&ns)
            .map(|(g, s)| self.lambda * g + (1.0 - self.lambda) * s)
            .collect();
        let n = j.len();
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Some((mean(&j[n - 2 * w..n - w]), mean(&j[n - w..])))
    }

    /// One hill-climb step. Keeps the current control and direction while the
    /// objective holds up; on a drop, reverses that control and hands over to
    /// the next one.
    pub fn update_strategy(&mut self, interval: usize, cfg: &SimConfig) {
        self.search.invocations += 1;
        let Some((prev, now)) = self.window_objectives(interval, cfg) else {
            return;
        };
        if now - prev < -cfg.strategy_deadband {
            let a = self.search.active;
            self.search.directions[a] = -self.search.directions[a];
            self.search.active = (a + 1) % 3;
        }

        let rates = [
            cfg.commission_adjustment_rate,
            cfg.delivery_fee_adjustment_rate,
            cfg.wage_adjustment_rate,
        ];
        let axes = self.bounds.axes();
        let mut c = self.controls.as_array();
        for _ in 0..3 {
            let k = self.search.active;
            let dir = self.search.directions[k];
            let pinned = (dir < 0.0 && c[k] <= axes[k].lo()) || (dir > 0.0 && c[k] >= axes[k].hi());
            if !pinned {
                c[k] = axes[k].clamp(c[k] + dir * rates[k] * axes[k].width());
                break;
            }
            self.search.active = (k + 1) % 3;
        }
        self.controls = Controls::from_array(c);
    }
}

/// KPI series with the demand-multiplier effect removed, using the OLS
/// slope over the trailing `window` periods.
fn adjusted(hist: &[Kpi], f: impl Fn(&Kpi) -> f64, window: usize) -> Vec<f64> {
    let tail = &hist[hist.len().saturating_sub(window.max(1))..];
    let n = tail.len() as f64;
    let mx = tail.iter().map(|k| k.multiplier).sum::<f64>() / n;
    let my = tail.iter().map(&f).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for k in tail {
        let dx = k.multiplier - mx;
        sxy += dx * (f(k) - my);
        sxx += dx * dx;
    }
    let slope = if tail.len() >= 3 && sxx > 1e-12 { sxy / sxx } else { 0.0 };
    hist.iter().map(|k| f(k) - slope * (k.multiplier - mx)).collect()
}

fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 0.0 {
        xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; xs.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(strategy: Strategy) -> SimConfig {
        SimConfig {
            platform_strategy: strategy,
            ..SimConfig::default()
        }
    }

    #[test]
    fn starts_at_midpoint() {
        let l = PlatformLedger::new(&cfg(Strategy::Sw));
        assert_eq!(l.controls, Controls::new(0.15, 7.0, 9.0));
        assert_eq!(l.reputation, 0.6);
    }

    #[test]
    fn no_history_no_move() {
        let c = cfg(Strategy::Gmv);
        let mut l = PlatformLedger::new(&c);
        l.update_strategy(2, &c);
        assert_eq!(l.controls, Controls::new(0.15, 7.0, 9.0));
    }

    #[test]
    fn improving_objective_keeps_commission_falling() {
        let c = cfg(Strategy::Gmv);
        let mut l = PlatformLedger::new(&c);
        for t in 0..12 {
            l.observe(Kpi {
                gmv: 100.0 + t as f64,
                sw: 0.0,
                multiplier: 1.0,
            });
        }
        l.update_strategy(2, &c);
        assert!((l.controls.commission - (0.15 - 0.03 * 0.20)).abs() < 1e-15);
        l.controls.commission = 0.052;
        l.update_strategy(2, &c);
        assert_eq!(l.controls.commission, 0.05);
    }

    #[test]
    fn falling_objective_reverses_and_rotates() {
        let c = cfg(Strategy::Sw);
        let mut l = PlatformLedger::new(&c);
        for t in 0..12 {
            l.observe(Kpi {
                gmv: 0.0,
                sw: 100.0 - t as f64,
                multiplier: 1.0,
            });
        }
        l.update_strategy(2, &c);
        assert_eq!(l.search.directions[0], 1.0);
        assert_eq!(l.search.active, 1);
        assert!((l.controls.delivery_fee - 6.7).abs() < 1e-12);
        assert_eq!(l.controls.commission, 0.15);
    }

    #[test]
    fn multiplier_noise_is_removed() {
        let kpis: Vec<Kpi> = (0..40)
            .map(|t| {
                let m = if t % 2 == 0 { 0.8 } else { 1.3 };
                Kpi {
                    gmv: 1000.0 * m + t as f64,
                    sw: 0.0,
                    multiplier: m,
                }
            })
            .collect();
        let adj = adjusted(&kpis, |k| k.gmv, 50);
        for w in adj.windows(2) {
            assert!((w[1] - w[0] - 1.0).abs() < 3.0, "{w:?}");
        }
        assert!(adj[39] - adj[0] > 30.0);
    }
}

//! One-period model parameters and the platform's control triple.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Range;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter {field} = {value}: {reason}")]
    Invalid {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// What the platform maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "GMV")]
    Gmv,
    #[serde(rename = "SW")]
    Sw,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::Gmv, Objective::Sw];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Gmv => "GMV",
            Objective::Sw => "SW",
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "GMV" => Ok(Objective::Gmv),
            "SW" => Ok(Objective::Sw),
            other => Err(format!("unknown objective `{other}`; valid objectives are {{GMV, SW}}")),
        }
    }
}

/// Symbols of the one-period model.
///
/// `beta_time` is the consumer's disutility per minute of waiting. It is
/// unrelated to the dynamic discount factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticParams {
    pub theta: f64,
    pub eta: f64,
    pub delta: f64,
    pub beta_time: f64,
    pub gamma: f64,
    pub v: f64,
    pub fixed_cost: f64,
    pub delivery_time: f64,
}

impl StaticParams {
    /// θ=100, η=2, δ=1, t=10, γ=2, v=60, β=0.5, C_f=150.
    pub fn canonical() -> StaticParams {
        StaticParams {
            theta: 100.0,
            eta: 2.0,
            delta: 1.0,
            beta_time: 0.5,
            gamma: 2.0,
            v: 60.0,
            fixed_cost: 150.0,
            delivery_time: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let checks: [(&'static str, f64, bool, &'static str); 7] = [
            ("theta", self.theta, self.theta > 0.0, "must be positive"),
            ("eta", self.eta, self.eta > 0.0, "must be positive"),
            ("delta", self.delta, self.delta >= 0.0, "must be non-negative"),
            ("beta_time", self.beta_time, self.beta_time >= 0.0, "must be non-negative"),
            ("gamma", self.gamma, self.gamma >= 0.0, "must be non-negative"),
            ("fixed_cost", self.fixed_cost, self.fixed_cost >= 0.0, "must be non-negative"),
            (
                "delivery_time",
                self.delivery_time,
                self.delivery_time >= 0.0,
                "must be non-negative",
            ),
        ];
        for (field, value, ok, reason) in checks {
            if !ok || !value.is_finite() {
                return Err(ParamError::Invalid { field, value, reason });
            }
        }
        if !self.v.is_finite() {
            return Err(ParamError::Invalid {
                field: "v",
                value: self.v,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// The platform's decision: commission α, delivery fee D, per-order wage p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub commission: f64,
    pub delivery_fee: f64,
    pub wage: f64,
}

impl Controls {
    pub fn new(commission: f64, delivery_fee: f64, wage: f64) -> Controls {
        Controls {
            commission,
            delivery_fee,
            wage,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..1.0).contains(&self.commission) {
            return Err(ParamError::Invalid {
                field: "commission",
                value: self.commission,
                reason: "must lie in [0, 1)",
            });
        }
        if !(self.delivery_fee.is_finite() && self.delivery_fee >= 0.0) {
            return Err(ParamError::Invalid {
                field: "delivery_fee",
                value: self.delivery_fee,
                reason: "must be non-negative",
            });
        }
        if !(self.wage.is_finite() && self.wage >= 0.0) {
            return Err(ParamError::Invalid {
                field: "wage",
                value: self.wage,
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.commission, self.delivery_fee, self.wage]
    }

    pub fn from_array(a: [f64; 3]) -> Controls {
        Controls::new(a[0], a[1], a[2])
    }

    /// Lexicographic (α, D, p) comparison used for deterministic tie-breaks.
    pub fn lex_cmp(&self, other: &Controls) -> std::cmp::Ordering {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Box bounds on the control triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub commission: Range,
    pub delivery_fee: Range,
    pub wage: Range,
}

impl Default for ControlBounds {
    fn default() -> Self {
        ControlBounds {
            commission: Range(0.05, 0.25),
            delivery_fee: Range(2.0, 12.0),
            wage: Range(3.0, 15.0),
        }
    }
}

impl ControlBounds {
    pub fn singleton(c: Controls) -> ControlBounds {
        ControlBounds {
            commission: Range(c.commission, c.commission),
            delivery_fee: Range(c.delivery_fee, c.delivery_fee),
            wage: Range(c.wage, c.wage),
        }
    }

    pub fn axes(&self) -> [Range; 3] {
        [self.commission, self.delivery_fee, self.wage]
    }

    pub fn from_axes(a: [Range; 3]) -> ControlBounds {
        ControlBounds {
            commission: a[0],
            delivery_fee: a[1],
            wage: a[2],
        }
    }

    pub fn lower(&self) -> Controls {
        Controls::new(self.commission.0, self.delivery_fee.0, self.wage.0)
    }

    pub fn upper(&self) -> Controls {
        Controls::new(self.commission.1, self.delivery_fee.1, self.wage.1)
    }

    pub fn midpoint(&self) -> Controls {
        Controls::new(
            self.commission.midpoint(),
            self.delivery_fee.midpoint(),
            self.wage.midpoint(),
        )
    }

    pub fn contains(&self, c: &Controls) -> bool {
        self.commission.contains(c.commission)
            && self.delivery_fee.contains(c.delivery_fee)
            && self.wage.contains(c.wage)
    }

    pub fn clamp(&self, c: Controls) -> Controls {
        Controls::new(
            self.commission.clamp(c.commission),
            self.delivery_fee.clamp(c.delivery_fee),
            self.wage.clamp(c.wage),
        )
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let names = ["commission", "delivery_fee", "wage"];
        for (name, r) in names.into_iter().zip(self.axes()) {
            if !(r.0.is_finite() && r.1.is_finite() && r.0 <= r.1) {
                return Err(ParamError::Invalid {
                    field: name,
                    value: r.0,
                    reason: "bound box must satisfy lo <= hi",
                });
            }
        }
        if self.commission.1 >= 1.0 || self.commission.0 < 0.0 {
            return Err(ParamError::Invalid {
                field: "commission",
                value: self.commission.1,
                reason: "commission bounds must lie in [0, 1)",
            });
        }
        Ok(())
    }
}

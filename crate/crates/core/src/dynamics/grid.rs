use serde::{Deserialize, Serialize};

use super::MarketState;

/// Uniform axis `lo..=hi` with `n` points.
///
/// A single-point axis is allowed only when `lo == hi`; it freezes that
/// state dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> AxisSpec {
        AxisSpec { lo, hi, n }
    }

    pub fn point(x: f64) -> AxisSpec {
        AxisSpec { lo: x, hi: x, n: 1 }
    }

    pub fn validate(&self, name: &str) -> Result<(), String> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(format!("axis {name}: need finite lo <= hi, got [{}, {}]", self.lo, self.hi));
        }
        match self.n {
            0 => Err(format!("axis {name}: needs at least one point")),
            1 if self.lo != self.hi => Err(format!("axis {name}: needs at least two points")),
            n if n >= 2 && self.lo == self.hi => {
                Err(format!("axis {name}: {n} points on a zero-width axis"))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n <= 1 {
            self.lo
        } else if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    /// Lower cell index and fractional offset of `x`, clamped to the hull.
    fn locate(&self, x: f64) -> (usize, f64) {
        if self.n <= 1 {
            return (0, 0.0);
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        let pos = ((x - self.lo) / step).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n - 2);
        (i, pos - i as f64)
    }
}

/// Interpolation stencil for one off-grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub base: u32,
    pub frac: [f64; 4],
}

/// Tensor grid over (R, C, W, Φ), row-major with Φ fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub axes: [AxisSpec; 4],
}

pub const AXIS_NAMES: [&str; 4] = ["R", "C", "W", "Phi"];

impl StateGrid {
    pub fn new(axes: [AxisSpec; 4]) -> StateGrid {
        StateGrid { axes }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (axis, name) in self.axes.iter().zip(AXIS_NAMES) {
            axis.validate(name)?;
        }
        if self.len() > u32::MAX as usize {
            return Err("state grid too large".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 4] {
        let n = self.axes.map(|a| a.n);
        let mut s = [1usize; 4];
        for d in (0..3).rev() {
            s[d] = s[d + 1] * n[d + 1];
        }
        // Frozen axes never step to an upper neighbour.
        for d in 0..4 {
            if n[d] == 1 {
                s[d] = 0;
            }
        }
        s
    }

    pub fn multi_index(&self, node: usize) -> [usize; 4] {
        let mut rem = node;
        let mut idx = [0usize; 4];
        for d in (0..4).rev() {
            let n = self.axes[d].n;
            idx[d] = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn node_state(&self, node: usize) -> MarketState {
        let idx = self.multi_index(node);
        MarketState::from_array([
            self.axes[0].value(idx[0]),
            self.axes[1].value(idx[1]),
            self.axes[2].value(idx[2]),
            self.axes[3].value(idx[3]),
        ])
    }

    pub fn locate(&self, state: &MarketState) -> Cell {
        let x = state.as_array();
        let strides = self.strides();
        let mut base = 0usize;
        let mut frac = [0.0; 4];
        for d in 0..4 {
            let (i, f) = self.axes[d].locate(x[d]);
            base += i * strides[d];
            frac[d] = f;
        }
        Cell {
            base: base as u32,
            frac,
        }
    }

    /// Multilinear interpolation of `values` at a located cell.
    #[inline]
    pub fn interpolate_cell(values: &[f64], strides: &[usize; 4], cell: &Cell) -> f64 {
        let mut acc = 0.0;
        for corner in 0..16u32 {
            let mut w = 1.0;
            let mut off = cell.base as usize;
            for d in 0..4 {
                if corner >> d & 1 == 1 {
                    w *= cell.frac[d];
                    off += strides[d];
                } else {
                    w *= 1.0 - cell.frac[d];
                }
            }
            if w != 0.0 {
                acc += w * values[off];
            }
        }
        acc
    }

    pub fn interpolate(&self, values: &[f64], state: &MarketState) -> f64 {
        Self::interpolate_cell(values, &self.strides(), &self.locate(state))
    }

    /// Corner nodes and weights of the stencil, zero weights dropped.
    pub fn stencil(&self, state: &MarketState) -> Vec<(usize, f64)> {
        let cell = self.locate(state);
        let strides = self.strides();
        let mut out = Vec::with_capacity(16);
        for corner in 0..16u32 {
            let mut w = 1.0;
            let mut off = cell.base as usize;
            for d in 0..4 {
                if corner >> d & 1 == 1 {
                    w *= cell.frac[d];
                    off += strides[d];
                } else {
                    w *= 1.0 - cell.frac[d];
                }
            }
            if w != 0.0 {
                out.push((off, w));
            }
        }
        out
    }
}

impl Default for StateGrid {
    fn default() -> Self {
        StateGrid::new([
            AxisSpec::new(0.0, 200.0, 9),
            AxisSpec::new(0.0, 2000.0, 9),
            AxisSpec::new(0.0, 300.0, 9),
            AxisSpec::new(0.0, 1.0, 9),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_round_trip_through_locate() {
        let g = StateGrid::default();
        for node in [0, 1, 80, 3280, g.len() - 1] {
            let cell = g.locate(&g.node_state(node));
            let stencil = g.stencil(&g.node_state(node));
            assert_eq!(stencil, vec![(node, 1.0)], "node {node} cell {cell:?}");
        }
    }

    #[test]
    fn interpolation_is_exact_on_affine_functions() {
        let g = StateGrid::default();
        let f = |s: &MarketState| 3.0 * s.restaurants - 0.5 * s.consumers + 2.0 * s.workers + 40.0 * s.reputation + 1.0;
        let values: Vec<f64> = (0..g.len()).map(|i| f(&g.node_state(i))).collect();
        let s = MarketState::new(37.3, 1234.5, 99.9, 0.61);
        assert!((g.interpolate(&values, &s) - f(&s)).abs() < 1e-9);
    }

    #[test]
    fn off_hull_points_clamp() {
        let g = StateGrid::default();
        let values: Vec<f64> = (0..g.len()).map(|i| g.node_state(i).restaurants).collect();
        let s = MarketState::new(500.0, -3.0, 0.0, 2.0);
        assert_eq!(g.interpolate(&values, &s), 200.0);
    }

    #[test]
    fn frozen_axes() {
        let g = StateGrid::new([
            AxisSpec::new(0.0, 2.0, 3),
            AxisSpec::point(5.0),
            AxisSpec::point(1.0),
            AxisSpec::point(0.5),
        ]);
        g.validate().unwrap();
        assert_eq!(g.len(), 3);
        let values = [10.0, 20.0, 40.0];
        assert_eq!(g.interpolate(&values, &MarketState::new(1.5, 9.0, 0.0, 0.0)), 30.0);
        assert!(AxisSpec::new(0.0, 1.0, 1).validate("x").is_err());
    }
}

//! Sampled graphing functions `g : [-r, r] → ℝ` in chart coordinates, with
//! monotone cubic interpolation between nodes and measured Lipschitz data.

use crate::tangent::ChartFrame;
use serde::{Deserialize, Serialize};

/// Default node count; odd so the origin is a node.
pub const DEFAULT_NODES: usize = 129;

/// Minimum node count accepted (a graph under 3 cells is rejected upstream).
pub const MIN_NODES: usize = 5;

/// Fritsch–Carlson slopes for a uniformly spaced monotone cubic interpolant.
fn pchip_slopes(h: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] > 0.0 {
            m[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);
        }
    }
    m
}

/// Evaluate the cubic Hermite piece on `[0, h]`.
#[inline]
fn hermite(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s = t / h;
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * h * (s3 - 2.0 * s2 + s)
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * h * (s3 - s2)
}

#[inline]
fn hermite_deriv(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s = t / h;
    let s2 = s * s;
    (y0 * (6.0 * s2 - 6.0 * s) + y1 * (-6.0 * s2 + 6.0 * s)) / h
        + m0 * (3.0 * s2 - 4.0 * s + 1.0)
        + m1 * (3.0 * s2 - 2.0 * s)
}

/// A sampled graph `u ↦ g(u)` over `[-radius, radius]` in a chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UGraph {
    pub frame: ChartFrame,
    pub radius: f64,
    /// Values at uniform nodes `u_i = -radius + 2·radius·i/(n-1)`.
    pub values: Vec<f64>,
    /// Measured Lipschitz constant (max adjacent-node slope).
    pub lip: f64,
    /// Measured Lipschitz constant of the derivative (finite-difference slopes).
    pub dlip: f64,
}

impl UGraph {
    pub fn from_values(frame: ChartFrame, radius: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= MIN_NODES);
        assert!(radius > 0.0);
        let (lip, dlip) = measure_lip(radius, &values);
        Self {
            frame,
            radius,
            values,
            lip,
            dlip,
        }
    }

    pub fn from_fn(frame: ChartFrame, radius: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..nodes)
            .map(|i| f(-radius + 2.0 * radius * i as f64 / (nodes - 1) as f64))
            .collect();
        Self::from_values(frame, radius, values)
    }

    pub fn zero(frame: ChartFrame, radius: f64, nodes: usize) -> Self {
        Self::from_values(frame, radius, vec![0.0; nodes])
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.nodes() - 1) as f64
    }

    pub fn u_at(&self, i: usize) -> f64 {
        -self.radius + self.spacing() * i as f64
    }

    /// Interpolated value at `u` (clamped to the domain).
    pub fn eval(&self, u: f64) -> f64 {
        let h = self.spacing();
        let slopes = pchip_slopes(h, &self.values);
        self.eval_with_slopes(u, &slopes)
    }

    fn segment(&self, u: f64) -> (usize, f64) {
        let h = self.spacing();
        let x = (u.clamp(-self.radius, self.radius) + self.radius) / h;
        let i = (x.floor() as usize).min(self.nodes() - 2);
        (i, (x - i as f64) * h)
    }

    fn eval_with_slopes(&self, u: f64, slopes: &[f64]) -> f64 {
        let (i, t) = self.segment(u);
        let h = self.spacing();
        hermite(t, h, self.values[i], self.values[i + 1], slopes[i], slopes[i + 1])
    }

    pub fn deriv(&self, u: f64) -> f64 {
        let h = self.spacing();
        let slopes = pchip_slopes(h, &self.values);
        let (i, t) = self.segment(u);
        hermite_deriv(t, h, self.values[i], self.values[i + 1], slopes[i], slopes[i + 1])
    }

    /// An evaluator that amortizes the slope computation.
    pub fn interpolant(&self) -> impl Fn(f64) -> f64 + '_ {
        let slopes = pchip_slopes(self.spacing(), &self.values);
        move |u| self.eval_with_slopes(u, &slopes)
    }

    /// Centered-difference slope at the origin node.
    pub fn slope_at_origin(&self) -> f64 {
        let n = self.nodes();
        debug_assert!(n % 2 == 1, "odd node counts keep the origin on the grid");
        let mid = n / 2;
        (self.values[mid + 1] - self.values[mid - 1]) / (2.0 * self.spacing())
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[self.nodes() / 2]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// The gauge `|g|' = sup_{u≠0} |g(u)|/|u|`, evaluated on nodes.
    pub fn graph_norm(&self) -> f64 {
        let mut sup = 0.0f64;
        for i in 0..self.nodes() {
            let u = self.u_at(i);
            if u.abs() < 1e-300 {
                continue;
            }
            sup = sup.max(self.values[i].abs() / u.abs());
        }
        sup
    }
}

fn measure_lip(radius: f64, values: &[f64]) -> (f64, f64) {
    let h = 2.0 * radius / (values.len() - 1) as f64;
    let slopes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let lip = slopes.iter().fold(0.0f64, |a, &s| a.max(s.abs()));
    let dlip = slopes
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0f64, f64::max);
    (lip, dlip)
}

/// `|g₁ − g₂|'` on the common node grid (graphs must share radius and node count).
pub fn graph_norm_diff(g1: &UGraph, g2: &UGraph) -> f64 {
    assert_eq!(g1.nodes(), g2.nodes());
    assert!(
        (g1.radius - g2.radius).abs() <= 1e-12 * g1.radius,
        "graphs must share a domain"
    );
    let mut sup = 0.0f64;
    for i in 0..g1.nodes() {
        let u = g1.u_at(i);
        if u.abs() < 1e-300 {
            continue;
        }
        sup = sup.max((g1.values[i] - g2.values[i]).abs() / u.abs());
    }
    sup
}

/// Sup-norm distance on the common grid.
pub fn sup_diff(g1: &UGraph, g2: &UGraph) -> f64 {
    assert_eq!(g1.nodes(), g2.nodes());
    g1.values
        .iter()
        .zip(&g2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseLaw, NoisePath};
    use crate::systems::System;
    use crate::tangent::{build_chart_frame, ChartParams};

    fn test_frame() -> ChartFrame {
        let path = NoisePath::new(1, NoiseLaw::UniformFull);
        let params = ChartParams::from_lambda0(((3.0 + 5.0f64.sqrt()) / 2.0).ln());
        build_chart_frame(&System::A, &path, crate::torus::TorusPoint::new(0.3, 0.4), &params, 40, 40)
            .unwrap()
    }

    #[test]
    fn interpolant_reproduces_nodes() {
        let g = UGraph::from_fn(test_frame(), 0.5, 33, |u| (3.0 * u).sin() * 0.1);
        for i in 0..g.nodes() {
            assert!((g.eval(g.u_at(i)) - g.values[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_data_is_interpolated_exactly() {
        let g = UGraph::from_fn(test_frame(), 0.4, 17, |u| 0.3 * u - 0.05);
        for k in 0..100 {
            let u = -0.4 + 0.8 * k as f64 / 99.0;
            assert!((g.eval(u) - (0.3 * u - 0.05)).abs() < 1e-14);
            assert!((g.deriv(u) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_function_error_is_tiny_at_default_resolution() {
        let f = |u: f64| 0.05 * (4.0 * u).sin() + 0.02 * u * u;
        let g = UGraph::from_fn(test_frame(), 0.05, DEFAULT_NODES, f);
        for k in 0..500 {
            let u = -0.05 + 0.1 * k as f64 / 499.0;
            assert!((g.eval(u) - f(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let g = UGraph::from_fn(test_frame(), 1.0, 9, |u| u + 0.3 * (2.0 * u).sin());
        let mut prev = g.eval(-1.0);
        for k in 1..400 {
            let u = -1.0 + 2.0 * k as f64 / 399.0;
            let v = g.eval(u);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn measured_lip_is_consistent_with_samples() {
        let g = UGraph::from_fn(test_frame(), 0.3, 65, |u| 0.08 * (5.0 * u).cos());
        let mut max_slope = 0.0f64;
        for i in 0..g.nodes() - 1 {
            max_slope =
                max_slope.max((g.values[i + 1] - g.values[i]).abs() / (g.u_at(i + 1) - g.u_at(i)));
        }
        assert!(max_slope <= g.lip * (1.0 + 1e-6));
    }

    #[test]
    fn slope_at_origin_matches_derivative() {
        let g = UGraph::from_fn(test_frame(), 0.2, DEFAULT_NODES, |u| 0.07 * u + 0.5 * u * u);
        assert!((g.slope_at_origin() - 0.07).abs() < 1e-10);
    }

    #[test]
    fn graph_norm_of_line_is_its_slope() {
        let g = UGraph::from_fn(test_frame(), 0.6, 21, |u| -0.15 * u);
        assert!((g.graph_norm() - 0.15).abs() < 1e-12);
    }
}

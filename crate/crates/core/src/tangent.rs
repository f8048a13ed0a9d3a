//! Derivative-cocycle analysis: Lyapunov exponents, finite-past/future
//! splitting directions, and Lyapunov-normed chart frames.

use crate::cocycle::{backward_orbit, forward_orbit};
use crate::error::TangentError;
use crate::noise::{NoisePath, NoiseValue};
use crate::systems::MapFamily;
use crate::torus::{line_angle, Mat2, TorusPoint, Vec2};
use serde::{Deserialize, Serialize};

/// Fixed generic seed vector for unstable-direction estimation. Any vector
/// outside a measure-zero set works; fixing one makes runs reproducible.
pub const GENERIC_SEED_VECTOR: [f64; 2] = [1.0, 0.37];

/// Chart-construction parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChartParams {
    /// Top Lyapunov exponent of the system (calibrated or supplied).
    pub lambda0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Truncation depth of the finite-horizon Lyapunov norms.
    pub horizon: usize,
    /// Slope cap for the small-slope graph-transform regime.
    pub k0_bar: f64,
    /// Working-radius factor for the slanted regime, as a fraction of the
    /// chart radius.
    pub r1_bar: f64,
    /// Default estimation depths for the splitting directions.
    pub n_past: usize,
    pub n_future: usize,
    /// Global deflation of the normalized adapted norms, calibrated per
    /// system so the normalized ratios stay ≥ 1 over the attractor (a global
    /// constant rescale keeps the one-step chart inequalities intact, which
    /// per-point clamping would not).
    pub u_norm_scale: f64,
    pub cs_norm_scale: f64,
}

impl ChartParams {
    pub fn from_lambda0(lambda0: f64) -> Self {
        assert!(lambda0 > 0.0, "chart construction needs a positive exponent");
        Self {
            lambda0,
            delta0: lambda0 / 20.0,
            delta1: 0.1,
            delta2: lambda0 / 20.0,
            horizon: 30,
            k0_bar: 0.1,
            r1_bar: 1.0,
            n_past: 40,
            n_future: 40,
            u_norm_scale: 1.0,
            cs_norm_scale: 1.0,
        }
    }

    /// Estimate λ₀ with a short QR run, then calibrate the norm scales from
    /// sampled adapted-norm ratios.
    pub fn calibrate(family: &dyn MapFamily, path: &NoisePath) -> Result<Self, TangentError> {
        let report = lyapunov_qr(family, path, TorusPoint::new(0.171, 0.613), 4000)?;
        let mut params = Self::from_lambda0(report.lambda1);
        let mut min_u = f64::INFINITY;
        let mut min_cs = f64::INFINITY;
        for i in 0..64u64 {
            let p = TorusPoint::new(
                crate::noise::counter_uniform(0x10a9, i, 0),
                crate::noise::counter_uniform(0x10a9, i, 1),
            );
            let (ru, rcs) = adapted_norm_ratios(family, path, p, &params)?;
            min_u = min_u.min(ru);
            min_cs = min_cs.min(rcs);
        }
        params.u_norm_scale = (min_u * 0.95).min(1.0);
        params.cs_norm_scale = (min_cs * 0.95).min(1.0);
        Ok(params)
    }

    /// λ = λ₀ − δ₀, the guaranteed chart expansion rate.
    pub fn lambda(&self) -> f64 {
        self.lambda0 - self.delta0
    }

    /// Geometric tail dropped by the finite-horizon norms.
    pub fn truncation_error(&self) -> f64 {
        (-(self.horizon as f64) * self.delta0).exp() / (1.0 - (-self.delta0).exp())
    }
}

/// Estimated Oseledets splitting at a point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Splitting {
    pub e_u: [f64; 2],
    pub e_cs: [f64; 2],
    pub proj_norm_u: f64,
    pub proj_norm_cs: f64,
}

impl Splitting {
    pub fn new(e_u: Vec2, e_cs: Vec2) -> Result<Self, TangentError> {
        let e_u = e_u.normalize();
        let e_cs = e_cs.normalize();
        let angle = line_angle(&e_u, &e_cs);
        if angle < 1e-9 {
            return Err(TangentError::DegenerateSplitting { angle });
        }
        // In 2D both projections have norm 1/sin∠(e_u, e_cs).
        let proj = 1.0 / angle.sin();
        Ok(Self {
            e_u: [e_u.x, e_u.y],
            e_cs: [e_cs.x, e_cs.y],
            proj_norm_u: proj,
            proj_norm_cs: proj,
        })
    }

    pub fn e_u_vec(&self) -> Vec2 {
        Vec2::new(self.e_u[0], self.e_u[1])
    }

    pub fn e_cs_vec(&self) -> Vec2 {
        Vec2::new(self.e_cs[0], self.e_cs[1])
    }
}

/// Running QR (Benettin) estimates of the two exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_steps: usize,
    /// `(step, λ₁ running, λ₂ running)` samples.
    pub convergence_trace: Vec<(usize, f64, f64)>,
    /// `(1/n) Σ log|det df|` along the same orbit.
    pub mean_log_det: f64,
}

/// One Gram-Schmidt QR step with positive diagonal; returns (Q, r11, r22).
#[inline]
fn qr_step(m: Mat2) -> (Mat2, f64, f64) {
    let a = m.column(0).into_owned();
    let r11 = a.norm();
    let q1 = a / r11;
    let b = m.column(1).into_owned();
    let r12 = q1.dot(&b);
    let b_orth = b - q1 * r12;
    let r22 = b_orth.norm();
    let q2 = b_orth / r22;
    (Mat2::from_columns(&[q1, q2]), r11, r22)
}

/// Discrete QR cocycle method for the Lyapunov spectrum along the forward
/// orbit of `p`. A short burn-in aligns the frame before accumulation starts,
/// so constant-cocycle exponents come out exact to rounding.
pub fn lyapunov_qr(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> Result<ExponentReport, TangentError> {
    assert!(n >= 1);
    let burn_in = 64usize;
    let mut q = Mat2::identity();
    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    let mut sum_det = 0.0;
    let mut point = p;
    let stride = (n / 512).max(1);
    let mut trace = Vec::with_capacity(n / stride + 1);
    for raw in 1..=(burn_in + n) {
        let w = path.value(raw as i64);
        let j = family.jacobian(&w, point);
        let det = j.determinant();
        if det.abs() < 1e-14 {
            return Err(TangentError::DegenerateJacobian {
                det: det.abs(),
                step: raw,
            });
        }
        let (qn, r11, r22) = qr_step(j * q);
        q = qn;
        point = family.eval(&w, point);
        if raw <= burn_in {
            continue;
        }
        let step = raw - burn_in;
        sum_det += det.abs().ln();
        sum1 += r11.ln();
        sum2 += r22.ln();
        if step % stride == 0 || step == n {
            trace.push((step, sum1 / step as f64, sum2 / step as f64));
        }
    }
    Ok(ExponentReport {
        lambda1: sum1 / n as f64,
        lambda2: sum2 / n as f64,
        n_steps: n,
        convergence_trace: trace,
        mean_log_det: sum_det / n as f64,
    })
}

/// Unstable direction at `(p, time 0)` from an explicit finite past: a fixed
/// generic vector at time `-n_past` pushed forward along the pullback orbit
/// through `p`, renormalized every step.
pub fn estimate_eu(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n_past: usize,
) -> Vec2 {
    assert!(n_past >= 1);
    let orbit = backward_orbit(family, path, p, n_past); // orbit[k] at time -k
    let mut v = Vec2::new(GENERIC_SEED_VECTOR[0], GENERIC_SEED_VECTOR[1]).normalize();
    for k in (1..=n_past).rev() {
        // step from time -k to -k+1 applies f_{ω_{-k+1}}
        let w = path.value(-(k as i64) + 1);
        v = (family.jacobian(&w, orbit[k]) * v).normalize();
    }
    v
}

/// Center-stable direction at `(p, time 0)` from the future: a generic vector
/// at the endpoint of the forward orbit pulled back through inverse Jacobians
/// (equivalently the most-contracted right-singular direction of `df^n`).
/// Reads noise indices `1..=n_future` only.
pub fn estimate_ecs(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n_future: usize,
) -> Vec2 {
    assert!(n_future >= 1);
    let orbit = forward_orbit(family, path, p, n_future);
    let mut v = Vec2::new(GENERIC_SEED_VECTOR[0], GENERIC_SEED_VECTOR[1]).normalize();
    for k in (1..=n_future).rev() {
        let w = path.value(k as i64);
        let j = family.jacobian(&w, orbit[k - 1]);
        v = j
            .try_inverse()
            .expect("map families have nondegenerate Jacobians")
            * v;
        v = v.normalize();
    }
    v
}

/// Linear chart data at a base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartFrame {
    pub base: TorusPoint,
    pub splitting: Splitting,
    /// Chart coordinates → tangent vectors. Column 0 spans e_u, column 1
    /// spans e_cs, scaled by the finite-horizon Lyapunov norms (and a factor
    /// 1/2 so the chart never expands ambient distances).
    pub l: [[f64; 2]; 2],
    pub l_inv: [[f64; 2]; 2],
    /// Size function value: max of projection norm, chart distortion and the
    /// tempered C²-bound proxy, clamped ≥ 1.
    pub l_value: f64,
    /// δ₁ / l_value, in chart coordinates.
    pub chart_radius: f64,
    /// Adapted norms of the unit splitting directions.
    pub lyap_norm_u: f64,
    pub lyap_norm_cs: f64,
    /// Tail bound dropped by horizon truncation.
    pub truncation_error: f64,
}

impl ChartFrame {
    pub fn l_mat(&self) -> Mat2 {
        Mat2::new(self.l[0][0], self.l[0][1], self.l[1][0], self.l[1][1])
    }

    pub fn l_inv_mat(&self) -> Mat2 {
        Mat2::new(
            self.l_inv[0][0],
            self.l_inv[0][1],
            self.l_inv[1][0],
            self.l_inv[1][1],
        )
    }

    /// Ambient point of chart coordinates `w` (flat torus: exp = translation).
    pub fn from_chart(&self, w: Vec2) -> TorusPoint {
        self.base.offset(self.l_mat() * w)
    }

    /// Chart coordinates of an ambient point near the base.
    pub fn to_chart(&self, q: &TorusPoint) -> Vec2 {
        self.l_inv_mat() * self.base.displacement_to(q)
    }

    pub fn e_u(&self) -> Vec2 {
        self.splitting.e_u_vec()
    }

    pub fn e_cs(&self) -> Vec2 {
        self.splitting.e_cs_vec()
    }
}

/// Operator 2-norm of a 2×2 matrix.
fn op_norm(m: &Mat2) -> f64 {
    (m.transpose() * m)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.max(0.0)))
        .sqrt()
}

/// Tempered proxy for the sup over a window of `e^{-|n|δ₂} max(‖f_{ω_n}‖_C², ‖f_{ω_n}⁻¹‖_C²)`.
pub fn l1_proxy(family: &dyn MapFamily, path: &NoisePath, delta2: f64, window: i64) -> f64 {
    let mut sup = 0.0f64;
    for n in -window..=window {
        let b = family.c2_bound(&path.value(n));
        sup = sup.max((-(n.abs() as f64) * delta2).exp() * b);
    }
    sup
}

/// Build the Lyapunov-normed chart frame at `(p, time 0)`.
///
/// Column scales are finite-horizon adapted norms: backward iterates of `e_u`
/// weighted by `e^{(λ₀-δ₀)k}` and forward iterates of `e_cs` weighted by
/// `e^{-δ₀k}`, both normalized by `Σ e^{-δ₀k}` and clamped ≥ 1 so the chart
/// never expands ambient distances.
pub fn build_chart_frame(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    params: &ChartParams,
    n_past: usize,
    n_future: usize,
) -> Result<ChartFrame, TangentError> {
    let e_u = estimate_eu(family, path, p, n_past);
    let e_cs = estimate_ecs(family, path, p, n_future);
    let splitting = Splitting::new(e_u, e_cs)?;
    build_chart_frame_with_splitting(family, path, p, params, splitting)
}

/// Normalized adapted-norm sums (before scaling and clamping): the
/// Lyapunov-weighted backward sum for `e_u` and forward sum for `e_cs`, each
/// divided by `Σ e^{-δ₀k}`.
fn raw_norm_ratios(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    params: &ChartParams,
    splitting: &Splitting,
) -> Result<(f64, f64), TangentError> {
    let n = params.horizon;
    let lam = params.lambda();
    let weight_total: f64 = (0..=n).map(|k| (-params.delta0 * k as f64).exp()).sum();

    // Backward adapted norm of e_u. Inverse-transporting the estimated
    // direction amplifies its stable-component float noise like e^{2λk}, so
    // instead the direction is seeded at the far end of the horizon and
    // pushed forward; the backward norms are the reciprocals of the per-step
    // expansion factors.
    let orbit_back = backward_orbit(family, path, p, n);
    let far_path = path.shift(-(n as i64));
    let mut d = estimate_eu(family, &far_path, orbit_back[n], params.n_past);
    let mut log_alpha = vec![0.0f64; n + 1];
    for j in (1..=n).rev() {
        // step from time -j to -j+1 applies f_{ω_{-j+1}}
        let w = path.value(-(j as i64) + 1);
        let jac = family.jacobian(&w, orbit_back[j]);
        let det = jac.determinant();
        if det.abs() < 1e-14 {
            return Err(TangentError::DegenerateJacobian {
                det: det.abs(),
                step: j,
            });
        }
        let v = jac * d;
        log_alpha[j] = v.norm().ln();
        d = v.normalize();
    }
    let mut raw_u = 1.0f64; // k = 0 term
    let mut back_log = 0.0f64;
    for k in 1..=n {
        back_log -= log_alpha[k]; // log ‖df^{-k} e_u‖
        raw_u += (lam * k as f64 + back_log).exp();
    }

    // forward adapted norm of e_cs
    let orbit_fwd = forward_orbit(family, path, p, n);
    let mut vf = splitting.e_cs_vec();
    let mut log_scale_f = 0.0f64;
    let mut raw_cs = 1.0f64;
    for k in 0..n {
        let w = path.value(k as i64 + 1);
        vf = family.jacobian(&w, orbit_fwd[k]) * vf;
        log_scale_f += vf.norm().ln();
        vf = vf.normalize();
        raw_cs += (-params.delta0 * (k + 1) as f64 + log_scale_f).exp();
    }
    Ok((raw_u / weight_total, raw_cs / weight_total))
}

/// Normalized adapted-norm ratios at a point, with the splitting estimated
/// from the path (used to calibrate the global norm scales).
pub fn adapted_norm_ratios(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    params: &ChartParams,
) -> Result<(f64, f64), TangentError> {
    let e_u = estimate_eu(family, path, p, params.n_past);
    let e_cs = estimate_ecs(family, path, p, params.n_future);
    let splitting = Splitting::new(e_u, e_cs)?;
    raw_norm_ratios(family, path, p, params, &splitting)
}

/// Chart frame from an already-known splitting (used when directions are
/// transported along an orbit instead of re-estimated).
pub fn build_chart_frame_with_splitting(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    params: &ChartParams,
    splitting: Splitting,
) -> Result<ChartFrame, TangentError> {
    let (ratio_u, ratio_cs) = raw_norm_ratios(family, path, p, params, &splitting)?;
    let lyap_norm_u = (ratio_u / params.u_norm_scale).max(1.0);
    let lyap_norm_cs = (ratio_cs / params.cs_norm_scale).max(1.0);

    let col_u = splitting.e_u_vec() * (0.5 / lyap_norm_u);
    let col_cs = splitting.e_cs_vec() * (0.5 / lyap_norm_cs);
    let l = Mat2::from_columns(&[col_u, col_cs]);
    let l_inv = l.try_inverse().ok_or(TangentError::DegenerateSplitting {
        angle: line_angle(&splitting.e_u_vec(), &splitting.e_cs_vec()),
    })?;

    let distortion = op_norm(&l_inv);
    let tempered = l1_proxy(family, path, params.delta2, 40);
    let l_value = splitting
        .proj_norm_u
        .max(distortion)
        .max(tempered)
        .max(1.0);

    Ok(ChartFrame {
        base: p,
        splitting,
        l: [[l[(0, 0)], l[(0, 1)]], [l[(1, 0)], l[(1, 1)]]],
        l_inv: [[l_inv[(0, 0)], l_inv[(0, 1)]], [l_inv[(1, 0)], l_inv[(1, 1)]]],
        l_value,
        chart_radius: params.delta1 / l_value,
        lyap_norm_u,
        lyap_norm_cs,
        truncation_error: params.truncation_error(),
    })
}

/// Cheap uniformity proxy: the `l_value` of a frame built with reduced
/// estimation depths. Used to qualify particles at scale.
pub fn l_proxy(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    params: &ChartParams,
    depth: usize,
) -> Result<f64, TangentError> {
    let mut reduced = *params;
    reduced.horizon = params.horizon.min(10);
    let frame = build_chart_frame(family, path, p, &reduced, depth, depth)?;
    Ok(frame.l_value)
}

/// A map expressed between two chart frames: `w ↦ L_dst⁻¹(f(Φ_src w) ⊖ base_dst)`.
pub trait ChartMap {
    fn eval(&self, w: Vec2) -> Vec2;
    fn jacobian(&self, w: Vec2) -> Mat2;
    /// Inverse image of a destination-chart point, if available (used for
    /// inclusion checks).
    fn eval_inverse(&self, w: Vec2) -> Option<Vec2> {
        let _ = w;
        None
    }
}

/// Connecting map between consecutive chart frames along an orbit.
pub struct FrameConnectingMap<'a> {
    pub family: &'a dyn MapFamily,
    pub noise: NoiseValue,
    pub src: &'a ChartFrame,
    pub dst: &'a ChartFrame,
}

impl ChartMap for FrameConnectingMap<'_> {
    fn eval(&self, w: Vec2) -> Vec2 {
        let q = self.family.eval(&self.noise, self.src.from_chart(w));
        self.dst.to_chart(&q)
    }

    fn jacobian(&self, w: Vec2) -> Mat2 {
        let p = self.src.from_chart(w);
        self.dst.l_inv_mat() * self.family.jacobian(&self.noise, p) * self.src.l_mat()
    }

    fn eval_inverse(&self, w: Vec2) -> Option<Vec2> {
        let q = self.family.inverse(&self.noise, self.dst.from_chart(w));
        Some(self.src.to_chart(&q))
    }
}

/// Synthetic linear chart map `diag(e^μ, e^{-σ})` plus an optional
/// perturbation; the closed-form oracle for transform tests.
pub struct LinearChartMap {
    pub matrix: Mat2,
}

impl ChartMap for LinearChartMap {
    fn eval(&self, w: Vec2) -> Vec2 {
        self.matrix * w
    }

    fn jacobian(&self, _w: Vec2) -> Mat2 {
        self.matrix
    }

    fn eval_inverse(&self, w: Vec2) -> Option<Vec2> {
        self.matrix.try_inverse().map(|m| m * w)
    }
}

/// Axis-aligned frame for synthetic-map tests: `L = I/2`, `l_value = 2`.
pub fn synthetic_frame(base: TorusPoint, chart_radius: f64) -> ChartFrame {
    ChartFrame {
        base,
        splitting: Splitting {
            e_u: [1.0, 0.0],
            e_cs: [0.0, 1.0],
            proj_norm_u: 1.0,
            proj_norm_cs: 1.0,
        },
        l: [[0.5, 0.0], [0.0, 0.5]],
        l_inv: [[2.0, 0.0], [0.0, 2.0]],
        l_value: 2.0,
        chart_radius,
        lyap_norm_u: 1.0,
        lyap_norm_cs: 1.0,
        truncation_error: 0.0,
    }
}

/// How unstable directions are produced along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePolicy {
    /// Re-estimate `e_u` at every orbit point from its own finite past.
    TwoSided { n_past: usize, n_future: usize },
    /// Estimate `e_u` once at the earliest time and push it forward by the
    /// Jacobians (the finite-past chart system used for pushed leaves).
    PushedPast { n_past: usize, n_future: usize },
}

/// Chart frames along the pullback orbit ending at `p` (times `-n..=0`).
pub struct OrbitFrames {
    /// `points[k]` is the state at time `-n + k`.
    pub points: Vec<TorusPoint>,
    pub frames: Vec<ChartFrame>,
    /// Time of the first frame (`-n`).
    pub start_time: i64,
}

impl OrbitFrames {
    pub fn along_pullback(
        family: &dyn MapFamily,
        path: &NoisePath,
        p: TorusPoint,
        n: usize,
        params: &ChartParams,
        policy: FramePolicy,
    ) -> Result<Self, TangentError> {
        let mut points = backward_orbit(family, path, p, n);
        points.reverse(); // points[k] at time -n+k
        Self::from_points(family, path, points, params, policy)
    }

    /// Frames over the forward orbit of a state given at time `-n`.
    pub fn from_start(
        family: &dyn MapFamily,
        path: &NoisePath,
        start_at_minus_n: TorusPoint,
        n: usize,
        params: &ChartParams,
        policy: FramePolicy,
    ) -> Result<Self, TangentError> {
        let points = forward_orbit(family, &path.shift(-(n as i64)), start_at_minus_n, n);
        Self::from_points(family, path, points, params, policy)
    }

    fn from_points(
        family: &dyn MapFamily,
        path: &NoisePath,
        points: Vec<TorusPoint>,
        params: &ChartParams,
        policy: FramePolicy,
    ) -> Result<Self, TangentError> {
        let n = points.len() - 1;
        let start_time = -(n as i64);
        let mut frames = Vec::with_capacity(n + 1);
        match policy {
            FramePolicy::TwoSided { n_past, n_future } => {
                for (k, pt) in points.iter().enumerate() {
                    let local = path.shift(start_time + k as i64);
                    frames.push(build_chart_frame(
                        family, &local, *pt, params, n_past, n_future,
                    )?);
                }
            }
            FramePolicy::PushedPast { n_past, n_future } => {
                let base_path = path.shift(start_time);
                let mut e_u = estimate_eu(family, &base_path, points[0], n_past);
                for (k, pt) in points.iter().enumerate() {
                    let local = path.shift(start_time + k as i64);
                    let e_cs = estimate_ecs(family, &local, *pt, n_future);
                    let splitting = Splitting::new(e_u, e_cs)?;
                    frames.push(build_chart_frame_with_splitting(
                        family, &local, *pt, params, splitting,
                    )?);
                    if k < n {
                        let w = path.value(start_time + k as i64 + 1);
                        e_u = (family.jacobian(&w, *pt) * e_u).normalize();
                    }
                }
            }
        }
        Ok(Self {
            points,
            frames,
            start_time,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Connecting map from frame `k` to frame `k+1`.
    pub fn connecting<'a>(&'a self, family: &'a dyn MapFamily, path: &NoisePath, k: usize) -> FrameConnectingMap<'a> {
        FrameConnectingMap {
            family,
            noise: path.value(self.start_time + k as i64 + 1),
            src: &self.frames[k],
            dst: &self.frames[k + 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseLaw;
    use crate::systems::System;

    fn cat_unstable() -> Vec2 {
        Vec2::new(1.0, (5.0f64.sqrt() - 1.0) / 2.0).normalize()
    }

    fn cat_stable() -> Vec2 {
        Vec2::new(1.0, -(5.0f64.sqrt() + 1.0) / 2.0).normalize()
    }

    fn cat_lambda() -> f64 {
        ((3.0 + 5.0f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn qr_recovers_cat_map_exponents() {
        let path = NoisePath::new(1, NoiseLaw::UniformFull);
        let rep = lyapunov_qr(&System::A, &path, TorusPoint::new(0.1, 0.2), 10_000).unwrap();
        assert!((rep.lambda1 - cat_lambda()).abs() < 1e-6);
        assert!((rep.lambda2 + cat_lambda()).abs() < 1e-6);
    }

    #[test]
    fn translations_have_zero_exponents() {
        let path = NoisePath::new(2, NoiseLaw::UniformFull);
        let rep = lyapunov_qr(&System::Translation, &path, TorusPoint::new(0.4, 0.7), 100).unwrap();
        assert_eq!(rep.lambda1, 0.0);
        assert_eq!(rep.lambda2, 0.0);
    }

    #[test]
    fn exponent_sum_matches_mean_log_det() {
        let path = NoisePath::new(3, NoiseLaw::UniformFull);
        let rep = lyapunov_qr(&System::C { a: 0.3 }, &path, TorusPoint::new(0.3, 0.6), 5000).unwrap();
        assert!((rep.lambda1 + rep.lambda2 - rep.mean_log_det).abs() < 1e-8);
        // dissipative on average
        assert!(rep.mean_log_det < 0.0);
    }

    #[test]
    fn volume_preserving_exponents_sum_to_zero() {
        let path = NoisePath::new(4, NoiseLaw::UniformFull);
        let rep = lyapunov_qr(&System::B { eps: 0.1 }, &path, TorusPoint::new(0.3, 0.6), 5000).unwrap();
        assert!((rep.lambda1 + rep.lambda2).abs() < 1e-10);
    }

    #[test]
    fn exponents_agree_across_seeds() {
        let a = lyapunov_qr(
            &System::C { a: 0.3 },
            &NoisePath::new(11, NoiseLaw::UniformFull),
            TorusPoint::new(0.25, 0.85),
            100_000,
        )
        .unwrap();
        let b = lyapunov_qr(
            &System::C { a: 0.3 },
            &NoisePath::new(5011, NoiseLaw::UniformFull),
            TorusPoint::new(0.6, 0.15),
            100_000,
        )
        .unwrap();
        assert!(
            (a.lambda1 - b.lambda1).abs() < 5e-3,
            "λ₁ seeds differ by {}",
            (a.lambda1 - b.lambda1).abs()
        );
    }

    #[test]
    fn eu_matches_cat_eigenvector() {
        let path = NoisePath::new(7, NoiseLaw::UniformFull);
        let e = estimate_eu(&System::A, &path, TorusPoint::new(0.3, 0.4), 40);
        assert!(line_angle(&e, &cat_unstable()) < 1e-8);
    }

    #[test]
    fn ecs_matches_cat_eigenvector() {
        let path = NoisePath::new(8, NoiseLaw::UniformFull);
        let e = estimate_ecs(&System::A, &path, TorusPoint::new(0.9, 0.1), 40);
        assert!(line_angle(&e, &cat_stable()) < 1e-8);
    }

    #[test]
    fn splitting_is_invariant_under_the_map() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(9, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.37, 0.58);
        let e0 = estimate_eu(&sys, &path, p, 60);
        let w = path.value(1);
        let pushed = (sys.jacobian(&w, p) * e0).normalize();
        let p1 = sys.eval(&w, p);
        let e1 = estimate_eu(&sys, &path.shift(1), p1, 60);
        assert!(line_angle(&pushed, &e1) < 1e-6);
    }

    #[test]
    fn ecs_independent_of_past() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(10, NoiseLaw::UniformFull);
        let altered = path.with_far_past_reseeded(0, 999);
        let p = TorusPoint::new(0.2, 0.6);
        let a = estimate_ecs(&sys, &path, p, 35);
        let b = estimate_ecs(&sys, &altered, p, 35);
        assert_eq!(a, b, "ecs must never read indices ≤ 0");
    }

    #[test]
    fn ecs_continuous_in_base_point() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(12, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.44, 0.15);
        let q = TorusPoint::new(0.44 + 1e-4, 0.15);
        let a = estimate_ecs(&sys, &path, p, 40);
        let b = estimate_ecs(&sys, &path, q, 40);
        assert!(line_angle(&a, &b) < 1e-3);
    }

    #[test]
    fn far_past_perturbation_decays() {
        // the true decay rate is e^{-(λ₁-λ₂)n₀}, which hits the float floor
        // around n₀ ≈ 8; measure inside the resolvable window
        let sys = System::C { a: 0.3 };
        let p = TorusPoint::new(0.31, 0.77);
        let mut last = f64::INFINITY;
        for n0 in [2i64, 4, 6] {
            let mut mean = 0.0;
            for seed in 0..6u64 {
                let path = NoisePath::new(100 + seed, NoiseLaw::UniformFull);
                let altered = path.with_far_past_reseeded(-n0, 7_000 + seed);
                let a = estimate_eu(&sys, &path, p, 40);
                let b = estimate_eu(&sys, &altered, p, 40);
                mean += line_angle(&a, &b);
            }
            mean /= 6.0;
            assert!(mean < last, "angle should decay with n₀ on average");
            last = mean;
        }
    }

    #[test]
    fn cat_frames_are_homogeneous() {
        let path = NoisePath::new(13, NoiseLaw::UniformFull);
        let params = ChartParams::from_lambda0(cat_lambda());
        let f1 = build_chart_frame(&System::A, &path, TorusPoint::new(0.2, 0.3), &params, 40, 40)
            .unwrap();
        let f2 = build_chart_frame(&System::A, &path, TorusPoint::new(0.8, 0.65), &params, 40, 40)
            .unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((f1.l[r][c] - f2.l[r][c]).abs() < 1e-8);
            }
        }
        assert!((f1.l_value - f2.l_value).abs() < 1e-8);
    }

    #[test]
    fn chart_is_bi_lipschitz_with_constant_l() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(14, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let frame = build_chart_frame(&sys, &path, TorusPoint::new(0.52, 0.33), &params, 40, 40)
            .unwrap();
        let r = frame.chart_radius;
        for i in 0..40 {
            let t = i as f64 / 39.0;
            let w1 = Vec2::new(r * (2.0 * t - 1.0), r * (1.0 - 2.0 * t) * 0.7);
            let w2 = Vec2::new(r * (2.0 * t - 1.0) * 0.3, r * (2.0 * t - 1.0));
            let y1 = frame.from_chart(w1);
            let y2 = frame.from_chart(w2);
            let chart_dist = (w1 - w2).norm();
            let amb = y1.dist(&y2);
            assert!(amb <= chart_dist + 1e-12, "lower Lipschitz bound");
            assert!(chart_dist <= frame.l_value * amb + 1e-12, "upper bound");
        }
    }

    #[test]
    fn connecting_map_expands_and_contracts_at_origin() {
        for (sys, seed) in [
            (System::A, 15u64),
            (System::B { eps: 0.1 }, 16),
            (System::C { a: 0.3 }, 17),
        ] {
            let path = NoisePath::new(seed, NoiseLaw::UniformFull);
            let params = ChartParams::calibrate(&sys, &path).unwrap();
            let orbit = OrbitFrames::along_pullback(
                &sys,
                &path,
                TorusPoint::new(0.41, 0.27),
                8,
                &params,
                FramePolicy::TwoSided {
                    n_past: 40,
                    n_future: 40,
                },
            )
            .unwrap();
            for k in 0..orbit.len() - 1 {
                let cm = orbit.connecting(&sys, &path, k);
                let j0 = cm.jacobian(Vec2::zeros());
                let growth_u = (j0 * Vec2::new(1.0, 0.0)).norm();
                let shrink_cs = (j0 * Vec2::new(0.0, 1.0)).norm();
                assert!(
                    growth_u >= params.lambda().exp(),
                    "{}: u-expansion {growth_u} < e^λ = {}",
                    sys.name(),
                    params.lambda().exp()
                );
                assert!(
                    shrink_cs <= params.delta0.exp(),
                    "{}: cs growth {shrink_cs} > e^δ₀",
                    sys.name()
                );
            }
        }
    }

    #[test]
    fn connecting_map_jacobian_matches_finite_differences() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(18, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let orbit = OrbitFrames::along_pullback(
            &sys,
            &path,
            TorusPoint::new(0.13, 0.88),
            2,
            &params,
            FramePolicy::TwoSided {
                n_past: 40,
                n_future: 40,
            },
        )
        .unwrap();
        let cm = orbit.connecting(&sys, &path, 0);
        let w = Vec2::new(0.3, -0.2) * orbit.frames[0].chart_radius;
        let j = cm.jacobian(w);
        let h = 1e-7;
        for (col, dir) in [(0, Vec2::new(1.0, 0.0)), (1, Vec2::new(0.0, 1.0))] {
            let fd = (cm.eval(w + dir * h) - cm.eval(w - dir * h)) / (2.0 * h);
            assert!((fd - j.column(col)).norm() < 1e-5 * j.column(col).norm().max(1.0));
        }
    }

    #[test]
    fn chart_nonlinearity_is_bounded_by_delta() {
        // Lip(f̃ − (df̃)₀) ≤ δ on B(δ l⁻¹) for δ ∈ {δ₁/2, δ₁/4}
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(19, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let orbit = OrbitFrames::along_pullback(
            &sys,
            &path,
            TorusPoint::new(0.62, 0.35),
            4,
            &params,
            FramePolicy::TwoSided {
                n_past: 40,
                n_future: 40,
            },
        )
        .unwrap();
        for k in 0..orbit.len() - 1 {
            let cm = orbit.connecting(&sys, &path, k);
            let j0 = cm.jacobian(Vec2::zeros());
            for frac in [0.5, 0.25] {
                let delta = params.delta1 * frac;
                let rad = delta / orbit.frames[k].l_value;
                let mut worst = 0.0f64;
                let grid = 9;
                let mut pts = Vec::new();
                for i in 0..grid {
                    for jj in 0..grid {
                        let u = rad * (2.0 * i as f64 / (grid - 1) as f64 - 1.0);
                        let v = rad * (2.0 * jj as f64 / (grid - 1) as f64 - 1.0);
                        pts.push(Vec2::new(u, v));
                    }
                }
                for a in 0..pts.len() {
                    for b in (a + 1)..pts.len() {
                        let d = (pts[a] - pts[b]).norm();
                        if d < 1e-12 {
                            continue;
                        }
                        let ra = cm.eval(pts[a]) - j0 * pts[a];
                        let rb = cm.eval(pts[b]) - j0 * pts[b];
                        worst = worst.max((ra - rb).norm() / d);
                    }
                }
                assert!(
                    worst <= delta,
                    "nonlinearity Lip {worst} > δ = {delta} at step {k}"
                );
            }
        }
    }

    #[test]
    fn temperedness_along_orbit() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(20, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let orbit = forward_orbit(&sys, &path, TorusPoint::new(0.17, 0.93), 1000);
        let mut ok = 0usize;
        let mut prev = None;
        let mut proj_norms = Vec::new();
        for (t, pt) in orbit.iter().enumerate().take(1000) {
            let frame =
                build_chart_frame(&sys, &path.shift(t as i64), *pt, &params, 25, 25).unwrap();
            proj_norms.push(frame.splitting.proj_norm_u);
            if let Some(last) = prev {
                let ratio: f64 = frame.l_value / last;
                if ratio.ln().abs() <= params.delta2 {
                    ok += 1;
                }
            }
            prev = Some(frame.l_value);
        }
        assert!(ok as f64 >= 0.99 * 999.0, "tempered steps: {ok}/999");
        // projection norms stay bounded along the orbit (subexponential growth)
        let max = proj_norms.iter().cloned().fold(0.0f64, f64::max);
        let mut sorted = proj_norms.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!(max <= 3.0 * median, "proj norm max {max}, median {median}");
    }

    #[test]
    fn degenerate_jacobian_is_reported() {
        struct Collapse;
        impl MapFamily for Collapse {
            fn name(&self) -> &'static str {
                "collapse"
            }
            fn eval(&self, _w: &NoiseValue, p: TorusPoint) -> TorusPoint {
                TorusPoint::new(p.x, 0.0)
            }
            fn inverse(&self, _w: &NoiseValue, p: TorusPoint) -> TorusPoint {
                p
            }
            fn jacobian(&self, _w: &NoiseValue, _p: TorusPoint) -> Mat2 {
                Mat2::new(1.0, 0.0, 0.0, 0.0)
            }
            fn c2_bound(&self, _w: &NoiseValue) -> f64 {
                1.0
            }
        }
        let path = NoisePath::new(0, NoiseLaw::Zero);
        let err = lyapunov_qr(&Collapse, &path, TorusPoint::new(0.5, 0.5), 10).unwrap_err();
        assert!(matches!(err, TangentError::DegenerateJacobian { .. }));
    }
}

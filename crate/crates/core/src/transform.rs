//! Single-step and iterated graph transforms.
//!
//! One step takes a graph `g` in the source chart, pushes it through the
//! connecting map, and re-solves it as a graph `𝒯g` over the destination
//! u-axis: for every destination node `u'` the scalar equation
//! `π^u f̃(u, g(u)) = u'` is solved by safeguarded Newton iteration (the cone
//! condition makes the left side strictly monotone in 1D), and the value is
//! `𝒯g(u') = π^cs f̃(u, g(u))`.

use crate::cocycle::forward_orbit;
use crate::error::TransformError;
use crate::graphs::{UGraph, DEFAULT_NODES};
use crate::noise::NoisePath;
use crate::systems::MapFamily;
use crate::tangent::{ChartFrame, ChartMap, ChartParams, FramePolicy, OrbitFrames};
use crate::torus::{TorusPoint, Vec2};
use serde::{Deserialize, Serialize};

/// Options for one transform step.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Slope bound of the regime (1/10 standard, K₀ for slanted graphs).
    pub slope_cap: f64,
    /// Cap on the destination domain radius (destination chart units).
    pub dest_radius_cap: f64,
    /// Overflow bound on |𝒯g| (destination chart units).
    pub dest_cs_radius: f64,
    pub nodes: usize,
    /// Step index, carried into errors.
    pub step: usize,
    /// When set, `slope_cap` applies inside `|u| ≤ core` only; outside, the
    /// graph may slant up to `extended_slope_cap` (the stack bound). Leaves
    /// grown past one chart scale use this.
    pub core_radius: Option<f64>,
    pub extended_slope_cap: f64,
}

impl StepOptions {
    pub fn chart_local(slope_cap: f64, dest_radius_cap: f64, dest_cs_radius: f64, nodes: usize, step: usize) -> Self {
        Self {
            slope_cap,
            dest_radius_cap,
            dest_cs_radius,
            nodes,
            step,
            core_radius: None,
            extended_slope_cap: 1.0,
        }
    }
}

/// Apply one graph transform through `map`, re-graphing over the destination
/// chart whose frame is `dst_frame`.
pub fn graph_transform_step(
    map: &dyn ChartMap,
    dst_frame: &ChartFrame,
    g: &UGraph,
    opts: &StepOptions,
) -> Result<UGraph, TransformError> {
    if g.nodes() < 7 {
        return Err(TransformError::DegenerateInput {
            nodes: g.nodes(),
            radius: g.radius,
        });
    }
    let eval_g = g.interpolant();
    let image = |u: f64| -> Vec2 { map.eval(Vec2::new(u, eval_g(u))) };

    // reachable destination u-range from the monotone image of the domain
    let lo = image(-g.radius).x;
    let hi = image(g.radius).x;
    let (lo, hi, flip) = if lo <= hi { (lo, hi, false) } else { (hi, lo, true) };
    if !(lo < 0.0 && hi > 0.0) {
        return Err(TransformError::NewtonDivergence {
            step: opts.step,
            node: 0,
        });
    }
    let reach = (-lo).min(hi) * (1.0 - 1e-12);
    let r_dst = reach.min(opts.dest_radius_cap);
    if r_dst <= 0.0 {
        return Err(TransformError::NewtonDivergence {
            step: opts.step,
            node: 0,
        });
    }

    let n = opts.nodes;
    let mut values = vec![0.0f64; n];
    let mut u_guess = -g.radius; // warm start, nodes processed left to right
    for j in 0..n {
        let mut target = -r_dst + 2.0 * r_dst * j as f64 / (n - 1) as f64;
        if flip {
            target = -target;
        }
        let u = solve_node(&image, map, &eval_g, g, target, u_guess).ok_or(
            TransformError::NewtonDivergence {
                step: opts.step,
                node: j,
            },
        )?;
        u_guess = u;
        let idx = if flip { n - 1 - j } else { j };
        values[idx] = image(u).y;
        if values[idx].abs() > opts.dest_cs_radius {
            return Err(TransformError::ChartOverflow {
                step: opts.step,
                value: values[idx].abs(),
                radius: opts.dest_cs_radius,
            });
        }
    }
    let out = UGraph::from_values(dst_frame.clone(), r_dst, values);
    match opts.core_radius {
        None => {
            if out.lip > opts.slope_cap * (1.0 + 1e-9) {
                return Err(TransformError::ConeViolation {
                    step: opts.step,
                    measured: out.lip,
                    bound: opts.slope_cap,
                });
            }
        }
        Some(core) => {
            let h = out.spacing();
            let mut lip_core = 0.0f64;
            for i in 0..out.nodes() - 1 {
                let s = (out.values[i + 1] - out.values[i]).abs() / h;
                if out.u_at(i).abs() <= core && out.u_at(i + 1).abs() <= core {
                    lip_core = lip_core.max(s);
                }
            }
            if lip_core > opts.slope_cap * (1.0 + 1e-9) {
                return Err(TransformError::ConeViolation {
                    step: opts.step,
                    measured: lip_core,
                    bound: opts.slope_cap,
                });
            }
            if out.lip > opts.extended_slope_cap * (1.0 + 1e-9) {
                return Err(TransformError::ConeViolation {
                    step: opts.step,
                    measured: out.lip,
                    bound: opts.extended_slope_cap,
                });
            }
        }
    }
    Ok(out)
}

/// Solve `π^u f̃(u, g(u)) = target` by Newton with a bisection safeguard on
/// the bracketing interval `[-r, r]`.
fn solve_node(
    image: &impl Fn(f64) -> Vec2,
    map: &dyn ChartMap,
    eval_g: &impl Fn(f64) -> f64,
    g: &UGraph,
    target: f64,
    warm: f64,
) -> Option<f64> {
    let r = g.radius;
    let f = |u: f64| image(u).x - target;
    let (mut a, mut b) = (-r, r);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    let increasing = fb > 0.0;
    let mut u = warm.clamp(a, b);
    for _ in 0..100 {
        let fu = f(u);
        if fu.abs() <= 1e-13 * target.abs().max(1.0) {
            return Some(u);
        }
        if (fu > 0.0) == increasing {
            b = u;
        } else {
            a = u;
        }
        // d/du π^u f̃(u, g(u)) via the chain rule
        let jac = map.jacobian(Vec2::new(u, eval_g(u)));
        let slope = g.deriv(u);
        let dphi = jac[(0, 0)] + jac[(0, 1)] * slope;
        let newton = if dphi.abs() > 1e-14 {
            u - fu / dphi
        } else {
            f64::NAN
        };
        u = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a < 1e-16 {
            return Some(u);
        }
    }
    None
}

/// Defining-inclusion residual: destination nodes mapped back through the
/// inverse connecting map must land on graph `g`.
pub fn inclusion_residual(map: &dyn ChartMap, g: &UGraph, tg: &UGraph) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..tg.nodes() {
        let w = Vec2::new(tg.u_at(j), tg.values[j]);
        if let Some(back) = map.eval_inverse(w) {
            worst = worst.max((g.eval(back.x) - back.y).abs());
        }
    }
    worst
}

/// Phase lengths and radius factors for the slanted-transform schedule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransformSchedule {
    /// Initial slope bound of the source graphs.
    pub k0: f64,
    /// Slope cap after settling.
    pub k0_bar: f64,
    /// Chart expansion rate λ the decay bounds are measured against.
    pub lambda: f64,
    /// Slope-reduction phase length, `⌈2 log(K₀/K̄₀)/λ⌉`.
    pub m0: usize,
    /// Domain-growth phase length.
    pub m1: usize,
    /// Initial radius factor (fraction of the chart radius).
    pub r0: f64,
    /// Working radius factor after the slope-reduction phase.
    pub r1_bar: f64,
}

impl TransformSchedule {
    /// Derive the schedule from measured λ and the initial slope bound.
    pub fn derive(k0: f64, k0_bar: f64, lambda: f64, r0: f64, r1_bar: f64) -> Self {
        assert!(lambda > 0.0 && k0 > 0.0 && k0_bar > 0.0);
        let m0 = if k0 > k0_bar {
            (2.0 * (k0 / k0_bar).ln() / lambda).ceil() as usize
        } else {
            0
        };
        // domain grows at least like e^{λ/2} per step once slopes settle;
        // the 0.8 slack absorbs tempered chart-size variation
        let m1 = ((2.0 * (r1_bar / r0).max(1.0).ln() / (0.8 * lambda)).ceil() as usize).max(1);
        let s = Self {
            k0,
            k0_bar,
            lambda,
            m0,
            m1,
            r0,
            r1_bar,
        };
        debug_assert!(
            s.k0 * (-(s.m0 as f64) * lambda / 2.0).exp() < s.k0_bar * (1.0 + 1e-12),
            "m₀ must bring the slope under K̄₀"
        );
        s
    }

    fn radius_factor(&self, k: usize) -> f64 {
        if k <= self.m0 {
            self.r0
        } else {
            self.r1_bar
        }
    }
}

/// Frames along the forward orbit of a start point at time `-n`, with the
/// unstable axis selected from the start point's finite past and pushed
/// forward (the chart system used for transported source graphs).
pub fn slanted_pipeline_frames(
    family: &dyn MapFamily,
    path: &NoisePath,
    start_at_minus_n: TorusPoint,
    n: usize,
    params: &ChartParams,
) -> Result<OrbitFrames, crate::error::TangentError> {
    OrbitFrames::from_start(
        family,
        path,
        start_at_minus_n,
        n,
        params,
        FramePolicy::PushedPast {
            n_past: params.n_past,
            n_future: params.n_future,
        },
    )
}

/// Iterate the slanted graph transform along precomputed orbit frames.
///
/// `g0` lives in `frames.frames[0]`. Returns `g_1 … g_n`. Domains follow the
/// schedule caps (`r0`·chart radius through phase `m0`, then `r1_bar`·chart
/// radius); slopes are required to decay below `K̄₀` after `m0 + m1` steps.
pub fn iterate_slanted_transform(
    family: &dyn MapFamily,
    path: &NoisePath,
    frames: &OrbitFrames,
    schedule: &TransformSchedule,
    g0: &UGraph,
) -> Result<Vec<UGraph>, TransformError> {
    let n = frames.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut g = g0.clone();
    for k in 0..n {
        let cm = frames.connecting(family, path, k);
        let dst = &frames.frames[k + 1];
        // slope cap: K₀ decays by e^{-λ/2} per step until it reaches K̄₀
        let decayed = schedule.k0 * (-(k as f64 + 1.0) * schedule.lambda / 2.0).exp();
        let cap = decayed.max(schedule.k0_bar);
        let opts = StepOptions {
            slope_cap: cap * (1.0 + 1e-6),
            dest_radius_cap: schedule.radius_factor(k + 1) * dst.chart_radius,
            dest_cs_radius: schedule.radius_factor(k + 1).max(1.0) * dst.chart_radius,
            nodes: g0.nodes(),
            step: k,
            core_radius: Some(dst.chart_radius),
            extended_slope_cap: 1.0,
        };
        g = graph_transform_step(&cm, dst, &g, &opts)?;
        out.push(g.clone());
    }
    // after the settling phase the graph must span its full working domain
    let settle = schedule.m0 + schedule.m1;
    for (k, gk) in out.iter().enumerate() {
        let step = k + 1;
        if step >= settle && step <= n {
            let want = schedule.r1_bar * frames.frames[step].chart_radius;
            debug_assert!(
                gk.radius >= want * (1.0 - 1e-9),
                "step {step}: domain {} below working radius {want}",
                gk.radius
            );
        }
    }
    Ok(out)
}

/// Local unstable manifold at `(p, time 0)`: the small-slope graph transform
/// iterated on the zero graph from time `-n_past`, in two-sided frames along
/// the backward orbit of `p`.
///
/// `radius` is the requested domain radius of the returned graph in time-0
/// chart coordinates; steps run at `max(1, radius/chart_radius)` times each
/// chart radius so leaves may extend across several chart scales (the global
/// leaf is the union of pushed-forward local ones). All cone and overflow
/// checks stay active.
pub fn local_unstable_manifold(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n_past: usize,
    radius: f64,
    params: &ChartParams,
) -> Result<UGraph, crate::error::SrbError> {
    let frames = OrbitFrames::along_pullback(
        family,
        path,
        p,
        n_past,
        params,
        FramePolicy::TwoSided {
            n_past: params.n_past,
            n_future: params.n_future,
        },
    )?;
    let extension = (radius / frames.frames[n_past].chart_radius).max(1.0);
    let g0 = UGraph::zero(
        frames.frames[0].clone(),
        frames.frames[0].chart_radius,
        DEFAULT_NODES,
    );
    let mut g = g0;
    for k in 0..n_past {
        let cm = frames.connecting(family, path, k);
        let dst = &frames.frames[k + 1];
        let cap = extension * dst.chart_radius;
        let opts = StepOptions {
            slope_cap: params.k0_bar,
            dest_radius_cap: if k + 1 == n_past {
                radius.min(cap)
            } else {
                cap
            },
            dest_cs_radius: extension.max(1.0) * dst.chart_radius,
            nodes: DEFAULT_NODES,
            step: k,
            core_radius: Some(dst.chart_radius),
            extended_slope_cap: 1.0,
        };
        g = graph_transform_step(&cm, dst, &g, &opts)?;
    }
    Ok(g)
}

/// Sup-norm distances between local manifolds computed at consecutive depths
/// (all graphed in the time-0 chart over a common radius); the contraction
/// diagnostic of the fixed-point iteration.
pub fn unstable_convergence_trace(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    depths: &[usize],
    radius: f64,
    params: &ChartParams,
) -> Result<Vec<f64>, crate::error::SrbError> {
    let mut graphs = Vec::new();
    for &d in depths {
        graphs.push(local_unstable_manifold(family, path, p, d, radius, params)?);
    }
    let mut out = Vec::new();
    for w in graphs.windows(2) {
        // compare on the common (smaller) radius with the |·|' gauge
        let r = w[0].radius.min(w[1].radius);
        let mut sup = 0.0f64;
        for j in 0..DEFAULT_NODES {
            let u = -r + 2.0 * r * j as f64 / (DEFAULT_NODES - 1) as f64;
            if u.abs() < 1e-300 {
                continue;
            }
            sup = sup.max((w[0].eval(u) - w[1].eval(u)).abs() / u.abs());
        }
        out.push(sup);
    }
    Ok(out)
}

/// Forward orbit variant used by tests that need the time-0 endpoint of a
/// start point at time `-n`.
pub fn pullback_endpoint(
    family: &dyn MapFamily,
    path: &NoisePath,
    start_at_minus_n: TorusPoint,
    n: usize,
) -> TorusPoint {
    *forward_orbit(family, &path.shift(-(n as i64)), start_at_minus_n, n)
        .last()
        .expect("orbit nonempty")
}

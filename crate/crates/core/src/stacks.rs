//! Axis switching between nearby frames and stacks of leaves over a common
//! reference box.

use crate::error::{SrbError, SwitchError, SwitchHypothesis};
use crate::graphs::{UGraph, DEFAULT_NODES};
use crate::noise::NoisePath;
use crate::systems::MapFamily;
use crate::tangent::{ChartFrame, ChartParams};
use crate::torus::{line_angle, Mat2, TorusPoint, Vec2};
use crate::transform::local_unstable_manifold;
use serde::{Deserialize, Serialize};

/// Ambient tangent frame with unit axes: the geometry of a reference box
/// `E^u(r) × E^cs(r)` measured in Riemannian lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisFrame {
    pub base: TorusPoint,
    pub e_u: [f64; 2],
    pub e_cs: [f64; 2],
    basis_inv: [[f64; 2]; 2],
}

impl AxisFrame {
    pub fn new(base: TorusPoint, e_u: Vec2, e_cs: Vec2) -> Self {
        let e_u = e_u.normalize();
        let e_cs = e_cs.normalize();
        let basis = Mat2::from_columns(&[e_u, e_cs]);
        let inv = basis.try_inverse().expect("axes not parallel");
        Self {
            base,
            e_u: [e_u.x, e_u.y],
            e_cs: [e_cs.x, e_cs.y],
            basis_inv: [[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]],
        }
    }

    pub fn from_chart_frame(f: &ChartFrame) -> Self {
        Self::new(f.base, f.e_u(), f.e_cs())
    }

    pub fn e_u_vec(&self) -> Vec2 {
        Vec2::new(self.e_u[0], self.e_u[1])
    }

    pub fn e_cs_vec(&self) -> Vec2 {
        Vec2::new(self.e_cs[0], self.e_cs[1])
    }

    /// 1/sin of the axis angle, the projection norm of this frame.
    pub fn proj_norm(&self) -> f64 {
        1.0 / line_angle(&self.e_u_vec(), &self.e_cs_vec()).sin()
    }

    /// Coefficients of the displacement `base → q` in the `(e_u, e_cs)` basis.
    pub fn to_box(&self, q: &TorusPoint) -> Vec2 {
        let m = Mat2::new(
            self.basis_inv[0][0],
            self.basis_inv[0][1],
            self.basis_inv[1][0],
            self.basis_inv[1][1],
        );
        m * self.base.displacement_to(q)
    }

    pub fn from_box(&self, w: Vec2) -> TorusPoint {
        self.base
            .offset(self.e_u_vec() * w.x + self.e_cs_vec() * w.y)
    }
}

/// Numeric budgets for the axis-switch hypotheses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwitchBudget {
    /// Cap on both frames' projection norms.
    pub proj_cap: f64,
    /// Base-point distance budget ε₁.
    pub eps1: f64,
    /// Axis-alignment budget ε₂ (angle between corresponding axes).
    pub eps2: f64,
    /// Ambient Lipschitz cap on the input graph over the doubled domain.
    pub lip_cap: f64,
}

impl SwitchBudget {
    /// Conservative defaults in terms of the uniformity threshold and the
    /// output radius: ε₁ = ρ L, ε₂ = 1/(4L), Lip cap 1/10.
    pub fn strict(proj_cap: f64, rho: f64) -> Self {
        Self {
            proj_cap,
            eps1: rho * proj_cap,
            eps2: 1.0 / (4.0 * proj_cap),
            lip_cap: 0.1,
        }
    }

    /// Budget used when collecting extended leaves onto a reference box: the
    /// slope cap is the stack bound (Lip ≤ 1) rather than the single-chart
    /// 1/10.
    pub fn stack(proj_cap: f64, rho: f64) -> Self {
        Self {
            proj_cap,
            eps1: rho * proj_cap * 2.0,
            eps2: 1.0 / (2.0 * proj_cap),
            lip_cap: 1.0,
        }
    }
}

/// A graph over the reference box u-axis: `values[i] ≈ γ(a_i)` on a uniform
/// grid of `[-rho, rho]`, lengths in ambient units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxGraph {
    pub rho: f64,
    pub values: Vec<f64>,
    pub lip: f64,
}

impl BoxGraph {
    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn a_at(&self, i: usize) -> f64 {
        -self.rho + 2.0 * self.rho * i as f64 / (self.nodes() - 1) as f64
    }

    pub fn eval(&self, a: f64) -> f64 {
        // linear interpolation on the uniform grid (nodes are exact)
        let n = self.nodes();
        let h = 2.0 * self.rho / (n - 1) as f64;
        let x = ((a.clamp(-self.rho, self.rho) + self.rho) / h).min((n - 2) as f64);
        let i = x.floor() as usize;
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[self.nodes() / 2]
    }
}

/// Measured ambient Lipschitz constant of a chart graph relative to its own
/// frame's unit axes.
pub fn ambient_lip(g: &UGraph) -> f64 {
    let own = AxisFrame::from_chart_frame(&g.frame);
    let mut prev: Option<Vec2> = None;
    let mut worst = 0.0f64;
    for i in 0..g.nodes() {
        let p = g.frame.from_chart(Vec2::new(g.u_at(i), g.values[i]));
        let w = own.to_box(&p);
        if let Some(q) = prev {
            let da = (w.x - q.x).abs();
            let db = (w.y - q.y).abs();
            if da > 1e-14 {
                worst = worst.max(db / da);
            }
        }
        prev = Some(w);
    }
    worst
}

/// Re-graph a chart graph over the axes of a nearby target frame.
///
/// Verifies the switch hypotheses (projection norms, base distance, axis
/// alignment, input Lipschitz bound) against `budget`, then solves the
/// implicit graph equation node-by-node by Newton on the interpolated curve.
/// The output is defined on `[-rho, rho]` along the target u-axis with values
/// along the target cs-axis, both in ambient units.
pub fn switch_axes(
    g: &UGraph,
    target: &AxisFrame,
    rho: f64,
    budget: &SwitchBudget,
) -> Result<BoxGraph, SwitchError> {
    let own = AxisFrame::from_chart_frame(&g.frame);
    let fail = |which, measured, b| {
        Err(SwitchError::HypothesisFailure {
            which,
            measured,
            budget: b,
        })
    };
    let pn = own.proj_norm().max(target.proj_norm());
    if pn > budget.proj_cap {
        return fail(SwitchHypothesis::ProjectionNorm, pn, budget.proj_cap);
    }
    let dist = g.frame.base.dist(&target.base);
    if dist >= budget.eps1 {
        return fail(SwitchHypothesis::BaseDistance, dist, budget.eps1);
    }
    let a_u = line_angle(&own.e_u_vec(), &target.e_u_vec());
    let a_cs = line_angle(&own.e_cs_vec(), &target.e_cs_vec());
    if a_u.max(a_cs) >= budget.eps2 {
        return fail(SwitchHypothesis::AxisAlignment, a_u.max(a_cs), budget.eps2);
    }
    let in_lip = ambient_lip(g);
    if in_lip > budget.lip_cap {
        return fail(SwitchHypothesis::InputLipschitz, in_lip, budget.lip_cap);
    }

    let eval_g = g.interpolant();
    let curve = |u: f64| -> Vec2 {
        let p = g.frame.from_chart(Vec2::new(u, eval_g(u)));
        target.to_box(&p)
    };
    let a_lo = curve(-g.radius).x;
    let a_hi = curve(g.radius).x;
    let (lo, hi) = (a_lo.min(a_hi), a_lo.max(a_hi));
    if lo > -rho || hi < rho {
        // curve does not span the requested box width
        return Err(SwitchError::ReGraphFailure { node: 0 });
    }

    let n = DEFAULT_NODES;
    let mut values = vec![0.0f64; n];
    let mut guess = 0.0f64;
    let increasing = a_hi > a_lo;
    for j in 0..n {
        let jj = if increasing { j } else { n - 1 - j };
        let a_target = -rho + 2.0 * rho * jj as f64 / (n - 1) as f64;
        let mut a = -g.radius;
        let mut b = g.radius;
        // f(u) = curve(u).x − a_target is monotone under the cone budget
        let f = |u: f64| curve(u).x - a_target;
        let (fa, fb) = (f(a), f(b));
        if fa * fb > 0.0 {
            return Err(SwitchError::ReGraphFailure { node: jj });
        }
        let rising = fb > fa;
        let mut u = guess.clamp(a, b);
        let mut solved = false;
        for _ in 0..100 {
            let fu = f(u);
            if fu.abs() <= 1e-14 * a_target.abs().max(1.0) {
                solved = true;
                break;
            }
            if (fu > 0.0) == rising {
                b = u;
            } else {
                a = u;
            }
            let h = (g.radius * 1e-7).max(1e-12);
            let d = (f(u + h) - f(u - h)) / (2.0 * h);
            let newton = if d.abs() > 1e-14 { u - fu / d } else { f64::NAN };
            u = if newton.is_finite() && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a < 1e-16 {
                solved = true;
                break;
            }
        }
        if !solved {
            return Err(SwitchError::ReGraphFailure { node: jj });
        }
        guess = u;
        values[jj] = curve(u).y;
    }
    let lip = values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / (2.0 * rho / (n - 1) as f64))
        .fold(0.0f64, f64::max);
    Ok(BoxGraph { rho, values, lip })
}

/// Max distance from input samples (restricted to half the output width) to
/// the output graph; the containment direction of the switch lemma.
pub fn containment_residual(g: &UGraph, out: &BoxGraph, target: &AxisFrame) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..g.nodes() {
        let p = g.frame.from_chart(Vec2::new(g.u_at(i), g.values[i]));
        let w = target.to_box(&p);
        if w.x.abs() <= 0.5 * out.rho {
            worst = worst.max((out.eval(w.x) - w.y).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StackKind {
    /// Local unstable leaves.
    Unstable,
    /// Pushed-forward source graphs at a fixed depth.
    PushedForward { depth: usize },
}

/// One leaf graphed over the reference box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    pub base: TorusPoint,
    /// cs-intercept of the leaf: γ(0).
    pub transverse: f64,
    pub graph: BoxGraph,
    /// Chart-coordinate diagnostics of the pre-switch graph.
    pub lip_chart: f64,
    pub dlip_chart: f64,
    pub slope_origin_chart: f64,
}

/// A family of leaf graphs over a common reference box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafStack {
    pub reference: AxisFrame,
    pub r_star: f64,
    pub kind: StackKind,
    pub leaves: Vec<Leaf>,
    /// `(base point id, error)` for leaves that failed to build.
    pub rejections: Vec<(usize, String)>,
}

impl LeafStack {
    /// Average leaf profile relative to its intercept; the projection used to
    /// assign transverse coordinates to arbitrary points.
    pub fn mean_profile(&self) -> BoxGraph {
        let n = self.leaves[0].graph.nodes();
        let mut values = vec![0.0f64; n];
        for leaf in &self.leaves {
            for (i, v) in leaf.graph.values.iter().enumerate() {
                values[i] += v - leaf.transverse;
            }
        }
        for v in values.iter_mut() {
            *v /= self.leaves.len() as f64;
        }
        let rho = self.leaves[0].graph.rho;
        let lip = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / (2.0 * rho / (n - 1) as f64))
            .fold(0.0f64, f64::max);
        BoxGraph { rho, values, lip }
    }

    /// Box coordinates and leaf-projected transverse coordinate of a point,
    /// `None` outside the box.
    pub fn locate(&self, profile: &BoxGraph, p: &TorusPoint) -> Option<(Vec2, f64)> {
        let w = self.reference.to_box(p);
        if w.x.abs() > self.r_star || w.y.abs() > self.r_star {
            return None;
        }
        Some((w, w.y - profile.eval(w.x)))
    }

    /// Leaves must be pairwise disjoint or identical at tolerance `tol`.
    pub fn check_disjoint_or_identical(&self, tol: f64) -> bool {
        for i in 0..self.leaves.len() {
            for j in (i + 1)..self.leaves.len() {
                let a = &self.leaves[i].graph.values;
                let b = &self.leaves[j].graph.values;
                let mut min_gap = f64::INFINITY;
                let mut max_gap = 0.0f64;
                for (x, y) in a.iter().zip(b) {
                    let d = (x - y).abs();
                    min_gap = min_gap.min(d);
                    max_gap = max_gap.max(d);
                }
                let disjoint = min_gap > tol;
                let identical = max_gap < tol;
                if !(disjoint || identical) {
                    return false;
                }
            }
        }
        true
    }
}

/// Build a stack of local unstable leaves through `base_points` over the
/// reference box at `x_star`.
pub fn build_u_stack(
    family: &dyn MapFamily,
    path: &NoisePath,
    base_points: &[TorusPoint],
    x_star: TorusPoint,
    r_star: f64,
    n_past: usize,
    params: &ChartParams,
    l0: f64,
) -> Result<LeafStack, SrbError> {
    let ref_frame = crate::tangent::build_chart_frame(
        family,
        path,
        x_star,
        params,
        params.n_past,
        params.n_future,
    )?;
    let reference = AxisFrame::from_chart_frame(&ref_frame);
    let budget = SwitchBudget::stack(l0.max(ref_frame.l_value), r_star);
    let mut leaves = Vec::new();
    let mut rejections = Vec::new();
    for (id, &bp) in base_points.iter().enumerate() {
        match build_one_u_leaf(
            family, path, bp, &reference, r_star, n_past, params, &budget,
        ) {
            Ok(leaf) => leaves.push(Leaf { id, ..leaf }),
            Err(e) => rejections.push((id, e.to_string())),
        }
    }
    if leaves.is_empty() || leaves.len() * 2 < base_points.len() {
        return Err(SrbError::StackRejected {
            survived: leaves.len(),
            total: base_points.len(),
        });
    }
    Ok(LeafStack {
        reference,
        r_star,
        kind: StackKind::Unstable,
        leaves,
        rejections,
    })
}

fn build_one_u_leaf(
    family: &dyn MapFamily,
    path: &NoisePath,
    base: TorusPoint,
    reference: &AxisFrame,
    r_star: f64,
    n_past: usize,
    params: &ChartParams,
    budget: &SwitchBudget,
) -> Result<Leaf, SrbError> {
    // leaf must span the box even when based off-center
    let offset = reference.to_box(&base);
    let needed_ambient = (r_star + offset.x.abs()) * 1.8 + 2.0 * offset.y.abs();
    let g = grow_manifold(family, path, base, n_past, needed_ambient, params)?;
    let bg = switch_axes(&g, reference, r_star, budget).map_err(SrbError::SeparationFailure)?;
    Ok(Leaf {
        id: 0,
        base,
        transverse: bg.value_at_origin(),
        lip_chart: g.lip,
        dlip_chart: g.dlip,
        slope_origin_chart: g.slope_at_origin(),
        graph: bg,
    })
}

/// Local manifold with the chart-coordinate radius chosen so the leaf's
/// ambient u-extent reaches `needed_ambient`.
fn grow_manifold(
    family: &dyn MapFamily,
    path: &NoisePath,
    base: TorusPoint,
    n_past: usize,
    needed_ambient: f64,
    params: &ChartParams,
) -> Result<UGraph, SrbError> {
    // probe frame to convert ambient length to chart units
    let probe = crate::tangent::build_chart_frame(
        family,
        path,
        base,
        params,
        params.n_past,
        params.n_future,
    )?;
    let per_unit = probe.l_mat().column(0).norm();
    let radius_chart = needed_ambient / per_unit;
    local_unstable_manifold(family, path, base, n_past, radius_chart, params)
}

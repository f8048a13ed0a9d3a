//! The end-to-end SRB experiment driver and the entropy-formula check.

use crate::cocycle::forward_orbit;
use crate::error::{SrbError, TangentError};
use crate::graphs::UGraph;
use crate::noise::NoisePath;
use crate::srb::density::{
    build_nested_partition, conditional_density_check, DensityReport,
};
use crate::srb::source::{
    calibrate_l0, find_source_target, line_as_graph, sample_source_ball, ExperimentConfig,
    SourceTargetSelection,
};
use crate::systems::MapFamily;
use crate::tangent::{
    build_chart_frame, estimate_eu, l_proxy, lyapunov_qr, ChartParams,
};
use crate::torus::{TorusPoint, Vec2};
use crate::transport::{pullback_pushforward, ParticleEnsemble, Provenance, UlamDensity};
use crate::stacks::{build_u_stack, switch_axes, AxisFrame, Leaf, LeafStack, StackKind, SwitchBudget};
use crate::transform::{iterate_slanted_transform, slanted_pipeline_frames, TransformSchedule};
use serde::{Deserialize, Serialize};

/// Both sides of the entropy identity, estimated along one orbit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EntropyCheck {
    /// Sum of positive Lyapunov exponents (QR route).
    pub sum_positive_exponents: f64,
    /// `(1/n) Σ log|det(df|E^u)|` along the same orbit (tracked-direction route).
    pub mean_log_unstable_jacobian: f64,
    pub n_steps: usize,
}

/// QR exponents versus the mean one-step log expansion of the tracked
/// unstable direction; the SRB property makes these two estimators of the
/// same number.
pub fn entropy_consistency(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> Result<EntropyCheck, TangentError> {
    assert!(n >= 1000);
    let report = lyapunov_qr(family, path, p, n)?;
    let mut e_u = estimate_eu(family, path, p, 60);
    let orbit = forward_orbit(family, path, p, n);
    let mut sum = 0.0;
    for k in 0..n {
        let w = path.value(k as i64 + 1);
        let v = family.jacobian(&w, orbit[k]) * e_u;
        sum += v.norm().ln();
        e_u = v.normalize();
    }
    Ok(EntropyCheck {
        sum_positive_exponents: report.lambda1.max(0.0),
        mean_log_unstable_jacobian: sum / n as f64,
        n_steps: n,
    })
}

/// Pushed-forward stack of source u-graphs at depth `n`, collected over the
/// reference box.
///
/// Each source graph is transported by the iterated slanted transform along
/// its own orbit frames, required to satisfy the end-slope condition
/// `|(dh)₀| ≤ (20·l₀)⁻¹`, and re-graphed over the reference axes. Per-leaf
/// failures are collected; the stack is rejected if fewer than half the
/// leaves survive.
#[allow(clippy::too_many_arguments)]
pub fn build_wn_stack(
    family: &dyn MapFamily,
    path: &NoisePath,
    source_graphs: &[UGraph],
    k_minus: f64,
    n: usize,
    reference: &AxisFrame,
    r_star: f64,
    params: &ChartParams,
    l0: f64,
) -> Result<LeafStack, SrbError> {
    let budget = SwitchBudget::stack(l0.max(4.0), r_star);
    let mut leaves = Vec::new();
    let mut rejections = Vec::new();
    for (id, g) in source_graphs.iter().enumerate() {
        match push_one_leaf(
            family, path, g, k_minus, n, reference, r_star, params, l0, &budget,
        ) {
            Ok(mut leaf) => {
                leaf.id = id;
                leaves.push(leaf);
            }
            Err(e) => rejections.push((id, e.to_string())),
        }
    }
    if leaves.len() * 2 < source_graphs.len() || leaves.is_empty() {
        return Err(SrbError::StackRejected {
            survived: leaves.len(),
            total: source_graphs.len(),
        });
    }
    Ok(LeafStack {
        reference: reference.clone(),
        r_star,
        kind: StackKind::PushedForward { depth: n },
        leaves,
        rejections,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_one_leaf(
    family: &dyn MapFamily,
    path: &NoisePath,
    source: &UGraph,
    k_minus: f64,
    n: usize,
    reference: &AxisFrame,
    r_star: f64,
    params: &ChartParams,
    l0: f64,
    budget: &SwitchBudget,
) -> Result<Leaf, SrbError> {
    let frames = slanted_pipeline_frames(family, path, source.frame.base, n, params)?;
    let final_frame = &frames.frames[n];
    let per_unit = final_frame.l_mat().column(0).norm();
    let end = frames.points[n];
    let offset = reference.to_box(&end);
    let needed_ambient = (r_star + offset.x.abs()) * 1.8 + 2.0 * offset.y.abs();
    let extension = (needed_ambient / (final_frame.chart_radius * per_unit)).max(1.0);
    let schedule = TransformSchedule::derive(
        source.lip.max(0.05).min(k_minus),
        params.k0_bar,
        params.lambda(),
        1.0,
        extension,
    );
    // re-base the source graph into the pipeline's initial frame
    let r0 = source.radius.min(frames.frames[0].chart_radius);
    let g0 = UGraph::from_fn(frames.frames[0].clone(), r0, source.nodes(), |u| {
        source.eval(u)
    });
    let seq = iterate_slanted_transform(family, path, &frames, &schedule, &g0)?;
    let h = seq.last().expect("n ≥ 1");
    // slope decay and the switch condition before re-graphing
    let slope = h.slope_at_origin().abs();
    let decay_bound = k_minus * (-(n as f64) * params.lambda() / 2.0).exp();
    let switch_bound = 1.0 / (20.0 * l0);
    if slope > decay_bound.max(switch_bound) {
        return Err(SrbError::Transform(
            crate::error::TransformError::ConeViolation {
                step: n,
                measured: slope,
                bound: decay_bound.max(switch_bound),
            },
        ));
    }
    let bg = switch_axes(h, reference, r_star, budget).map_err(SrbError::SeparationFailure)?;
    Ok(Leaf {
        id: 0,
        base: end,
        transverse: bg.value_at_origin(),
        lip_chart: h.lip,
        dlip_chart: h.dlip,
        slope_origin_chart: h.slope_at_origin(),
        graph: bg,
    })
}

/// Everything measured at one retained depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthReport {
    pub depth: usize,
    pub density: DensityReport,
    /// Mean and max over matched leaves of `sup|γⁿ − γᵘ| / r*`.
    pub leaf_dist_mean: f64,
    pub leaf_dist_max: f64,
    pub n_leaves: usize,
    pub wn_rejections: usize,
    /// ν ≤ μ cellwise on a diagnostic grid, within Monte-Carlo bands.
    pub restriction_ok: bool,
    pub restriction_max_violation: f64,
    /// Measured ν-mass inside the partitioned stack vs the pipeline floor
    /// (α₀ / 6‖ψ‖_∞) · c*.
    pub mass_bound_measured: f64,
    pub mass_bound_floor: f64,
    /// Max slope at origin over surviving leaves, against K₋ e^{-nλ/2}.
    pub max_end_slope: f64,
    pub end_slope_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrbExperimentReport {
    pub system: String,
    pub seed: u64,
    pub l0: f64,
    pub k_minus: f64,
    pub psi_sup: f64,
    pub selection: SourceTargetSelection,
    pub reference_point: TorusPoint,
    pub depths: Vec<DepthReport>,
    pub entropy: EntropyCheck,
    /// Distortion of the fixed reference unstable leaf at each retained depth
    /// (truncation-stability surrogate for depth-independence).
    pub dbar_fixed_leaf: Vec<(usize, f64)>,
}

/// Run the full pipeline: stationary sample → source/target → per-depth
/// ν-transport, stacks, partition, conditional densities → entropy check.
pub fn run_srb_experiment(
    family: &dyn MapFamily,
    path: &NoisePath,
    stationary: &UlamDensity,
    config: &ExperimentConfig,
    params: &ChartParams,
) -> Result<SrbExperimentReport, SrbError> {
    config.validate().map_err(SrbError::Config)?;
    let l0 = if config.l0 > 0.0 {
        config.l0
    } else {
        calibrate_l0(family, path, params, config.qualify_depth, config.beta0)?
    };
    let k_minus = 2.0 * l0;
    let psi_sup = stationary.sup_density();
    let selection = find_source_target(family, path, stationary, config, params, l0)?;
    let p_hat = selection.source_target.p_hat;
    let p_minus = selection.source_target.p_minus;

    // reference point: a uniformity-qualified point near the target center
    let x_star = pick_reference_point(family, path, p_hat, config, params, l0)?;
    let ref_frame = build_chart_frame(family, path, x_star, params, params.n_past, params.n_future)?;
    let reference = AxisFrame::from_chart_frame(&ref_frame);

    // per-depth transport and stacks
    let mut staged: Vec<(usize, ParticleEnsemble, LeafStack, LeafStack, Vec<f64>, bool, f64)> =
        Vec::new();
    for &n in &selection.retained_depths {
        let nu_minus = sample_source_ball(
            config.seed ^ (n as u64).wrapping_mul(0x9e37),
            p_minus,
            2.0 * config.eps_star,
            config.particles,
            config.alpha0,
        );
        let nu_n = pullback_pushforward(family, path, &nu_minus, n);
        // restriction ordering ν ≤ μ before we drop the full ensemble
        let (restriction_ok, restriction_viol) =
            check_restriction(family, path, stationary, &nu_n, n, config);
        // in-box subset, keeping source points paired for leaf seeding
        let mut in_box: Vec<(TorusPoint, TorusPoint, f64)> = Vec::new();
        for i in 0..nu_n.len() {
            let w = reference.to_box(&nu_n.points[i]);
            if w.x.abs() <= config.r_star && w.y.abs() <= config.r_star {
                in_box.push((nu_minus.points[i], nu_n.points[i], nu_n.weights[i]));
            }
        }
        let nu_box = ParticleEnsemble::new(
            in_box.iter().map(|x| x.1).collect(),
            in_box.iter().map(|x| x.2).collect(),
            Provenance::PushedForward { n, seed: path.seed },
        );
        // leaf seeds: qualified in-box particles spread across the box
        let seeds = pick_leaf_seeds(family, path, &in_box, &reference, config, params, l0, n);
        if seeds.len() < 2 {
            return Err(SrbError::StackRejected {
                survived: seeds.len(),
                total: config.leaves,
            });
        }
        // source foliation direction from the seed closest to the box center
        let q_minus = seeds[0].0;
        let src_path = path.shift(-(n as i64));
        let frame_src =
            build_chart_frame(family, &src_path, q_minus, params, params.n_past, params.n_future)?;
        let dir = frame_src.e_u();
        let mut source_graphs = Vec::with_capacity(seeds.len());
        for &(y, _z) in &seeds {
            let frame_y =
                build_chart_frame(family, &src_path, y, params, params.n_past, params.n_future)?;
            let radius = frame_y.chart_radius;
            source_graphs.push(line_as_graph(&frame_y, y, dir, radius, k_minus)?);
        }
        let wn = build_wn_stack(
            family,
            path,
            &source_graphs,
            k_minus,
            n,
            &reference,
            config.r_star,
            params,
            l0,
        )?;
        // true unstable leaves through the surviving seeds' endpoints
        let bases: Vec<TorusPoint> = wn.leaves.iter().map(|l| l.base).collect();
        let wu = build_u_stack(
            family,
            path,
            &bases,
            x_star,
            config.r_star,
            (n + 10).max(40),
            params,
            l0,
        )?;
        let dists = matched_leaf_distances(&wn, &wu, config.r_star);
        staged.push((n, nu_box, wn, wu, dists, restriction_ok, restriction_viol));
    }

    // partition from the deepest retained depth, reused at every depth
    let (_, deepest_nu, _, deepest_wu, _, _, _) = staged.last().expect("≥1 depth");
    let partition = build_nested_partition(deepest_wu, deepest_nu, config.levels)?;

    let mass_floor = config.alpha0 / (6.0 * psi_sup) * selection.source_target.c_star;
    let mut depths = Vec::new();
    for (n, nu_box, wn, _wu, dists, restriction_ok, restriction_viol) in &staged {
        let density =
            conditional_density_check(family, path, wn, nu_box, &partition, *n);
        let end_slope_bound = k_minus * (-(*n as f64) * params.lambda() / 2.0).exp();
        let max_end_slope = wn
            .leaves
            .iter()
            .map(|l| l.slope_origin_chart.abs())
            .fold(0.0f64, f64::max);
        let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
        let max = dists.iter().cloned().fold(0.0f64, f64::max);
        depths.push(DepthReport {
            depth: *n,
            leaf_dist_mean: mean,
            leaf_dist_max: max,
            n_leaves: wn.leaves.len(),
            wn_rejections: wn.rejections.len(),
            restriction_ok: *restriction_ok,
            restriction_max_violation: *restriction_viol,
            mass_bound_measured: density.in_partition_mass,
            mass_bound_floor: mass_floor,
            max_end_slope,
            end_slope_bound,
            density,
        });
    }

    // distortion of one fixed leaf at each retained depth (truncation study)
    let fixed_leaf_stack = staged.last().map(|s| &s.3).expect("≥1 depth");
    let fixed_leaf = &fixed_leaf_stack.leaves[0];
    let dbar_fixed_leaf: Vec<(usize, f64)> = selection
        .retained_depths
        .iter()
        .map(|&n| {
            let d = crate::srb::density::predicted_leaf_density(
                family,
                path,
                fixed_leaf_stack,
                fixed_leaf,
                n,
            );
            (n, d.log_range)
        })
        .collect();

    let entropy = entropy_consistency(family, path, TorusPoint::new(0.137, 0.613), 100_000)?;

    Ok(SrbExperimentReport {
        system: family.name().to_string(),
        seed: path.seed,
        l0,
        k_minus,
        psi_sup,
        selection,
        reference_point: x_star,
        depths,
        entropy,
        dbar_fixed_leaf,
    })
}

fn pick_reference_point(
    family: &dyn MapFamily,
    path: &NoisePath,
    p_hat: TorusPoint,
    config: &ExperimentConfig,
    params: &ChartParams,
    l0: f64,
) -> Result<TorusPoint, SrbError> {
    let pick_seed = config.seed ^ 0xbe5e;
    for i in 0..400u64 {
        let r = config.eps_star * crate::noise::counter_uniform(pick_seed, i, 0).sqrt();
        let th = std::f64::consts::TAU * crate::noise::counter_uniform(pick_seed, i, 1);
        let cand = p_hat.offset(Vec2::new(r * th.cos(), r * th.sin()));
        if l_proxy(family, path, cand, params, config.qualify_depth)? <= l0 {
            return Ok(cand);
        }
    }
    Err(SrbError::StackRejected {
        survived: 0,
        total: 400,
    })
}

#[allow(clippy::too_many_arguments)]
fn pick_leaf_seeds(
    family: &dyn MapFamily,
    path: &NoisePath,
    in_box: &[(TorusPoint, TorusPoint, f64)],
    reference: &AxisFrame,
    config: &ExperimentConfig,
    params: &ChartParams,
    l0: f64,
    n: usize,
) -> Vec<(TorusPoint, TorusPoint)> {
    // spread candidates across the transverse coordinate, center first
    let mut candidates: Vec<(f64, TorusPoint, TorusPoint)> = in_box
        .iter()
        .map(|&(y, z, _)| (reference.to_box(&z).y, y, z))
        .collect();
    candidates.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    let center = candidates.first().cloned();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut picked: Vec<(TorusPoint, TorusPoint)> = Vec::new();
    let shifted = path.shift(-(n as i64));
    let try_add = |y: TorusPoint, z: TorusPoint, picked: &mut Vec<(TorusPoint, TorusPoint)>| {
        if picked.len() >= config.leaves {
            return;
        }
        let ok = l_proxy(family, &shifted, y, params, config.qualify_depth)
            .map(|l| l <= l0)
            .unwrap_or(false)
            && l_proxy(family, path, z, params, config.qualify_depth)
                .map(|l| l <= l0)
                .unwrap_or(false);
        if ok {
            picked.push((y, z));
        }
    };
    if let Some((_, y, z)) = center {
        try_add(y, z, &mut picked);
    }
    if !candidates.is_empty() {
        let stride = (candidates.len() / config.leaves.max(1)).max(1);
        for chunk_start in (0..candidates.len()).step_by(stride) {
            let (_, y, z) = candidates[chunk_start];
            try_add(y, z, &mut picked);
        }
    }
    picked
}

fn matched_leaf_distances(wn: &LeafStack, wu: &LeafStack, r_star: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for leaf in &wn.leaves {
        // match by base point
        let Some(mate) = wu
            .leaves
            .iter()
            .min_by(|a, b| {
                a.base
                    .dist(&leaf.base)
                    .partial_cmp(&b.base.dist(&leaf.base))
                    .unwrap()
            })
        else {
            continue;
        };
        if mate.base.dist(&leaf.base) > 1e-9 {
            continue;
        }
        let sup = leaf
            .graph
            .values
            .iter()
            .zip(&mate.graph.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        out.push(sup / r_star);
    }
    out
}

/// ν ≤ μ cellwise on a diagnostic grid within Monte-Carlo bands; returns
/// `(ok, max violation)`.
fn check_restriction(
    family: &dyn MapFamily,
    path: &NoisePath,
    stationary: &UlamDensity,
    nu_n: &ParticleEnsemble,
    n: usize,
    config: &ExperimentConfig,
) -> (bool, f64) {
    let grid = 16usize;
    let mu_sample = crate::transport::sample_from_density(
        stationary,
        200_000,
        config.seed ^ 0x3a0d ^ n as u64,
    );
    let mu_n = pullback_pushforward(family, path, &mu_sample, n);
    let mu_proj = mu_n.ulam_projection(grid);
    // ν masses on the same grid, not normalized
    let mut nu_cells = vec![0.0f64; grid * grid];
    for (p, w) in nu_n.points.iter().zip(&nu_n.weights) {
        let (i, j) = crate::transport::cell_of(*p, grid);
        nu_cells[i * grid + j] += w;
    }
    let sigma = (1.0 / (grid * grid) as f64 / 200_000.0f64).sqrt();
    let mut worst = 0.0f64;
    for (c, &nu_mass) in nu_cells.iter().enumerate() {
        let mu_mass = mu_proj.cells[c];
        let violation = nu_mass - (mu_mass + 5.0 * sigma);
        worst = worst.max(violation);
    }
    (worst <= 0.0, worst)
}

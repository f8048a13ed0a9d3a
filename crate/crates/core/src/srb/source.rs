//! Experiment configuration, uniformity qualification, source/target
//! selection, and disintegration of the stationary measure onto u-graphs.

use crate::cocycle::compose_pullback;
use crate::error::{SrbError, SwitchError, SwitchHypothesis, TangentError};
use crate::graphs::{UGraph, DEFAULT_NODES};
use crate::noise::{counter_uniform, NoisePath};
use crate::parallel;
use crate::systems::MapFamily;
use crate::tangent::{build_chart_frame, l_proxy, ChartFrame, ChartParams};
use crate::torus::{TorusPoint, Vec2};
use crate::transport::{ParticleEnsemble, Provenance, UlamDensity};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Knobs of the SRB experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Bad-set budget β₀.
    pub beta0: f64,
    /// Uniformity threshold; `0` requests auto-calibration.
    pub l0: f64,
    /// Source/target ball radius ε*.
    pub eps_star: f64,
    /// Reference box radius r* (ambient units). Must dominate ε*.
    pub r_star: f64,
    /// The constant 𝔠 > 1 of the good-noise mass bound.
    pub c_frak: f64,
    /// Increasing pullback depths n_i.
    pub depths: Vec<usize>,
    /// Density floor α₀ = β₀ / Leb(M); Leb(T²) = 1.
    pub alpha0: f64,
    /// Particles for the ν-measure transport per depth.
    pub particles: usize,
    /// Particles for the source/target search.
    pub search_particles: usize,
    /// Leaves per stack.
    pub leaves: usize,
    /// Transverse partition levels M.
    pub levels: usize,
    /// Estimation depth of the cheap uniformity proxy.
    pub qualify_depth: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(seed: u64) -> Self {
        let beta0 = 0.05;
        Self {
            beta0,
            l0: 0.0,
            eps_star: 0.04,
            r_star: 0.14,
            c_frak: 2.0,
            depths: vec![30, 40, 50],
            alpha0: beta0,
            particles: 4_000_000,
            search_particles: 400_000,
            leaves: 48,
            levels: 5,
            qualify_depth: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_frak > 1.0) {
            return Err(format!("c_frak = {} must exceed 1", self.c_frak));
        }
        if self.eps_star >= self.r_star {
            return Err(format!(
                "eps_star = {} must be smaller than r_star = {}",
                self.eps_star, self.r_star
            ));
        }
        if (self.alpha0 - self.beta0).abs() > 1e-12 {
            return Err("alpha0 must equal beta0 / Leb(M) = beta0 on the unit torus".into());
        }
        if self.depths.is_empty() || self.depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err("depths must be a nonempty increasing sequence".into());
        }
        if self.levels == 0 || self.leaves < 2 {
            return Err("need at least one partition level and two leaves".into());
        }
        Ok(())
    }
}

/// Chosen source/target pair with its measured mass floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceTarget {
    pub p_minus: TorusPoint,
    pub p_hat: TorusPoint,
    pub c_star: f64,
}

/// Full outcome of the source/target search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceTargetSelection {
    pub source_target: SourceTarget,
    pub retained_depths: Vec<usize>,
    /// Qualified mass flowing source ball → target ball per retained depth.
    pub per_depth_mass: Vec<f64>,
    /// Pigeonhole floor the masses were checked against.
    pub mass_floor: f64,
    /// Fraction of source-ball particles passing the uniformity proxy,
    /// per retained depth.
    pub qualified_fraction: Vec<f64>,
}

/// Quantile-based uniformity threshold: the (1-β₀/3) quantile of sampled
/// l-proxies with a small safety margin.
pub fn calibrate_l0(
    family: &dyn MapFamily,
    path: &NoisePath,
    params: &ChartParams,
    qualify_depth: usize,
    beta0: f64,
) -> Result<f64, TangentError> {
    let n = 200;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let p = TorusPoint::new(
            counter_uniform(0xca11b, i as u64, 0),
            counter_uniform(0xca11b, i as u64, 1),
        );
        values.push(l_proxy(family, path, p, params, qualify_depth)?);
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (((1.0 - beta0 / 3.0) * n as f64) as usize).min(n - 1);
    Ok(values[idx] * 1.05)
}

/// Mark particles (given at time `-n`) whose l-proxy is ≤ l₀ at both orbit
/// endpoints.
pub fn qualify_uniform(
    family: &dyn MapFamily,
    path: &NoisePath,
    ensemble_at_minus_n: &ParticleEnsemble,
    l0: f64,
    n: usize,
    params: &ChartParams,
    qualify_depth: usize,
) -> Vec<bool> {
    let shifted = path.shift(-(n as i64));
    ensemble_at_minus_n
        .points
        .par_iter()
        .map(|&y| {
            let start_ok = l_proxy(family, &shifted, y, params, qualify_depth)
                .map(|l| l <= l0)
                .unwrap_or(false);
            if !start_ok {
                return false;
            }
            let z = compose_pullback(family, path, y, n);
            l_proxy(family, path, z, params, qualify_depth)
                .map(|l| l <= l0)
                .unwrap_or(false)
        })
        .collect()
}

fn ball_indicator(center: TorusPoint, radius: f64) -> impl Fn(&TorusPoint) -> bool {
    move |p| center.dist(p) <= radius
}

/// Search for a source/target pair whose qualified source→target mass clears
/// the pigeonhole floor at every depth.
///
/// Stage 1 scores coarse cell pairs with a joint start/end histogram; stage 2
/// re-measures the best candidates with exact ε*-balls and the uniformity
/// qualification, keeping the first pair that passes all depths.
pub fn find_source_target(
    family: &dyn MapFamily,
    path: &NoisePath,
    stationary: &UlamDensity,
    config: &ExperimentConfig,
    params: &ChartParams,
    l0: f64,
) -> Result<SourceTargetSelection, SrbError> {
    let eps = config.eps_star;
    let grid = (1.0 / eps).ceil() as usize; // coarse cells ≈ ε*-sized
    let ncells = grid * grid;
    let ensemble = crate::transport::sample_from_density(
        stationary,
        config.search_particles,
        config.seed ^ 0x5ea7c4,
    );

    // coarse source candidates must sit inside {ψ ≥ α₀}
    let source_ok: Vec<bool> = (0..ncells)
        .map(|c| {
            let center = coarse_center(c, grid);
            stationary.density_at(center) >= config.alpha0
        })
        .collect();
    let j_src = source_ok.iter().filter(|&&b| b).count().max(1);
    let mass_floor =
        (1.0 - (config.c_frak + 1.0) * config.beta0).max(0.0) / (j_src as f64 * ncells as f64);

    // stage 1: joint histograms per depth (no qualification)
    let mut joint: Vec<Vec<f64>> = Vec::with_capacity(config.depths.len());
    let mut endpoints: Vec<Vec<TorusPoint>> = Vec::with_capacity(config.depths.len());
    for &n in &config.depths {
        let pushed: Vec<TorusPoint> = ensemble
            .points
            .par_iter()
            .map(|&y| compose_pullback(family, path, y, n))
            .collect();
        let hist = parallel::sum_vectors(ensemble.len(), ncells * ncells, |range, acc| {
            for i in range {
                let s = coarse_cell(ensemble.points[i], grid);
                let t = coarse_cell(pushed[i], grid);
                acc[s * ncells + t] += ensemble.weights[i];
            }
        });
        joint.push(hist);
        endpoints.push(pushed);
    }

    // rank pairs by min-over-depths mass
    let mut pair_scores: Vec<(f64, usize, usize)> = Vec::new();
    for s in 0..ncells {
        if !source_ok[s] {
            continue;
        }
        for t in 0..ncells {
            let min_mass = joint
                .iter()
                .map(|h| h[s * ncells + t])
                .fold(f64::INFINITY, f64::min);
            if min_mass > 0.0 {
                pair_scores.push((min_mass, s, t));
            }
        }
    }
    pair_scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pair_scores.truncate(12);

    // stage 2: exact balls + qualification on the shortlist
    let mut best_failed = 0.0f64;
    for &(_, s, t) in &pair_scores {
        let p_minus = coarse_center(s, grid);
        let p_hat = coarse_center(t, grid);
        let in_src = ball_indicator(p_minus, eps);
        let in_tgt = ball_indicator(p_hat, eps);
        let src_idx: Vec<usize> = (0..ensemble.len())
            .filter(|&i| in_src(&ensemble.points[i]))
            .collect();
        let mut masses = Vec::with_capacity(config.depths.len());
        let mut fractions = Vec::with_capacity(config.depths.len());
        let mut ok = true;
        for (d, &n) in config.depths.iter().enumerate() {
            let quals: Vec<bool> = src_idx
                .par_iter()
                .map(|&i| {
                    let y = ensemble.points[i];
                    let shifted = path.shift(-(n as i64));
                    let a = l_proxy(family, &shifted, y, params, config.qualify_depth)
                        .map(|l| l <= l0)
                        .unwrap_or(false);
                    if !a {
                        return false;
                    }
                    l_proxy(family, path, endpoints[d][i], params, config.qualify_depth)
                        .map(|l| l <= l0)
                        .unwrap_or(false)
                })
                .collect();
            let mut mass = 0.0;
            let mut qual_mass = 0.0;
            let mut src_mass = 0.0;
            for (k, &i) in src_idx.iter().enumerate() {
                src_mass += ensemble.weights[i];
                if quals[k] {
                    qual_mass += ensemble.weights[i];
                    if in_tgt(&endpoints[d][i]) {
                        mass += ensemble.weights[i];
                    }
                }
            }
            fractions.push(if src_mass > 0.0 { qual_mass / src_mass } else { 0.0 });
            masses.push(mass);
            if mass < mass_floor {
                ok = false;
                best_failed = best_failed.max(mass);
                break;
            }
        }
        if ok {
            let c_star = masses.iter().cloned().fold(f64::INFINITY, f64::min);
            verify_source_floor(stationary, p_minus, 2.0 * eps, config.alpha0)?;
            return Ok(SourceTargetSelection {
                source_target: SourceTarget {
                    p_minus,
                    p_hat,
                    c_star,
                },
                retained_depths: config.depths.clone(),
                per_depth_mass: masses,
                mass_floor,
                qualified_fraction: fractions,
            });
        }
    }
    Err(SrbError::NoAccumulation {
        floor: mass_floor,
        best: best_failed,
    })
}

fn coarse_cell(p: TorusPoint, grid: usize) -> usize {
    let i = ((p.x * grid as f64) as usize).min(grid - 1);
    let j = ((p.y * grid as f64) as usize).min(grid - 1);
    i * grid + j
}

fn coarse_center(cell: usize, grid: usize) -> TorusPoint {
    let (i, j) = (cell / grid, cell % grid);
    TorusPoint::new(
        (i as f64 + 0.5) / grid as f64,
        (j as f64 + 0.5) / grid as f64,
    )
}

/// Every stationary-grid cell meeting `B(center, radius)` must satisfy
/// ψ ≥ α₀/2.
fn verify_source_floor(
    stationary: &UlamDensity,
    center: TorusPoint,
    radius: f64,
    alpha0: f64,
) -> Result<(), SrbError> {
    let m = stationary.grid_size;
    let cell_diag = std::f64::consts::SQRT_2 / m as f64;
    for i in 0..m {
        for j in 0..m {
            let cc = TorusPoint::new((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
            if cc.dist(&center) <= radius + cell_diag / 2.0 {
                let psi = stationary.mass(i, j) * (m * m) as f64;
                if psi < alpha0 / 2.0 {
                    return Err(SrbError::SourceBelowFloor {
                        i,
                        j,
                        psi,
                        floor: alpha0 / 2.0,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Uniform sample of the source ball `B(center, radius)` carrying the measure
/// `(α₀/2)·Leb|_B`: each particle has weight `(α₀/2)·πr²/count`.
pub fn sample_source_ball(
    seed: u64,
    center: TorusPoint,
    radius: f64,
    count: usize,
    alpha0: f64,
) -> ParticleEnsemble {
    let total = 0.5 * alpha0 * std::f64::consts::PI * radius * radius;
    let w = total / count as f64;
    let points: Vec<TorusPoint> = (0..count)
        .into_par_iter()
        .map(|i| {
            let r = radius * counter_uniform(seed, i as u64, 4).sqrt();
            let th = std::f64::consts::TAU * counter_uniform(seed, i as u64, 5);
            center.offset(Vec2::new(r * th.cos(), r * th.sin()))
        })
        .collect();
    ParticleEnsemble::new(points, vec![w; count], Provenance::SourceBall { seed })
}

/// The parallel-line source foliation through offsets of the reference source
/// point, each line expressed as a u-graph in the chart at its own base point.
///
/// Conditional measures on the leaves are the constant-density restriction of
/// `(α₀/2)·Leb`, realized downstream by uniform ball sampling.
pub fn disintegrate_source(
    family: &dyn MapFamily,
    path: &NoisePath,
    frame_at_source: &ChartFrame,
    eps_star: f64,
    r_minus: f64,
    k_minus: f64,
    n_lines: usize,
    params: &ChartParams,
) -> Result<Vec<UGraph>, SrbError> {
    let dir_u = frame_at_source.e_u();
    let dir_cs = frame_at_source.e_cs();
    let mut graphs = Vec::with_capacity(n_lines);
    for j in 0..n_lines {
        let t = if n_lines == 1 {
            0.0
        } else {
            eps_star * (2.0 * j as f64 / (n_lines - 1) as f64 - 1.0)
        };
        let base = frame_at_source.base.offset(dir_cs * t);
        let frame = build_chart_frame(family, path, base, params, params.n_past, params.n_future)?;
        graphs.push(line_as_graph(&frame, base, dir_u, r_minus, k_minus)?);
    }
    Ok(graphs)
}

/// Straight line through `base` in ambient direction `dir`, graphed in
/// `frame`'s chart over radius `r_minus`.
pub fn line_as_graph(
    frame: &ChartFrame,
    base: TorusPoint,
    dir: Vec2,
    r_minus: f64,
    k_minus: f64,
) -> Result<UGraph, SrbError> {
    let w = frame.l_inv_mat() * dir;
    if w.x.abs() < 1e-12 {
        return Err(SrbError::SeparationFailure(SwitchError::HypothesisFailure {
            which: SwitchHypothesis::AxisAlignment,
            measured: f64::INFINITY,
            budget: k_minus,
        }));
    }
    let slope = w.y / w.x;
    if slope.abs() >= k_minus {
        return Err(SrbError::SeparationFailure(SwitchError::HypothesisFailure {
            which: SwitchHypothesis::InputLipschitz,
            measured: slope.abs(),
            budget: k_minus,
        }));
    }
    let offset = frame.to_chart(&base);
    let radius = r_minus.min(frame.chart_radius);
    Ok(UGraph::from_fn(frame.clone(), radius, DEFAULT_NODES, |u| {
        offset.y + slope * (u - offset.x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseLaw;
    use crate::systems::System;

    fn base_config(seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(seed);
        c.search_particles = 150_000;
        c.depths = vec![6, 10, 14];
        c.eps_star = 0.06;
        c.r_star = 0.14;
        c
    }

    #[test]
    fn config_validation_catches_misordering() {
        let mut c = ExperimentConfig::defaults(1);
        assert!(c.validate().is_ok());
        c.eps_star = c.r_star + 0.1;
        assert!(c.validate().is_err());
        let mut c2 = ExperimentConfig::defaults(1);
        c2.depths = vec![10, 10];
        assert!(c2.validate().is_err());
        let mut c3 = ExperimentConfig::defaults(1);
        c3.alpha0 = 0.9;
        assert!(c3.validate().is_err());
    }

    #[test]
    fn cat_map_everything_qualifies() {
        let sys = System::A;
        let path = NoisePath::new(70, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let l0 = calibrate_l0(&sys, &path, &params, 8, 0.05).unwrap();
        let d = UlamDensity::uniform(16);
        let e = crate::transport::sample_from_density(&d, 200, 3);
        let mask = qualify_uniform(&sys, &path, &e, l0, 12, &params, 8);
        assert!(mask.iter().all(|&b| b), "homogeneous system: l is constant");
    }

    #[test]
    fn tight_threshold_disqualifies_everything() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(71, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let d = UlamDensity::uniform(16);
        let e = crate::transport::sample_from_density(&d, 100, 4);
        let mask = qualify_uniform(&sys, &path, &e, 1.0, 8, &params, 8);
        assert!(mask.iter().all(|&b| !b), "l ≥ 1 always, so l₀ = 1 rejects");
    }

    #[test]
    fn uniformity_sets_stabilize_with_depth() {
        // Hausdorff excess of the depth-n qualified landing set over the
        // depth-(n+20) one shrinks as n grows.
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(72, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let l0 = calibrate_l0(&sys, &path, &params, 8, 0.3).unwrap();
        let d = UlamDensity::uniform(16);
        let e = crate::transport::sample_from_density(&d, 3000, 5);
        let landed = |n: usize| -> Vec<TorusPoint> {
            let mask = qualify_uniform(&sys, &path, &e, l0, n, &params, 8);
            e.points
                .iter()
                .zip(&mask)
                .filter(|(_, &q)| q)
                .map(|(&y, _)| compose_pullback(&sys, &path, y, n))
                .collect()
        };
        let excess = |a: &[TorusPoint], b: &[TorusPoint]| -> f64 {
            a.iter()
                .map(|p| {
                    b.iter()
                        .map(|q| p.dist(q))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0f64, f64::max)
        };
        let mut values = Vec::new();
        for n in [4usize, 12, 20] {
            let now = landed(n);
            let later = landed(n + 20);
            assert!(!now.is_empty() && !later.is_empty());
            values.push(excess(&now, &later));
        }
        assert!(
            values[2] <= values[0] + 1e-9,
            "excess should shrink: {values:?}"
        );
    }

    #[test]
    fn cat_map_source_target_any_pair_works() {
        let sys = System::A;
        let path = NoisePath::new(73, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let config = base_config(73);
        let stationary = UlamDensity::uniform(32);
        let l0 = calibrate_l0(&sys, &path, &params, config.qualify_depth, config.beta0).unwrap();
        let sel = find_source_target(&sys, &path, &stationary, &config, &params, l0).unwrap();
        assert_eq!(sel.retained_depths, config.depths);
        // uniform kernel: landed mass ≈ source mass × ball area, n-independent
        let src_mass = std::f64::consts::PI * config.eps_star * config.eps_star;
        let expect = src_mass * src_mass;
        for &m in &sel.per_depth_mass {
            assert!(
                (m - expect).abs() < 0.5 * expect,
                "landed mass {m} far from uniform prediction {expect}"
            );
        }
        assert!(sel.source_target.c_star > sel.mass_floor);
    }

    #[test]
    fn degenerate_cover_catches_everything() {
        // ε* = 0.45: a couple of balls cover the torus, so c* ≈ the whole
        // qualified source mass lands somewhere in the target ball
        let sys = System::A;
        let path = NoisePath::new(74, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let mut config = base_config(74);
        config.eps_star = 0.45;
        config.r_star = 0.5;
        config.search_particles = 60_000;
        let stationary = UlamDensity::uniform(32);
        let l0 = calibrate_l0(&sys, &path, &params, config.qualify_depth, config.beta0).unwrap();
        let sel = find_source_target(&sys, &path, &stationary, &config, &params, l0).unwrap();
        // the ε-ball covers > half the torus; most qualified source mass lands in it
        let src_ball_mass = 1.0f64.min(std::f64::consts::PI * 0.45 * 0.45);
        assert!(sel.source_target.c_star > 0.3 * src_ball_mass);
    }

    #[test]
    fn dissipative_pair_survives_all_depths() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(75, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let config = base_config(75);
        let stationary =
            crate::transport::estimate_stationary(&sys, NoiseLaw::UniformFull, 2, 32, 2000, 1e-9)
                .unwrap();
        let l0 = calibrate_l0(&sys, &path, &params, config.qualify_depth, config.beta0).unwrap();
        let sel = find_source_target(&sys, &path, &stationary, &config, &params, l0).unwrap();
        assert!(sel.source_target.c_star > 0.0);
        assert_eq!(sel.per_depth_mass.len(), config.depths.len());
        for f in &sel.qualified_fraction {
            assert!(*f > 0.5, "most source mass should qualify, got {f}");
        }
    }

    #[test]
    fn source_ball_sampler_carries_the_right_mass() {
        let e = sample_source_ball(9, TorusPoint::new(0.3, 0.4), 0.08, 10_000, 0.05);
        let want = 0.5 * 0.05 * std::f64::consts::PI * 0.08 * 0.08;
        assert!((e.total_weight() - want).abs() < 1e-12);
        for p in &e.points {
            assert!(p.dist(&TorusPoint::new(0.3, 0.4)) <= 0.08 + 1e-12);
        }
    }

    #[test]
    fn cat_source_foliation_is_the_eigenline_with_zero_slope() {
        let sys = System::A;
        let path = NoisePath::new(76, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let frame = build_chart_frame(
            &sys,
            &path,
            TorusPoint::new(0.37, 0.58),
            &params,
            params.n_past,
            params.n_future,
        )
        .unwrap();
        let graphs =
            disintegrate_source(&sys, &path, &frame, 0.05, 0.03, 2.0, 5, &params).unwrap();
        assert_eq!(graphs.len(), 5);
        for g in &graphs {
            // in the eigenframe the foliation lines have exactly slope 0
            assert!(g.lip < 1e-10, "slope {}", g.lip);
            assert!(g.dlip < 1e-10);
        }
    }

    #[test]
    fn single_line_passes_through_the_reference_point() {
        let sys = System::A;
        let path = NoisePath::new(77, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let base = TorusPoint::new(0.81, 0.29);
        let frame =
            build_chart_frame(&sys, &path, base, &params, params.n_past, params.n_future).unwrap();
        let graphs = disintegrate_source(&sys, &path, &frame, 0.05, 0.02, 2.0, 1, &params).unwrap();
        assert_eq!(graphs.len(), 1);
        assert!(graphs[0].value_at_origin().abs() < 1e-12);
    }

    #[test]
    fn slanted_lines_respect_the_k_minus_budget() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(78, NoiseLaw::UniformFull);
        let params = ChartParams::calibrate(&sys, &path).unwrap();
        let frame = build_chart_frame(
            &sys,
            &path,
            TorusPoint::new(0.22, 0.66),
            &params,
            params.n_past,
            params.n_future,
        )
        .unwrap();
        let k_minus = 2.0 * frame.l_value;
        let graphs =
            disintegrate_source(&sys, &path, &frame, 0.01, 0.005, k_minus, 7, &params).unwrap();
        for g in &graphs {
            assert!(g.lip < k_minus);
        }
    }
}

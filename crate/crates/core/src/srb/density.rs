//! Nested transverse partitions, conditional-density estimation against
//! u-cubes, and the Jacobian-product prediction of leaf densities.

use crate::cocycle::pullback_preimage;
use crate::error::SrbError;
use crate::noise::NoisePath;
use crate::stacks::{Leaf, LeafStack};
use crate::systems::MapFamily;

use crate::transport::ParticleEnsemble;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One transverse cell: a compact retained interval with an open enlargement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionCell {
    pub level: usize,
    pub id: usize,
    pub parent: Option<usize>,
    /// Compact retained interval.
    pub lo: f64,
    pub hi: f64,
    /// Open enlargement containing the compact cell.
    pub open_lo: f64,
    pub open_hi: f64,
}

/// Dyadic transverse intervals on the cs-axis of the reference box, refined
/// with per-level retained-mass targets whose product stays ≥ 1/2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedPartition {
    pub r_star: f64,
    pub levels: Vec<Vec<PartitionCell>>,
    /// Retained mass fraction achieved at each level.
    pub retained_fractions: Vec<f64>,
    /// Per-level target c_m = 2^(-1/M).
    pub target_c: f64,
}

impl NestedPartition {
    /// Total retained fraction across all levels.
    pub fn total_retained(&self) -> f64 {
        self.retained_fractions.iter().product()
    }

    /// Cells must nest: every level-(m+1) compact cell inside one level-m cell.
    pub fn check_nested(&self) -> bool {
        for m in 1..self.levels.len() {
            for cell in &self.levels[m] {
                let Some(pid) = cell.parent else {
                    return false;
                };
                let p = &self.levels[m - 1][pid];
                if cell.lo < p.lo - 1e-15 || cell.hi > p.hi + 1e-15 {
                    return false;
                }
                if cell.open_lo < p.open_lo - 1e-15 || cell.open_hi > p.open_hi + 1e-15 {
                    return false;
                }
            }
        }
        true
    }
}

/// Build the nested transverse partition from the stack's leaf projection of
/// `ensemble`.
///
/// Cut points are dyadic with a deterministic 1e-9 jitter; each level keeps a
/// compact fraction `c = 2^(-1/M)` of its parent's mass by shrinking cell
/// boundaries, and wraps each compact cell in an open enlargement of half the
/// shrink margin.
pub fn build_nested_partition(
    stack: &LeafStack,
    ensemble: &ParticleEnsemble,
    levels: usize,
) -> Result<NestedPartition, SrbError> {
    assert!(levels >= 1);
    let r = stack.r_star;
    let profile = stack.mean_profile();
    let mut ts: Vec<(f64, f64)> = ensemble
        .points
        .iter()
        .zip(&ensemble.weights)
        .filter_map(|(p, &w)| stack.locate(&profile, p).map(|(_, t)| (t, w)))
        .collect();
    ts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let coords: Vec<f64> = ts.iter().map(|x| x.0).collect();
    let prefix: Vec<f64> = {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(ts.len() + 1);
        out.push(0.0);
        for &(_, w) in &ts {
            acc += w;
            out.push(acc);
        }
        out
    };
    let mass_in = |lo: f64, hi: f64| -> f64 {
        let a = coords.partition_point(|&t| t < lo);
        let b = coords.partition_point(|&t| t <= hi);
        prefix[b] - prefix[a]
    };

    let target_c = 0.5f64.powf(1.0 / levels as f64);
    let jitter = 1e-9;
    let root = PartitionCell {
        level: 0,
        id: 0,
        parent: None,
        lo: -r,
        hi: r,
        open_lo: -r - jitter,
        open_hi: r + jitter,
    };
    let mut out: Vec<Vec<PartitionCell>> = vec![vec![root]];
    let mut retained = Vec::new();

    for m in 1..=levels {
        let cell_width = 2.0 * r / (1 << m) as f64;
        let mut level_cells: Vec<PartitionCell> = Vec::new();
        let mut kept_mass = 0.0;
        let mut parent_mass_total = 0.0;
        for (pid, parent) in out[m - 1].iter().enumerate() {
            let pmass = mass_in(parent.lo, parent.hi);
            parent_mass_total += pmass;
            if pmass <= 0.0 {
                continue;
            }
            // dyadic children of the parent's span, cut points jittered
            let first = ((parent.lo + r) / cell_width).floor() as usize;
            let last = ((parent.hi + r) / cell_width).ceil() as usize;
            let mut children: Vec<(f64, f64)> = Vec::new();
            for k in first..last {
                let lo = (-r + k as f64 * cell_width + jitter * ((k % 3) as f64 - 1.0))
                    .max(parent.lo);
                let hi = (-r + (k + 1) as f64 * cell_width + jitter * ((k % 5) as f64 - 2.0))
                    .min(parent.hi);
                if hi > lo {
                    children.push((lo, hi));
                }
            }
            // choose the largest margin from a dyadic ladder that still
            // retains c·parent mass
            let mut chosen: Option<(f64, Vec<(f64, f64)>)> = None;
            for div in [8.0f64, 16.0, 32.0, 64.0, 128.0] {
                let margin = cell_width / div;
                let shrunk: Vec<(f64, f64)> = children
                    .iter()
                    .map(|&(lo, hi)| (lo + margin, hi - margin))
                    .filter(|&(lo, hi)| hi > lo)
                    .collect();
                let kept: f64 = shrunk.iter().map(|&(lo, hi)| mass_in(lo, hi)).sum();
                if kept >= target_c * pmass {
                    chosen = Some((margin, shrunk));
                    break;
                }
            }
            let Some((margin, shrunk)) = chosen else {
                let kept: f64 = children
                    .iter()
                    .map(|&(lo, hi)| mass_in(lo + cell_width / 128.0, hi - cell_width / 128.0))
                    .sum();
                return Err(SrbError::MassStarvation {
                    level: m,
                    retained: kept / pmass,
                    target: target_c,
                });
            };
            for (lo, hi) in shrunk {
                kept_mass += mass_in(lo, hi);
                level_cells.push(PartitionCell {
                    level: m,
                    id: level_cells.len(),
                    parent: Some(pid),
                    lo,
                    hi,
                    open_lo: lo - margin / 2.0,
                    open_hi: hi + margin / 2.0,
                });
            }
        }
        if parent_mass_total > 0.0 {
            retained.push(kept_mass / parent_mass_total);
        } else {
            retained.push(0.0);
        }
        out.push(level_cells);
    }
    out.remove(0); // drop the synthetic root
    Ok(NestedPartition {
        r_star: r,
        levels: out,
        retained_fractions: retained,
        target_c,
    })
}

/// Predicted density along one leaf: the normalized truncated product of
/// unstable Jacobian ratios along the backward orbit of each leaf sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafDensity {
    /// u-coordinates of the samples (box units).
    pub us: Vec<f64>,
    /// Density w.r.t. u, normalized to integrate to 1 over the leaf.
    pub density: Vec<f64>,
    /// max − min of log density over the leaf.
    pub log_range: f64,
    /// Measured Lipschitz constant of the log density in ambient distance.
    pub log_lipschitz: f64,
}

impl LeafDensity {
    /// CDF over u, for Kolmogorov-Smirnov comparisons.
    pub fn cdf(&self) -> Vec<f64> {
        let du = self.us[1] - self.us[0];
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.us.len());
        for &d in &self.density {
            acc += d * du;
            out.push(acc);
        }
        let total = *out.last().unwrap();
        for v in out.iter_mut() {
            *v /= total;
        }
        out
    }
}

/// Density profile of the pushed-forward leaf measure predicted from the
/// backward expansion history: `ρ(p)/ρ(q) = Π_k α_k(q)/α_k(p)` where `α_k`
/// is the one-step growth of the leaf tangent at the k-th preimage.
pub fn predicted_leaf_density(
    family: &dyn MapFamily,
    path: &NoisePath,
    stack: &LeafStack,
    leaf: &Leaf,
    n_trunc: usize,
) -> LeafDensity {
    let n = leaf.graph.nodes();
    let e_u = stack.reference.e_u_vec();
    let e_cs = stack.reference.e_cs_vec();
    let rho = leaf.graph.rho;
    let h = 2.0 * rho / (n - 1) as f64;
    let _ = (e_u, e_cs);
    let log_factors: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = leaf.graph.a_at(i);
            let p = stack.reference.from_box(crate::torus::Vec2::new(a, leaf.graph.values[i]));
            let mut pts = Vec::with_capacity(n_trunc + 1);
            pts.push(p);
            for k in 1..=n_trunc {
                pts.push(pullback_preimage(family, path, p, k));
            }
            // The leaf tangent is seeded at the deep preimage as the local
            // unstable direction and pushed forward: forward transport
            // purifies, whereas pulling the time-0 tangent back would blow up
            // its transverse float noise like e^{2λk}.
            let deep_path = path.shift(-(n_trunc as i64));
            let mut v = crate::tangent::estimate_eu(family, &deep_path, pts[n_trunc], 25);
            let mut log_sum = 0.0;
            for k in (0..n_trunc).rev() {
                let w = path.value(-(k as i64));
                let jv = family.jacobian(&w, pts[k + 1]) * v;
                log_sum += jv.norm().ln();
                v = jv.normalize();
            }
            log_sum
        })
        .collect();

    // ρ ∝ exp(−log_factors), normalized to integrate to 1
    let max_l = log_factors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_l = log_factors.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut density: Vec<f64> = log_factors.iter().map(|&l| (max_l - l).exp()).collect();
    let total: f64 = density.iter().sum::<f64>() * h;
    for d in density.iter_mut() {
        *d /= total;
    }
    // Lipschitz constant of log ρ in ambient leaf distance
    let mut log_lip = 0.0f64;
    for i in 0..n - 1 {
        let da = h * (1.0
            + ((leaf.graph.values[i + 1] - leaf.graph.values[i]) / h).powi(2))
        .sqrt();
        log_lip = log_lip.max((log_factors[i + 1] - log_factors[i]).abs() / da);
    }
    LeafDensity {
        us: (0..n).map(|i| leaf.graph.a_at(i)).collect(),
        density,
        log_range: max_l - min_l,
        log_lipschitz: log_lip,
    }
}

/// Ratio statistics for one (cell, cube) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellDensityRow {
    pub level: usize,
    pub cell: usize,
    pub cube_lo: f64,
    pub cube_hi: f64,
    pub leb_hat: f64,
    pub ratio: f64,
    pub count: usize,
}

/// Per-band empirical u-histogram (bands are the finest partition cells).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandHistogram {
    pub cell: usize,
    pub bins: Vec<f64>,
    pub count: usize,
    pub matched_leaf: usize,
    pub t_center: f64,
}

/// Outcome of the conditional-density check at one depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub depth: usize,
    /// Smallest A with 1/A ≤ ratio/Leb̂ ≤ A over all supported cells × cubes.
    pub a_constant: f64,
    /// A computed per level (levels with any supported cell).
    pub a_by_level: Vec<(usize, f64)>,
    pub rows: Vec<CellDensityRow>,
    pub band_histograms: Vec<BandHistogram>,
    /// Predicted distortion constant: max over leaves of the log-density range.
    pub dbar_predicted: f64,
    /// Measured Lipschitz bound of the predicted log density (D in D·d(p₁,p₂)).
    pub d_lipschitz: f64,
    pub ks_per_band: Vec<f64>,
    /// Cells skipped for insufficient mass, per spec reported but not fatal.
    pub insufficient_cells: usize,
    /// Mass of ν inside the box and inside the partition cells.
    pub in_box_mass: f64,
    pub in_partition_mass: f64,
}

/// Histogram bins per band.
const BAND_BINS: usize = 32;
/// Minimum expected particle count for a (cell, cube) ratio to enter A.
const MIN_CELL_COUNT: usize = 1000;

/// Compare conditional masses of `nu` on partition cells against u-cube
/// Lebesgue fractions, and per-band histograms against the Jacobian-product
/// prediction.
pub fn conditional_density_check(
    family: &dyn MapFamily,
    path: &NoisePath,
    stack: &LeafStack,
    nu: &ParticleEnsemble,
    partition: &NestedPartition,
    depth: usize,
) -> DensityReport {
    let r = stack.r_star;
    let profile = stack.mean_profile();
    // locate particles in the box
    let located: Vec<(f64, f64, f64)> = nu
        .points
        .par_iter()
        .zip(&nu.weights)
        .filter_map(|(p, &w)| {
            stack
                .locate(&profile, p)
                .map(|(boxc, t)| (boxc.x, t, w))
        })
        .collect();
    let in_box_mass: f64 = located.iter().map(|x| x.2).sum();

    // dyadic u-cubes: full range plus levels 1..=3
    let mut cubes: Vec<(f64, f64)> = vec![(-r, r)];
    for lvl in 1..=3usize {
        let k = 1 << lvl;
        for i in 0..k {
            let lo = -r + 2.0 * r * i as f64 / k as f64;
            let hi = -r + 2.0 * r * (i + 1) as f64 / k as f64;
            cubes.push((lo, hi));
        }
    }

    let mut rows = Vec::new();
    let mut a_constant = 1.0f64;
    let mut a_by_level: Vec<(usize, f64)> = Vec::new();
    let mut insufficient = 0usize;
    let mut in_partition_mass = 0.0;
    for (lvl_idx, level) in partition.levels.iter().enumerate() {
        let mut a_level = 1.0f64;
        let mut level_has_rows = false;
        for cell in level {
            let members: Vec<&(f64, f64, f64)> = located
                .iter()
                .filter(|(_, t, _)| *t > cell.open_lo && *t < cell.open_hi)
                .collect();
            let cell_mass: f64 = members.iter().map(|x| x.2).sum();
            let cell_count = members.len();
            if lvl_idx == partition.levels.len() - 1 {
                in_partition_mass += cell_mass;
            }
            if cell_count < MIN_CELL_COUNT {
                insufficient += 1;
                continue;
            }
            for &(clo, chi) in &cubes {
                let leb_hat = (chi - clo) / (2.0 * r);
                if (cell_count as f64) * leb_hat < MIN_CELL_COUNT as f64 {
                    continue;
                }
                let cube_mass: f64 = members
                    .iter()
                    .filter(|(u, _, _)| *u >= clo && *u < chi)
                    .map(|x| x.2)
                    .sum();
                let ratio = cube_mass / cell_mass;
                let a = (ratio / leb_hat).max(leb_hat / ratio.max(f64::MIN_POSITIVE));
                a_constant = a_constant.max(a);
                a_level = a_level.max(a);
                level_has_rows = true;
                rows.push(CellDensityRow {
                    level: lvl_idx + 1,
                    cell: cell.id,
                    cube_lo: clo,
                    cube_hi: chi,
                    leb_hat,
                    ratio,
                    count: cell_count,
                });
            }
        }
        if level_has_rows {
            a_by_level.push((lvl_idx + 1, a_level));
        }
    }

    // per-band histograms on the finest level, matched to the nearest leaf
    let bands = partition.levels.last().expect("≥1 level");
    let mut band_histograms = Vec::new();
    let mut ks_per_band = Vec::new();
    let mut dbar = 0.0f64;
    let mut d_lip = 0.0f64;
    for cell in bands {
        let center = 0.5 * (cell.lo + cell.hi);
        let members: Vec<&(f64, f64, f64)> = located
            .iter()
            .filter(|(_, t, _)| *t > cell.open_lo && *t < cell.open_hi)
            .collect();
        if members.len() < MIN_CELL_COUNT {
            continue;
        }
        let matched = stack
            .leaves
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.transverse - center)
                    .abs()
                    .partial_cmp(&(b.transverse - center).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .expect("stack has leaves");
        let mut bins = vec![0.0f64; BAND_BINS];
        let mut total = 0.0;
        for (u, _, w) in &members {
            let b = (((u + r) / (2.0 * r) * BAND_BINS as f64) as usize).min(BAND_BINS - 1);
            bins[b] += w;
            total += w;
        }
        for b in bins.iter_mut() {
            *b /= total;
        }
        let predicted =
            predicted_leaf_density(family, path, stack, &stack.leaves[matched], depth);
        dbar = dbar.max(predicted.log_range);
        d_lip = d_lip.max(predicted.log_lipschitz);
        // KS distance between the empirical and predicted CDFs
        let pred_cdf = predicted.cdf();
        let mut emp_acc = 0.0;
        let mut ks = 0.0f64;
        for (b, &mass) in bins.iter().enumerate() {
            emp_acc += mass;
            let u_right = -r + 2.0 * r * (b + 1) as f64 / BAND_BINS as f64;
            let idx = ((u_right - predicted.us[0]) / (predicted.us[1] - predicted.us[0]))
                .round()
                .clamp(0.0, (pred_cdf.len() - 1) as f64) as usize;
            ks = ks.max((emp_acc - pred_cdf[idx]).abs());
        }
        ks_per_band.push(ks);
        band_histograms.push(BandHistogram {
            cell: cell.id,
            bins,
            count: members.len(),
            matched_leaf: matched,
            t_center: center,
        });
    }

    DensityReport {
        depth,
        a_constant,
        a_by_level,
        rows,
        band_histograms,
        dbar_predicted: dbar,
        d_lipschitz: d_lip,
        ks_per_band,
        insufficient_cells: insufficient,
        in_box_mass,
        in_partition_mass,
    }
}

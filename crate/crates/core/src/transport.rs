//! Measure representation and transport: stationary densities, particle
//! ensembles, pullback push-forwards and weak-convergence diagnostics.

use crate::cocycle::compose_pullback;
use crate::error::TransportError;
use crate::noise::{counter_uniform, NoiseLaw, NoisePath};
use crate::parallel;
use crate::systems::MapFamily;
use crate::torus::TorusPoint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Where an ensemble came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    SampledFromDensity { seed: u64, grid_size: usize },
    PushedForward { n: usize, seed: u64 },
    SourceBall { seed: u64 },
}

/// A weighted point cloud representing a measure on T².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub points: Vec<TorusPoint>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl ParticleEnsemble {
    pub fn new(points: Vec<TorusPoint>, weights: Vec<f64>, provenance: Provenance) -> Self {
        debug_assert_eq!(points.len(), weights.len());
        debug_assert!(weights.iter().all(|&w| w > 0.0));
        Self {
            points,
            weights,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        // compensated summation keeps the mass-conservation invariant exact
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for &w in &self.weights {
            let y = w - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Histogram of the ensemble on an m×m grid (masses, summing to total weight).
    pub fn ulam_projection(&self, grid_size: usize) -> UlamDensity {
        let m = grid_size;
        let cells = parallel::sum_vectors(self.len(), m * m, |range, acc| {
            for i in range {
                let p = self.points[i];
                let (ci, cj) = cell_of(p, m);
                acc[ci * m + cj] += self.weights[i];
            }
        });
        UlamDensity::from_masses(m, cells)
    }
}

#[inline]
pub fn cell_of(p: TorusPoint, m: usize) -> (usize, usize) {
    let i = ((p.x * m as f64) as usize).min(m - 1);
    let j = ((p.y * m as f64) as usize).min(m - 1);
    (i, j)
}

/// Piecewise-constant density on an m×m grid, total mass 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UlamDensity {
    pub grid_size: usize,
    /// Row-major cell masses.
    pub cells: Vec<f64>,
}

impl UlamDensity {
    pub fn from_masses(grid_size: usize, mut cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), grid_size * grid_size);
        let total: f64 = cells.iter().sum();
        assert!(total > 0.0, "empty histogram");
        for c in cells.iter_mut() {
            *c /= total;
        }
        Self { grid_size, cells }
    }

    pub fn uniform(grid_size: usize) -> Self {
        let n = grid_size * grid_size;
        Self {
            grid_size,
            cells: vec![1.0 / n as f64; n],
        }
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.grid_size + j]
    }

    /// Density value (mass / cell area) at a point.
    pub fn density_at(&self, p: TorusPoint) -> f64 {
        let m = self.grid_size;
        let (i, j) = cell_of(p, m);
        self.mass(i, j) * (m * m) as f64
    }

    pub fn sup_density(&self) -> f64 {
        let m2 = (self.grid_size * self.grid_size) as f64;
        self.cells.iter().cloned().fold(0.0f64, f64::max) * m2
    }

    pub fn l1_distance(&self, other: &UlamDensity) -> f64 {
        assert_eq!(self.grid_size, other.grid_size);
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Max relative deviation of cell masses from the uniform density.
    pub fn max_relative_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / (self.grid_size * self.grid_size) as f64;
        self.cells
            .iter()
            .map(|c| (c / u - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Ulam discretization of the noise kernel in sparse row form.
#[derive(Debug, Clone)]
pub struct TransferOperatorEstimate {
    pub grid_size: usize,
    pub noise_samples: usize,
    /// `rows[i]` lists `(destination cell, probability)` with probabilities
    /// summing to 1.
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl TransferOperatorEstimate {
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, p)| p).sum())
            .collect()
    }
}

fn kernel_destination(
    family: &dyn MapFamily,
    law: NoiseLaw,
    seed: u64,
    m: usize,
    cell: usize,
    sample: usize,
    noise_samples: usize,
) -> usize {
    let ctr = (cell * noise_samples + sample) as u64;
    let (i, j) = (cell / m, cell % m);
    let x = (i as f64 + counter_uniform(seed, ctr, 10)) / m as f64;
    let y = (j as f64 + counter_uniform(seed, ctr, 11)) / m as f64;
    let noise_path = NoisePath::new(seed ^ 0x74726e73_6b65726e, law);
    let w = noise_path.value(ctr as i64);
    let q = family.eval(&w, TorusPoint::new(x, y));
    let (di, dj) = cell_of(q, m);
    di * m + dj
}

/// Assemble the sparse Ulam operator explicitly. Memory grows like
/// `grid² × min(noise_samples, support)`; intended for diagnostic grids.
pub fn build_transfer_operator(
    family: &dyn MapFamily,
    law: NoiseLaw,
    seed: u64,
    grid_size: usize,
    noise_samples: usize,
) -> TransferOperatorEstimate {
    let m = grid_size;
    let rows: Vec<Vec<(u32, f64)>> = (0..m * m)
        .into_par_iter()
        .map(|cell| {
            let mut counts = std::collections::BTreeMap::new();
            for s in 0..noise_samples {
                let dest = kernel_destination(family, law, seed, m, cell, s, noise_samples);
                *counts.entry(dest as u32).or_insert(0usize) += 1;
            }
            counts
                .into_iter()
                .map(|(d, c)| (d, c as f64 / noise_samples as f64))
                .collect()
        })
        .collect();
    TransferOperatorEstimate {
        grid_size,
        noise_samples,
        rows,
    }
}

/// Leading left fixed vector of the discretized transfer operator by power
/// iteration, re-sampling the kernel matrix-free from the same counters each
/// sweep (so the iteration is deterministic without storing the operator).
pub fn estimate_stationary(
    family: &dyn MapFamily,
    law: NoiseLaw,
    seed: u64,
    grid_size: usize,
    noise_samples: usize,
    tol: f64,
) -> Result<UlamDensity, TransportError> {
    assert!(grid_size >= 16, "grid_size must be ≥ 16");
    assert!(noise_samples >= 1000, "noise_samples must be ≥ 10³");
    let m = grid_size;
    let ncells = m * m;
    // Cache destination cells when they fit (the sweep then reduces to a
    // weighted scatter); otherwise recompute from the counters each sweep.
    let cached: Option<Vec<u32>> = if ncells * noise_samples <= 40_000_000 {
        Some(
            (0..ncells * noise_samples)
                .into_par_iter()
                .map(|idx| {
                    kernel_destination(
                        family,
                        law,
                        seed,
                        m,
                        idx / noise_samples,
                        idx % noise_samples,
                        noise_samples,
                    ) as u32
                })
                .collect(),
        )
    } else {
        None
    };
    let mut v = vec![1.0 / ncells as f64; ncells];
    let max_iter = 500;
    let mut residual = f64::INFINITY;
    let mut prev_residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = parallel::sum_vectors(ncells, ncells, |range, acc| {
            for cell in range {
                let mass = v[cell] / noise_samples as f64;
                if mass == 0.0 {
                    continue;
                }
                match &cached {
                    Some(dests) => {
                        for s in 0..noise_samples {
                            acc[dests[cell * noise_samples + s] as usize] += mass;
                        }
                    }
                    None => {
                        for s in 0..noise_samples {
                            let dest =
                                kernel_destination(family, law, seed, m, cell, s, noise_samples);
                            acc[dest] += mass;
                        }
                    }
                }
            }
        });
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        v = next;
        if residual < tol {
            return Ok(UlamDensity::from_masses(m, v));
        }
        prev_residual = prev_residual.min(residual * 2.0);
    }
    Err(TransportError::NonConvergence {
        residual,
        iterations: max_iter,
        gap_proxy: residual / prev_residual.max(f64::MIN_POSITIVE),
    })
}

/// Empirical cell histogram of a single long forward orbit (burn-in dropped);
/// the cross-validation oracle for `estimate_stationary`.
pub fn orbit_histogram(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    steps: usize,
    burn_in: usize,
    grid_size: usize,
) -> UlamDensity {
    let m = grid_size;
    let mut cells = vec![0.0f64; m * m];
    let mut q = p;
    for i in 1..=(steps + burn_in) as i64 {
        q = family.eval(&path.value(i), q);
        if i as usize > burn_in {
            let (ci, cj) = cell_of(q, m);
            cells[ci * m + cj] += 1.0;
        }
    }
    UlamDensity::from_masses(m, cells)
}

/// I.i.d. cell-then-uniform-within-cell sampling; equal weights.
pub fn sample_from_density(
    density: &UlamDensity,
    n_particles: usize,
    seed: u64,
) -> ParticleEnsemble {
    assert!(n_particles >= 1);
    let m = density.grid_size;
    let mut cdf = Vec::with_capacity(density.cells.len());
    let mut acc = 0.0;
    for &c in &density.cells {
        acc += c;
        cdf.push(acc);
    }
    let points: Vec<TorusPoint> = (0..n_particles)
        .into_par_iter()
        .map(|i| {
            let u = counter_uniform(seed, i as u64, 0);
            let cell = cdf.partition_point(|&c| c < u).min(m * m - 1);
            let (ci, cj) = (cell / m, cell % m);
            let x = (ci as f64 + counter_uniform(seed, i as u64, 1)) / m as f64;
            let y = (cj as f64 + counter_uniform(seed, i as u64, 2)) / m as f64;
            TorusPoint::new(x, y)
        })
        .collect();
    let w = 1.0 / n_particles as f64;
    ParticleEnsemble::new(
        points,
        vec![w; n_particles],
        Provenance::SampledFromDensity {
            seed,
            grid_size: m,
        },
    )
}

/// Transport every particle from time `-n` to time `0` along the frozen past;
/// weights unchanged.
pub fn pullback_pushforward(
    family: &dyn MapFamily,
    path: &NoisePath,
    ensemble: &ParticleEnsemble,
    n: usize,
) -> ParticleEnsemble {
    let points: Vec<TorusPoint> = ensemble
        .points
        .par_iter()
        .map(|&p| compose_pullback(family, path, p, n))
        .collect();
    ParticleEnsemble::new(
        points,
        ensemble.weights.clone(),
        Provenance::PushedForward { n, seed: path.seed },
    )
}

/// Number of Fourier test functions in the weak-distance bank.
pub const TEST_BANK_SIZE: usize = 64;

/// Frequencies of the fixed test bank: the 32 lowest nonzero modes in a
/// half-plane ordering; each contributes a cosine and a sine.
pub fn test_bank_modes() -> Vec<(i32, i32)> {
    let mut modes: Vec<(i32, i32)> = Vec::new();
    for k1 in 0..=6i32 {
        for k2 in -6..=6i32 {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            modes.push((k1, k2));
        }
    }
    modes.sort_by_key(|&(a, b)| (a * a + b * b, a, b));
    modes.truncate(TEST_BANK_SIZE / 2);
    modes
}

/// Integrals of the 64 test functions against the ensemble.
pub fn test_bank_integrals(e: &ParticleEnsemble) -> Vec<f64> {
    let modes = test_bank_modes();
    parallel::sum_vectors(e.len(), TEST_BANK_SIZE, |range, acc| {
        for i in range {
            let p = e.points[i];
            let w = e.weights[i];
            for (k, &(k1, k2)) in modes.iter().enumerate() {
                let phase = std::f64::consts::TAU * (k1 as f64 * p.x + k2 as f64 * p.y);
                acc[2 * k] += w * phase.cos();
                acc[2 * k + 1] += w * phase.sin();
            }
        }
    })
}

/// Average over the test bank of |∫φ dμ₁ − ∫φ dμ₂|; a metric for weak
/// convergence on the torus.
pub fn weak_distance(e1: &ParticleEnsemble, e2: &ParticleEnsemble) -> f64 {
    assert!(!e1.is_empty() && !e2.is_empty());
    let a = test_bank_integrals(e1);
    let b = test_bank_integrals(e2);
    let t1 = e1.total_weight();
    let t2 = e2.total_weight();
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x / t1 - y / t2).abs())
        .sum::<f64>()
        / TEST_BANK_SIZE as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::System;

    #[test]
    fn operator_rows_are_stochastic() {
        let op = build_transfer_operator(
            &System::C { a: 0.3 },
            NoiseLaw::UniformBall { sigma: 0.05 },
            7,
            16,
            1000,
        );
        for s in op.row_sums() {
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_noise_stationary_is_uniform() {
        for sys in [System::A, System::B { eps: 0.1 }, System::C { a: 0.3 }] {
            let d = estimate_stationary(&sys, NoiseLaw::UniformFull, 3, 16, 2000, 1e-9).unwrap();
            // kernel is exactly uniform; deviations are Monte-Carlo noise at
            // scale 1/√noise_samples per cell
            let dev = d.max_relative_deviation_from_uniform();
            assert!(dev < 6.0 / (2000.0f64).sqrt(), "{}: dev {dev}", sys.name());
        }
    }

    #[test]
    fn ball_noise_stationary_cross_validates_against_long_orbit() {
        let sys = System::C { a: 0.3 };
        let law = NoiseLaw::UniformBall { sigma: 0.05 };
        let ulam = estimate_stationary(&sys, law, 11, 32, 4000, 1e-10).unwrap();
        let path = NoisePath::new(1234, law);
        let orbit = orbit_histogram(&sys, &path, TorusPoint::new(0.3, 0.7), 10_000_000, 10_000, 32);
        let l1 = ulam.l1_distance(&orbit);
        assert!(l1 <= 0.05, "L¹ distance {l1}");
        // genuinely nonuniform stationary measure
        assert!(ulam.max_relative_deviation_from_uniform() > 0.1);
    }

    #[test]
    fn sampling_respects_density() {
        // uniform density: frequencies within 4σ binomial bands
        let d = UlamDensity::uniform(8);
        let e = sample_from_density(&d, 64_000, 5);
        let proj = e.ulam_projection(8);
        let expect = 1.0f64 / 64.0;
        let sigma = (expect * (1.0 - expect) / 64_000.0).sqrt();
        for &c in &proj.cells {
            assert!((c - expect).abs() <= 4.0 * sigma, "cell {c} vs {expect}");
        }
        // point mass: everything lands in that cell
        let mut cells = vec![0.0; 64];
        cells[19] = 1.0;
        let point_mass = UlamDensity::from_masses(8, cells);
        let e2 = sample_from_density(&point_mass, 500, 6);
        for p in &e2.points {
            assert_eq!(cell_of(*p, 8), (2, 3));
        }
        // determinism
        let e3 = sample_from_density(&d, 1000, 42);
        let e4 = sample_from_density(&d, 1000, 42);
        assert_eq!(e3.points, e4.points);
    }

    #[test]
    fn pushforward_depth_zero_is_identity() {
        let d = UlamDensity::uniform(16);
        let e = sample_from_density(&d, 100, 1);
        let path = NoisePath::new(1, NoiseLaw::UniformFull);
        let out = pullback_pushforward(&System::A, &path, &e, 0);
        assert_eq!(out.points, e.points);
        assert_eq!(out.weights, e.weights);
    }

    #[test]
    fn volume_preserving_pushforward_stays_uniform() {
        let d = UlamDensity::uniform(32);
        let e = sample_from_density(&d, 200_000, 2);
        let path = NoisePath::new(9, NoiseLaw::UniformFull);
        for n in [7usize, 31] {
            let out = pullback_pushforward(&System::A, &path, &e, n);
            assert!((out.total_weight() - 1.0).abs() < 1e-12);
            let proj = out.ulam_projection(16);
            let expect = 1.0f64 / 256.0;
            let sigma = (expect * (1.0 - expect) / 200_000.0).sqrt();
            for &c in &proj.cells {
                assert!((c - expect).abs() <= 5.0 * sigma);
            }
        }
    }

    #[test]
    fn pullback_sequence_is_cauchy_for_dissipative_system() {
        let sys = System::C { a: 0.3 };
        let path = NoisePath::new(31, NoiseLaw::UniformFull);
        let d = UlamDensity::uniform(32);
        let e = sample_from_density(&d, 200_000, 3);
        let mut dists = Vec::new();
        for n in [10usize, 20, 30, 40] {
            let a = pullback_pushforward(&sys, &path, &e, n);
            let b = pullback_pushforward(&sys, &path, &e, n + 10);
            dists.push(weak_distance(&a, &b));
        }
        for w in dists.windows(2) {
            assert!(w[1] < w[0], "weak distances not decreasing: {dists:?}");
        }
    }

    #[test]
    fn weak_distance_is_a_metric_on_samples() {
        let d = UlamDensity::uniform(16);
        let a = sample_from_density(&d, 5000, 1);
        let b = sample_from_density(&d, 5000, 2);
        let c = sample_from_density(&d, 5000, 3);
        assert_eq!(weak_distance(&a, &a), 0.0);
        assert_eq!(weak_distance(&a, &b), weak_distance(&b, &a));
        assert!(weak_distance(&a, &c) <= weak_distance(&a, &b) + weak_distance(&b, &c) + 1e-15);
    }

    #[test]
    fn weak_distance_of_independent_uniform_samples_is_small() {
        let d = UlamDensity::uniform(16);
        let a = sample_from_density(&d, 1_000_000, 10);
        let b = sample_from_density(&d, 1_000_000, 20);
        let w = weak_distance(&a, &b);
        assert!(w <= 3e-3, "calibrated Monte-Carlo scale exceeded: {w}");
    }
}

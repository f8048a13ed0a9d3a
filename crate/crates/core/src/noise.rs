//! Deterministic, seed-indexed two-sided noise sequences.
//!
//! Values are generated counter-style: `value(i)` is a pure function of
//! `(seed, i, law)`, so re-querying any index is bit-identical, shifts are
//! exact index arithmetic, and pullback experiments at different depths share
//! their pasts for free.

use serde::{Deserialize, Serialize};

/// One noise draw: a translation parameter in `[0,1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseValue {
    pub components: [f64; 2],
}

impl NoiseValue {
    pub const ZERO: NoiseValue = NoiseValue {
        components: [0.0, 0.0],
    };
}

/// Law of the per-step noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Uniform on the full torus `[0,1)^2`.
    UniformFull,
    /// Uniform on the disk of radius `sigma` around 0, wrapped mod 1.
    UniformBall { sigma: f64 },
    /// Degenerate law: every draw is 0 (deterministic dynamics).
    Zero,
}

/// splitmix64 finalizer; the workhorse of the counter-based generator.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Map `i ∈ ℤ` to u64 injectively (zigzag).
#[inline]
fn zigzag(i: i64) -> u64 {
    ((i << 1) ^ (i >> 63)) as u64
}

#[inline]
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stateless uniform draw in `[0,1)` addressed by (seed, counter, lane).
#[inline]
pub fn counter_uniform(seed: u64, counter: u64, lane: u64) -> f64 {
    unit_f64(mix(
        seed ^ mix(counter).wrapping_add(lane.wrapping_mul(0xd6e8feb86659fd93)),
    ))
}

/// A two-sided sequence `(ω_i)_{i∈ℤ}`, lazily evaluated from a seed.
///
/// `shift(k)` relabels indices so that `shift(k).value(i) == value(i + k)`
/// exactly. `with_far_past_reseeded` swaps the generating seed on indices
/// `i <= cutoff`, which is how far-past sensitivity experiments perturb a path
/// without touching its recent history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub seed: u64,
    pub law: NoiseLaw,
    offset: i64,
    /// `Some((cutoff, alt_seed))`: indices `i <= cutoff` (absolute) draw from `alt_seed`.
    far_past: Option<(i64, u64)>,
}

impl NoisePath {
    pub fn new(seed: u64, law: NoiseLaw) -> Self {
        Self {
            seed,
            law,
            offset: 0,
            far_past: None,
        }
    }

    /// Path with the same recent history but indices `<= cutoff` (in the
    /// current labeling) regenerated from `alt_seed`.
    pub fn with_far_past_reseeded(&self, cutoff: i64, alt_seed: u64) -> Self {
        let mut p = *self;
        p.far_past = Some((cutoff.saturating_add(self.offset), alt_seed));
        p
    }

    /// The shifted path θ^k: index i of the result reads index i+k of `self`.
    pub fn shift(&self, k: i64) -> Self {
        let mut p = *self;
        p.offset += k;
        p
    }

    pub fn value(&self, i: i64) -> NoiseValue {
        let abs = i + self.offset;
        let seed = match self.far_past {
            Some((cutoff, alt)) if abs <= cutoff => alt,
            _ => self.seed,
        };
        let c = zigzag(abs);
        match self.law {
            NoiseLaw::Zero => NoiseValue::ZERO,
            NoiseLaw::UniformFull => NoiseValue {
                components: [counter_uniform(seed, c, 0), counter_uniform(seed, c, 1)],
            },
            NoiseLaw::UniformBall { sigma } => {
                let r = sigma * counter_uniform(seed, c, 0).sqrt();
                let th = std::f64::consts::TAU * counter_uniform(seed, c, 1);
                NoiseValue {
                    components: [
                        crate::torus::wrap(r * th.cos()),
                        crate::torus::wrap(r * th.sin()),
                    ],
                }
            }
        }
    }
}

//! Bundled random map families on the 2-torus.
//!
//! All three nontrivial systems share the hyperbolic linear part
//! `A = [[2,1],[1,1]]` and append an ω-translation, so the noise kernel is a
//! translate of the deterministic image:
//!
//! * `A`: `p ↦ A p + ω` — linear, every quantity has a closed form.
//! * `B`: `p ↦ g_ε(A p) + ω` with the shear `g_ε(x,y) = (x + ε sin 2πy, y)`;
//!   nonlinear but volume-preserving.
//! * `C`: `p ↦ h_a(A p) + ω` with `h_a(x,y) = (x, y + (a/2π) sin 2πy)`;
//!   non-constant Jacobian, so sample measures are nontrivial.
//! * `Translation`: `p ↦ p + ω`, an isometry used as the zero-exponent control.

use crate::noise::NoiseValue;
use crate::torus::{Mat2, TorusPoint, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CAT_MAP: Mat2 = Mat2::new(2.0, 1.0, 1.0, 1.0);
pub const CAT_MAP_INV: Mat2 = Mat2::new(1.0, -1.0, -1.0, 2.0);

/// Operator norm of the symmetric matrix `A`, `(3+√5)/2`.
fn cat_norm() -> f64 {
    (3.0 + 5.0f64.sqrt()) / 2.0
}

/// An ω-parametrized family of torus diffeomorphisms.
pub trait MapFamily: Sync {
    fn name(&self) -> &'static str;
    fn noise_dim(&self) -> usize {
        2
    }
    fn eval(&self, w: &NoiseValue, p: TorusPoint) -> TorusPoint;
    fn inverse(&self, w: &NoiseValue, p: TorusPoint) -> TorusPoint;
    /// Derivative of `p ↦ eval(w, p)` at `p` (acting on lifts).
    fn jacobian(&self, w: &NoiseValue, p: TorusPoint) -> Mat2;
    /// Finite bound on `max(‖f_ω‖_C², ‖f_ω⁻¹‖_C²)`.
    fn c2_bound(&self, w: &NoiseValue) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum System {
    A,
    B { eps: f64 },
    C { a: f64 },
    Translation,
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("unknown system '{0}' (expected A, B, C or translation)")]
    UnknownName(String),
    #[error("parameter out of range for system {system}: {message}")]
    BadParameter {
        system: &'static str,
        message: String,
    },
}

impl System {
    /// Registry lookup by name plus parameter table.
    pub fn from_registry(name: &str, eps: f64, a: f64) -> Result<System, SystemError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(System::A),
            "b" => {
                if !(0.0..0.5).contains(&eps) {
                    return Err(SystemError::BadParameter {
                        system: "B",
                        message: format!("eps = {eps} must lie in [0, 0.5)"),
                    });
                }
                Ok(System::B { eps })
            }
            "c" => {
                if !(a.abs() < 1.0) {
                    return Err(SystemError::BadParameter {
                        system: "C",
                        message: format!("|a| = {} must be < 1 (diffeomorphism condition)", a.abs()),
                    });
                }
                Ok(System::C { a })
            }
            "translation" | "t" => Ok(System::Translation),
            other => Err(SystemError::UnknownName(other.to_string())),
        }
    }
}

#[inline]
fn shear_b(eps: f64, q: Vec2) -> Vec2 {
    Vec2::new(q.x + eps * (std::f64::consts::TAU * q.y).sin(), q.y)
}

#[inline]
fn kick_c(a: f64, t: f64) -> f64 {
    t + a / std::f64::consts::TAU * (std::f64::consts::TAU * t).sin()
}

#[inline]
fn kick_c_deriv(a: f64, t: f64) -> f64 {
    1.0 + a * (std::f64::consts::TAU * t).cos()
}

/// Invert `t ↦ kick_c(a, t)` for target in `[0,1)`; strictly monotone since |a| < 1.
fn kick_c_inverse(a: f64, target: f64) -> f64 {
    let slack = a.abs() / std::f64::consts::TAU + 1e-9;
    let (mut lo, mut hi) = (target - slack, target + slack);
    let mut t = target;
    for _ in 0..60 {
        let r = kick_c(a, t) - target;
        if r.abs() < 1e-15 {
            return t;
        }
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = r / kick_c_deriv(a, t);
        t -= step;
        if !(lo..=hi).contains(&t) {
            t = 0.5 * (lo + hi);
        }
    }
    t
}

impl MapFamily for System {
    fn name(&self) -> &'static str {
        match self {
            System::A => "A",
            System::B { .. } => "B",
            System::C { .. } => "C",
            System::Translation => "translation",
        }
    }

    fn eval(&self, w: &NoiseValue, p: TorusPoint) -> TorusPoint {
        let t = Vec2::new(w.components[0], w.components[1]);
        match self {
            System::A => TorusPoint::from_vec(CAT_MAP * p.as_vec() + t),
            System::B { eps } => TorusPoint::from_vec(shear_b(*eps, CAT_MAP * p.as_vec()) + t),
            System::C { a } => {
                let q = CAT_MAP * p.as_vec();
                TorusPoint::from_vec(Vec2::new(q.x, kick_c(*a, q.y)) + t)
            }
            System::Translation => p.offset(t),
        }
    }

    fn inverse(&self, w: &NoiseValue, p: TorusPoint) -> TorusPoint {
        let s = Vec2::new(
            crate::torus::wrap(p.x - w.components[0]),
            crate::torus::wrap(p.y - w.components[1]),
        );
        match self {
            System::A => TorusPoint::from_vec(CAT_MAP_INV * s),
            System::B { eps } => {
                let q = Vec2::new(
                    s.x - eps * (std::f64::consts::TAU * s.y).sin(),
                    s.y,
                );
                TorusPoint::from_vec(CAT_MAP_INV * q)
            }
            System::C { a } => {
                let q = Vec2::new(s.x, kick_c_inverse(*a, s.y));
                TorusPoint::from_vec(CAT_MAP_INV * q)
            }
            System::Translation => TorusPoint::from_vec(s),
        }
    }

    fn jacobian(&self, w: &NoiseValue, p: TorusPoint) -> Mat2 {
        let _ = w;
        match self {
            System::A => CAT_MAP,
            System::B { eps } => {
                let q = CAT_MAP * p.as_vec();
                let dg = Mat2::new(
                    1.0,
                    eps * std::f64::consts::TAU * (std::f64::consts::TAU * q.y).cos(),
                    0.0,
                    1.0,
                );
                dg * CAT_MAP
            }
            System::C { a } => {
                let q = CAT_MAP * p.as_vec();
                let dh = Mat2::new(1.0, 0.0, 0.0, kick_c_deriv(*a, q.y));
                dh * CAT_MAP
            }
            System::Translation => Mat2::identity(),
        }
    }

    fn c2_bound(&self, _w: &NoiseValue) -> f64 {
        // Closed-form bounds on max(‖df‖, ‖d²f‖, ‖df⁻¹‖, ‖d²f⁻¹‖); the noise
        // is a translation so the bound is ω-independent.
        let an = cat_norm();
        match self {
            System::A => an,
            System::B { eps } => {
                let tau = std::f64::consts::TAU;
                let d1 = (1.0 + tau * eps) * an;
                // second derivative concentrated in the sheared coordinate; A's
                // y-row has squared norm 2
                let d2 = tau * tau * eps * 2.0;
                let d1_inv = an * (1.0 + tau * eps);
                let d2_inv = tau * tau * eps * an;
                d1.max(d2).max(d1_inv).max(d2_inv).max(1.0)
            }
            System::C { a } => {
                let tau = std::f64::consts::TAU;
                let aa = a.abs();
                let d1 = (1.0 + aa) * an;
                let d2 = tau * aa * 2.0;
                let hp_min = 1.0 - aa;
                let d1_inv = an / hp_min;
                // (h⁻¹)'' ≤ |h''| / (h')³, mapped through A⁻¹'s y-column (norm √5)
                let d2_inv = tau * aa / (hp_min * hp_min * hp_min) * 5.0f64.sqrt();
                d1.max(d2).max(d1_inv).max(d2_inv).max(1.0)
            }
            System::Translation => 1.0,
        }
    }
}

//! Cocycle composition: forward, backward, and pullback orbit maps.
//!
//! Index conventions for a two-sided path `(ω_i)`:
//!
//! * `compose_forward(p, n)` applies `f_{ω_1}, …, f_{ω_n}` in order.
//! * `compose_backward(p, n)` is the exact inverse of `compose_forward`
//!   along the same indices.
//! * `compose_pullback(p, n)` applies `f_{ω_{-n+1}}, …, f_{ω_0}` in order:
//!   it transports a state from time `-n` to time `0` along the frozen past.
//! * `pullback_preimage(p, k)` inverts `compose_pullback(·, k)`, i.e. it
//!   applies `f_{ω_0}⁻¹, f_{ω_{-1}}⁻¹, …, f_{ω_{-k+1}}⁻¹`.

use crate::noise::NoisePath;
use crate::systems::MapFamily;
use crate::torus::{Mat2, TorusPoint};

pub fn compose_forward(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> TorusPoint {
    let mut q = p;
    for i in 1..=n as i64 {
        q = family.eval(&path.value(i), q);
    }
    q
}

pub fn compose_backward(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> TorusPoint {
    let mut q = p;
    for i in (1..=n as i64).rev() {
        q = family.inverse(&path.value(i), q);
    }
    q
}

pub fn compose_pullback(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> TorusPoint {
    let mut q = p;
    for i in (1 - n as i64)..=0 {
        q = family.eval(&path.value(i), q);
    }
    q
}

/// Inverse of `compose_pullback(·, k)`: the state at time `-k` whose pullback
/// image at time 0 is `p`.
pub fn pullback_preimage(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    k: usize,
) -> TorusPoint {
    let mut q = p;
    for i in ((1 - k as i64)..=0).rev() {
        q = family.inverse(&path.value(i), q);
    }
    q
}

/// Points `p, f¹p, …, fⁿp` along the forward orbit (times 0..=n).
pub fn forward_orbit(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    let mut q = p;
    for i in 1..=n as i64 {
        q = family.eval(&path.value(i), q);
        out.push(q);
    }
    out
}

/// Backward orbit of `p` through the pullback chain: entry `k` is the state at
/// time `-k` (so entry 0 is `p`).
pub fn backward_orbit(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    let mut q = p;
    for k in 0..n as i64 {
        q = family.inverse(&path.value(-k), q);
        out.push(q);
    }
    out
}

/// Ordered Jacobian product of `compose_forward(·, n)` at `p`.
pub fn forward_jacobian_product(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> Mat2 {
    let mut j = Mat2::identity();
    let mut q = p;
    for i in 1..=n as i64 {
        let w = path.value(i);
        j = family.jacobian(&w, q) * j;
        q = family.eval(&w, q);
    }
    j
}

/// Sum of `log |det df|` along the forward orbit, one term per step.
pub fn forward_log_det_sum(
    family: &dyn MapFamily,
    path: &NoisePath,
    p: TorusPoint,
    n: usize,
) -> f64 {
    let mut acc = 0.0;
    let mut q = p;
    for i in 1..=n as i64 {
        let w = path.value(i);
        acc += family.jacobian(&w, q).determinant().abs().ln();
        q = family.eval(&w, q);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseLaw, NoisePath};
    use crate::systems::{System, CAT_MAP, CAT_MAP_INV};
    use crate::torus::Vec2;

    #[test]
    fn forward_zero_steps_is_identity() {
        let p = TorusPoint::new(0.3, 0.8);
        let path = NoisePath::new(0, NoiseLaw::UniformFull);
        assert_eq!(compose_forward(&System::A, &path, p, 0), p);
        assert_eq!(compose_backward(&System::A, &path, p, 0), p);
        assert_eq!(compose_pullback(&System::A, &path, p, 0), p);
    }

    #[test]
    fn cat_map_two_steps_matches_matrix_square() {
        // zero noise: f² = A² pointwise
        let path = NoisePath::new(0, NoiseLaw::Zero);
        let p = TorusPoint::new(0.1, 0.2);
        let got = compose_forward(&System::A, &path, p, 2);
        let a2 = CAT_MAP * CAT_MAP;
        let want = TorusPoint::from_vec(a2 * p.as_vec());
        assert!(got.dist(&want) < 1e-14);
    }

    #[test]
    fn backward_inverts_forward() {
        let path = NoisePath::new(99, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.41, 0.77);
        for sys in [System::A, System::B { eps: 0.1 }, System::C { a: 0.3 }] {
            let q = compose_forward(&sys, &path, p, 5);
            let back = compose_backward(&sys, &path, q, 5);
            assert!(back.dist(&p) < 1e-10, "{}", sys.name());
        }
    }

    #[test]
    fn backward_one_step_zero_noise_is_inverse_matrix() {
        let path = NoisePath::new(0, NoiseLaw::Zero);
        let p = TorusPoint::new(0.35, 0.62);
        let got = compose_backward(&System::A, &path, p, 1);
        let want = TorusPoint::from_vec(CAT_MAP_INV * p.as_vec());
        assert!(got.dist(&want) < 1e-14);
    }

    #[test]
    fn pullback_equals_forward_on_shifted_path() {
        let path = NoisePath::new(314, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.2, 0.9);
        for n in [0usize, 1, 7, 23] {
            let a = compose_pullback(&System::C { a: 0.3 }, &path, p, n);
            let b = compose_forward(&System::C { a: 0.3 }, &path.shift(-(n as i64)), p, n);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pullback_nesting_shares_maps() {
        // depth m splits exactly into (depth m-n at shifted path) then depth n
        let path = NoisePath::new(5, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.6, 0.1);
        let sys = System::B { eps: 0.1 };
        let (n, m) = (4usize, 11usize);
        let full = compose_pullback(&sys, &path, p, m);
        let first = compose_pullback(&sys, &path.shift(-(n as i64)), p, m - n);
        let split = compose_pullback(&sys, &path, first, n);
        assert_eq!(full, split);
    }

    #[test]
    fn pullback_preimage_roundtrip() {
        let path = NoisePath::new(8, NoiseLaw::UniformFull);
        let sys = System::C { a: 0.3 };
        let p = TorusPoint::new(0.15, 0.48);
        // round-trip error grows like e^{λk}·ε, so keep k moderate
        for k in [1usize, 6, 10] {
            let y = pullback_preimage(&sys, &path, p, k);
            assert!(compose_pullback(&sys, &path, y, k).dist(&p) < 1e-10);
        }
    }

    #[test]
    fn cocycle_property() {
        let path = NoisePath::new(123, NoiseLaw::UniformFull);
        let sys = System::C { a: 0.3 };
        let p = TorusPoint::new(0.33, 0.86);
        let (n, m) = (6usize, 9usize);
        let whole = compose_forward(&sys, &path, p, n + m);
        let staged = compose_forward(&sys, &path.shift(n as i64), compose_forward(&sys, &path, p, n), m);
        assert!(whole.dist(&staged) < 1e-10);
    }

    #[test]
    fn jacobian_chain_rule_matches_finite_differences() {
        let path = NoisePath::new(77, NoiseLaw::UniformFull);
        let p = TorusPoint::new(0.27, 0.64);
        let n = 3;
        let h = 1e-6;
        for sys in [System::B { eps: 0.1 }, System::C { a: 0.3 }] {
            let j = forward_jacobian_product(&sys, &path, p, n);
            for (col, dir) in [(0, Vec2::new(1.0, 0.0)), (1, Vec2::new(0.0, 1.0))] {
                let plus = compose_forward(&sys, &path, p.offset(dir * h), n);
                let minus = compose_forward(&sys, &path, p.offset(-dir * h), n);
                let fd = minus.displacement_to(&plus) / (2.0 * h);
                let jc = j.column(col);
                for r in 0..2 {
                    let denom = jc[r].abs().max(1.0);
                    assert!(
                        (fd[r] - jc[r]).abs() / denom <= 1e-5,
                        "{} rel err {}",
                        sys.name(),
                        (fd[r] - jc[r]).abs() / denom
                    );
                }
            }
        }
    }

    #[test]
    fn log_det_sum_matches_product_determinant() {
        let path = NoisePath::new(3, NoiseLaw::UniformFull);
        let sys = System::C { a: 0.3 };
        let p = TorusPoint::new(0.52, 0.11);
        // the direct determinant cancels catastrophically for long products
        let n = 6;
        let sum = forward_log_det_sum(&sys, &path, p, n);
        let det = forward_jacobian_product(&sys, &path, p, n).determinant().abs();
        assert!((sum - det.ln()).abs() < 1e-9);
    }
}

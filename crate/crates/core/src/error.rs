//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TangentError {
    #[error("degenerate Jacobian (|det| = {det:.3e} < 1e-14) at step {step}")]
    DegenerateJacobian { det: f64, step: usize },
    #[error("splitting directions nearly parallel (angle {angle:.3e} rad)")]
    DegenerateSplitting { angle: f64 },
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("cone violation at step {step}: measured slope {measured:.4} exceeds bound {bound:.4}")]
    ConeViolation {
        step: usize,
        measured: f64,
        bound: f64,
    },
    #[error("Newton failed to re-graph node {node} at step {step}: no preimage in domain")]
    NewtonDivergence { step: usize, node: usize },
    #[error("graph image exits chart at step {step}: |g| = {value:.4e} > cs-radius {radius:.4e}")]
    ChartOverflow {
        step: usize,
        value: f64,
        radius: f64,
    },
    #[error("input graph too small: {nodes} nodes over radius {radius:.3e} (need ≥ 3 cells)")]
    DegenerateInput { nodes: usize, radius: f64 },
}

/// Which hypothesis of the axis-switch check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchHypothesis {
    ProjectionNorm,
    BaseDistance,
    AxisAlignment,
    InputLipschitz,
}

impl std::fmt::Display for SwitchHypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SwitchHypothesis::ProjectionNorm => "projection norm",
            SwitchHypothesis::BaseDistance => "base distance",
            SwitchHypothesis::AxisAlignment => "axis alignment",
            SwitchHypothesis::InputLipschitz => "input Lipschitz",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum SwitchError {
    #[error("axis-switch hypothesis failed ({which}): {measured:.4e} exceeds budget {budget:.4e}")]
    HypothesisFailure {
        which: SwitchHypothesis,
        measured: f64,
        budget: f64,
    },
    #[error("re-graph failed at node {node}: curve too slanted relative to target axes")]
    ReGraphFailure { node: usize },
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("power iteration did not converge: L¹ residual {residual:.3e} after {iterations} iterations (spectral-gap proxy {gap_proxy:.3e})")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        gap_proxy: f64,
    },
}

#[derive(Debug, Error)]
pub enum SrbError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("no source/target pair accumulates mass ≥ {floor:.3e} at every depth (best pair min-mass {best:.3e})")]
    NoAccumulation { floor: f64, best: f64 },
    #[error("source foliation separation failure: {0}")]
    SeparationFailure(#[from] SwitchError),
    #[error("partition level {level} retains {retained:.3e} < target {target:.3e} of parent mass")]
    MassStarvation {
        level: usize,
        retained: f64,
        target: f64,
    },
    #[error("leaf transform failed: {0}")]
    Transform(#[from] TransformError),
    #[error("stack rejected: only {survived} of {total} leaves survived")]
    StackRejected { survived: usize, total: usize },
    #[error("tangent failure: {0}")]
    Tangent(#[from] TangentError),
    #[error("source ball exits the density floor: cell ({i},{j}) has ψ = {psi:.4e} < α₀/2 = {floor:.4e}")]
    SourceBelowFloor {
        i: usize,
        j: usize,
        psi: f64,
        floor: f64,
    },
}

//! Simulation and stability certification of switched dynamical systems
//! `xdot = f(x, sigma)` driven by constrained switching signals.
//!
//! The crate is organized around the pipeline the `switchstab` CLI exposes:
//!
//! - [`signal`]: switching signals, class specifications (dwell, average
//!   dwell time, ergodic, graph-constrained and intersections), exact
//!   validators and seeded generators.
//! - [`system`]: per-mode vector fields with state-dependent domains and the
//!   exact-linear specialization.
//! - [`integrator`]: fixed-step RK4 trajectories that land exactly on switch
//!   times.
//! - [`limits`]: omega-limit-set estimation, the switch-aware refinement, and
//!   the weak-meagreness estimator for scalar outputs.
//! - [`lyapunov`]: multiple-Lyapunov-function machinery (decrease
//!   inequalities, monotonicity monitors, quadratic pairs).
//! - [`observability`]: unobservable subspaces, kernels and the
//!   simulation-based zero-output membership test.
//! - [`certify`]: cycle enumeration, theorem-rule checkers emitting
//!   three-valued certificates, and the empirical stability harness.
//!
//! All numeric types are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases at the crate root fix `f64`, which is what the CLI and the
//! JSON interchange formats use.

// negated comparisons (`!(x > 0)`) double as NaN rejections in the
// validation paths and stay as written
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod integrator;
pub mod limits;
pub mod lyapunov;
pub mod observability;
pub mod scalar;
pub mod signal;
pub mod system;

pub use nalgebra;
pub use scalar::Scalar;
pub use signal::ModeId;

/// `f64` switching signal.
pub type Signal = signal::SwitchingSignal;
/// `f64` signal class specification.
pub type ClassSpec = signal::SignalClassSpec;
/// `f64` switched system.
pub type System = system::SwitchedSystem;
/// `f64` trajectory.
pub type Trajectory = integrator::Trajectory;
/// `f64` Lyapunov pair.
pub type LyapunovPair = lyapunov::LyapunovPair;
/// `f64` linear subspace.
pub type Subspace = observability::Subspace;
/// `f64` certificate report.
pub type CertificateReport = certify::CertificateReport;

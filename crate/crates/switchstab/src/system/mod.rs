//! The switched system `xdot = f(x, sigma)`: one vector field and one
//! state-constraint domain per mode, with an optional exact-linear
//! specialization `f_gamma(x) = A_gamma * x`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::{cast, Scalar};
use crate::signal::ModeId;

mod json;

pub use json::{builtin_field, DomainJson, ModeJson, SystemJson, BUILTIN_FIELDS, SYSTEM_SCHEMA};

/// Shared, purity-contracted vector-field evaluator `x -> f(x)`.
pub type FieldFn<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;
/// Shared membership predicate `x -> x in chi`.
pub type PredicateFn<T> = Arc<dyn Fn(&DVector<T>) -> bool + Send + Sync>;

#[derive(Error, Debug)]
pub enum SystemError<T: Scalar> {
    #[error("state outside the domain of mode {mode}")]
    DomainViolation { mode: ModeId, x: DVector<T> },
    #[error("unknown mode {mode}")]
    UnknownMode { mode: ModeId },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a switched system needs at least one mode")]
    EmptySystem,
    #[error("duplicate mode id {mode}")]
    DuplicateMode { mode: ModeId },
    #[error("linear matrix of mode {mode} must be square")]
    NonSquareMatrix { mode: ModeId },
    #[error("mode {mode}: field deviates from A*x by {deviation} at a sampled point")]
    LinearInconsistent {
        mode: ModeId,
        x: DVector<T>,
        deviation: T,
    },
    #[error("mode {mode}: field evaluator is not pure (double evaluation differs)")]
    ImpureField { mode: ModeId },
    #[error("unknown builtin field `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid system description: {0}")]
    Invalid(String),
}

/// Axis-aligned box from which sampling-based checks draw their points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox<T: Scalar> {
    pub lo: DVector<T>,
    pub hi: DVector<T>,
}

impl<T: Scalar> SampleBox<T> {
    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn centered(dim: usize, half_width: T) -> Self {
        Self {
            lo: DVector::from_element(dim, -half_width),
            hi: DVector::from_element(dim, half_width),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Uniform sample from the box.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<T> {
        DVector::from_fn(self.dim(), |i, _| {
            let u: T = cast(rng.gen::<f64>());
            self.lo[i] + (self.hi[i] - self.lo[i]) * u
        })
    }
}

/// Closed halfspace `normal . x + offset >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace<T: Scalar> {
    pub normal: DVector<T>,
    pub offset: T,
}

impl<T: Scalar> Halfspace<T> {
    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        self.normal.dot(x) + self.offset >= -tol
    }
}

/// Membership description of a state-constraint set.
#[derive(Clone)]
pub enum Region<T: Scalar> {
    /// The whole state space.
    All,
    /// Intersection of closed halfspaces.
    Halfspaces(Vec<Halfspace<T>>),
    /// User predicate; the caller asserts the described set is closed.
    Predicate(PredicateFn<T>),
}

/// A mode domain `chi_gamma`: membership test plus a box for sampling.
///
/// Halfspace membership uses a small boundary tolerance band so trajectories
/// grazing the boundary are not rejected for rounding noise.
#[derive(Clone)]
pub struct Domain<T: Scalar> {
    pub region: Region<T>,
    pub bbox: SampleBox<T>,
    pub boundary_tol: T,
}

/// Default half-width of sampling boxes.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 2.0;
/// Default boundary tolerance band on halfspace domains.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

impl<T: Scalar> Domain<T> {
    /// Unconstrained domain with the default sampling box.
    pub fn all(dim: usize) -> Self {
        Self {
            region: Region::All,
            bbox: SampleBox::centered(dim, cast(DEFAULT_BOX_HALF_WIDTH)),
            boundary_tol: cast(DEFAULT_BOUNDARY_TOL),
        }
    }

    pub fn halfspaces(dim: usize, halfspaces: Vec<Halfspace<T>>) -> Self {
        Self {
            region: Region::Halfspaces(halfspaces),
            bbox: SampleBox::centered(dim, cast(DEFAULT_BOX_HALF_WIDTH)),
            boundary_tol: cast(DEFAULT_BOUNDARY_TOL),
        }
    }

    pub fn predicate(dim: usize, pred: PredicateFn<T>) -> Self {
        Self {
            region: Region::Predicate(pred),
            bbox: SampleBox::centered(dim, cast(DEFAULT_BOX_HALF_WIDTH)),
            boundary_tol: cast(DEFAULT_BOUNDARY_TOL),
        }
    }

    pub fn with_bbox(mut self, bbox: SampleBox<T>) -> Self {
        self.bbox = bbox;
        self
    }

    pub fn contains(&self, x: &DVector<T>) -> bool {
        match &self.region {
            Region::All => true,
            Region::Halfspaces(list) => list.iter().all(|h| h.contains(x, self.boundary_tol)),
            Region::Predicate(pred) => pred(x),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Region<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::All => write!(f, "All"),
            Region::Halfspaces(list) => f.debug_tuple("Halfspaces").field(list).finish(),
            Region::Predicate(_) => write!(f, "Predicate(..)"),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Domain<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("region", &self.region)
            .field("bbox", &self.bbox)
            .finish()
    }
}

/// One subsystem: identifier, vector field, domain, optional linear matrix.
#[derive(Clone)]
pub struct Mode<T: Scalar> {
    id: ModeId,
    field: FieldFn<T>,
    domain: Domain<T>,
    linear: Option<DMatrix<T>>,
}

impl<T: Scalar> std::fmt::Debug for Mode<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mode")
            .field("id", &self.id)
            .field("linear", &self.linear.is_some())
            .finish()
    }
}

impl<T: Scalar> Mode<T> {
    /// General nonlinear mode.
    pub fn new(id: ModeId, field: FieldFn<T>, domain: Domain<T>) -> Self {
        Self {
            id,
            field,
            domain,
            linear: None,
        }
    }

    /// Exact-linear mode `f(x) = a * x`; the evaluator is derived from `a`.
    pub fn linear(id: ModeId, a: DMatrix<T>, domain: Domain<T>) -> Result<Self, SystemError<T>> {
        if !a.is_square() {
            return Err(SystemError::NonSquareMatrix { mode: id });
        }
        let matrix = a.clone();
        let field: FieldFn<T> = Arc::new(move |x: &DVector<T>| &matrix * x);
        Ok(Self {
            id,
            field,
            domain,
            linear: Some(a),
        })
    }

    pub fn id(&self) -> ModeId {
        self.id
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn linear_matrix(&self) -> Option<&DMatrix<T>> {
        self.linear.as_ref()
    }

    /// Raw field evaluation without a domain check.
    pub fn eval(&self, x: &DVector<T>) -> DVector<T> {
        (self.field)(x)
    }

    pub fn field(&self) -> &FieldFn<T> {
        &self.field
    }
}

/// Finite family of modes sharing one state dimension.
#[derive(Clone, Debug)]
pub struct SwitchedSystem<T: Scalar = f64> {
    dim: usize,
    modes: Vec<Mode<T>>,
}

impl<T: Scalar> SwitchedSystem<T> {
    pub fn new(dim: usize, modes: Vec<Mode<T>>) -> Result<Self, SystemError<T>> {
        if modes.is_empty() {
            return Err(SystemError::EmptySystem);
        }
        for (i, mode) in modes.iter().enumerate() {
            if modes[..i].iter().any(|m| m.id == mode.id) {
                return Err(SystemError::DuplicateMode { mode: mode.id });
            }
            if let Some(a) = &mode.linear {
                if a.nrows() != dim {
                    return Err(SystemError::DimensionMismatch {
                        expected: dim,
                        got: a.nrows(),
                    });
                }
            }
            if mode.domain.bbox.dim() != dim {
                return Err(SystemError::DimensionMismatch {
                    expected: dim,
                    got: mode.domain.bbox.dim(),
                });
            }
        }
        Ok(Self { dim, modes })
    }

    /// All-linear system with unconstrained domains and ids `1..=N`.
    pub fn from_matrices(matrices: &[DMatrix<T>]) -> Result<Self, SystemError<T>> {
        let dim = matrices.first().map_or(0, DMatrix::nrows);
        let modes = matrices
            .iter()
            .enumerate()
            .map(|(i, a)| Mode::linear(ModeId(i as u32 + 1), a.clone(), Domain::all(dim)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, modes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn mode_ids(&self) -> Vec<ModeId> {
        self.modes.iter().map(Mode::id).collect()
    }

    pub fn mode(&self, id: ModeId) -> Result<&Mode<T>, SystemError<T>> {
        self.modes
            .iter()
            .find(|m| m.id == id)
            .ok_or(SystemError::UnknownMode { mode: id })
    }

    /// `f_gamma(x)` with the domain precondition enforced.
    pub fn eval_field(&self, x: &DVector<T>, gamma: ModeId) -> Result<DVector<T>, SystemError<T>> {
        let mode = self.mode(gamma)?;
        if x.len() != self.dim {
            return Err(SystemError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !mode.domain.contains(x) {
            return Err(SystemError::DomainViolation {
                mode: gamma,
                x: x.clone(),
            });
        }
        Ok(mode.eval(x))
    }

    /// True iff `|f_gamma(x)| <= tol` (with the domain precondition enforced).
    pub fn is_equilibrium(
        &self,
        gamma: ModeId,
        x: &DVector<T>,
        tol: T,
    ) -> Result<bool, SystemError<T>> {
        Ok(self.eval_field(x, gamma)?.norm() <= tol)
    }

    /// Spot check that every mode with a linear matrix evaluates to `A*x`
    /// on `n_samples` random points from its sampling box.
    pub fn check_linear_consistency(
        &self,
        n_samples: usize,
        seed: u64,
    ) -> Result<(), SystemError<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for mode in &self.modes {
            let Some(a) = &mode.linear else { continue };
            for _ in 0..n_samples {
                let x = mode.domain.bbox.sample(&mut rng);
                let deviation = (mode.eval(&x) - a * &x).norm();
                let scale = T::one().max(x.norm());
                if deviation > T::default_epsilon() * cast::<T>(64.0) * scale {
                    return Err(SystemError::LinearInconsistent {
                        mode: mode.id,
                        x,
                        deviation,
                    });
                }
            }
        }
        Ok(())
    }

    /// Spot check of the purity contract: evaluating twice at the same point
    /// must give bitwise-identical results.
    pub fn check_purity(&self, n_samples: usize, seed: u64) -> Result<(), SystemError<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for mode in &self.modes {
            for _ in 0..n_samples {
                let x = mode.domain.bbox.sample(&mut rng);
                if mode.eval(&x) != mode.eval(&x) {
                    return Err(SystemError::ImpureField { mode: mode.id });
                }
            }
        }
        Ok(())
    }
}

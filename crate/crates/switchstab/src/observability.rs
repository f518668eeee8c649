//! Linear-case unobservable subspaces and kernels, subspace intersection,
//! and the simulation-based membership test for zero-output sets (the states
//! from which a forward or backward solution keeps an output identically
//! zero for a duration tau).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::integrator::{flow_mode, SimError, DEFAULT_BLOWUP_NORM};
use crate::scalar::{cast, Scalar};
use crate::system::Mode;

/// Relative rank tolerance for SVD-based kernels: singular values at or
/// below `RANK_TOL_REL * sigma_max` count as zero.
pub const RANK_TOL_REL: f64 = 1e-10;

#[derive(Error, Debug)]
pub enum ObservabilityError<T: Scalar> {
    #[error("ambient dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("matrix dimensions are inconsistent: C is {c_rows}x{c_cols}, A is {a_rows}x{a_cols}")]
    InconsistentMatrices {
        c_rows: usize,
        c_cols: usize,
        a_rows: usize,
        a_cols: usize,
    },
    #[error("basis columns are not orthonormal")]
    NotOrthonormal,
    #[error("need at least one subspace to intersect")]
    EmptyIntersection,
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(T),
    #[error("numeric failure during the membership flow: {0}")]
    Flow(#[from] SimError<T>),
}

/// Linear subspace of `R^dim` stored as an orthonormal column basis
/// (zero columns = the trivial subspace).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T: Scalar = f64> {
    dim: usize,
    basis: DMatrix<T>,
}

impl<T: Scalar> Subspace<T> {
    /// Wraps an orthonormal basis, validating orthonormality to 1e-10.
    pub fn new(dim: usize, basis: DMatrix<T>) -> Result<Self, ObservabilityError<T>> {
        if basis.nrows() != dim {
            return Err(ObservabilityError::DimensionMismatch {
                a: dim,
                b: basis.nrows(),
            });
        }
        let k = basis.ncols();
        if k > 0 {
            let gram = basis.transpose() * &basis;
            if (gram - DMatrix::<T>::identity(k, k)).norm() > cast::<T>(1e-10) {
                return Err(ObservabilityError::NotOrthonormal);
            }
        }
        Ok(Self { dim, basis })
    }

    /// Orthonormalizes a spanning set (SVD-based, rank-revealing).
    pub fn from_span(dim: usize, vectors: &[DVector<T>]) -> Result<Self, ObservabilityError<T>> {
        if vectors.is_empty() {
            return Ok(Self::zero(dim));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(ObservabilityError::DimensionMismatch {
                a: dim,
                b: vectors[0].len(),
            });
        }
        let m = DMatrix::from_columns(vectors);
        let svd = m.svd(true, false);
        let sigma_max = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let tol = cast::<T>(RANK_TOL_REL) * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let u = svd.u.expect("u requested");
        Ok(Self {
            dim,
            basis: u.columns(0, rank).into_owned(),
        })
    }

    /// The trivial subspace `{0}`.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            basis: DMatrix::zeros(dim, 0),
        }
    }

    /// The full space `R^dim`.
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            basis: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the subspace itself.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.rank() == 0
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> impl ExactSizeIterator<Item = DVector<T>> + '_ {
        self.basis.column_iter().map(|c| c.into_owned())
    }

    /// Orthogonal projector `B B'` onto the subspace.
    pub fn projector(&self) -> DMatrix<T> {
        if self.rank() == 0 {
            DMatrix::zeros(self.dim, self.dim)
        } else {
            &self.basis * self.basis.transpose()
        }
    }

    /// Frobenius distance between the two orthogonal projectors; zero iff
    /// the subspaces coincide.
    pub fn projector_distance(&self, other: &Subspace<T>) -> T {
        (self.projector() - other.projector()).norm()
    }

    /// True iff the component of `x` orthogonal to the subspace is at most
    /// `tol * max(1, |x|)`.
    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        let residual = if self.rank() == 0 {
            x.clone()
        } else {
            x - &self.basis * (self.basis.transpose() * x)
        };
        residual.norm() <= tol * T::one().max(x.norm())
    }

    /// Column-major basis export.
    pub fn to_columns(&self) -> Vec<Vec<T>> {
        self.basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }
}

impl<T: Scalar + serde::Serialize> serde::Serialize for Subspace<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Subspace", 2)?;
        s.serialize_field("dim", &self.dim)?;
        s.serialize_field("basis", &self.to_columns())?;
        s.end()
    }
}

/// Right null space of `m`, with rank decided at `RANK_TOL_REL * sigma_max`.
pub fn kernel<T: Scalar>(m: &DMatrix<T>) -> Subspace<T> {
    kernel_with_tol(m, cast(RANK_TOL_REL))
}

/// Right null space with an explicit relative rank tolerance.
pub fn kernel_with_tol<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> Subspace<T> {
    let n = m.ncols();
    // thin SVD drops the trailing right-singular vectors when rows < cols;
    // padding with zero rows keeps them without changing the null space
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let tol = rel_tol * sigma_max;
    let null_rows: Vec<usize> = (0..v_t.nrows())
        .filter(|&i| {
            svd.singular_values.get(i).is_none_or(|&s| s <= tol)
        })
        .collect();
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Subspace { dim: n, basis }
}

/// Stacked Kalman observability matrix `[C; CA; ...; CA^{n-1}]`.
pub fn observability_matrix<T: Scalar>(
    c: &DMatrix<T>,
    a: &DMatrix<T>,
) -> Result<DMatrix<T>, ObservabilityError<T>> {
    if !a.is_square() || c.ncols() != a.nrows() || c.nrows() == 0 {
        return Err(ObservabilityError::InconsistentMatrices {
            c_rows: c.nrows(),
            c_cols: c.ncols(),
            a_rows: a.nrows(),
            a_cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let p = c.nrows();
    let mut stacked = DMatrix::zeros(p * n, n);
    let mut block = c.clone();
    for k in 0..n {
        stacked.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    Ok(stacked)
}

/// Unobservable subspace of `(C, A)`: the kernel of the stacked
/// observability matrix.
pub fn unobservable_subspace<T: Scalar>(
    c: &DMatrix<T>,
    a: &DMatrix<T>,
) -> Result<Subspace<T>, ObservabilityError<T>> {
    Ok(kernel(&observability_matrix(c, a)?))
}

/// Intersection of subspaces: the kernel of their stacked
/// orthogonal-complement projectors.
pub fn intersect<T: Scalar>(subspaces: &[Subspace<T>]) -> Result<Subspace<T>, ObservabilityError<T>> {
    let Some(first) = subspaces.first() else {
        return Err(ObservabilityError::EmptyIntersection);
    };
    let n = first.dim;
    for s in subspaces {
        if s.dim != n {
            return Err(ObservabilityError::DimensionMismatch { a: n, b: s.dim });
        }
    }
    let eye = DMatrix::<T>::identity(n, n);
    let mut stacked = DMatrix::zeros(n * subspaces.len(), n);
    for (i, s) in subspaces.iter().enumerate() {
        stacked
            .view_mut((i * n, 0), (n, n))
            .copy_from(&(&eye - s.projector()));
    }
    Ok(kernel(&stacked))
}

/// Direction of the membership flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Backward,
}

/// Why a membership verdict came out the way it did.
#[derive(Clone, Debug, PartialEq)]
pub enum MembershipReason<T: Scalar> {
    /// `|h| <= tol` held at every accepted step and the flow stayed in the
    /// mode domain.
    Held,
    /// The output left the tolerance band at `t`.
    OutputNonzero { t: T, value: T },
    /// The flow left the mode domain at `t`; this conflates "not in the set"
    /// with "the solution left the state constraint", so the reason is
    /// reported explicitly.
    LeftDomain { t: T },
}

/// Verdict of a zero-output membership test, carrying the horizon used.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipVerdict<T: Scalar = f64> {
    pub member: bool,
    pub tau: T,
    pub direction: FlowDirection,
    pub reason: MembershipReason<T>,
}

/// Decides membership of `x0` in the zero-output set of `(g, h)` over
/// `[0, tau]` (or `[-tau, 0]` backward) up to numerics: the RK4 flow of
/// `xdot = g` must keep `|h(x(t))| <= tol` at every accepted step while
/// staying inside the mode domain.
pub fn zero_output_membership<T: Scalar>(
    mode: &Mode<T>,
    h: &dyn Fn(&DVector<T>) -> T,
    x0: &DVector<T>,
    tau: T,
    direction: FlowDirection,
    tol: T,
    step: T,
) -> Result<MembershipVerdict<T>, ObservabilityError<T>> {
    if !(tau > T::zero()) {
        return Err(ObservabilityError::NonPositiveTau(tau));
    }
    let backward = direction == FlowDirection::Backward;
    let flow = match flow_mode(mode, x0, tau, step, backward, cast(DEFAULT_BLOWUP_NORM)) {
        Ok(points) => points,
        Err(SimError::DomainViolation { t, .. }) => {
            return Ok(MembershipVerdict {
                member: false,
                tau,
                direction,
                reason: MembershipReason::LeftDomain { t },
            })
        }
        Err(other) => return Err(ObservabilityError::Flow(other)),
    };
    for (t, x) in &flow {
        let value = h(x);
        if value.abs() > tol {
            return Ok(MembershipVerdict {
                member: false,
                tau,
                direction,
                reason: MembershipReason::OutputNonzero { t: *t, value },
            });
        }
    }
    Ok(MembershipVerdict {
        member: true,
        tau,
        direction,
        reason: MembershipReason::Held,
    })
}

/// Default horizon for approximating the infinite-tau zero-output sets:
/// ten times the slowest time constant for linear modes, else 10 s.
pub fn default_membership_tau<T: Scalar>(mode: &Mode<T>) -> T {
    let fallback: T = cast(10.0);
    let Some(a) = mode.linear_matrix() else {
        return fallback;
    };
    let eigs = a.clone().complex_eigenvalues();
    let min_re = eigs
        .iter()
        .map(|l| l.re.abs())
        .filter(|re| *re > cast(1e-9))
        .fold(None::<T>, |acc, re| Some(acc.map_or(re, |a| a.min(re))));
    match min_re {
        Some(re) => cast::<T>(10.0) / re,
        None => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ModeId;
    use crate::system::Domain;

    fn mat(r: usize, c: usize, vals: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, vals)
    }

    #[test]
    fn unobservable_subspace_examples() {
        // C = [1 0], A = diag(-1, 0): stacked [[1,0],[-1,0]], kernel = e2
        let u = unobservable_subspace(&mat(1, 2, &[1.0, 0.0]), &mat(2, 2, &[-1.0, 0.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(u.rank(), 1);
        let e2 = Subspace::from_span(2, &[DVector::from_row_slice(&[0.0, 1.0])]).unwrap();
        assert!(u.projector_distance(&e2) < 1e-12);

        // full observation: trivial unobservable subspace
        let u = unobservable_subspace(&DMatrix::identity(2, 2), &mat(2, 2, &[0.0, 1.0, -1.0, 0.0]))
            .unwrap();
        assert!(u.is_trivial());

        // zero output map: everything unobservable
        let u = unobservable_subspace(&DMatrix::<f64>::zeros(1, 3), &DMatrix::identity(3, 3))
            .unwrap();
        assert_eq!(u.rank(), 3);
    }

    #[test]
    fn kernel_examples() {
        let k = kernel(&mat(2, 2, &[-1.0, 0.0, 0.0, 0.0]));
        let e2 = Subspace::from_span(2, &[DVector::from_row_slice(&[0.0, 1.0])]).unwrap();
        assert!(k.projector_distance(&e2) < 1e-12);

        // wide matrix: thin SVD needs the zero-row padding
        let k = kernel(&mat(1, 2, &[1.0, 0.0]));
        assert_eq!(k.rank(), 1);
        assert!(k.projector_distance(&e2) < 1e-12);

        assert!(kernel(&DMatrix::<f64>::identity(3, 3)).is_trivial());
        assert_eq!(kernel(&DMatrix::<f64>::zeros(2, 2)).rank(), 2);
    }

    #[test]
    fn intersect_examples() {
        let e1 = Subspace::from_span(2, &[DVector::from_row_slice(&[1.0, 0.0])]).unwrap();
        let e2 = Subspace::from_span(2, &[DVector::from_row_slice(&[0.0, 1.0])]).unwrap();
        assert!(intersect(&[e1.clone(), e2.clone()]).unwrap().is_trivial());
        // single subspace: intersection is itself
        assert!(intersect(std::slice::from_ref(&e1)).unwrap().projector_distance(&e1) < 1e-12);
        // commutative up to basis rotation
        let ab = intersect(&[e1.clone(), e2.clone()]).unwrap();
        let ba = intersect(&[e2, e1]).unwrap();
        assert!(ab.projector_distance(&ba) < 1e-9);
        assert!(intersect::<f64>(&[]).is_err());
    }

    #[test]
    fn intersect_of_overlapping_planes() {
        let span = |vs: &[[f64; 3]]| {
            Subspace::from_span(
                3,
                &vs.iter().map(|v| DVector::from_row_slice(v)).collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let xy = span(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let yz = span(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let line = intersect(&[xy, yz]).unwrap();
        assert_eq!(line.rank(), 1);
        let e2 = span(&[[0.0, 1.0, 0.0]]);
        assert!(line.projector_distance(&e2) < 1e-9);
    }

    #[test]
    fn zero_output_membership_examples() {
        // A = diag(-1, 0), h = x1^2: the x2-axis keeps the output at zero
        let a = mat(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        let mode = crate::system::Mode::linear(ModeId(1), a, Domain::all(2)).unwrap();
        let h = |x: &DVector<f64>| x[0] * x[0];

        let on_axis = DVector::from_row_slice(&[0.0, 3.0]);
        let verdict =
            zero_output_membership(&mode, &h, &on_axis, 5.0, FlowDirection::Forward, 1e-8, 1e-2)
                .unwrap();
        assert!(verdict.member);
        assert_eq!(verdict.reason, MembershipReason::Held);

        let off_axis = DVector::from_row_slice(&[1.0, 0.0]);
        let verdict =
            zero_output_membership(&mode, &h, &off_axis, 5.0, FlowDirection::Forward, 1e-8, 1e-2)
                .unwrap();
        assert!(!verdict.member);
        assert!(matches!(
            verdict.reason,
            MembershipReason::OutputNonzero { t, .. } if t == 0.0
        ));

        // rest point with zero output is a member for any direction
        let origin = DVector::from_row_slice(&[0.0, 0.0]);
        for dir in [FlowDirection::Forward, FlowDirection::Backward] {
            let verdict =
                zero_output_membership(&mode, &h, &origin, 7.0, dir, 1e-10, 1e-2).unwrap();
            assert!(verdict.member);
        }
    }

    #[test]
    fn membership_reports_domain_exit() {
        use crate::system::Halfspace;
        // drift out of {x1 >= 0} while the output stays zero
        let field: crate::system::FieldFn<f64> =
            std::sync::Arc::new(|_x: &DVector<f64>| DVector::from_row_slice(&[-1.0, 0.0]));
        let domain = Domain::halfspaces(
            2,
            vec![Halfspace {
                normal: DVector::from_row_slice(&[1.0, 0.0]),
                offset: 0.0,
            }],
        );
        let mode = crate::system::Mode::new(ModeId(1), field, domain);
        let h = |x: &DVector<f64>| x[1];
        let x0 = DVector::from_row_slice(&[0.5, 0.0]);
        let verdict =
            zero_output_membership(&mode, &h, &x0, 5.0, FlowDirection::Forward, 1e-8, 1e-2)
                .unwrap();
        assert!(!verdict.member);
        assert!(matches!(verdict.reason, MembershipReason::LeftDomain { .. }));
    }

    #[test]
    fn unobservable_basis_vectors_pass_membership() {
        let c = mat(1, 3, &[1.0, 1.0, 0.0]);
        let a = mat(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0]);
        let u = unobservable_subspace(&c, &a).unwrap();
        assert!(u.rank() >= 1);
        let mode = crate::system::Mode::linear(ModeId(1), a, Domain::all(3)).unwrap();
        let c_h = c.clone();
        let h = move |x: &DVector<f64>| (&c_h * x).norm_squared();
        for b in u.basis_vectors() {
            let verdict =
                zero_output_membership(&mode, &h, &b, 5.0, FlowDirection::Forward, 1e-7, 1e-2)
                    .unwrap();
            assert!(verdict.member, "basis vector {b:?} rejected");
        }
    }

    #[test]
    fn default_tau_scales_with_slowest_time_constant() {
        let a = mat(2, 2, &[-0.5, 0.0, 0.0, -4.0]);
        let mode = crate::system::Mode::linear(ModeId(1), a, Domain::all(2)).unwrap();
        let tau: f64 = default_membership_tau(&mode);
        assert!((tau - 20.0).abs() < 1e-9);

        // pure rotation has no decaying direction: fall back to 10 s
        let rot = mat(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mode = crate::system::Mode::linear(ModeId(1), rot, Domain::all(2)).unwrap();
        let tau: f64 = default_membership_tau(&mode);
        assert_eq!(tau, 10.0);
    }

    #[test]
    fn subspace_validation() {
        // non-orthonormal basis is rejected
        let skew = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(Subspace::new(2, skew).is_err());
        // from_span orthonormalizes and deduplicates rank
        let s = Subspace::from_span(
            2,
            &[
                DVector::from_row_slice(&[1.0, 1.0]),
                DVector::from_row_slice(&[2.0, 2.0]),
            ],
        )
        .unwrap();
        assert_eq!(s.rank(), 1);
        assert!(s.contains(&DVector::from_row_slice(&[3.0, 3.0]), 1e-9));
        assert!(!s.contains(&DVector::from_row_slice(&[1.0, -1.0]), 1e-9));
    }
}

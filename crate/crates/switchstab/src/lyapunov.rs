//! Multiple-Lyapunov-function machinery: per-mode `(V, grad V, W)` triples
//! with their domains, class-K envelopes, the per-mode decrease inequality
//! `-grad V . f >= W >= 0`, and monotonicity monitors for `v(t)` along
//! simulated trajectories.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::scalar::{cast, Scalar};
use crate::signal::ModeId;
use crate::system::{Domain, SwitchedSystem};

pub type ScalarFn<T> = Arc<dyn Fn(&DVector<T>) -> T + Send + Sync>;
pub type GradientFn<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;
pub type EnvelopeFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Error, Debug)]
pub enum LyapunovError<T: Scalar> {
    #[error("matrix for mode {mode} is not positive definite (lambda_min = {lambda_min})")]
    NotPositiveDefinite { mode: ModeId, lambda_min: T },
    #[error("matrix for mode {mode} is not symmetric")]
    NotSymmetric { mode: ModeId },
    #[error("mode {mode} has no Lyapunov data")]
    UnknownMode { mode: ModeId },
    #[error("mode count mismatch: {p} P matrices vs {c} C matrices")]
    CountMismatch { p: usize, c: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no valid sample points found for mode {mode}")]
    NoValidSamples { mode: ModeId },
    #[error("state outside the Lyapunov domain of mode {mode}")]
    DomainViolation { mode: ModeId },
    #[error("trajectory leaves the Lyapunov domain at t = {t}")]
    TrajectoryLeftDomain { t: T },
    #[error(transparent)]
    System(#[from] crate::system::SystemError<T>),
}

/// Per-mode data: evaluators for `V`, `grad V`, `W` and the open domain they
/// live on.
#[derive(Clone)]
pub struct LyapunovMode<T: Scalar> {
    pub v: ScalarFn<T>,
    pub grad_v: GradientFn<T>,
    pub w: ScalarFn<T>,
    pub domain: Domain<T>,
}

/// A family `(V_gamma, W_gamma)` over the mode set, optionally with class-K
/// envelopes `alpha1(|x|) <= V <= alpha2(|x|)` and a radial-unboundedness
/// flag; quadratic families additionally keep their matrices so analytic
/// checkers can work on them directly.
#[derive(Clone)]
pub struct LyapunovPair<T: Scalar = f64> {
    modes: BTreeMap<ModeId, LyapunovMode<T>>,
    alpha1: Option<EnvelopeFn<T>>,
    alpha2: Option<EnvelopeFn<T>>,
    radially_unbounded: bool,
    quadratic: Option<QuadraticData<T>>,
}

impl<T: Scalar> std::fmt::Debug for LyapunovPair<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LyapunovPair")
            .field("modes", &self.mode_ids())
            .field("quadratic", &self.quadratic.is_some())
            .field("radially_unbounded", &self.radially_unbounded)
            .finish()
    }
}

/// Matrices of a quadratic family `V = x'Px`, `W = |Cx|^2`.
#[derive(Clone, Debug)]
pub struct QuadraticData<T: Scalar> {
    pub p: BTreeMap<ModeId, DMatrix<T>>,
    pub c: BTreeMap<ModeId, DMatrix<T>>,
}

impl<T: Scalar> LyapunovPair<T> {
    pub fn builder() -> LyapunovPairBuilder<T> {
        LyapunovPairBuilder {
            modes: BTreeMap::new(),
            alpha1: None,
            alpha2: None,
            radially_unbounded: false,
        }
    }

    /// Quadratic family from per-mode `(P, C)` matrices with ids `1..=N`.
    ///
    /// Each `P` must be symmetric positive definite (checked through the
    /// smallest eigenvalue); `V = x'Px`, `grad V = 2Px`, `W = |Cx|^2`, and
    /// the envelopes are `lambda_min r^2` and `lambda_max r^2` over all modes.
    pub fn quadratic(
        p_list: &[DMatrix<T>],
        c_list: &[DMatrix<T>],
    ) -> Result<Self, LyapunovError<T>> {
        let ids: Vec<ModeId> = (1..=p_list.len() as u32).map(ModeId).collect();
        Self::quadratic_with_ids(&ids, p_list, c_list)
    }

    pub fn quadratic_with_ids(
        ids: &[ModeId],
        p_list: &[DMatrix<T>],
        c_list: &[DMatrix<T>],
    ) -> Result<Self, LyapunovError<T>> {
        if p_list.len() != c_list.len() || p_list.len() != ids.len() {
            return Err(LyapunovError::CountMismatch {
                p: p_list.len(),
                c: c_list.len(),
            });
        }
        let dim = p_list.first().map_or(0, DMatrix::nrows);
        let mut modes = BTreeMap::new();
        let mut p_map = BTreeMap::new();
        let mut c_map = BTreeMap::new();
        let mut lambda_min_all: Option<T> = None;
        let mut lambda_max_all: Option<T> = None;
        for ((&id, p), c) in ids.iter().zip(p_list).zip(c_list) {
            if p.nrows() != dim || !p.is_square() {
                return Err(LyapunovError::DimensionMismatch {
                    expected: dim,
                    got: p.nrows(),
                });
            }
            if c.ncols() != dim {
                return Err(LyapunovError::DimensionMismatch {
                    expected: dim,
                    got: c.ncols(),
                });
            }
            let scale = T::one().max(p.norm());
            if (p - p.transpose()).norm() > cast::<T>(1e-10) * scale {
                return Err(LyapunovError::NotSymmetric { mode: id });
            }
            let sym = (p + p.transpose()) * cast::<T>(0.5);
            let eigen = sym.clone().symmetric_eigen();
            let lambda_min = eigen.eigenvalues.iter().copied().fold(
                T::max_value().expect("bounded scalar"),
                |a, b| a.min(b),
            );
            let lambda_max = eigen
                .eigenvalues
                .iter()
                .copied()
                .fold(T::zero(), |a, b| a.max(b));
            if !(lambda_min > T::zero()) {
                return Err(LyapunovError::NotPositiveDefinite {
                    mode: id,
                    lambda_min,
                });
            }
            lambda_min_all = Some(lambda_min_all.map_or(lambda_min, |a: T| a.min(lambda_min)));
            lambda_max_all = Some(lambda_max_all.map_or(lambda_max, |a: T| a.max(lambda_max)));

            let p_v = sym.clone();
            let v: ScalarFn<T> = Arc::new(move |x: &DVector<T>| (&p_v * x).dot(x));
            let p_g = sym.clone();
            let grad_v: GradientFn<T> =
                Arc::new(move |x: &DVector<T>| (&p_g * x) * cast::<T>(2.0));
            let c_w = c.clone();
            let w: ScalarFn<T> = Arc::new(move |x: &DVector<T>| (&c_w * x).norm_squared());
            modes.insert(
                id,
                LyapunovMode {
                    v,
                    grad_v,
                    w,
                    domain: Domain::all(dim),
                },
            );
            p_map.insert(id, sym);
            c_map.insert(id, c.clone());
        }
        let lo = lambda_min_all.unwrap_or_else(T::one);
        let hi = lambda_max_all.unwrap_or_else(T::one);
        Ok(Self {
            modes,
            alpha1: Some(Arc::new(move |r: T| lo * r * r)),
            alpha2: Some(Arc::new(move |r: T| hi * r * r)),
            radially_unbounded: true,
            quadratic: Some(QuadraticData { p: p_map, c: c_map }),
        })
    }

    pub fn mode_ids(&self) -> Vec<ModeId> {
        self.modes.keys().copied().collect()
    }

    pub fn mode(&self, id: ModeId) -> Result<&LyapunovMode<T>, LyapunovError<T>> {
        self.modes
            .get(&id)
            .ok_or(LyapunovError::UnknownMode { mode: id })
    }

    pub fn v(&self, id: ModeId, x: &DVector<T>) -> Result<T, LyapunovError<T>> {
        Ok((self.mode(id)?.v)(x))
    }

    pub fn grad_v(&self, id: ModeId, x: &DVector<T>) -> Result<DVector<T>, LyapunovError<T>> {
        Ok((self.mode(id)?.grad_v)(x))
    }

    pub fn w(&self, id: ModeId, x: &DVector<T>) -> Result<T, LyapunovError<T>> {
        Ok((self.mode(id)?.w)(x))
    }

    pub fn alpha1(&self) -> Option<&EnvelopeFn<T>> {
        self.alpha1.as_ref()
    }

    pub fn alpha2(&self) -> Option<&EnvelopeFn<T>> {
        self.alpha2.as_ref()
    }

    pub fn is_radially_unbounded(&self) -> bool {
        self.radially_unbounded
    }

    pub fn quadratic_data(&self) -> Option<&QuadraticData<T>> {
        self.quadratic.as_ref()
    }

    /// True when every mode shares one `P` matrix (so `v` cannot jump).
    pub fn has_common_p(&self) -> bool {
        let Some(q) = &self.quadratic else { return false };
        let mut iter = q.p.values();
        let Some(first) = iter.next() else { return false };
        let scale = T::one().max(first.norm());
        iter.all(|p| (p - first).norm() <= cast::<T>(1e-12) * scale)
    }
}

pub struct LyapunovPairBuilder<T: Scalar> {
    modes: BTreeMap<ModeId, LyapunovMode<T>>,
    alpha1: Option<EnvelopeFn<T>>,
    alpha2: Option<EnvelopeFn<T>>,
    radially_unbounded: bool,
}

impl<T: Scalar> LyapunovPairBuilder<T> {
    pub fn mode(
        mut self,
        id: ModeId,
        v: ScalarFn<T>,
        grad_v: GradientFn<T>,
        w: ScalarFn<T>,
        domain: Domain<T>,
    ) -> Self {
        self.modes.insert(
            id,
            LyapunovMode {
                v,
                grad_v,
                w,
                domain,
            },
        );
        self
    }

    pub fn envelopes(mut self, alpha1: EnvelopeFn<T>, alpha2: EnvelopeFn<T>) -> Self {
        self.alpha1 = Some(alpha1);
        self.alpha2 = Some(alpha2);
        self
    }

    pub fn radially_unbounded(mut self, flag: bool) -> Self {
        self.radially_unbounded = flag;
        self
    }

    pub fn build(self) -> LyapunovPair<T> {
        LyapunovPair {
            modes: self.modes,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            radially_unbounded: self.radially_unbounded,
            quadratic: None,
        }
    }
}

/// JSON interchange for quadratic pairs: parallel per-mode matrix lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadraticPairJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Vec<f64>>>,
}

/// Schema tag for quadratic pair files.
pub const PAIR_SCHEMA: &str = "switchstab/quadratic-pair/v1";

impl QuadraticPairJson {
    pub fn build(&self) -> Result<LyapunovPair<f64>, LyapunovError<f64>> {
        let to_mat = |rows: &Vec<Vec<f64>>| {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
        };
        let p: Vec<DMatrix<f64>> = self.p.iter().map(to_mat).collect();
        let c: Vec<DMatrix<f64>> = self.c.iter().map(to_mat).collect();
        LyapunovPair::quadratic(&p, &c)
    }
}

/// Worst sampled margins of the decrease inequality.
#[derive(Clone, Debug, Serialize)]
pub struct DecreaseReport<T: Scalar = f64> {
    pub pass: bool,
    pub samples: usize,
    /// Smallest sampled value of `-grad V . f - W` (nonnegative when the
    /// inequality holds).
    pub worst_margin: T,
    /// Smallest sampled value of `W`.
    pub worst_w: T,
    pub witness: Option<DecreaseWitness<T>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecreaseWitness<T: Scalar = f64> {
    pub mode: ModeId,
    pub x: Vec<T>,
    pub margin: T,
    pub w_value: T,
}

/// Samples `-grad V_g . f_g >= W_g >= 0` on `O_g âˆ© chi_g` for every mode.
///
/// Points are drawn from the Lyapunov domain's sampling box and accepted when
/// they satisfy both membership predicates; the check fails on the first
/// sampled point violating either inequality beyond a relative rounding slack.
pub fn check_decrease_inequality<T: Scalar>(
    sys: &SwitchedSystem<T>,
    pair: &LyapunovPair<T>,
    n_samples: usize,
    seed: u64,
) -> Result<DecreaseReport<T>, LyapunovError<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DecreaseReport {
        pass: true,
        samples: 0,
        worst_margin: T::max_value().expect("bounded scalar"),
        worst_w: T::max_value().expect("bounded scalar"),
        witness: None,
    };
    for &id in &pair.mode_ids() {
        let lmode = pair.mode(id)?;
        let smode = sys.mode(id)?;
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        let budget = n_samples.saturating_mul(64).max(64);
        while accepted < n_samples && attempts < budget {
            attempts += 1;
            let x = lmode.domain.bbox.sample(&mut rng);
            if !(lmode.domain.contains(&x) && smode.domain().contains(&x)) {
                continue;
            }
            accepted += 1;
            report.samples += 1;
            let f = smode.eval(&x);
            let grad = (lmode.grad_v)(&x);
            let w = (lmode.w)(&x);
            let margin = -grad.dot(&f) - w;
            let slack = cast::<T>(1e-12) * (T::one() + grad.dot(&f).abs() + w.abs());
            report.worst_margin = report.worst_margin.min(margin);
            report.worst_w = report.worst_w.min(w);
            if (margin < -slack || w < -slack) && report.pass {
                report.pass = false;
                report.witness = Some(DecreaseWitness {
                    mode: id,
                    x: x.iter().copied().collect(),
                    margin,
                    w_value: w,
                });
            }
        }
        if accepted == 0 {
            return Err(LyapunovError::NoValidSamples { mode: id });
        }
    }
    Ok(report)
}

/// Monotonicity verdict for `v(t)` along one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct VMonitorReport<T: Scalar = f64> {
    /// `(t, v)` over the trajectory samples.
    pub series: Vec<(T, T)>,
    pub nonincreasing: bool,
    pub max_uphill: T,
    pub first_violation: Option<VViolation<T>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VViolation<T: Scalar = f64> {
    pub t: T,
    pub delta: T,
    pub mode: ModeId,
}

/// Tolerances for the monitor.
///
/// A step is "uphill" when `v` grows by more than `step_slack`; the run fails
/// when `persistence` consecutive uphill steps occur, or immediately when a
/// single step grows by more than `jump_tol` (a jump-sized increase, e.g. at
/// a switch between different quadratics).
#[derive(Clone, Debug)]
pub struct MonitorOptions<T: Scalar> {
    pub step_slack: T,
    pub jump_tol: T,
    pub persistence: usize,
}

impl<T: Scalar> Default for MonitorOptions<T> {
    fn default() -> Self {
        Self {
            step_slack: cast(1e-9),
            jump_tol: cast(1e-6),
            persistence: 3,
        }
    }
}

/// Checks `v(t) = V(x(t), sigma(t))` for monotone decrease.
///
/// `mode_restricted = false` checks the whole sample sequence (weak pairs);
/// `mode_restricted = true` checks, for each mode, the subsequence of samples
/// where that mode is active, including comparisons across the gaps where
/// other modes run (F-weak pairs).
pub fn monitor_v<T: Scalar>(
    traj: &Trajectory<T>,
    pair: &LyapunovPair<T>,
    mode_restricted: bool,
    opts: &MonitorOptions<T>,
) -> Result<VMonitorReport<T>, LyapunovError<T>> {
    // domain precondition: the trajectory must stay inside the union of the
    // per-mode Lyapunov domains
    for s in traj.samples() {
        let lmode = pair.mode(s.mode)?;
        if !lmode.domain.contains(&s.x) {
            return Err(LyapunovError::TrajectoryLeftDomain { t: s.t });
        }
    }
    let series: Vec<(T, T)> = traj
        .samples()
        .iter()
        .map(|s| Ok((s.t, (pair.mode(s.mode)?.v)(&s.x))))
        .collect::<Result<_, LyapunovError<T>>>()?;

    let mut report = VMonitorReport {
        series,
        nonincreasing: true,
        max_uphill: T::zero(),
        first_violation: None,
    };

    let mut check_sequence = |idx: &[usize], vs: &dyn Fn(usize) -> T| {
        let mut consecutive = 0usize;
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            let delta = vs(b) - vs(a);
            report.max_uphill = report.max_uphill.max(delta);
            let uphill = delta > opts.step_slack;
            if uphill {
                consecutive += 1;
            } else {
                consecutive = 0;
            }
            if (delta > opts.jump_tol || consecutive >= opts.persistence)
                && report.first_violation.is_none()
            {
                report.nonincreasing = false;
                report.first_violation = Some(VViolation {
                    t: traj.samples()[b].t,
                    delta,
                    mode: traj.samples()[b].mode,
                });
            }
        }
    };

    if mode_restricted {
        let mut modes: Vec<ModeId> = traj.samples().iter().map(|s| s.mode).collect();
        modes.sort();
        modes.dedup();
        for mode in modes {
            let idx: Vec<usize> = traj
                .samples()
                .iter()
                .enumerate()
                .filter(|(_, s)| s.mode == mode)
                .map(|(i, _)| i)
                .collect();
            let lmode = pair.mode(mode)?;
            let samples = traj.samples();
            let vs = move |i: usize| (lmode.v)(&samples[i].x);
            check_sequence(&idx, &vs);
        }
    } else {
        let idx: Vec<usize> = (0..traj.samples().len()).collect();
        let series = report.series.clone();
        let vs = move |i: usize| series[i].1;
        check_sequence(&idx, &vs);
    }
    Ok(report)
}

/// True iff `|grad V_g(x) . f_g(x)| <= tol`, with both domain preconditions
/// enforced.
pub fn in_z_v<T: Scalar>(
    sys: &SwitchedSystem<T>,
    pair: &LyapunovPair<T>,
    x: &DVector<T>,
    gamma: ModeId,
    tol: T,
) -> Result<bool, LyapunovError<T>> {
    let lmode = pair.mode(gamma)?;
    if !lmode.domain.contains(x) {
        return Err(LyapunovError::DomainViolation { mode: gamma });
    }
    let f = sys.eval_field(x, gamma)?;
    Ok(((lmode.grad_v)(x)).dot(&f).abs() <= tol)
}

/// Largest relative deviation between the supplied gradient and central
/// finite differences of `V`, over sampled points per mode.
pub fn check_gradient_consistency<T: Scalar>(
    pair: &LyapunovPair<T>,
    n_samples: usize,
    seed: u64,
) -> Result<T, LyapunovError<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: T = cast(1e-6);
    let mut worst = T::zero();
    for &id in &pair.mode_ids() {
        let lmode = pair.mode(id)?;
        let dim = lmode.domain.bbox.dim();
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < n_samples && attempts < n_samples * 64 + 64 {
            attempts += 1;
            let x = lmode.domain.bbox.sample(&mut rng);
            if !lmode.domain.contains(&x) {
                continue;
            }
            accepted += 1;
            let mut fd = DVector::zeros(dim);
            for i in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd[i] = ((lmode.v)(&xp) - (lmode.v)(&xm)) / (h + h);
            }
            let grad = (lmode.grad_v)(&x);
            let denom = T::one().max(grad.norm());
            worst = worst.max((fd - grad).norm() / denom);
        }
        if accepted == 0 {
            return Err(LyapunovError::NoValidSamples { mode: id });
        }
    }
    Ok(worst)
}

/// Result of the sampled positive-definiteness check.
#[derive(Clone, Debug)]
pub struct PositiveDefiniteCheck<T: Scalar> {
    /// Smallest sampled `V(x) / |x|^2`; a genuinely positive-definite `V`
    /// keeps this bounded away from zero.
    pub min_ratio: T,
    /// Mode and point where `V` fails the check, if any.
    pub witness: Option<(ModeId, Vec<T>)>,
}

/// Sampled check that each `V_gamma` is positive definite on its domain
/// intersected with the mode domain: `V(0) ~ 0`, `V(x) > 0` away from the
/// origin, and the ratio `V(x)/|x|^2` stays above `ratio_tol` (a near-zero
/// ratio exposes zero sets of measure zero that point sampling alone would
/// miss). Stands in for the uniqueness assumption when the user does not
/// assert it.
pub fn check_positive_definite_v<T: Scalar>(
    sys: &SwitchedSystem<T>,
    pair: &LyapunovPair<T>,
    n_samples: usize,
    seed: u64,
    ratio_tol: T,
) -> Result<PositiveDefiniteCheck<T>, LyapunovError<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin_tol: T = cast(1e-9);
    let exclusion: T = cast(1e-3);
    let mut check = PositiveDefiniteCheck {
        min_ratio: T::max_value().expect("bounded scalar"),
        witness: None,
    };
    for &id in &pair.mode_ids() {
        let lmode = pair.mode(id)?;
        let smode = sys.mode(id)?;
        let zero = DVector::zeros(lmode.domain.bbox.dim());
        if smode.domain().contains(&zero) && lmode.domain.contains(&zero) {
            let v0 = (lmode.v)(&zero);
            if v0.abs() > origin_tol && check.witness.is_none() {
                check.witness = Some((id, zero.iter().copied().collect()));
            }
        }
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < n_samples && attempts < n_samples * 64 + 64 {
            attempts += 1;
            let x = lmode.domain.bbox.sample(&mut rng);
            if x.norm() <= exclusion
                || !lmode.domain.contains(&x)
                || !smode.domain().contains(&x)
            {
                continue;
            }
            accepted += 1;
            let ratio = (lmode.v)(&x) / x.norm_squared();
            check.min_ratio = check.min_ratio.min(ratio);
            if ratio < ratio_tol && check.witness.is_none() {
                check.witness = Some((id, x.iter().copied().collect()));
            }
        }
        if accepted == 0 {
            return Err(LyapunovError::NoValidSamples { mode: id });
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, SimOptions};
    use crate::signal::SwitchingSignal;

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn decoupled() -> SwitchedSystem<f64> {
        SwitchedSystem::from_matrices(&[
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
        ])
        .unwrap()
    }

    fn decoupled_pair() -> LyapunovPair<f64> {
        LyapunovPair::quadratic(
            &[eye(2), eye(2)],
            &[
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    fn alternating(period: f64, t_end: f64) -> SwitchingSignal<f64> {
        let mut switches = Vec::new();
        let mut mode = 1u32;
        let mut t = period;
        while t < t_end {
            mode = if mode == 1 { 2 } else { 1 };
            switches.push((t, ModeId(mode)));
            t += period;
        }
        SwitchingSignal::new(0.0, t_end, ModeId(1), switches).unwrap()
    }

    #[test]
    fn quadratic_pair_construction() {
        let pair = LyapunovPair::quadratic(&[eye(2)], &[DMatrix::from_row_slice(1, 2, &[1.0, 0.0])])
            .unwrap();
        let x = DVector::from_row_slice(&[2.0, 3.0]);
        assert_eq!(pair.v(ModeId(1), &x).unwrap(), 13.0);
        assert_eq!(pair.w(ModeId(1), &x).unwrap(), 4.0);
        assert_eq!(
            pair.grad_v(ModeId(1), &x).unwrap(),
            DVector::from_row_slice(&[4.0, 6.0])
        );
        let a1 = pair.alpha1().unwrap();
        let a2 = pair.alpha2().unwrap();
        assert_eq!(a1(2.0), 4.0);
        assert_eq!(a2(2.0), 4.0);
        assert!(pair.is_radially_unbounded());
        assert!(pair.has_common_p());
    }

    #[test]
    fn quadratic_pair_rejects_non_pd() {
        let err = LyapunovPair::quadratic(
            &[DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
            &[DMatrix::from_row_slice(1, 2, &[1.0, 0.0])],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            LyapunovError::NotPositiveDefinite { mode: ModeId(1), .. }
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pair = LyapunovPair::quadratic(
            &[DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])],
            &[DMatrix::from_row_slice(1, 2, &[1.0, 1.0])],
        )
        .unwrap();
        let worst = check_gradient_consistency(&pair, 100, 3).unwrap();
        assert!(worst <= 1e-5, "worst relative deviation {worst}");
    }

    #[test]
    fn decrease_inequality_examples() {
        // V = |x|^2, f = -x, W = |x|^2: margin |x|^2 >= 0
        let sys = SwitchedSystem::from_matrices(&[-eye(2)]).unwrap();
        let good = LyapunovPair::quadratic(&[eye(2)], &[eye(2).scale(2.0f64.sqrt())]).unwrap();
        let report = check_decrease_inequality(&sys, &good, 200, 11).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
        assert!(report.worst_w >= 0.0);

        // W = 3|x|^2 breaks the inequality everywhere away from the origin
        let bad = LyapunovPair::quadratic(&[eye(2)], &[eye(2).scale(3.0f64.sqrt())]).unwrap();
        let report = check_decrease_inequality(&sys, &bad, 200, 11).unwrap();
        assert!(!report.pass);
        let witness = report.witness.unwrap();
        assert!(witness.margin < 0.0);

        // the worked corollary pair
        let sys = decoupled();
        let report = check_decrease_inequality(&sys, &decoupled_pair(), 200, 11).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
    }

    #[test]
    fn monitor_v_global_nonincreasing_on_decoupled_example() {
        let sys = decoupled();
        let pair = decoupled_pair();
        let sig = alternating(1.0, 8.0);
        let traj = simulate(
            &sys,
            &sig,
            &DVector::from_row_slice(&[1.0, 1.0]),
            (0.0, 8.0),
            1e-3,
            false,
            &SimOptions::default(),
        )
        .unwrap();
        let report = monitor_v(&traj, &pair, false, &MonitorOptions::default()).unwrap();
        assert!(report.nonincreasing, "max uphill {}", report.max_uphill);
        assert!(report.max_uphill <= 1e-9);
    }

    #[test]
    fn monitor_v_flat_on_pure_rotation() {
        let sys = SwitchedSystem::from_matrices(&[DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0, 0.0],
        )])
        .unwrap();
        let pair = LyapunovPair::quadratic(&[eye(2)], &[DMatrix::zeros(1, 2)]).unwrap();
        let sig = SwitchingSignal::constant(0.0, 10.0, ModeId(1)).unwrap();
        let traj = simulate(
            &sys,
            &sig,
            &DVector::from_row_slice(&[1.0, 0.0]),
            (0.0, 10.0),
            1e-3,
            false,
            &SimOptions::default(),
        )
        .unwrap();
        let report = monitor_v(&traj, &pair, false, &MonitorOptions::default()).unwrap();
        assert!(report.nonincreasing);
    }

    #[test]
    fn monitor_v_distinguishes_global_from_per_mode() {
        // P1 = I, P2 = 2I: v jumps up at switches into mode 2, so the global
        // check fails while every per-mode restriction still decreases
        let sys = decoupled();
        let pair = LyapunovPair::quadratic(
            &[eye(2), eye(2).scale(2.0)],
            &[
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            ],
        )
        .unwrap();
        assert!(!pair.has_common_p());
        let sig = alternating(1.0, 8.0);
        let traj = simulate(
            &sys,
            &sig,
            &DVector::from_row_slice(&[1.0, 0.0]),
            (0.0, 8.0),
            1e-3,
            false,
            &SimOptions::default(),
        )
        .unwrap();
        let global = monitor_v(&traj, &pair, false, &MonitorOptions::default()).unwrap();
        assert!(!global.nonincreasing);
        assert!(global.first_violation.is_some());
        let per_mode = monitor_v(&traj, &pair, true, &MonitorOptions::default()).unwrap();
        assert!(per_mode.nonincreasing, "max uphill {}", per_mode.max_uphill);
    }

    #[test]
    fn in_z_v_examples() {
        let sys = SwitchedSystem::from_matrices(&[-eye(2)]).unwrap();
        let pair = LyapunovPair::quadratic(&[eye(2)], &[eye(2)]).unwrap();
        let origin = DVector::from_row_slice(&[0.0, 0.0]);
        assert!(in_z_v(&sys, &pair, &origin, ModeId(1), 1e-12).unwrap());
        let x = DVector::from_row_slice(&[1.0, 0.0]);
        assert!(!in_z_v(&sys, &pair, &x, ModeId(1), 1e-12).unwrap());

        // rotation is orthogonal to the gradient of |x|^2 everywhere
        let rot = SwitchedSystem::from_matrices(&[DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0, 0.0],
        )])
        .unwrap();
        let pair = LyapunovPair::quadratic(&[eye(2)], &[DMatrix::zeros(1, 2)]).unwrap();
        for p in [[1.0, 0.0], [0.3, -0.7], [2.0, 1.5]] {
            let x = DVector::from_row_slice(&p);
            assert!(in_z_v(&rot, &pair, &x, ModeId(1), 1e-12).unwrap());
        }
    }

    #[test]
    fn positive_definite_check_accepts_quadratics_and_flags_degenerate_v() {
        let sys = decoupled();
        let check = check_positive_definite_v(&sys, &decoupled_pair(), 100, 5, 1e-4).unwrap();
        assert!(check.witness.is_none(), "min ratio {}", check.min_ratio);
        assert!(check.min_ratio >= 0.9);

        // hand-built V that vanishes on the whole x2-axis
        let v: ScalarFn<f64> = Arc::new(|x: &DVector<f64>| x[0] * x[0]);
        let grad: GradientFn<f64> =
            Arc::new(|x: &DVector<f64>| DVector::from_row_slice(&[2.0 * x[0], 0.0]));
        let w: ScalarFn<f64> = Arc::new(|_x: &DVector<f64>| 0.0);
        let degenerate = LyapunovPair::builder()
            .mode(ModeId(1), v.clone(), grad.clone(), w.clone(), Domain::all(2))
            .mode(ModeId(2), v, grad, w, Domain::all(2))
            .build();
        let check = check_positive_definite_v(&sys, &degenerate, 400, 5, 1e-4).unwrap();
        assert!(check.witness.is_some(), "min ratio {}", check.min_ratio);
    }

    #[test]
    fn quadratic_pair_json_round_trip() {
        let text = r#"{"P": [[[1.0, 0.0], [0.0, 1.0]]], "C": [[[1.0, 0.0]]]}"#;
        let dto: QuadraticPairJson = serde_json::from_str(text).unwrap();
        let pair = dto.build().unwrap();
        assert_eq!(pair.mode_ids(), vec![ModeId(1)]);
        let back = serde_json::to_string(&dto).unwrap();
        assert!(back.contains("\"P\""));
    }
}

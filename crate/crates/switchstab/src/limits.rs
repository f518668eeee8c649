//! Finite-sample estimators for omega-limit sets, their switch-aware
//! refinement over state-mode pairs, convergence-to-set checks, and the
//! weak-meagreness semi-decision for scalar outputs.

use nalgebra::DVector;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::scalar::{cast, Scalar};
use crate::signal::ModeId;

#[derive(Error, Debug)]
pub enum LimitsError<T: Scalar> {
    #[error("tail fraction must lie in (0, 1), got {0}")]
    BadTailFraction(T),
    #[error("cluster tolerance must be positive, got {0}")]
    BadClusterTol(T),
    #[error("trajectory unbounded (max state norm {max_norm})")]
    Unbounded { max_norm: T },
    #[error("r_min {r_min} too large: no sample keeps that distance to its next switch")]
    RMinTooLarge { r_min: T },
    #[error("check time {t} outside the simulated span")]
    OutOfSpan { t: T },
    #[error("window length must be positive, got {0}")]
    BadWindow(T),
    #[error("series span {span} shorter than {n_windows} windows of length {window}")]
    SeriesTooShort { span: T, window: T, n_windows: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

/// Finite set of states approximating a limit set, deduplicated so that the
/// retained points are pairwise farther apart than `cluster_tol`.
#[derive(Clone, Debug, Serialize)]
pub struct SetEstimate<T: Scalar = f64> {
    points: Vec<Vec<T>>,
    cluster_tol: T,
}

impl<T: Scalar> SetEstimate<T> {
    pub fn from_states<'a>(
        states: impl IntoIterator<Item = &'a DVector<T>>,
        cluster_tol: T,
    ) -> Result<Self, LimitsError<T>>
    where
        T: 'a,
    {
        if !(cluster_tol > T::zero()) {
            return Err(LimitsError::BadClusterTol(cluster_tol));
        }
        let mut kept: Vec<DVector<T>> = Vec::new();
        for x in states {
            if kept.iter().all(|p| (p - x).norm() > cluster_tol) {
                kept.push(x.clone());
            }
        }
        Ok(Self {
            points: kept.iter().map(|p| p.iter().copied().collect()).collect(),
            cluster_tol,
        })
    }

    pub fn singleton(x: &DVector<T>, cluster_tol: T) -> Self {
        Self {
            points: vec![x.iter().copied().collect()],
            cluster_tol,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cluster_tol(&self) -> T {
        self.cluster_tol
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = DVector<T>> + '_ {
        self.points.iter().map(|p| DVector::from_row_slice(p))
    }

    /// Distance from `x` to the estimate (infimum over stored points).
    pub fn distance_to(&self, x: &DVector<T>) -> T {
        self.points
            .iter()
            .map(|p| (DVector::from_row_slice(p) - x).norm())
            .fold(T::max_value().expect("bounded scalar"), |a, b| a.min(b))
    }

    /// One-sided Hausdorff distance `sup_{p in self} d(p, other)`.
    pub fn directed_hausdorff(&self, other: &SetEstimate<T>) -> T {
        self.points()
            .map(|p| other.distance_to(&p))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Symmetric Hausdorff distance between two estimates.
    pub fn hausdorff(&self, other: &SetEstimate<T>) -> T {
        self.directed_hausdorff(other)
            .max(other.directed_hausdorff(self))
    }
}

/// Finite set of `(state, mode)` pairs; states cluster per mode.
#[derive(Clone, Debug, Serialize)]
pub struct ModedSetEstimate<T: Scalar = f64> {
    entries: Vec<(Vec<T>, ModeId)>,
    cluster_tol: T,
}

impl<T: Scalar> ModedSetEstimate<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = (DVector<T>, ModeId)> + '_ {
        self.entries
            .iter()
            .map(|(p, m)| (DVector::from_row_slice(p), *m))
    }

    pub fn modes(&self) -> Vec<ModeId> {
        let mut modes: Vec<ModeId> = self.entries.iter().map(|&(_, m)| m).collect();
        modes.sort();
        modes.dedup();
        modes
    }

    /// Projection onto states, re-deduplicated at the same tolerance.
    pub fn project_states(&self) -> SetEstimate<T> {
        let states: Vec<DVector<T>> = self
            .entries
            .iter()
            .map(|(p, _)| DVector::from_row_slice(p))
            .collect();
        SetEstimate::from_states(states.iter(), self.cluster_tol)
            .expect("tolerance validated at construction")
    }
}

fn tail_samples<T: Scalar>(
    traj: &Trajectory<T>,
    tail_fraction: T,
) -> Result<impl Iterator<Item = &crate::integrator::Sample<T>>, LimitsError<T>> {
    if !(tail_fraction > T::zero() && tail_fraction < T::one()) {
        return Err(LimitsError::BadTailFraction(tail_fraction));
    }
    let max_norm = traj.stats().max_norm;
    if !max_norm.is_finite() {
        return Err(LimitsError::Unbounded { max_norm });
    }
    let (t0, t1) = traj.span();
    let t_tail = t1 - tail_fraction * (t1 - t0);
    Ok(traj.samples().iter().filter(move |s| s.t >= t_tail))
}

/// Estimates the omega-limit set from the trailing `tail_fraction` of the run.
pub fn omega_limit<T: Scalar>(
    traj: &Trajectory<T>,
    tail_fraction: T,
    cluster_tol: T,
) -> Result<SetEstimate<T>, LimitsError<T>> {
    let states: Vec<&DVector<T>> = tail_samples(traj, tail_fraction)?.map(|s| &s.x).collect();
    SetEstimate::from_states(states, cluster_tol)
}

/// Switch-aware refinement: tail samples are kept only at times whose
/// distance to the next switch is at least `r_min` (no further switch counts
/// as infinite distance), paired with the active mode.
pub fn omega_sharp<T: Scalar>(
    traj: &Trajectory<T>,
    tail_fraction: T,
    r_min: T,
    cluster_tol: T,
) -> Result<ModedSetEstimate<T>, LimitsError<T>> {
    if !(cluster_tol > T::zero()) {
        return Err(LimitsError::BadClusterTol(cluster_tol));
    }
    let sig = traj.signal().clone();
    let mut kept: Vec<(DVector<T>, ModeId)> = Vec::new();
    let mut any_candidate = false;
    for s in tail_samples(traj, tail_fraction)? {
        let gap_ok = if s.t < sig.t_end() {
            match sig.next_switch_time(s.t) {
                Ok(Some(next)) => next - s.t >= r_min,
                Ok(None) => true,
                Err(_) => true,
            }
        } else {
            // horizon end: no further switch inside the horizon
            true
        };
        if !gap_ok {
            continue;
        }
        any_candidate = true;
        if kept
            .iter()
            .all(|(p, m)| *m != s.mode || (p - &s.x).norm() > cluster_tol)
        {
            kept.push((s.x.clone(), s.mode));
        }
    }
    if !any_candidate {
        return Err(LimitsError::RMinTooLarge { r_min });
    }
    Ok(ModedSetEstimate {
        entries: kept
            .into_iter()
            .map(|(p, m)| (p.iter().copied().collect(), m))
            .collect(),
        cluster_tol,
    })
}

/// Distance evaluator `x -> d(x, target)` supplied by the caller.
pub type DistanceFn<T> = Arc<dyn Fn(&DVector<T>) -> T + Send + Sync>;

/// Convergence target: an explicit point set or a user distance function.
#[derive(Clone)]
pub enum TargetSet<T: Scalar = f64> {
    Points(SetEstimate<T>),
    Distance(DistanceFn<T>),
}

impl<T: Scalar> TargetSet<T> {
    /// The origin of `R^dim`.
    pub fn origin(dim: usize) -> Self {
        TargetSet::Points(SetEstimate::singleton(
            &DVector::zeros(dim),
            cast(1e-9),
        ))
    }

    pub fn distance(&self, x: &DVector<T>) -> T {
        match self {
            TargetSet::Points(set) => set.distance_to(x),
            TargetSet::Distance(f) => f(x),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for TargetSet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetSet::Points(set) => f.debug_tuple("Points").field(&set.len()).finish(),
            TargetSet::Distance(_) => write!(f, "Distance(..)"),
        }
    }
}

/// True iff `d(x(t), target) <= eps` for every sampled `t >= t_check`.
pub fn converges_to<T: Scalar>(
    traj: &Trajectory<T>,
    target: &TargetSet<T>,
    eps: T,
    t_check: T,
) -> Result<bool, LimitsError<T>> {
    let (t0, t1) = traj.span();
    if !(t_check >= t0 && t_check <= t1) {
        return Err(LimitsError::OutOfSpan { t: t_check });
    }
    Ok(traj
        .samples()
        .iter()
        .filter(|s| s.t >= t_check)
        .all(|s| target.distance(&s.x) <= eps))
}

/// Sampled scalar output `y(t)` with strictly increasing times.
#[derive(Clone, Debug)]
pub struct ScalarSeries<T: Scalar = f64> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self, LimitsError<T>> {
        if times.len() != values.len() || times.is_empty() {
            return Err(LimitsError::InvalidSeries(
                "times and values must be nonempty and of equal length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LimitsError::InvalidSeries(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Builds `y(t) = h(x(t), sigma(t))` along a trajectory.
    pub fn from_trajectory(
        traj: &Trajectory<T>,
        h: impl Fn(&DVector<T>, ModeId) -> T,
    ) -> Self {
        let times = traj.samples().iter().map(|s| s.t).collect();
        let values = traj.samples().iter().map(|s| h(&s.x, s.mode)).collect();
        Self { times, values }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn span(&self) -> T {
        *self.times.last().expect("nonempty") - self.times[0]
    }
}

/// Verdict of the weak-meagreness estimator.
///
/// This is a semi-decision: weak meagreness quantifies over all families of
/// uniformly long disjoint windows, while the estimator inspects one family,
/// so a passing verdict only reports consistency.
#[derive(Clone, Debug, Serialize)]
pub struct MeagrenessReport<T: Scalar = f64> {
    pub infima: Vec<T>,
    pub consistent: bool,
    pub tol: T,
}

/// Default verdict tolerance on the final window infimum.
pub const DEFAULT_MEAGRE_TOL: f64 = 1e-3;

/// Computes `inf |y|` over `n_windows` consecutive disjoint windows and
/// reports whether the infima sequence is consistent with vanishing: the
/// last infimum must be at most `tol` and the second-half mean must not
/// exceed the first-half mean by more than `tol`.
pub fn weakly_meagre_estimate<T: Scalar>(
    series: &ScalarSeries<T>,
    window: T,
    n_windows: usize,
    tol: T,
) -> Result<MeagrenessReport<T>, LimitsError<T>> {
    if !(window > T::zero()) {
        return Err(LimitsError::BadWindow(window));
    }
    if n_windows == 0 {
        return Err(LimitsError::InvalidSeries("need at least one window".into()));
    }
    let span = series.span();
    let needed = window * T::from_usize(n_windows).expect("window count fits the scalar");
    if span < needed {
        return Err(LimitsError::SeriesTooShort {
            span,
            window,
            n_windows,
        });
    }
    let t0 = series.times()[0];
    let mut infima = Vec::with_capacity(n_windows);
    for k in 0..n_windows {
        let lo = t0 + window * T::from_usize(k).expect("index fits the scalar");
        let hi = lo + window;
        let inf = series
            .times()
            .iter()
            .zip(series.values())
            .filter(|(t, _)| **t >= lo && **t < hi)
            .map(|(_, v)| v.abs())
            .fold(None::<T>, |acc, v| Some(acc.map_or(v, |a| a.min(v))));
        match inf {
            Some(v) => infima.push(v),
            None => {
                return Err(LimitsError::InvalidSeries(format!(
                    "window {k} contains no samples"
                )))
            }
        }
    }
    let last_ok = *infima.last().expect("n_windows >= 1") <= tol;
    let trend_ok = if infima.len() < 4 {
        true
    } else {
        let half = infima.len() / 2;
        let mean = |xs: &[T]| {
            xs.iter().copied().fold(T::zero(), |a, b| a + b)
                / T::from_usize(xs.len()).expect("length fits the scalar")
        };
        mean(&infima[half..]) <= mean(&infima[..half]) + tol
    };
    Ok(MeagrenessReport {
        consistent: last_ok && trend_ok,
        infima,
        tol,
    })
}

//! Fixed-step RK4 simulation of switched trajectories.
//!
//! Steps are truncated so the integration lands bit-exactly on every switch
//! time inside the span; mode changes are applied only there, and domain
//! membership is checked at every accepted step.

use std::io::{self, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::scalar::{cast, Scalar};
use crate::signal::{ModeId, SignalError, SwitchingSignal};
use crate::system::{Mode, SwitchedSystem, SystemError};

/// Default blow-up bound on the state norm.
pub const DEFAULT_BLOWUP_NORM: f64 = 1e9;

#[derive(Error, Debug)]
pub enum SimError<T: Scalar> {
    #[error("domain violation at t = {t} in mode {mode}")]
    DomainViolation { t: T, mode: ModeId, x: DVector<T> },
    #[error("state norm exceeded {bound} at t = {t}")]
    Blowup { t: T, bound: T },
    #[error("span [{t0}, {t1}] is empty or not inside the signal horizon")]
    BadSpan { t0: T, t1: T },
    #[error("integration step must be positive, got {0}")]
    NonPositiveStep(T),
    #[error("time {t} outside the simulated span")]
    OutOfSpan { t: T },
    #[error("trajectory has no samples")]
    Empty,
    #[error(transparent)]
    System(#[from] SystemError<T>),
    #[error(transparent)]
    Signal(#[from] SignalError<T>),
}

/// One accepted integration point.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T: Scalar> {
    pub t: T,
    pub x: DVector<T>,
    /// Active mode at `t` under right-continuity: at a switch time this is
    /// already the new mode.
    pub mode: ModeId,
}

/// Bookkeeping accumulated during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct StepStats<T: Scalar> {
    pub max_step: T,
    /// Largest step-doubling (Richardson) local-error estimate observed on
    /// the sampled subset of steps.
    pub local_error_estimate: T,
    pub max_norm: T,
    pub steps: usize,
}

/// Time-stamped `(t, x, mode)` samples of one simulated run.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Scalar = f64> {
    samples: Vec<Sample<T>>,
    signal: SwitchingSignal<T>,
    stats: StepStats<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn signal(&self) -> &SwitchingSignal<T> {
        &self.signal
    }

    pub fn stats(&self) -> &StepStats<T> {
        &self.stats
    }

    /// Simulated span `(first sample time, last sample time)`.
    pub fn span(&self) -> (T, T) {
        (
            self.samples.first().expect("nonempty trajectory").t,
            self.samples.last().expect("nonempty trajectory").t,
        )
    }

    pub fn final_state(&self) -> &DVector<T> {
        &self.samples.last().expect("nonempty trajectory").x
    }

    /// State at `t`: exact at sample times, linear interpolation in between.
    pub fn sample_state(&self, t: T) -> Result<DVector<T>, SimError<T>> {
        let (t0, t1) = self.span();
        if !(t >= t0 && t <= t1) {
            return Err(SimError::OutOfSpan { t });
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        if idx == 0 {
            return Ok(self.samples[0].x.clone());
        }
        let before = &self.samples[idx - 1];
        if before.t == t || idx == self.samples.len() {
            return Ok(before.x.clone());
        }
        let after = &self.samples[idx];
        let alpha = (t - before.t) / (after.t - before.t);
        Ok(&before.x + (&after.x - &before.x) * alpha)
    }

    /// Largest state norm over the samples.
    pub fn sup_norm(&self) -> T {
        self.stats.max_norm
    }

    /// Writes the CSV export: header `t,x_1..x_n,mode`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        write!(w, "t")?;
        for i in 1..=n {
            write!(w, ",x_{i}")?;
        }
        writeln!(w, ",mode")?;
        for s in &self.samples {
            write!(w, "{}", s.t)?;
            for v in s.x.iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", s.mode)?;
        }
        Ok(())
    }
}

/// Extra simulation knobs beyond the positional arguments.
#[derive(Clone, Debug)]
pub struct SimOptions<T: Scalar> {
    pub blowup_norm: T,
    /// Richardson local-error probes run every `error_estimate_stride`-th step.
    pub error_estimate_stride: usize,
}

impl<T: Scalar> Default for SimOptions<T> {
    fn default() -> Self {
        Self {
            blowup_norm: cast(DEFAULT_BLOWUP_NORM),
            error_estimate_stride: 64,
        }
    }
}

fn rk4_step<T: Scalar>(
    f: &dyn Fn(&DVector<T>) -> DVector<T>,
    x: &DVector<T>,
    h: T,
) -> DVector<T> {
    let half = h * cast::<T>(0.5);
    let sixth = h / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    let k1 = f(x);
    let k2 = f(&(x + &k1 * half));
    let k3 = f(&(x + &k2 * half));
    let k4 = f(&(x + &k3 * h));
    x + (k1 + k2 * two + k3 * two + k4) * sixth
}

/// Simulates `(x, sigma)` on `span` with fixed step `step`.
///
/// `backward = true` integrates the time-reversed field `xdot = -f` (the
/// zero-output backward membership tests run on it); the signal is still
/// consumed forward in time.
pub fn simulate<T: Scalar>(
    sys: &SwitchedSystem<T>,
    sig: &SwitchingSignal<T>,
    x0: &DVector<T>,
    span: (T, T),
    step: T,
    backward: bool,
    opts: &SimOptions<T>,
) -> Result<Trajectory<T>, SimError<T>> {
    let (t0, t1) = span;
    if !(step > T::zero()) {
        return Err(SimError::NonPositiveStep(step));
    }
    if !(t1 > t0) || t0 < sig.t_begin() || t1 > sig.t_end() {
        return Err(SimError::BadSpan { t0, t1 });
    }
    if x0.len() != sys.dim() {
        return Err(SimError::System(SystemError::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        }));
    }

    let mut mode_id = sig.mode_at(t0)?;
    let mut mode = sys.mode(mode_id)?;
    if !mode.domain().contains(x0) {
        return Err(SimError::DomainViolation {
            t: t0,
            mode: mode_id,
            x: x0.clone(),
        });
    }

    // segment boundaries: every switch time strictly inside the span, then t1
    let mut boundaries: Vec<T> = sig
        .switch_times()
        .filter(|&s| s > t0 && s < t1)
        .collect();
    boundaries.push(t1);

    let sign = if backward { -T::one() } else { T::one() };
    let mut stats = StepStats {
        max_step: T::zero(),
        local_error_estimate: T::zero(),
        max_norm: x0.norm(),
        steps: 0,
    };
    let mut samples = vec![Sample {
        t: t0,
        x: x0.clone(),
        mode: mode_id,
    }];
    let mut t = t0;
    let mut x = x0.clone();
    let stride = opts.error_estimate_stride.max(1);

    for &boundary in &boundaries {
        loop {
            let t_next = if t + step < boundary { t + step } else { boundary };
            let h = t_next - t;
            if !(h > T::zero()) {
                break;
            }
            let field = |y: &DVector<T>| mode.eval(y) * sign;
            let x_next = rk4_step(&field, &x, h);
            if stats.steps.is_multiple_of(stride) {
                // step-doubling probe of the local truncation error
                let half = h * cast::<T>(0.5);
                let mid = rk4_step(&field, &x, half);
                let fine = rk4_step(&field, &mid, half);
                let est = (&x_next - &fine).norm() / cast::<T>(15.0);
                stats.local_error_estimate = stats.local_error_estimate.max(est);
            }
            stats.steps += 1;
            stats.max_step = stats.max_step.max(h);
            x = x_next;
            t = t_next;

            let norm = x.norm();
            stats.max_norm = stats.max_norm.max(norm);
            if norm > opts.blowup_norm {
                return Err(SimError::Blowup {
                    t,
                    bound: opts.blowup_norm,
                });
            }
            if !mode.domain().contains(&x) {
                return Err(SimError::DomainViolation {
                    t,
                    mode: mode_id,
                    x,
                });
            }

            let next_mode_id = sig.mode_at(t)?;
            if next_mode_id != mode_id {
                mode_id = next_mode_id;
                mode = sys.mode(mode_id)?;
                if !mode.domain().contains(&x) {
                    return Err(SimError::DomainViolation {
                        t,
                        mode: mode_id,
                        x,
                    });
                }
            }
            samples.push(Sample {
                t,
                x: x.clone(),
                mode: mode_id,
            });
            if t == boundary {
                break;
            }
        }
    }

    Ok(Trajectory {
        samples,
        signal: sig.clone(),
        stats,
    })
}

/// Single-mode flow `xdot = +/- f_gamma` from `x0` for duration `tau`,
/// sampled every accepted step. Used by the zero-output membership tests.
pub fn flow_mode<T: Scalar>(
    mode: &Mode<T>,
    x0: &DVector<T>,
    tau: T,
    step: T,
    backward: bool,
    blowup_norm: T,
) -> Result<Vec<(T, DVector<T>)>, SimError<T>> {
    if !(step > T::zero()) {
        return Err(SimError::NonPositiveStep(step));
    }
    if !(tau > T::zero()) {
        return Err(SimError::BadSpan {
            t0: T::zero(),
            t1: tau,
        });
    }
    if !mode.domain().contains(x0) {
        return Err(SimError::DomainViolation {
            t: T::zero(),
            mode: mode.id(),
            x: x0.clone(),
        });
    }
    let sign = if backward { -T::one() } else { T::one() };
    let field = |y: &DVector<T>| mode.eval(y) * sign;
    let mut out = vec![(T::zero(), x0.clone())];
    let mut t = T::zero();
    let mut x = x0.clone();
    loop {
        let t_next = if t + step < tau { t + step } else { tau };
        let h = t_next - t;
        if !(h > T::zero()) {
            break;
        }
        x = rk4_step(&field, &x, h);
        t = t_next;
        if x.norm() > blowup_norm {
            return Err(SimError::Blowup {
                t,
                bound: blowup_norm,
            });
        }
        if !mode.domain().contains(&x) {
            return Err(SimError::DomainViolation {
                t,
                mode: mode.id(),
                x,
            });
        }
        out.push((t, x.clone()));
        if t == tau {
            break;
        }
    }
    Ok(out)
}

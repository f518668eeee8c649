//! Batch stability experiments: seeded (signal, x0) trials, uniform-gain and
//! convergence statistics against a predicted limit set.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::CertifyError;
use crate::integrator::{simulate, SimOptions};
use crate::limits::TargetSet;
use crate::scalar::{cast, Scalar};
use crate::signal::{generate, GenerateOptions, SignalClassSpec};
use crate::system::SwitchedSystem;

#[derive(Clone, Debug)]
pub struct StabilityTestOptions<T: Scalar> {
    pub step: T,
    pub seed: u64,
    /// Distance target for the final state; defaults to the origin.
    pub target: Option<TargetSet<T>>,
    pub generate: GenerateOptions,
}

impl<T: Scalar> Default for StabilityTestOptions<T> {
    fn default() -> Self {
        Self {
            step: cast(1e-3),
            seed: 0,
            target: None,
            generate: GenerateOptions::default(),
        }
    }
}

/// One `(signal, x0)` trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord<T: Scalar = f64> {
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_norm: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_norm: Option<T>,
    /// `sup_t |x(t)| / |x0|`, the per-trial uniform-stability gain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_norm: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregated outcome of an `empirical_stability_test` run.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityStats<T: Scalar = f64> {
    pub trials: Vec<TrialRecord<T>>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Trials whose final distance to the target is at most `eps`.
    pub n_converged: usize,
    /// Empirical class-K gain estimate at this radius: the largest trial gain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gain: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_final_distance: Option<T>,
    pub eps: T,
    pub ball_radius: T,
    pub horizon: T,
}

impl<T: Scalar> StabilityStats<T> {
    /// Tidy CSV export: one row per trial.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "trial,seed,status,x0_norm,sup_norm,gain,final_norm,final_distance"
        )?;
        for t in &self.trials {
            let field = |v: &Option<T>| v.map_or(String::new(), |x| format!("{x}"));
            let status = match &t.error {
                None => "ok".to_string(),
                Some(e) => format!("error: {}", e.replace(',', ";")),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t.trial,
                t.seed,
                status,
                field(&t.x0_norm),
                field(&t.sup_norm),
                field(&t.gain),
                field(&t.final_norm),
                field(&t.final_distance)
            )?;
        }
        Ok(())
    }
}

fn mix(seed: u64, lane: u64) -> u64 {
    seed ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E5AB)
}

/// Uniform sample from the closed ball of radius `r`.
fn sample_ball<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize, r: T) -> DVector<T> {
    let gauss = DVector::from_fn(dim, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        cast::<T>(g)
    });
    let norm = gauss.norm();
    if norm == T::zero() {
        return DVector::zeros(dim);
    }
    let u: f64 = rng.gen();
    let radius = r * cast::<T>(u.powf(1.0 / dim as f64));
    gauss * (radius / norm)
}

/// Runs `n_trials` seeded trials: generate a class signal on `[0, horizon]`,
/// draw `x0` from the radius ball, simulate, and record the uniform gain and
/// the final distance to the target. Trials run in parallel and aggregate
/// deterministically by trial index; simulation failures are counted and
/// carried in the records.
pub fn empirical_stability_test<T: Scalar>(
    sys: &SwitchedSystem<T>,
    class_spec: &SignalClassSpec<T>,
    n_trials: usize,
    ball_radius: T,
    horizon: T,
    eps: T,
    opts: &StabilityTestOptions<T>,
) -> Result<StabilityStats<T>, CertifyError<T>> {
    if n_trials == 0 {
        return Err(CertifyError::Invalid("need at least one trial".into()));
    }
    if !(horizon > T::zero()) || !(ball_radius > T::zero()) {
        return Err(CertifyError::Invalid(
            "horizon and ball radius must be positive".into(),
        ));
    }
    let mut gen_opts = opts.generate.clone();
    if gen_opts.modes.is_none() {
        gen_opts.modes = Some(sys.mode_ids());
    }
    let target = opts
        .target
        .clone()
        .unwrap_or_else(|| TargetSet::origin(sys.dim()));

    // fail fast if the class itself is infeasible (seed-independent failures)
    generate(class_spec, (T::zero(), horizon), mix(opts.seed, 0), &gen_opts)?;

    let records: Vec<TrialRecord<T>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| run_trial(sys, class_spec, ball_radius, horizon, opts, &gen_opts, &target, trial))
        .collect();

    let mut stats = StabilityStats {
        n_ok: 0,
        n_failed: 0,
        n_converged: 0,
        max_gain: None,
        max_final_distance: None,
        eps,
        ball_radius,
        horizon,
        trials: Vec::new(),
    };
    for r in &records {
        if r.error.is_some() {
            stats.n_failed += 1;
            continue;
        }
        stats.n_ok += 1;
        if let Some(g) = r.gain {
            stats.max_gain = Some(stats.max_gain.map_or(g, |m: T| m.max(g)));
        }
        if let Some(d) = r.final_distance {
            stats.max_final_distance = Some(stats.max_final_distance.map_or(d, |m: T| m.max(d)));
            if d <= eps {
                stats.n_converged += 1;
            }
        }
    }
    stats.trials = records;
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn run_trial<T: Scalar>(
    sys: &SwitchedSystem<T>,
    class_spec: &SignalClassSpec<T>,
    ball_radius: T,
    horizon: T,
    opts: &StabilityTestOptions<T>,
    gen_opts: &GenerateOptions,
    target: &TargetSet<T>,
    trial: usize,
) -> TrialRecord<T> {
    let seed = mix(opts.seed, trial as u64);
    let mut record = TrialRecord {
        trial,
        seed,
        x0_norm: None,
        sup_norm: None,
        gain: None,
        final_norm: None,
        final_distance: None,
        error: None,
    };
    let sig = match generate(class_spec, (T::zero(), horizon), seed, gen_opts) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(format!("generate: {e}"));
            return record;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x0b5e));
    let initial_mode = sig.initial_mode();
    let mut x0 = None;
    for _ in 0..50 {
        let candidate = sample_ball(&mut rng, sys.dim(), ball_radius);
        let admissible = sys
            .mode(initial_mode)
            .map(|m| m.domain().contains(&candidate))
            .unwrap_or(false);
        if admissible {
            x0 = Some(candidate);
            break;
        }
    }
    let Some(x0) = x0 else {
        record.error = Some("no admissible initial state found in the ball".into());
        return record;
    };
    record.x0_norm = Some(x0.norm());
    match simulate(
        sys,
        &sig,
        &x0,
        (T::zero(), horizon),
        opts.step,
        false,
        &SimOptions::default(),
    ) {
        Ok(traj) => {
            let sup = traj.sup_norm();
            record.sup_norm = Some(sup);
            let x0n = x0.norm();
            record.gain = Some(if x0n > T::zero() { sup / x0n } else { T::one() });
            record.final_norm = Some(traj.final_state().norm());
            record.final_distance = Some(target.distance(traj.final_state()));
        }
        Err(e) => record.error = Some(format!("simulate: {e}")),
    }
    record
}

//! Invariance-style check driven by a user output: if `y(t) = h(x(t), sigma(t))`
//! is weakly meagre along a bounded trajectory, the state converges into the
//! zero set of `h`. The checker estimates meagreness from window infima and
//! validates that the trajectory tail actually enters the sampled zero set.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CertifyError, PredictedLimit};
use crate::integrator::Trajectory;
use crate::limits::{weakly_meagre_estimate, MeagrenessReport, ScalarSeries, SetEstimate};
use crate::scalar::{cast, Scalar};
use crate::signal::ModeId;
use crate::system::SwitchedSystem;

#[derive(Clone, Debug)]
pub struct OutputMeagrenessOptions<T: Scalar> {
    /// Window length of the meagreness estimate.
    pub window: T,
    pub n_windows: usize,
    /// Verdict tolerance on the final window infimum.
    pub meagre_tol: T,
    /// `min_mode |h(x, mode)| <= zero_tol` puts a sampled state in the zero set.
    pub zero_tol: T,
    /// Distance at which the trajectory tail counts as inside the zero set.
    pub eps: T,
    pub tail_fraction: T,
    /// Sampled points used to estimate the zero set.
    pub samples: usize,
    pub seed: u64,
    /// Name carried into the predicted-limit descriptor.
    pub output_name: String,
}

impl<T: Scalar> Default for OutputMeagrenessOptions<T> {
    fn default() -> Self {
        Self {
            window: T::one(),
            n_windows: 8,
            meagre_tol: cast(1e-3),
            zero_tol: cast(1e-3),
            eps: cast(1e-2),
            tail_fraction: cast(0.2),
            samples: 4000,
            seed: 0,
            output_name: "h".into(),
        }
    }
}

/// Verdict of the output-meagreness rule.
#[derive(Clone, Debug, Serialize)]
pub struct OutputMeagrenessReport<T: Scalar = f64> {
    pub meagreness: MeagrenessReport<T>,
    /// Points retained in the sampled zero-set estimate (diagnostic).
    pub zero_set_points: usize,
    /// Largest distance from the trajectory tail to the zero-set estimate
    /// (diagnostic; resolution-limited by the sampling density).
    pub max_tail_distance: T,
    /// Largest `min_mode |h|` over the trajectory tail; the membership
    /// criterion for the zero set.
    pub max_tail_output: T,
    /// Meagreness consistent and the tail inside the zero set.
    pub converged_to_zero_set: bool,
    pub predicted_limit: PredictedLimit,
}

/// Runs the weak-meagreness estimate on `y(t) = h(x(t), sigma(t))` and
/// checks that the trajectory tail sits within `eps` of the sampled zero set
/// `{x : min_mode |h(x, mode)| <= zero_tol}`.
pub fn check_output_meagreness<T: Scalar>(
    sys: &SwitchedSystem<T>,
    traj: &Trajectory<T>,
    h: &dyn Fn(&DVector<T>, ModeId) -> T,
    opts: &OutputMeagrenessOptions<T>,
) -> Result<OutputMeagrenessReport<T>, CertifyError<T>> {
    let series = ScalarSeries::from_trajectory(traj, h);
    let meagreness =
        weakly_meagre_estimate(&series, opts.window, opts.n_windows, opts.meagre_tol)
            .map_err(|e| CertifyError::Invalid(e.to_string()))?;

    // sampled zero set of the output over the first mode's sampling box
    let mode_ids = sys.mode_ids();
    let bbox = &sys.mode(mode_ids[0])?.domain().bbox;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut zero_states = Vec::new();
    for _ in 0..opts.samples {
        let x = bbox.sample(&mut rng);
        let min_out = mode_ids
            .iter()
            .map(|&m| h(&x, m).abs())
            .fold(T::max_value().expect("bounded scalar"), |a, b| a.min(b));
        if min_out <= opts.zero_tol {
            zero_states.push(x);
        }
    }
    let estimate = SetEstimate::from_states(zero_states.iter(), opts.eps * cast(0.5))
        .map_err(|e| CertifyError::Invalid(e.to_string()))?;

    let (t0, t1) = traj.span();
    let t_tail = t1 - opts.tail_fraction * (t1 - t0);
    let mut max_tail_distance = T::zero();
    let mut max_tail_output = T::zero();
    for s in traj.samples().iter().filter(|s| s.t >= t_tail) {
        if !estimate.is_empty() {
            max_tail_distance = max_tail_distance.max(estimate.distance_to(&s.x));
        }
        let min_out = mode_ids
            .iter()
            .map(|&m| h(&s.x, m).abs())
            .fold(T::max_value().expect("bounded scalar"), |a, b| a.min(b));
        max_tail_output = max_tail_output.max(min_out);
    }
    let converged = meagreness.consistent && max_tail_output <= opts.zero_tol;
    Ok(OutputMeagrenessReport {
        meagreness,
        zero_set_points: estimate.len(),
        max_tail_distance,
        max_tail_output,
        converged_to_zero_set: converged,
        predicted_limit: PredictedLimit::OutputZeroSet {
            output: opts.output_name.clone(),
        },
    })
}

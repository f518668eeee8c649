//! Fully algorithmic linear-quadratic stability certificate.
//!
//! Inputs are per-mode matrices `(A, P, C)`; the rule checks
//! 1. `P A + A'P <= -C'C` (largest eigenvalue of the slack matrix),
//! 2. `v(t) = x'P_sigma x` nonincreasing along the family (analytic when all
//!    `P` coincide, otherwise simulated evidence or a user assertion),
//! 3. unobservable subspace of `(C, A)` equals `ker A` per mode,
//! 4. the kernels intersect trivially,
//!
//! and certifies global asymptotic stability when all four hold analytically.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    CertificateReport, CertifyError, HypothesisReport, HypothesisStatus, PredictedLimit,
    TheoremId, Witness,
};
use crate::integrator::{simulate, SimOptions};
use crate::lyapunov::{monitor_v, LyapunovPair, MonitorOptions};
use crate::scalar::{cast, Scalar};
use crate::signal::{generate, GenerateOptions, ModeId, SignalClassSpec};
use crate::system::SwitchedSystem;

#[derive(Clone, Debug)]
pub struct CorollaryOptions<T: Scalar> {
    /// Largest admissible eigenvalue of `P A + A'P + C'C`.
    pub lmi_tol: T,
    /// Projector-distance tolerance for the subspace equalities.
    pub subspace_tol: T,
    /// Simulated trajectories backing condition 2 when the `P` differ.
    pub evidence_trials: usize,
    pub evidence_horizon: T,
    pub evidence_step: T,
    /// Dwell time of the evidence signals (the ergodic window is derived).
    pub evidence_dwell: T,
    pub seed: u64,
}

impl<T: Scalar> Default for CorollaryOptions<T> {
    fn default() -> Self {
        Self {
            lmi_tol: cast(1e-10),
            subspace_tol: cast(1e-9),
            evidence_trials: 20,
            evidence_horizon: cast(20.0),
            evidence_step: cast(1e-2),
            evidence_dwell: cast(0.5),
            seed: 0,
        }
    }
}

/// Checks the linear-quadratic certificate on `(A, P, C)` triples
/// (mode ids `1..=N`, in list order).
pub fn check_corollary_final<T: Scalar>(
    a_list: &[DMatrix<T>],
    p_list: &[DMatrix<T>],
    c_list: &[DMatrix<T>],
    common_p_assumed: bool,
    opts: &CorollaryOptions<T>,
) -> Result<CertificateReport<T>, CertifyError<T>> {
    if a_list.is_empty() || a_list.len() != p_list.len() || a_list.len() != c_list.len() {
        return Err(CertifyError::Invalid(format!(
            "need equally many A ({}), P ({}) and C ({}) matrices",
            a_list.len(),
            p_list.len(),
            c_list.len()
        )));
    }
    let dim = a_list[0].nrows();
    for (i, a) in a_list.iter().enumerate() {
        if !a.is_square() || a.nrows() != dim {
            return Err(CertifyError::Invalid(format!(
                "A matrix {} must be {dim}x{dim}",
                i + 1
            )));
        }
    }
    // positive definiteness of every P is a precondition, not a hypothesis
    let pair = LyapunovPair::quadratic(p_list, c_list)?;

    let mut hypotheses = Vec::new();

    // condition 1: per-mode decrease LMI
    let mut lmi_status = HypothesisStatus::Holds;
    let mut lmi_detail = String::new();
    for (i, ((a, p), c)) in a_list.iter().zip(p_list).zip(c_list).enumerate() {
        let mode = ModeId(i as u32 + 1);
        let slack = p * a + a.transpose() * p + c.transpose() * c;
        let sym = (&slack + slack.transpose()) * cast::<T>(0.5);
        let lambda_max = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(T::min_value().expect("bounded scalar"), |x, y| x.max(y));
        lmi_detail.push_str(&format!("mode {mode}: lambda_max = {lambda_max}; "));
        if lambda_max > opts.lmi_tol && !lmi_status.is_fails() {
            lmi_status = HypothesisStatus::Fails {
                witness: Witness {
                    description: format!(
                        "P*A + A'*P + C'*C has positive eigenvalue {lambda_max} in mode {mode}"
                    ),
                    mode: Some(mode),
                    value: Some(lambda_max),
                    ..Default::default()
                },
            };
        }
    }
    hypotheses.push(HypothesisReport::new(
        "decrease_lmi",
        lmi_status,
        lmi_detail.trim_end_matches("; "),
    ));

    // condition 2: v(t) = x'P_sigma(t) x nonincreasing along the family
    hypotheses.push(condition_two(a_list, &pair, common_p_assumed, opts)?);

    // condition 3: unobservable subspace of (C, A) equals ker A, per mode
    let mut sub_status = HypothesisStatus::Holds;
    let mut sub_detail = String::new();
    let mut kernels = Vec::with_capacity(a_list.len());
    for (i, (a, c)) in a_list.iter().zip(c_list).enumerate() {
        let mode = ModeId(i as u32 + 1);
        let unobs = crate::observability::unobservable_subspace(c, a)?;
        let ker = crate::observability::kernel(a);
        let dist = unobs.projector_distance(&ker);
        sub_detail.push_str(&format!("mode {mode}: projector distance = {dist}; "));
        if dist > opts.subspace_tol && !sub_status.is_fails() {
            sub_status = HypothesisStatus::Fails {
                witness: Witness {
                    description: format!(
                        "unobservable subspace differs from ker(A) in mode {mode} (distance {dist})"
                    ),
                    mode: Some(mode),
                    value: Some(dist),
                    ..Default::default()
                },
            };
        }
        kernels.push(ker);
    }
    hypotheses.push(HypothesisReport::new(
        "unobservable_equals_kernel",
        sub_status,
        sub_detail.trim_end_matches("; "),
    ));

    // condition 4: kernels intersect trivially
    let meet = crate::observability::intersect(&kernels)?;
    let status = if meet.is_trivial() {
        HypothesisStatus::Holds
    } else {
        let basis: DVector<T> = meet.basis_vectors().next().expect("nontrivial");
        HypothesisStatus::Fails {
            witness: Witness {
                description: format!(
                    "kernel intersection has dimension {}; basis vector attached",
                    meet.rank()
                ),
                point: Some(basis.iter().copied().collect()),
                ..Default::default()
            },
        }
    };
    hypotheses.push(HypothesisReport::new(
        "trivial_kernel_intersection",
        status,
        format!("intersection dimension {}", meet.rank()),
    ));

    Ok(CertificateReport::from_hypotheses(
        TheoremId::CorollaryFinal,
        hypotheses,
        PredictedLimit::Origin,
    ))
}

fn condition_two<T: Scalar>(
    a_list: &[DMatrix<T>],
    pair: &LyapunovPair<T>,
    common_p_assumed: bool,
    opts: &CorollaryOptions<T>,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    if pair.has_common_p() {
        return Ok(HypothesisReport::new(
            "v_nonincreasing",
            HypothesisStatus::Holds,
            "all P coincide: v is continuous at switches and decreases within modes",
        ));
    }
    if common_p_assumed {
        return Ok(HypothesisReport::new(
            "v_nonincreasing",
            HypothesisStatus::Asserted,
            "declared to hold for the trajectory family under study",
        ));
    }

    // simulated evidence over dwell + ergodic switching signals
    let sys = SwitchedSystem::from_matrices(a_list)?;
    let n_modes = sys.modes().len();
    let window = opts.evidence_dwell * cast::<T>(4.0) * cast::<T>(n_modes as f64);
    let spec = if n_modes == 1 {
        SignalClassSpec::Dwell {
            tau_d: opts.evidence_dwell,
        }
    } else {
        SignalClassSpec::intersection([
            SignalClassSpec::Dwell {
                tau_d: opts.evidence_dwell,
            },
            SignalClassSpec::Ergodic {
                window,
                modes: sys.mode_ids(),
            },
        ])
    };
    let gen_opts = GenerateOptions {
        modes: Some(sys.mode_ids()),
        ..Default::default()
    };
    let horizon = opts.evidence_horizon.max(window + window);
    let mut worst_uphill = T::zero();
    let mut runs = 0usize;
    for trial in 0..opts.evidence_trials {
        let seed = opts.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let sig = generate(&spec, (T::zero(), horizon), seed, &gen_opts)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bf0_15c7);
        let x0 = DVector::from_fn(sys.dim(), |_, _| cast::<T>(rng.gen::<f64>() * 2.0 - 1.0));
        let traj = match simulate(
            &sys,
            &sig,
            &x0,
            (T::zero(), horizon),
            opts.evidence_step,
            false,
            &SimOptions::default(),
        ) {
            Ok(t) => t,
            Err(err) => {
                return Ok(HypothesisReport::new(
                    "v_nonincreasing",
                    HypothesisStatus::Fails {
                        witness: Witness::text(format!(
                            "evidence trajectory {trial} failed numerically: {err}"
                        )),
                    },
                    "simulated evidence aborted",
                ))
            }
        };
        let report = monitor_v(&traj, pair, false, &MonitorOptions::default())?;
        runs += 1;
        worst_uphill = worst_uphill.max(report.max_uphill);
        if !report.nonincreasing {
            let violation = report.first_violation.expect("violation recorded");
            return Ok(HypothesisReport::new(
                "v_nonincreasing",
                HypothesisStatus::Fails {
                    witness: Witness {
                        description: format!(
                            "v increased by {} at t = {} on evidence trajectory {trial}",
                            violation.delta, violation.t
                        ),
                        mode: Some(violation.mode),
                        value: Some(violation.delta),
                        ..Default::default()
                    },
                },
                "simulated evidence found an increase",
            ));
        }
    }
    Ok(HypothesisReport::new(
        "v_nonincreasing",
        HypothesisStatus::Evidence {
            samples: runs,
            margin: worst_uphill,
        },
        format!("monitored over {runs} simulated dwell+ergodic trajectories"),
    ))
}

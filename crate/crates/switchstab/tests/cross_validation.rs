//! Cross-validation of certificates against simulation: supportive reports
//! must be backed by trajectories that actually converge to the predicted
//! limit set, and omega-limit estimates must stay inside the zero-output
//! superset the convergence rules predict.

use nalgebra::{DMatrix, DVector};

use switchstab::certify::{
    check_convergence, check_corollary_final, empirical_stability_test, ConvergenceOptions,
    CorollaryOptions, PredictedLimit, StabilityTestOptions, TheoremId, Verdict,
};
use switchstab::integrator::{simulate, SimOptions};
use switchstab::limits::omega_limit;
use switchstab::lyapunov::LyapunovPair;
use switchstab::signal::{generate, GenerateOptions, ModeId, SignalClassSpec};
use switchstab::system::SwitchedSystem;

fn decoupled() -> SwitchedSystem<f64> {
    SwitchedSystem::from_matrices(&[
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
    ])
    .unwrap()
}

fn decoupled_pair() -> LyapunovPair<f64> {
    LyapunovPair::quadratic(
        &[DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        &[
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        ],
    )
    .unwrap()
}

fn dwell_ergodic() -> SignalClassSpec {
    SignalClassSpec::intersection([
        SignalClassSpec::Dwell { tau_d: 0.5 },
        SignalClassSpec::Ergodic {
            window: 1.0,
            modes: vec![ModeId(1), ModeId(2)],
        },
    ])
}

/// A supportive certificate implies 50-trial empirical convergence to the
/// predicted limit within 1e-2.
#[test]
fn supportive_reports_are_confirmed_by_trials() {
    let sys = decoupled();

    // certified linear-quadratic rule
    let (a, p, c) = (
        vec![
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
        ],
        vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        vec![
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        ],
    );
    let cert = check_corollary_final(&a, &p, &c, false, &CorollaryOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Certified);
    assert_eq!(cert.predicted_limit, PredictedLimit::Origin);

    // evidence-grade rule over the same family
    let report = check_convergence(
        &sys,
        &decoupled_pair(),
        &dwell_ergodic(),
        TheoremId::Guas2Bis,
        &ConvergenceOptions::default(),
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::SupportedByEvidence);
    assert_eq!(report.predicted_limit, PredictedLimit::Origin);

    // both predict the origin: confirm with 50 seeded trials at eps = 1e-2
    let stats = empirical_stability_test(
        &sys,
        &dwell_ergodic(),
        50,
        1.0,
        20.0,
        1e-2,
        &StabilityTestOptions {
            step: 1e-3,
            seed: 1414,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(stats.n_failed, 0);
    assert_eq!(stats.n_converged, 50, "max distance {:?}", stats.max_final_distance);
}

/// The omega-limit estimate of a decoupled run stays within 1e-2 of the
/// union of per-mode-pair zero-output intersections (here: the two axes).
#[test]
fn omega_estimates_stay_inside_the_predicted_superset() {
    let sys = decoupled();
    let spec = SignalClassSpec::Adt { tau_d: 0.5, n0: 2 };
    for seed in 0..12u64 {
        let sig = generate(&spec, (0.0, 30.0), seed, &GenerateOptions::default()).unwrap();
        let traj = simulate(
            &sys,
            &sig,
            &DVector::from_row_slice(&[1.0, -0.7]),
            (0.0, 30.0),
            1e-3,
            false,
            &SimOptions::default(),
        )
        .unwrap();
        let omega = omega_limit(&traj, 0.2, 1e-3).unwrap();
        for point in omega.points() {
            // distance to the union of the x1- and x2-axes
            let dist = point[0].abs().min(point[1].abs());
            assert!(dist <= 1e-2, "seed {seed}: omega point {point:?} off the axes");
        }
    }
}

//! Signal class specifications and their exact, horizon-relative validators.

use serde::{Deserialize, Serialize};

use super::{ModeId, SetValuedMap, SignalError, SwitchingSignal};
use crate::scalar::{cast, Scalar};

/// One of the supported switching-signal families, or an intersection of them.
///
/// `Dwell { tau_d }` is by definition interchangeable with
/// `Adt { tau_d, n0: 1 }`; the two validators are implemented independently
/// and tested for agreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SignalClassSpec<T: Scalar = f64> {
    /// Minimum separation `tau_d` between consecutive switch times.
    Dwell { tau_d: T },
    /// Average dwell time: at most `n0 + len/tau_d` switches in any open
    /// interval of length `len`.
    Adt { tau_d: T, n0: u32 },
    /// Every mode of `modes` is active at least once in every closed window
    /// of length `window`.
    Ergodic { window: T, modes: Vec<ModeId> },
    /// Every jump `(from, to)` must satisfy `to in H(from)`.
    Graph { map: SetValuedMap },
    /// All member classes must hold simultaneously.
    Intersection { members: Vec<SignalClassSpec<T>> },
}

impl<T: Scalar> SignalClassSpec<T> {
    pub fn intersection(members: impl IntoIterator<Item = SignalClassSpec<T>>) -> Self {
        SignalClassSpec::Intersection {
            members: members.into_iter().collect(),
        }
    }

    /// Flattens nested intersections into a list of atomic classes.
    pub(crate) fn atoms(&self) -> Vec<&SignalClassSpec<T>> {
        match self {
            SignalClassSpec::Intersection { members } => {
                members.iter().flat_map(|m| m.atoms()).collect()
            }
            atom => vec![atom],
        }
    }

    pub(crate) fn check_params(&self) -> Result<(), SignalError<T>> {
        for atom in self.atoms() {
            match atom {
                SignalClassSpec::Dwell { tau_d } => {
                    if !(*tau_d > T::zero()) {
                        return Err(SignalError::InvalidClassParam(format!(
                            "dwell time must be positive, got {tau_d}"
                        )));
                    }
                }
                SignalClassSpec::Adt { tau_d, n0 } => {
                    if !(*tau_d > T::zero()) {
                        return Err(SignalError::InvalidClassParam(format!(
                            "average dwell time must be positive, got {tau_d}"
                        )));
                    }
                    if *n0 == 0 {
                        return Err(SignalError::InvalidClassParam(
                            "chatter bound n0 must be a positive integer".into(),
                        ));
                    }
                }
                SignalClassSpec::Ergodic { window, modes } => {
                    if !(*window > T::zero()) {
                        return Err(SignalError::InvalidClassParam(format!(
                            "ergodic window must be positive, got {window}"
                        )));
                    }
                    if modes.is_empty() {
                        return Err(SignalError::InvalidClassParam(
                            "ergodic mode list must be nonempty".into(),
                        ));
                    }
                }
                SignalClassSpec::Graph { map } => {
                    if map.domain().len() == 0 {
                        return Err(SignalError::InvalidClassParam(
                            "graph-constrained class needs a nonempty domain".into(),
                        ));
                    }
                }
                SignalClassSpec::Intersection { .. } => unreachable!("atoms() flattens"),
            }
        }
        Ok(())
    }
}

/// Outcome of a class-membership check, with the first violating witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport<T: Scalar = f64> {
    pub pass: bool,
    pub violation: Option<Violation<T>>,
}

impl<T: Scalar> ValidationReport<T> {
    fn pass() -> Self {
        Self {
            pass: true,
            violation: None,
        }
    }

    fn fail(violation: Violation<T>) -> Self {
        Self {
            pass: false,
            violation: Some(violation),
        }
    }
}

/// First witness found by a failed validation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation<T: Scalar = f64> {
    /// Switch pair `(i, j)` packs `count` switches against a bound of
    /// `n0 + (t_j - t_i)/tau_d`.
    AdtBound {
        i: usize,
        j: usize,
        t_i: T,
        t_j: T,
        count: usize,
        bound: T,
    },
    /// Two consecutive switches closer than the dwell time.
    DwellGap { t_prev: T, t_next: T, gap: T },
    /// The closed window starting at `window_start` never activates `missing`.
    ErgodicWindow { window_start: T, missing: ModeId },
    /// Jump into a mode not allowed by the successor map.
    GraphJump { t: T, from: ModeId, to: ModeId },
}

/// Checks a signal against a class spec; see `Violation` for witnesses.
///
/// The ADT check is exact: `card(jumps in (tau1, tau2)) <= n0 + (tau2 - tau1)/tau_d`
/// holds for every open interval iff it holds in the limit of intervals
/// shrinking onto `[t_i, t_j]` for every pair of switch indices `i <= j`,
/// which is the finite criterion evaluated here.
pub fn validate<T: Scalar>(
    sig: &SwitchingSignal<T>,
    spec: &SignalClassSpec<T>,
) -> Result<ValidationReport<T>, SignalError<T>> {
    spec.check_params()?;
    match spec {
        SignalClassSpec::Dwell { tau_d } => Ok(validate_dwell(sig, *tau_d)),
        SignalClassSpec::Adt { tau_d, n0 } => Ok(validate_adt(sig, *tau_d, *n0)),
        SignalClassSpec::Ergodic { window, modes } => validate_ergodic(sig, *window, modes),
        SignalClassSpec::Graph { map } => Ok(validate_graph(sig, map)),
        SignalClassSpec::Intersection { members } => {
            for member in members {
                let report = validate(sig, member)?;
                if !report.pass {
                    return Ok(report);
                }
            }
            Ok(ValidationReport::pass())
        }
    }
}

fn validate_dwell<T: Scalar>(sig: &SwitchingSignal<T>, tau_d: T) -> ValidationReport<T> {
    for pair in sig.switches().windows(2) {
        let (t_prev, t_next) = (pair[0].0, pair[1].0);
        let gap = t_next - t_prev;
        if gap < tau_d {
            return ValidationReport::fail(Violation::DwellGap { t_prev, t_next, gap });
        }
    }
    ValidationReport::pass()
}

fn validate_adt<T: Scalar>(sig: &SwitchingSignal<T>, tau_d: T, n0: u32) -> ValidationReport<T> {
    let times: Vec<T> = sig.switch_times().collect();
    let n0t: T = cast(f64::from(n0));
    for i in 0..times.len() {
        for j in i..times.len() {
            let count = j - i + 1;
            let bound = n0t + (times[j] - times[i]) / tau_d;
            let count_t = T::from_usize(count).expect("switch count fits the scalar");
            if count_t > bound {
                return ValidationReport::fail(Violation::AdtBound {
                    i,
                    j,
                    t_i: times[i],
                    t_j: times[j],
                    count,
                    bound,
                });
            }
        }
    }
    ValidationReport::pass()
}

/// Ergodicity check over closed windows `[t0, t0 + window]`.
///
/// The set of modes seen by the window changes only when the window start
/// crosses a switch time, and a failure region always contains either the
/// horizon start or a switch time, so checking those candidate starts (plus
/// the last admissible start) decides the whole horizon.
fn validate_ergodic<T: Scalar>(
    sig: &SwitchingSignal<T>,
    window: T,
    modes: &[ModeId],
) -> Result<ValidationReport<T>, SignalError<T>> {
    let horizon = sig.t_end() - sig.t_begin();
    if horizon < window {
        return Err(SignalError::HorizonTooShort { horizon, window });
    }
    let t_last = sig.t_end() - window;
    let mut starts: Vec<T> = vec![sig.t_begin(), t_last];
    starts.extend(sig.switch_times().filter(|&s| s <= t_last));
    starts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    starts.dedup();

    for &t0 in &starts {
        let t1 = t0 + window;
        for &mode in modes {
            let active_at_start = sig.mode_at(t0).expect("start inside horizon") == mode;
            let switched_inside = sig
                .switches()
                .iter()
                .any(|&(s, m)| m == mode && s > t0 && s <= t1);
            if !(active_at_start || switched_inside) {
                return Ok(ValidationReport::fail(Violation::ErgodicWindow {
                    window_start: t0,
                    missing: mode,
                }));
            }
        }
    }
    Ok(ValidationReport::pass())
}

fn validate_graph<T: Scalar>(sig: &SwitchingSignal<T>, map: &SetValuedMap) -> ValidationReport<T> {
    let mut prev = sig.initial_mode();
    for &(t, mode) in sig.switches() {
        if !map.contains_edge(prev, mode) {
            return ValidationReport::fail(Violation::GraphJump {
                t,
                from: prev,
                to: mode,
            });
        }
        prev = mode;
    }
    ValidationReport::pass()
}

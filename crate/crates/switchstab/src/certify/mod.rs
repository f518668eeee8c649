//! Theorem-rule certificate checkers.
//!
//! Each rule evaluates the hypotheses of one convergence/stability criterion
//! and emits a three-valued [`CertificateReport`]: `Certified` is reserved
//! for hypotheses decided by linear algebra, sampling-based checks cap the
//! verdict at `SupportedByEvidence`, and any failed hypothesis refutes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::signal::ModeId;

mod convergence;
mod corollary;
mod cycles;
mod empirical;
mod meagre;

pub use convergence::{check_convergence, ConvergenceOptions};
pub use corollary::{check_corollary_final, CorollaryOptions};
pub use cycles::simple_cycles;
pub use empirical::{
    empirical_stability_test, StabilityStats, StabilityTestOptions, TrialRecord,
};
pub use meagre::{check_output_meagreness, OutputMeagrenessOptions, OutputMeagrenessReport};

/// Identifier of a checkable rule; the strings are the stable CLI/JSON tokens.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum TheoremId {
    /// Convergence to unions of forward/backward zero-output intersections
    /// under average-dwell-time switching.
    #[serde(rename = "convergence0")]
    Convergence0,
    /// Convergence to the common equilibria under ergodic + dwell switching.
    #[serde(rename = "ergodicconv")]
    ErgodicConv,
    /// Convergence to the origin under average-dwell-time switching via
    /// per-mode and cross-mode zero-output conditions.
    #[serde(rename = "convergence1")]
    Convergence1,
    /// Convergence to the origin under graph-constrained dwell switching via
    /// per-cycle zero-output conditions.
    #[serde(rename = "convergence2")]
    Convergence2,
    /// Asymptotic stability from a weak Lyapunov pair plus the
    /// origin-convergence conditions (average dwell time).
    #[serde(rename = "guas1")]
    Guas1,
    /// Asymptotic stability from an F-weak Lyapunov pair plus the per-cycle
    /// conditions (graph-constrained dwell switching).
    #[serde(rename = "guas2")]
    Guas2,
    /// Asymptotic stability from an F-weak Lyapunov pair whose zero-output
    /// sets reduce to equilibria (ergodic + dwell switching).
    #[serde(rename = "guas2bis")]
    Guas2Bis,
    /// Fully algorithmic linear-quadratic stability certificate.
    #[serde(rename = "corollary_final")]
    CorollaryFinal,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::Convergence0,
        TheoremId::ErgodicConv,
        TheoremId::Convergence1,
        TheoremId::Convergence2,
        TheoremId::Guas1,
        TheoremId::Guas2,
        TheoremId::Guas2Bis,
        TheoremId::CorollaryFinal,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            TheoremId::Convergence0 => "convergence0",
            TheoremId::ErgodicConv => "ergodicconv",
            TheoremId::Convergence1 => "convergence1",
            TheoremId::Convergence2 => "convergence2",
            TheoremId::Guas1 => "guas1",
            TheoremId::Guas2 => "guas2",
            TheoremId::Guas2Bis => "guas2bis",
            TheoremId::CorollaryFinal => "corollary_final",
        }
    }
}

impl std::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for TheoremId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .iter()
            .find(|t| t.token() == s)
            .copied()
            .ok_or_else(|| format!("unknown theorem id `{s}`"))
    }
}

/// Concrete object refuting (or supporting) a hypothesis.
#[derive(Clone, Debug, Serialize)]
pub struct Witness<T: Scalar = f64> {
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<ModeId>>,
}

impl<T: Scalar> Default for Witness<T> {
    fn default() -> Self {
        Witness {
            description: String::new(),
            point: None,
            mode: None,
            value: None,
            cycle: None,
        }
    }
}

impl<T: Scalar> Witness<T> {
    pub fn text(description: impl Into<String>) -> Self {
        Witness {
            description: description.into(),
            ..Default::default()
        }
    }
}

/// Status of one hypothesis.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HypothesisStatus<T: Scalar = f64> {
    /// Decided analytically (linear algebra / pointwise evaluation).
    Holds,
    /// Declared by the user, not checked here.
    Asserted,
    /// Survived a sampling-based check; `margin` is check-specific (worst
    /// inequality slack, largest uphill step, smallest ratio, ...).
    Evidence { samples: usize, margin: T },
    /// Refuted with a concrete witness.
    Fails { witness: Witness<T> },
}

impl<T: Scalar> HypothesisStatus<T> {
    pub fn is_fails(&self) -> bool {
        matches!(self, HypothesisStatus::Fails { .. })
    }

    pub fn is_holds(&self) -> bool {
        matches!(self, HypothesisStatus::Holds)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport<T: Scalar = f64> {
    pub name: String,
    #[serde(flatten)]
    pub status: HypothesisStatus<T>,
    pub detail: String,
}

impl<T: Scalar> HypothesisReport<T> {
    pub fn new(
        name: impl Into<String>,
        status: HypothesisStatus<T>,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }
}

/// Three-valued certificate verdict.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    SupportedByEvidence,
    Refuted,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "Certified",
            Verdict::SupportedByEvidence => "SupportedByEvidence",
            Verdict::Refuted => "Refuted",
        })
    }
}

/// Descriptor of the limit set a rule predicts the state converges to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredictedLimit {
    Origin,
    /// Intersection over modes of equilibria cut by per-mode level sets.
    CommonEquilibriaLevelSets,
    /// Intersection over modes of equilibria inside the Lyapunov domains.
    CommonEquilibria,
    /// Union over mode pairs of forward/backward zero-output intersections
    /// cut by level sets.
    ZeroOutputIntersections,
    /// Zero set of a user output function.
    OutputZeroSet { output: String },
}

impl PredictedLimit {
    pub fn kind(&self) -> &'static str {
        match self {
            PredictedLimit::Origin => "origin",
            PredictedLimit::CommonEquilibriaLevelSets => "common_equilibria_level_sets",
            PredictedLimit::CommonEquilibria => "common_equilibria",
            PredictedLimit::ZeroOutputIntersections => "zero_output_intersections",
            PredictedLimit::OutputZeroSet { .. } => "output_zero_set",
        }
    }

    pub fn description(&self) -> String {
        match self {
            PredictedLimit::Origin => "the origin {0}".into(),
            PredictedLimit::CommonEquilibriaLevelSets => {
                "intersection over modes of (equilibria of f_gamma) cut by V_gamma level sets"
                    .into()
            }
            PredictedLimit::CommonEquilibria => {
                "intersection over modes of (equilibria of f_gamma within the Lyapunov domain)"
                    .into()
            }
            PredictedLimit::ZeroOutputIntersections => {
                "union over mode pairs of forward/backward zero-output intersections cut by V level sets"
                    .into()
            }
            PredictedLimit::OutputZeroSet { output } => format!("zero set of output `{output}`"),
        }
    }
}

impl Serialize for PredictedLimit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("PredictedLimit", 2)?;
        s.serialize_field("kind", self.kind())?;
        s.serialize_field("description", &self.description())?;
        s.end()
    }
}

impl std::fmt::Display for PredictedLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.description())
    }
}

/// Per-theorem certificate: hypothesis statuses, derived verdict, predicted
/// limit set. The verdict is computed, never set by callers, so `Certified`
/// cannot coexist with a non-`Holds` hypothesis.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport<T: Scalar = f64> {
    pub theorem: TheoremId,
    pub hypotheses: Vec<HypothesisReport<T>>,
    pub verdict: Verdict,
    pub predicted_limit: PredictedLimit,
}

impl<T: Scalar> CertificateReport<T> {
    pub fn from_hypotheses(
        theorem: TheoremId,
        hypotheses: Vec<HypothesisReport<T>>,
        predicted_limit: PredictedLimit,
    ) -> Self {
        let verdict = if hypotheses.iter().any(|h| h.status.is_fails()) {
            Verdict::Refuted
        } else if hypotheses.iter().all(|h| h.status.is_holds()) && !hypotheses.is_empty() {
            Verdict::Certified
        } else {
            Verdict::SupportedByEvidence
        };
        Self {
            theorem,
            hypotheses,
            verdict,
            predicted_limit,
        }
    }

    pub fn failed_hypotheses(&self) -> impl Iterator<Item = &HypothesisReport<T>> {
        self.hypotheses.iter().filter(|h| h.status.is_fails())
    }
}

impl<T: Scalar + Serialize> std::fmt::Display for CertificateReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "theorem {}: {}", self.theorem, self.verdict)?;
        writeln!(f, "predicted limit: {}", self.predicted_limit)?;
        for h in &self.hypotheses {
            let status = match &h.status {
                HypothesisStatus::Holds => "holds".to_string(),
                HypothesisStatus::Asserted => "asserted".to_string(),
                HypothesisStatus::Evidence { samples, margin } => {
                    format!("evidence (samples {samples}, margin {margin})")
                }
                HypothesisStatus::Fails { witness } => {
                    format!("FAILS ({})", witness.description)
                }
            };
            writeln!(f, "  - {}: {status} [{}]", h.name, h.detail)?;
        }
        Ok(())
    }
}

#[derive(Error, Debug)]
pub enum CertifyError<T: Scalar> {
    #[error("theorem {theorem} cannot be checked against this signal class: {reason}")]
    ClassTheoremMismatch { theorem: TheoremId, reason: String },
    #[error("invalid certification input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lyapunov(#[from] crate::lyapunov::LyapunovError<T>),
    #[error(transparent)]
    System(#[from] crate::system::SystemError<T>),
    #[error(transparent)]
    Sim(#[from] crate::integrator::SimError<T>),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError<T>),
    #[error(transparent)]
    Observability(#[from] crate::observability::ObservabilityError<T>),
}

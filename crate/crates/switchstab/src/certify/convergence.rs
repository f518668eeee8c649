//! Hypothesis checkers for the convergence and stability rules.
//!
//! Zero-output-set inclusions are decided analytically for unconstrained
//! linear modes with quadratic pairs (they reduce to unobservable subspaces
//! and kernels) and otherwise tested by seeding candidate points from the
//! sampled zero set of `W` and running the membership flows. Monotonicity of
//! `v(t)` is analytic for common-`P` quadratic families with nonpositive
//! per-mode LMIs and simulated evidence otherwise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    simple_cycles, CertificateReport, CertifyError, HypothesisReport, HypothesisStatus,
    PredictedLimit, TheoremId, Witness,
};
use crate::integrator::{simulate, SimOptions};
use crate::lyapunov::{
    check_decrease_inequality, check_positive_definite_v, monitor_v, LyapunovPair, MonitorOptions,
};
use crate::observability::{intersect, kernel, unobservable_subspace, zero_output_membership, default_membership_tau, FlowDirection, Subspace};
use crate::scalar::{cast, Scalar};
use crate::signal::{generate, GenerateOptions, ModeId, SetValuedMap, SignalClassSpec};
use crate::system::{Region, SwitchedSystem};

#[derive(Clone, Debug)]
pub struct ConvergenceOptions<T: Scalar> {
    pub seed: u64,
    /// Candidate points sought per sampled zero set.
    pub candidate_samples: usize,
    /// Sampling threshold for the zero set `{W <= tol}`.
    pub w_zero_tol: T,
    /// Output tolerance of the membership flows.
    pub membership_tol: T,
    /// Membership horizon; `None` picks ten slowest time constants per mode.
    pub membership_tau: Option<T>,
    pub membership_step: T,
    /// Candidates closer to the origin than this are treated as the origin.
    pub origin_exclusion: T,
    pub equilibrium_tol: T,
    /// Accept the uniqueness-of-solutions assumption as user-asserted.
    pub uniqueness_asserted: bool,
    /// Sample count for the decrease-inequality precondition.
    pub decrease_samples: usize,
    /// Simulated trajectories backing the monotonicity evidence.
    pub monitor_trials: usize,
    pub monitor_horizon: T,
    pub monitor_step: T,
    /// Projector tolerance for analytic subspace equalities.
    pub subspace_tol: T,
}

impl<T: Scalar> Default for ConvergenceOptions<T> {
    fn default() -> Self {
        Self {
            seed: 0,
            candidate_samples: 32,
            w_zero_tol: cast(1e-6),
            membership_tol: cast(1e-7),
            membership_tau: None,
            membership_step: cast(1e-2),
            origin_exclusion: cast(1e-3),
            equilibrium_tol: cast(1e-8),
            uniqueness_asserted: false,
            decrease_samples: 200,
            monitor_trials: 10,
            monitor_horizon: cast(20.0),
            monitor_step: cast(1e-2),
            subspace_tol: cast(1e-9),
        }
    }
}

struct ClassShape<'a> {
    has_rate_bound: bool,
    has_dwell: bool,
    has_ergodic: bool,
    graph: Option<&'a SetValuedMap>,
}

fn class_shape<T: Scalar>(spec: &SignalClassSpec<T>) -> ClassShape<'_> {
    let mut shape = ClassShape {
        has_rate_bound: false,
        has_dwell: false,
        has_ergodic: false,
        graph: None,
    };
    for atom in spec.atoms() {
        match atom {
            SignalClassSpec::Dwell { .. } => {
                shape.has_rate_bound = true;
                shape.has_dwell = true;
            }
            SignalClassSpec::Adt { n0, .. } => {
                shape.has_rate_bound = true;
                if *n0 == 1 {
                    shape.has_dwell = true;
                }
            }
            SignalClassSpec::Ergodic { .. } => shape.has_ergodic = true,
            SignalClassSpec::Graph { map } => shape.graph = Some(map),
            SignalClassSpec::Intersection { .. } => unreachable!("atoms() flattens"),
        }
    }
    shape
}

struct Ctx<'a, T: Scalar> {
    sys: &'a SwitchedSystem<T>,
    pair: &'a LyapunovPair<T>,
    opts: &'a ConvergenceOptions<T>,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    /// `(A, C)` when the mode is exactly linear, quadratic, and unconstrained
    /// on both the system and Lyapunov sides; there the zero-output sets are
    /// exactly the unobservable subspace of `(C, A)`.
    fn analytic_linear(&self, id: ModeId) -> Option<(DMatrix<T>, DMatrix<T>)> {
        let smode = self.sys.mode(id).ok()?;
        let a = smode.linear_matrix()?;
        if !matches!(smode.domain().region, Region::All) {
            return None;
        }
        let q = self.pair.quadratic_data()?;
        let c = q.c.get(&id)?;
        let lmode = self.pair.mode(id).ok()?;
        if !matches!(lmode.domain.region, Region::All) {
            return None;
        }
        Some((a.clone(), c.clone()))
    }

    fn membership_tau(&self, id: ModeId) -> T {
        self.opts
            .membership_tau
            .unwrap_or_else(|| default_membership_tau(self.sys.mode(id).expect("mode checked")))
    }

    /// Membership of `x` in the zero-output set of `(f_id, W_id)`.
    fn member(&self, id: ModeId, x: &DVector<T>, dir: FlowDirection) -> Result<bool, CertifyError<T>> {
        let smode = self.sys.mode(id)?;
        let lmode = self.pair.mode(id)?;
        let w = lmode.w.clone();
        let verdict = zero_output_membership(
            smode,
            &move |y: &DVector<T>| w(y),
            x,
            self.membership_tau(id),
            dir,
            self.opts.membership_tol,
            self.opts.membership_step,
        )?;
        Ok(verdict.member)
    }

    fn is_equilibrium(&self, id: ModeId, x: &DVector<T>) -> Result<bool, CertifyError<T>> {
        let smode = self.sys.mode(id)?;
        Ok(smode.eval(x).norm() <= self.opts.equilibrium_tol)
    }

    fn in_domains(&self, id: ModeId, x: &DVector<T>) -> bool {
        let sm = self.sys.mode(id).map(|m| m.domain().contains(x));
        let lm = self.pair.mode(id).map(|m| m.domain.contains(x));
        sm.unwrap_or(false) && lm.unwrap_or(false)
    }

    /// Candidate points in the joint sampled zero set of the listed modes:
    /// `W_id(x) <= w_zero_tol` for all ids, inside all domains, away from the
    /// origin. Quadratic `W` have measure-zero zero sets, so candidates are
    /// drawn from the intersected `ker C` there; otherwise by rejection.
    fn candidates(&self, ids: &[ModeId], rng: &mut ChaCha8Rng) -> Result<Vec<DVector<T>>, CertifyError<T>> {
        let dim = self.sys.dim();
        let want = self.opts.candidate_samples;
        let mut out: Vec<DVector<T>> = Vec::new();
        let push = |x: DVector<T>, out: &mut Vec<DVector<T>>| {
            if x.norm() <= self.opts.origin_exclusion {
                return;
            }
            for &id in ids {
                if !self.in_domains(id, &x) {
                    return;
                }
                let w = (self.pair.mode(id).expect("mode checked").w)(&x);
                if w.abs() > self.opts.w_zero_tol {
                    return;
                }
            }
            out.push(x);
        };

        if let Some(q) = self.pair.quadratic_data() {
            // exact zero set: intersection of the C kernels
            let mut kernels = Vec::new();
            for &id in ids {
                let Some(c) = q.c.get(&id) else { break };
                kernels.push(kernel(c));
            }
            if kernels.len() == ids.len() {
                let meet = if kernels.is_empty() {
                    Subspace::full(dim)
                } else {
                    intersect(&kernels)?
                };
                if meet.is_trivial() {
                    return Ok(out);
                }
                for b in meet.basis_vectors() {
                    push(b.clone(), &mut out);
                    push(-b, &mut out);
                }
                while out.len() < want {
                    let coeff = DVector::from_fn(meet.rank(), |_, _| {
                        cast::<T>(rng.gen::<f64>() * 2.0 - 1.0)
                    });
                    let x = meet.basis() * coeff;
                    push(x, &mut out);
                    if out.is_empty() {
                        // domain constraints may reject everything
                        break;
                    }
                    if out.len() >= want {
                        break;
                    }
                }
                return Ok(out);
            }
        }

        // rejection sampling from the first mode's Lyapunov box
        let bbox = &self.pair.mode(ids[0])?.domain.bbox;
        let mut attempts = 0usize;
        while out.len() < want && attempts < want * 256 + 256 {
            attempts += 1;
            let x = bbox.sample(rng);
            push(x, &mut out);
        }
        Ok(out)
    }
}

struct Agg<T: Scalar> {
    all_analytic: bool,
    samples: usize,
    witness: Option<Witness<T>>,
    notes: Vec<String>,
}

impl<T: Scalar> Agg<T> {
    fn new() -> Self {
        Self {
            all_analytic: true,
            samples: 0,
            witness: None,
            notes: Vec::new(),
        }
    }

    fn analytic(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn sampled(&mut self, n: usize, note: impl Into<String>) {
        self.all_analytic = false;
        self.samples += n;
        self.notes.push(note.into());
    }

    fn fail(&mut self, witness: Witness<T>) {
        if self.witness.is_none() {
            self.witness = Some(witness);
        }
    }

    fn into_report(self, name: &str) -> HypothesisReport<T> {
        let detail = self.notes.join("; ");
        let status = match self.witness {
            Some(witness) => HypothesisStatus::Fails { witness },
            None if self.all_analytic => HypothesisStatus::Holds,
            None => HypothesisStatus::Evidence {
                samples: self.samples,
                margin: T::zero(),
            },
        };
        HypothesisReport::new(name, status, detail)
    }
}

/// Checks the hypotheses of `theorem` for `(sys, pair)` under signals of
/// `class_spec` and reports a three-valued certificate.
pub fn check_convergence<T: Scalar>(
    sys: &SwitchedSystem<T>,
    pair: &LyapunovPair<T>,
    class_spec: &SignalClassSpec<T>,
    theorem: TheoremId,
    opts: &ConvergenceOptions<T>,
) -> Result<CertificateReport<T>, CertifyError<T>> {
    class_spec.check_params()?;
    for id in sys.mode_ids() {
        pair.mode(id)?;
    }
    let shape = class_shape(class_spec);
    let mismatch = |reason: &str| CertifyError::ClassTheoremMismatch {
        theorem,
        reason: reason.to_string(),
    };
    match theorem {
        TheoremId::Convergence0 | TheoremId::Convergence1 | TheoremId::Guas1 => {
            if !shape.has_rate_bound {
                return Err(mismatch(
                    "needs an average-dwell-time or dwell-time component",
                ));
            }
        }
        TheoremId::ErgodicConv | TheoremId::Guas2Bis => {
            if !shape.has_ergodic || !shape.has_dwell {
                return Err(mismatch(
                    "needs an ergodic component intersected with a dwell-time component",
                ));
            }
        }
        TheoremId::Convergence2 | TheoremId::Guas2 => {
            if shape.graph.is_none() || !shape.has_dwell {
                return Err(mismatch(
                    "needs a graph component intersected with a dwell-time component",
                ));
            }
        }
        TheoremId::CorollaryFinal => {
            return Err(CertifyError::Invalid(
                "corollary_final takes matrix lists; use check_corollary_final".into(),
            ))
        }
    }

    let ctx = Ctx { sys, pair, opts };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut hypotheses = Vec::new();

    // decrease inequality (precondition of every rule here)
    let dec = check_decrease_inequality(sys, pair, opts.decrease_samples, opts.seed)?;
    hypotheses.push(if dec.pass {
        HypothesisReport::new(
            "decrease_inequality",
            HypothesisStatus::Evidence {
                samples: dec.samples,
                margin: dec.worst_margin,
            },
            "sampled -grad V . f >= W >= 0 per mode",
        )
    } else {
        let w = dec.witness.expect("failed check carries a witness");
        HypothesisReport::new(
            "decrease_inequality",
            HypothesisStatus::Fails {
                witness: Witness {
                    description: format!(
                        "decrease inequality violated in mode {} (margin {})",
                        w.mode, w.margin
                    ),
                    point: Some(w.x),
                    mode: Some(w.mode),
                    value: Some(w.margin),
                    ..Default::default()
                },
            },
            "sampled -grad V . f >= W >= 0 per mode",
        )
    });

    // v(t) monotonicity: global for the plain invariance route, per mode
    // (F-weak) for the finite-mode-set routes
    let per_mode = !matches!(theorem, TheoremId::Convergence0);
    hypotheses.push(monotonicity_hypothesis(&ctx, class_spec, per_mode)?);

    match theorem {
        TheoremId::Convergence0 => {}
        TheoremId::Convergence1 | TheoremId::Guas1 => {
            hypotheses.push(per_mode_forward_backward_trivial(&ctx, &mut rng)?);
            hypotheses.push(cross_mode_trivial(&ctx, &mut rng)?);
            hypotheses.push(origin_hypotheses(&ctx)?);
            hypotheses.push(uniqueness_hypothesis(&ctx)?);
        }
        TheoremId::Convergence2 | TheoremId::Guas2 => {
            hypotheses.push(all_one_direction_trivial(&ctx, &mut rng)?);
            hypotheses.push(cycle_condition(
                &ctx,
                shape.graph.expect("checked above"),
                &mut rng,
            )?);
            hypotheses.push(origin_hypotheses(&ctx)?);
            hypotheses.push(uniqueness_hypothesis(&ctx)?);
        }
        TheoremId::ErgodicConv | TheoremId::Guas2Bis => {
            hypotheses.push(zero_output_equals_equilibria(&ctx, &mut rng)?);
            if theorem == TheoremId::Guas2Bis {
                hypotheses.push(common_equilibria_trivial(&ctx, &mut rng)?);
            }
        }
        TheoremId::CorollaryFinal => unreachable!("rejected above"),
    }

    if matches!(theorem, TheoremId::Guas1 | TheoremId::Guas2 | TheoremId::Guas2Bis) {
        hypotheses.push(envelope_hypothesis(&ctx, &mut rng)?);
    }

    let predicted_limit = match theorem {
        TheoremId::Convergence0 => PredictedLimit::ZeroOutputIntersections,
        TheoremId::ErgodicConv => PredictedLimit::CommonEquilibria,
        _ => PredictedLimit::Origin,
    };
    Ok(CertificateReport::from_hypotheses(
        theorem,
        hypotheses,
        predicted_limit,
    ))
}

fn monotonicity_hypothesis<T: Scalar>(
    ctx: &Ctx<'_, T>,
    class_spec: &SignalClassSpec<T>,
    per_mode: bool,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let name = if per_mode {
        "v_nonincreasing_per_mode"
    } else {
        "v_nonincreasing"
    };
    // analytic shortcut: one shared quadratic V with nonpositive per-mode LMI
    // decreases along every admissible trajectory, globally and per mode
    if ctx.pair.has_common_p() {
        let q = ctx.pair.quadratic_data().expect("common P implies quadratic");
        let all_linear_ok = ctx.sys.mode_ids().iter().all(|&id| {
            let Some((a, _)) = ctx.analytic_linear(id) else {
                return false;
            };
            let p = &q.p[&id];
            let slack = p * &a + a.transpose() * p;
            let sym = (&slack + slack.transpose()) * cast::<T>(0.5);
            let lambda_max = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(T::min_value().expect("bounded scalar"), |x, y| x.max(y));
            lambda_max <= cast(1e-10)
        });
        if all_linear_ok {
            return Ok(HypothesisReport::new(
                name,
                HypothesisStatus::Holds,
                "common quadratic V with nonpositive P*A + A'*P in every mode",
            ));
        }
    }

    let gen_opts = GenerateOptions {
        modes: Some(ctx.sys.mode_ids()),
        ..Default::default()
    };
    let horizon = ctx.opts.monitor_horizon;
    let mut runs = 0usize;
    let mut skipped = 0usize;
    let mut worst_uphill = T::zero();
    for trial in 0..ctx.opts.monitor_trials {
        let seed = ctx.opts.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let sig = generate(class_spec, (T::zero(), horizon), seed, &gen_opts)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77aa_11bb);
        let mut x0 = None;
        for _ in 0..20 {
            let candidate = DVector::from_fn(ctx.sys.dim(), |_, _| {
                cast::<T>(rng.gen::<f64>() * 2.0 - 1.0)
            });
            if ctx.in_domains(sig.initial_mode(), &candidate) {
                x0 = Some(candidate);
                break;
            }
        }
        let Some(x0) = x0 else {
            skipped += 1;
            continue;
        };
        let traj = match simulate(
            ctx.sys,
            &sig,
            &x0,
            (T::zero(), horizon),
            ctx.opts.monitor_step,
            false,
            &SimOptions::default(),
        ) {
            Ok(t) => t,
            Err(crate::integrator::SimError::DomainViolation { .. }) => {
                // not an admissible trajectory of the constrained system
                skipped += 1;
                continue;
            }
            Err(err) => {
                return Ok(HypothesisReport::new(
                    name,
                    HypothesisStatus::Fails {
                        witness: Witness::text(format!(
                            "evidence trajectory {trial} failed numerically: {err}"
                        )),
                    },
                    "simulated evidence aborted",
                ))
            }
        };
        let report = monitor_v(&traj, ctx.pair, per_mode, &MonitorOptions::default())?;
        runs += 1;
        worst_uphill = worst_uphill.max(report.max_uphill);
        if !report.nonincreasing {
            let v = report.first_violation.expect("violation recorded");
            return Ok(HypothesisReport::new(
                name,
                HypothesisStatus::Fails {
                    witness: Witness {
                        description: format!(
                            "v increased by {} at t = {} on evidence trajectory {trial}",
                            v.delta, v.t
                        ),
                        mode: Some(v.mode),
                        value: Some(v.delta),
                        ..Default::default()
                    },
                },
                "simulated evidence found an increase",
            ));
        }
    }
    Ok(HypothesisReport::new(
        name,
        HypothesisStatus::Evidence {
            samples: runs,
            margin: worst_uphill,
        },
        format!("monitored over {runs} generated trajectories ({skipped} skipped)"),
    ))
}

/// Per mode: forward and backward infinite-horizon zero-output sets meet only
/// at the origin.
fn per_mode_forward_backward_trivial<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let mut agg = Agg::new();
    for id in ctx.sys.mode_ids() {
        if let Some((a, c)) = ctx.analytic_linear(id) {
            let unobs = unobservable_subspace(&c, &a)?;
            if unobs.is_trivial() {
                agg.analytic(format!("mode {id}: unobservable subspace trivial"));
            } else {
                let basis: DVector<T> = unobs.basis_vectors().next().expect("nontrivial");
                agg.fail(Witness {
                    description: format!(
                        "mode {id}: unobservable subspace has dimension {}, so nonzero states keep W = 0 forward and backward",
                        unobs.rank()
                    ),
                    point: Some(basis.iter().copied().collect()),
                    mode: Some(id),
                    ..Default::default()
                });
            }
            continue;
        }
        let candidates = ctx.candidates(&[id], rng)?;
        let n = candidates.len();
        for x in candidates {
            if ctx.member(id, &x, FlowDirection::Forward)?
                && ctx.member(id, &x, FlowDirection::Backward)?
            {
                agg.fail(Witness {
                    description: format!(
                        "mode {id}: nonzero state keeps W = 0 over both membership flows"
                    ),
                    point: Some(x.iter().copied().collect()),
                    mode: Some(id),
                    ..Default::default()
                });
                break;
            }
        }
        agg.sampled(n, format!("mode {id}: {n} zero-set candidates flowed both ways"));
    }
    Ok(agg.into_report("forward_backward_zero_output_trivial"))
}

/// For every ordered mode pair: the backward set of one meets the forward set
/// of the other only at the origin.
fn cross_mode_trivial<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let ids = ctx.sys.mode_ids();
    let mut agg = Agg::new();
    for &b in &ids {
        for &f in &ids {
            if b == f {
                continue;
            }
            pair_trivial(ctx, rng, b, f, &mut agg, None)?;
        }
    }
    Ok(agg.into_report("cross_mode_zero_output_trivial"))
}

/// Shared check: `O^b_b ∩ O^f_f ⊆ {0}`, analytic when both sides are
/// unconstrained linear-quadratic.
fn pair_trivial<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
    b: ModeId,
    f: ModeId,
    agg: &mut Agg<T>,
    cycle: Option<&[ModeId]>,
) -> Result<bool, CertifyError<T>> {
    if let (Some((ab, cb)), Some((af, cf))) = (ctx.analytic_linear(b), ctx.analytic_linear(f)) {
        let meet = intersect(&[
            unobservable_subspace(&cb, &ab)?,
            unobservable_subspace(&cf, &af)?,
        ])?;
        if meet.is_trivial() {
            agg.analytic(format!("pair ({b}, {f}): unobservable intersection trivial"));
            return Ok(true);
        }
        let basis: DVector<T> = meet.basis_vectors().next().expect("nontrivial");
        agg.fail(Witness {
            description: format!(
                "pair ({b}, {f}): unobservable subspaces intersect nontrivially"
            ),
            point: Some(basis.iter().copied().collect()),
            mode: Some(b),
            cycle: cycle.map(<[ModeId]>::to_vec),
            ..Default::default()
        });
        return Ok(false);
    }
    let candidates = ctx.candidates(&[b, f], rng)?;
    let n = candidates.len();
    let mut clean = true;
    for x in candidates {
        if ctx.member(b, &x, FlowDirection::Backward)? && ctx.member(f, &x, FlowDirection::Forward)? {
            agg.fail(Witness {
                description: format!(
                    "pair ({b}, {f}): nonzero state survives the backward and forward flows"
                ),
                point: Some(x.iter().copied().collect()),
                mode: Some(b),
                cycle: cycle.map(<[ModeId]>::to_vec),
                ..Default::default()
            });
            clean = false;
            break;
        }
    }
    agg.sampled(n, format!("pair ({b}, {f}): {n} joint zero-set candidates"));
    Ok(clean)
}

/// Either every mode's forward infinite-horizon zero-output set is trivial,
/// or every mode's backward one is.
fn all_one_direction_trivial<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let ids = ctx.sys.mode_ids();
    let mut agg = Agg::new();
    let mut forward_clean = true;
    let mut backward_clean = true;
    let mut first_witness: Option<Witness<T>> = None;
    for &id in &ids {
        if let Some((a, c)) = ctx.analytic_linear(id) {
            let unobs = unobservable_subspace(&c, &a)?;
            if unobs.is_trivial() {
                agg.analytic(format!("mode {id}: unobservable subspace trivial"));
            } else {
                forward_clean = false;
                backward_clean = false;
                let basis: DVector<T> = unobs.basis_vectors().next().expect("nontrivial");
                first_witness.get_or_insert(Witness {
                    description: format!(
                        "mode {id}: unobservable subspace has dimension {} (both flow directions keep W = 0)",
                        unobs.rank()
                    ),
                    point: Some(basis.iter().copied().collect()),
                    mode: Some(id),
                    value: None,
                    cycle: None,
                });
            }
            continue;
        }
        let candidates = ctx.candidates(&[id], rng)?;
        let n = candidates.len();
        for x in candidates {
            if forward_clean && ctx.member(id, &x, FlowDirection::Forward)? {
                forward_clean = false;
                first_witness.get_or_insert(Witness {
                    description: format!("mode {id}: nonzero state keeps W = 0 forward"),
                    point: Some(x.iter().copied().collect()),
                    mode: Some(id),
                    value: None,
                    cycle: None,
                });
            }
            if backward_clean && ctx.member(id, &x, FlowDirection::Backward)? {
                backward_clean = false;
                first_witness.get_or_insert(Witness {
                    description: format!("mode {id}: nonzero state keeps W = 0 backward"),
                    point: Some(x.iter().copied().collect()),
                    mode: Some(id),
                    value: None,
                    cycle: None,
                });
            }
            if !forward_clean && !backward_clean {
                break;
            }
        }
        agg.sampled(n, format!("mode {id}: {n} zero-set candidates"));
    }
    if !forward_clean && !backward_clean {
        agg.fail(first_witness.unwrap_or_else(|| Witness::text("both directions refuted")));
    } else {
        agg.analytic(if forward_clean {
            "forward direction clean for every mode"
        } else {
            "backward direction clean for every mode"
        });
    }
    Ok(agg.into_report("all_forward_or_all_backward_trivial"))
}

/// For each simple cycle of `H`, some consecutive pair must satisfy the
/// backward/forward triviality.
fn cycle_condition<T: Scalar>(
    ctx: &Ctx<'_, T>,
    graph: &SetValuedMap,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let cycles = simple_cycles(graph);
    let mut agg = Agg::new();
    if cycles.is_empty() {
        agg.analytic("successor map has no simple cycles");
        return Ok(agg.into_report("cycle_zero_output_trivial"));
    }
    for cycle in &cycles {
        let mut found = false;
        let mut cycle_agg = Agg::new();
        for j in 0..cycle.len() - 1 {
            if pair_trivial(ctx, rng, cycle[j], cycle[j + 1], &mut cycle_agg, Some(cycle))? {
                found = true;
                break;
            }
            // a refuted pair only rules out this j, not the whole cycle
            cycle_agg.witness = None;
        }
        if !cycle_agg.all_analytic {
            agg.sampled(cycle_agg.samples, format!("cycle {cycle:?}: sampled pairs"));
        } else {
            agg.analytic(format!("cycle {cycle:?}"));
        }
        if !found {
            agg.fail(Witness {
                description:
                    "no consecutive pair of the cycle has a trivial backward/forward zero-output intersection"
                        .to_string(),
                cycle: Some(cycle.clone()),
                ..Default::default()
            });
        }
    }
    Ok(agg.into_report("cycle_zero_output_trivial"))
}

/// Per mode: the forward (or backward) zero-output set coincides with the
/// equilibria inside the Lyapunov domain.
fn zero_output_equals_equilibria<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let mut agg = Agg::new();
    for id in ctx.sys.mode_ids() {
        if let Some((a, c)) = ctx.analytic_linear(id) {
            let unobs = unobservable_subspace(&c, &a)?;
            let ker = kernel(&a);
            let dist = unobs.projector_distance(&ker);
            if dist <= ctx.opts.subspace_tol {
                agg.analytic(format!(
                    "mode {id}: unobservable subspace equals ker(A) (distance {dist})"
                ));
            } else {
                let basis: Option<DVector<T>> = unobs
                    .basis_vectors()
                    .find(|v| !ker.contains(v, cast(1e-6)));
                agg.fail(Witness {
                    description: format!(
                        "mode {id}: unobservable subspace differs from ker(A) (distance {dist})"
                    ),
                    point: basis.map(|v| v.iter().copied().collect()),
                    mode: Some(id),
                    value: Some(dist),
                    ..Default::default()
                });
            }
            continue;
        }
        // sampled route: any zero-set candidate that survives a flow must be
        // an equilibrium (the reverse inclusion follows from the decrease
        // inequality, which forces W = 0 at equilibria)
        let candidates = ctx.candidates(&[id], rng)?;
        let n = candidates.len();
        let check_direction = |dir: FlowDirection| -> Result<Option<DVector<T>>, CertifyError<T>> {
            for x in &candidates {
                if ctx.member(id, x, dir)? && !ctx.is_equilibrium(id, x)? {
                    return Ok(Some(x.clone()));
                }
            }
            Ok(None)
        };
        let fwd = check_direction(FlowDirection::Forward)?;
        if fwd.is_some() {
            if let Some(bwd) = check_direction(FlowDirection::Backward)? {
                agg.fail(Witness {
                    description: format!(
                        "mode {id}: non-equilibrium state keeps W = 0 in both flow directions"
                    ),
                    point: Some(bwd.iter().copied().collect()),
                    mode: Some(id),
                    ..Default::default()
                });
            }
        }
        agg.sampled(
            n,
            format!("mode {id}: {n} zero-set candidates flowed and compared against equilibria"),
        );
    }
    Ok(agg.into_report("zero_output_equals_equilibria"))
}

/// The modes' common equilibria inside the domains reduce to the origin.
fn common_equilibria_trivial<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let ids = ctx.sys.mode_ids();
    let mut agg = Agg::new();
    let all_linear_unconstrained = ids.iter().all(|&id| ctx.analytic_linear(id).is_some());
    if all_linear_unconstrained {
        let kernels: Vec<Subspace<T>> = ids
            .iter()
            .map(|&id| {
                let (a, _) = ctx.analytic_linear(id).expect("checked above");
                kernel(&a)
            })
            .collect();
        let meet = intersect(&kernels)?;
        if meet.is_trivial() {
            agg.analytic("kernel intersection trivial");
        } else {
            let basis: DVector<T> = meet.basis_vectors().next().expect("nontrivial");
            agg.fail(Witness {
                description: format!(
                    "common equilibrium subspace has dimension {}",
                    meet.rank()
                ),
                point: Some(basis.iter().copied().collect()),
                ..Default::default()
            });
        }
        return Ok(agg.into_report("common_equilibria_trivial"));
    }
    let bbox = &ctx.pair.mode(ids[0])?.domain.bbox;
    let mut tested = 0usize;
    for _ in 0..ctx.opts.candidate_samples * 32 {
        let x = bbox.sample(rng);
        if x.norm() <= ctx.opts.origin_exclusion {
            continue;
        }
        if !ids.iter().all(|&id| ctx.in_domains(id, &x)) {
            continue;
        }
        tested += 1;
        let mut common = true;
        for &id in &ids {
            if !ctx.is_equilibrium(id, &x)? {
                common = false;
                break;
            }
        }
        if common {
            agg.fail(Witness {
                description: "nonzero common equilibrium of every mode".into(),
                point: Some(x.iter().copied().collect()),
                ..Default::default()
            });
            break;
        }
        if tested >= ctx.opts.candidate_samples * 8 {
            break;
        }
    }
    agg.sampled(tested, format!("{tested} sampled states tested as common equilibria"));
    Ok(agg.into_report("common_equilibria_trivial"))
}

/// Origin checks: `0` is an equilibrium of every mode whose domain contains
/// it, and lies inside the per-mode Lyapunov domains.
fn origin_hypotheses<T: Scalar>(ctx: &Ctx<'_, T>) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let zero = DVector::zeros(ctx.sys.dim());
    let mut agg = Agg::new();
    for id in ctx.sys.mode_ids() {
        let smode = ctx.sys.mode(id)?;
        if !smode.domain().contains(&zero) {
            agg.analytic(format!("mode {id}: origin outside the mode domain (skipped)"));
            continue;
        }
        let norm = smode.eval(&zero).norm();
        if norm > ctx.opts.equilibrium_tol {
            agg.fail(Witness {
                description: format!("mode {id}: |f(0)| = {norm} exceeds the equilibrium tolerance"),
                mode: Some(id),
                value: Some(norm),
                ..Default::default()
            });
        }
        let lmode = ctx.pair.mode(id)?;
        if !lmode.domain.contains(&zero) {
            agg.fail(Witness {
                description: format!("mode {id}: origin outside the Lyapunov domain"),
                mode: Some(id),
                ..Default::default()
            });
        }
        agg.analytic(format!("mode {id}: f(0) = 0 and 0 in the Lyapunov domain"));
    }
    Ok(agg.into_report("origin_is_common_equilibrium"))
}

/// Uniqueness of the solution from the origin: user-asserted, automatic for
/// all-linear systems, or replaced by the sampled positive-definite-V check.
fn uniqueness_hypothesis<T: Scalar>(ctx: &Ctx<'_, T>) -> Result<HypothesisReport<T>, CertifyError<T>> {
    if ctx.opts.uniqueness_asserted {
        return Ok(HypothesisReport::new(
            "uniqueness_at_origin",
            HypothesisStatus::Asserted,
            "declared by the caller",
        ));
    }
    let all_linear = ctx
        .sys
        .modes()
        .iter()
        .all(|m| m.linear_matrix().is_some());
    if all_linear {
        return Ok(HypothesisReport::new(
            "uniqueness_at_origin",
            HypothesisStatus::Holds,
            "linear fields are globally Lipschitz",
        ));
    }
    let check = check_positive_definite_v(ctx.sys, ctx.pair, ctx.opts.candidate_samples * 8, ctx.opts.seed, cast(1e-4))?;
    Ok(match check.witness {
        None => HypothesisReport::new(
            "uniqueness_at_origin",
            HypothesisStatus::Evidence {
                samples: ctx.opts.candidate_samples * 8,
                margin: check.min_ratio,
            },
            "replaced by the sampled positive-definiteness of V",
        ),
        Some((mode, point)) => HypothesisReport::new(
            "uniqueness_at_origin",
            HypothesisStatus::Fails {
                witness: Witness {
                    description: format!("V is not positive definite near this state (mode {mode})"),
                    point: Some(point),
                    mode: Some(mode),
                    ..Default::default()
                },
            },
            "replaced by the sampled positive-definiteness of V",
        ),
    })
}

/// Class-K envelopes of the weak pair: analytic for quadratic families,
/// sampled otherwise; absent envelopes refute the stability rules.
fn envelope_hypothesis<T: Scalar>(
    ctx: &Ctx<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<HypothesisReport<T>, CertifyError<T>> {
    let scope = if ctx.pair.is_radially_unbounded() {
        "radially unbounded (global scope)"
    } else {
        "local scope"
    };
    let (Some(a1), Some(a2)) = (ctx.pair.alpha1(), ctx.pair.alpha2()) else {
        return Ok(HypothesisReport::new(
            "class_k_envelopes",
            HypothesisStatus::Fails {
                witness: Witness::text("the pair carries no class-K envelopes"),
            },
            scope,
        ));
    };
    if ctx.pair.quadratic_data().is_some() {
        return Ok(HypothesisReport::new(
            "class_k_envelopes",
            HypothesisStatus::Holds,
            format!("eigenvalue envelopes of the quadratic family; {scope}"),
        ));
    }
    let mut tested = 0usize;
    for &id in &ctx.sys.mode_ids() {
        let lmode = ctx.pair.mode(id)?;
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < ctx.opts.candidate_samples && attempts < ctx.opts.candidate_samples * 64 {
            attempts += 1;
            let x = lmode.domain.bbox.sample(rng);
            if !ctx.in_domains(id, &x) {
                continue;
            }
            accepted += 1;
            tested += 1;
            let v = (lmode.v)(&x);
            let r = x.norm();
            if a1(r) > v + cast::<T>(1e-9) || v > a2(r) + cast::<T>(1e-9) {
                return Ok(HypothesisReport::new(
                    "class_k_envelopes",
                    HypothesisStatus::Fails {
                        witness: Witness {
                            description: format!("envelope inequality fails in mode {id}"),
                            point: Some(x.iter().copied().collect()),
                            mode: Some(id),
                            value: Some(v),
                            ..Default::default()
                        },
                    },
                    scope,
                ));
            }
        }
    }
    Ok(HypothesisReport::new(
        "class_k_envelopes",
        HypothesisStatus::Evidence {
            samples: tested,
            margin: T::zero(),
        },
        format!("sampled alpha1(|x|) <= V <= alpha2(|x|); {scope}"),
    ))
}

//! Seeded, sound-by-construction samplers for each signal class.
//!
//! Every returned signal passes `validate` against the class spec it was
//! generated from; infeasible requests fail with an explicit error instead
//! of silently producing an invalid signal.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::class::SignalClassSpec;
use super::{ModeId, SetValuedMap, SignalError, SwitchingSignal};
use crate::scalar::{cast, eps_margin, Scalar};

/// Knobs for `generate` that the class spec itself does not determine.
#[derive(Clone, Debug, Default)]
pub struct GenerateOptions {
    /// Mode universe. Defaults to the modes implied by the class (ergodic
    /// mode list, graph domain) and finally to `{1, 2}`.
    pub modes: Option<Vec<ModeId>>,
    /// Relative sampling weights; modes absent from the map weigh 1.
    pub mode_weights: Option<BTreeMap<ModeId, f64>>,
    /// Starting mode; sampled from the universe when absent.
    pub initial_mode: Option<ModeId>,
}

struct Components<'a, T: Scalar> {
    dwell: Vec<T>,
    adt: Vec<(T, u32)>,
    ergodic: Vec<(T, &'a [ModeId])>,
    graphs: Vec<&'a SetValuedMap>,
}

fn split_components<T: Scalar>(spec: &SignalClassSpec<T>) -> Components<'_, T> {
    let mut parts = Components {
        dwell: Vec::new(),
        adt: Vec::new(),
        ergodic: Vec::new(),
        graphs: Vec::new(),
    };
    for atom in spec.atoms() {
        match atom {
            SignalClassSpec::Dwell { tau_d } => parts.dwell.push(*tau_d),
            SignalClassSpec::Adt { tau_d, n0 } => parts.adt.push((*tau_d, *n0)),
            SignalClassSpec::Ergodic { window, modes } => parts.ergodic.push((*window, modes)),
            SignalClassSpec::Graph { map } => parts.graphs.push(map),
            SignalClassSpec::Intersection { .. } => unreachable!("atoms() flattens"),
        }
    }
    parts
}

/// Samples a signal of the given class on `horizon`, deterministically per seed.
///
/// ADT components are enforced with a token bucket (credits refill at rate
/// `1/tau_d`, capped at `n0`, one credit per switch); ergodic components by a
/// fixed rotation through all modes with per-visit durations short enough
/// that every window of the required length sees a full rotation; graph
/// components by walking the successor map.
pub fn generate<T: Scalar>(
    spec: &SignalClassSpec<T>,
    horizon: (T, T),
    seed: u64,
    opts: &GenerateOptions,
) -> Result<SwitchingSignal<T>, SignalError<T>> {
    spec.check_params()?;
    let (t0, t1) = horizon;
    if !(t1 > t0) {
        return Err(SignalError::EmptyHorizon {
            t_begin: t0,
            t_end: t1,
        });
    }
    let parts = split_components(spec);
    let universe = resolve_universe(&parts, opts)?;
    let weights = resolve_weights(&universe, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let initial = match opts.initial_mode {
        Some(m) => {
            if !universe.contains(&m) {
                return Err(SignalError::Infeasible(format!(
                    "initial mode {m} not in the mode universe"
                )));
            }
            m
        }
        None => weighted_pick(&mut rng, &universe, &weights),
    };

    let switches = if parts.ergodic.is_empty() {
        event_driven(&parts, &universe, &weights, initial, t0, t1, &mut rng)?
    } else {
        rotation_driven(&parts, &universe, &weights, initial, t0, t1, &mut rng)?
    };
    SwitchingSignal::new(t0, t1, initial, switches)
}

fn resolve_universe<T: Scalar>(
    parts: &Components<'_, T>,
    opts: &GenerateOptions,
) -> Result<Vec<ModeId>, SignalError<T>> {
    let mut universe: Vec<ModeId> = if let Some(modes) = &opts.modes {
        modes.clone()
    } else if !parts.ergodic.is_empty() {
        let mut all: Vec<ModeId> = parts
            .ergodic
            .iter()
            .flat_map(|(_, m)| m.iter().copied())
            .collect();
        all.sort();
        all
    } else if let Some(map) = parts.graphs.first() {
        map.domain().collect()
    } else {
        vec![ModeId(1), ModeId(2)]
    };
    universe.sort();
    universe.dedup();
    if universe.is_empty() {
        return Err(SignalError::Infeasible("empty mode universe".into()));
    }
    // rotation must be able to activate every required mode
    for (_, modes) in &parts.ergodic {
        if let Some(missing) = modes.iter().find(|m| !universe.contains(m)) {
            return Err(SignalError::Infeasible(format!(
                "ergodic class requires mode {missing}, which is outside the mode universe"
            )));
        }
    }
    Ok(universe)
}

fn resolve_weights<T: Scalar>(
    universe: &[ModeId],
    opts: &GenerateOptions,
) -> Result<Vec<f64>, SignalError<T>> {
    let weights: Vec<f64> = universe
        .iter()
        .map(|m| {
            opts.mode_weights
                .as_ref()
                .and_then(|w| w.get(m).copied())
                .unwrap_or(1.0)
        })
        .collect();
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(SignalError::Infeasible(
            "mode weights must be finite and nonnegative".into(),
        ));
    }
    Ok(weights)
}

fn weighted_pick(rng: &mut ChaCha8Rng, modes: &[ModeId], weights: &[f64]) -> ModeId {
    debug_assert_eq!(modes.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // all-zero weights degrade to a uniform draw
        return modes[rng.gen_range(0..modes.len())];
    }
    let mut u = rng.gen::<f64>() * total;
    for (m, &w) in modes.iter().zip(weights) {
        u -= w;
        if u < 0.0 {
            return *m;
        }
    }
    *modes.last().expect("nonempty universe")
}

/// Per-ADT-component token bucket; the credit gain per elapsed gap is shaved
/// by a relative epsilon so that generated signals clear the exact validator
/// bound with margin instead of landing on float ties.
struct Bucket<T: Scalar> {
    tau_d: T,
    cap: T,
    credits: T,
    shave: T,
}

impl<T: Scalar> Bucket<T> {
    fn new(tau_d: T, n0: u32) -> Self {
        let cap: T = cast(f64::from(n0));
        Self {
            tau_d,
            cap,
            credits: cap,
            shave: T::one() - eps_margin::<T>(1e-9, 64.0),
        }
    }

    fn after(&self, gap: T) -> T {
        let gained = self.credits + gap * self.shave / self.tau_d;
        if gained > self.cap {
            self.cap
        } else {
            gained
        }
    }
}

fn event_driven<T: Scalar>(
    parts: &Components<'_, T>,
    universe: &[ModeId],
    weights: &[f64],
    initial: ModeId,
    t0: T,
    t1: T,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(T, ModeId)>, SignalError<T>> {
    let dwell_floor = parts
        .dwell
        .iter()
        .copied()
        .fold(T::zero(), |acc, tau| acc.max(tau * cast(1.005)));
    let mut buckets: Vec<Bucket<T>> = parts
        .adt
        .iter()
        .map(|&(tau, n0)| Bucket::new(tau, n0))
        .collect();
    let adt_ref: Option<T> = parts
        .adt
        .iter()
        .map(|&(tau, _)| tau)
        .fold(None, |acc: Option<T>, tau| {
            Some(acc.map_or(tau, |a| a.min(tau)))
        });
    let span = t1 - t0;

    let mut switches = Vec::new();
    let mut current = initial;
    let mut t = t0;
    let guard_limit = 20_000_000usize;
    for _ in 0..guard_limit {
        let u: T = cast(rng.gen::<f64>());
        let burst: bool = rng.gen::<f64>() < 0.5;
        let gap = if let Some(tau) = adt_ref {
            // mixture of burst-scale and dwell-scale gaps exercises the chatter bound
            if burst {
                dwell_floor + tau * (cast::<T>(0.02) + cast::<T>(0.2) * u)
            } else {
                dwell_floor + tau * (cast::<T>(0.6) + u)
            }
        } else if dwell_floor > T::zero() {
            dwell_floor + dwell_floor * u
        } else {
            span * (cast::<T>(0.02) + cast::<T>(0.08) * u)
        };
        let t_next = t + gap;
        if t_next >= t1 {
            break;
        }
        let gained: Vec<T> = buckets.iter().map(|b| b.after(gap)).collect();
        let affordable = gained.iter().all(|&c| c >= T::one());
        t = t_next;
        if affordable {
            for (bucket, &c) in buckets.iter_mut().zip(&gained) {
                bucket.credits = c - T::one();
            }
            if let Some(next) = pick_successor(parts, universe, weights, current, rng) {
                switches.push((t, next));
                current = next;
            } else {
                // no legal successor: the signal stays constant from here on
                break;
            }
        } else {
            for (bucket, &c) in buckets.iter_mut().zip(&gained) {
                bucket.credits = c;
            }
        }
        if t >= t1 {
            break;
        }
    }
    Ok(switches)
}

fn pick_successor<T: Scalar>(
    parts: &Components<'_, T>,
    universe: &[ModeId],
    weights: &[f64],
    current: ModeId,
    rng: &mut ChaCha8Rng,
) -> Option<ModeId> {
    let mut legal: Vec<(ModeId, f64)> = universe
        .iter()
        .zip(weights)
        .filter(|&(&m, _)| m != current)
        .filter(|&(&m, _)| parts.graphs.iter().all(|g| g.contains_edge(current, m)))
        .map(|(&m, &w)| (m, w))
        .collect();
    if legal.is_empty() {
        return None;
    }
    let total: f64 = legal.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        legal.iter_mut().for_each(|e| e.1 = 1.0);
    }
    let total: f64 = legal.iter().map(|&(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(m, w) in &legal {
        u -= w;
        if u < 0.0 {
            return Some(m);
        }
    }
    legal.last().map(|&(m, _)| m)
}

fn rotation_driven<T: Scalar>(
    parts: &Components<'_, T>,
    universe: &[ModeId],
    _weights: &[f64],
    initial: ModeId,
    t0: T,
    t1: T,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(T, ModeId)>, SignalError<T>> {
    let window = parts
        .ergodic
        .iter()
        .map(|&(w, _)| w)
        .fold(T::max_value().expect("bounded scalar"), |a, b| a.min(b));
    if t1 - t0 < window {
        return Err(SignalError::Infeasible(format!(
            "horizon of length {} cannot be checked against an ergodic window of length {window}",
            t1 - t0
        )));
    }
    let n = universe.len();
    if n == 1 {
        return Ok(Vec::new());
    }
    let n_minus_1: T = cast((n - 1) as f64);
    let cap = window * cast::<T>(1.0 - 1e-3) / n_minus_1;
    let mut floor = parts
        .dwell
        .iter()
        .copied()
        .fold(T::zero(), |acc, tau| acc.max(tau * cast(1.005)));
    for &(tau, _) in &parts.adt {
        // keep every gap individually affordable so the rotation never stalls
        floor = floor.max(tau * cast(1.01));
    }
    if floor == T::zero() {
        floor = cap * cast(0.25);
    }
    if !(floor < cap * cast(0.999)) {
        return Err(SignalError::Infeasible(format!(
            "ergodic window {window} with {n} modes leaves no room above the dwell floor {floor}"
        )));
    }

    let rotation = find_rotation(parts, universe, initial, rng)?;
    let mut switches = Vec::new();
    let mut t = t0;
    let mut idx = 0usize;
    let guard_limit = 20_000_000usize;
    for _ in 0..guard_limit {
        let u: T = cast(rng.gen::<f64>());
        let gap = floor + (cap - floor) * u;
        let t_next = t + gap;
        if t_next >= t1 {
            break;
        }
        idx = (idx + 1) % n;
        switches.push((t_next, rotation[idx]));
        t = t_next;
    }
    Ok(switches)
}

/// Cyclic visiting order through the whole universe, legal under every graph
/// component (consecutive and wrap-around edges). Randomized retries; small
/// mode sets keep this cheap.
fn find_rotation<T: Scalar>(
    parts: &Components<'_, T>,
    universe: &[ModeId],
    initial: ModeId,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ModeId>, SignalError<T>> {
    let mut rest: Vec<ModeId> = universe.iter().copied().filter(|&m| m != initial).collect();
    let legal = |order: &[ModeId]| {
        order.iter().zip(order.iter().cycle().skip(1)).all(|(&a, &b)| {
            parts.graphs.iter().all(|g| g.contains_edge(a, b))
        })
    };
    const TRIES: usize = 500;
    for _ in 0..TRIES {
        // Fisher-Yates on the tail, initial mode pinned first
        for i in (1..rest.len()).rev() {
            let j = rng.gen_range(0..=i);
            rest.swap(i, j);
        }
        let mut order = Vec::with_capacity(universe.len());
        order.push(initial);
        order.extend_from_slice(&rest);
        if legal(&order) {
            return Ok(order);
        }
    }
    Err(SignalError::Infeasible(
        "no rotation through all modes is legal under the graph constraints".into(),
    ))
}

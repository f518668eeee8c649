//! Switching signals: piecewise-constant, right-continuous mode schedules on
//! a finite horizon, plus the switching-time functionals the rest of the
//! crate is built on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

mod class;
mod generate;

pub use class::{validate, SignalClassSpec, ValidationReport, Violation};
pub use generate::{generate, GenerateOptions};

/// Identifier of one subsystem in the finite mode set, conventionally `1..=N`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub u32);

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Errors from signal construction, evaluation, validation and generation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum SignalError<T: Scalar> {
    #[error("horizon end {t_end} must be greater than start {t_begin}")]
    EmptyHorizon { t_begin: T, t_end: T },
    #[error("switch time {t} outside the open horizon ({t_begin}, {t_end})")]
    SwitchOutsideHorizon { t: T, t_begin: T, t_end: T },
    #[error("switch times must be strictly increasing (offending time {t})")]
    NonIncreasingSwitchTimes { t: T },
    #[error("switch at {t} does not change the active mode ({mode})")]
    SwitchWithoutModeChange { t: T, mode: ModeId },
    #[error("time {t} outside the signal horizon [{t_begin}, {t_end}]")]
    OutsideHorizon {
        t: T,
        t_begin: T,
        t_end: T,
        half_open: bool,
    },
    #[error("invalid class parameter: {0}")]
    InvalidClassParam(String),
    #[error("horizon of length {horizon} too short to decide a window of length {window}")]
    HorizonTooShort { horizon: T, window: T },
    #[error("infeasible generation request: {0}")]
    Infeasible(String),
}

/// A piecewise-constant, right-continuous switching signal on `[t_begin, t_end]`.
///
/// The active mode at time `t` is the mode of the last switch at or before
/// `t`, or `initial_mode` if there is none. Switch times are strictly
/// increasing, lie strictly inside the horizon, and every switch changes the
/// mode, so jumps and stored switches coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingSignal<T: Scalar = f64> {
    t_begin: T,
    t_end: T,
    initial_mode: ModeId,
    switches: Vec<(T, ModeId)>,
}

impl<T: Scalar> SwitchingSignal<T> {
    /// Builds a signal, checking all structural invariants.
    pub fn new(
        t_begin: T,
        t_end: T,
        initial_mode: ModeId,
        switches: Vec<(T, ModeId)>,
    ) -> Result<Self, SignalError<T>> {
        if !(t_end > t_begin) {
            return Err(SignalError::EmptyHorizon { t_begin, t_end });
        }
        let mut prev_time: Option<T> = None;
        let mut prev_mode = initial_mode;
        for &(t, mode) in &switches {
            if !(t > t_begin && t < t_end) {
                return Err(SignalError::SwitchOutsideHorizon { t, t_begin, t_end });
            }
            if let Some(p) = prev_time {
                if !(t > p) {
                    return Err(SignalError::NonIncreasingSwitchTimes { t });
                }
            }
            if mode == prev_mode {
                return Err(SignalError::SwitchWithoutModeChange { t, mode });
            }
            prev_time = Some(t);
            prev_mode = mode;
        }
        Ok(Self {
            t_begin,
            t_end,
            initial_mode,
            switches,
        })
    }

    /// Signal constant at `mode` on the whole horizon.
    pub fn constant(t_begin: T, t_end: T, mode: ModeId) -> Result<Self, SignalError<T>> {
        Self::new(t_begin, t_end, mode, Vec::new())
    }

    pub fn t_begin(&self) -> T {
        self.t_begin
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn initial_mode(&self) -> ModeId {
        self.initial_mode
    }

    /// Switch instants with the mode that becomes active at each.
    pub fn switches(&self) -> &[(T, ModeId)] {
        &self.switches
    }

    /// Switch instants only (the jump set of the signal).
    pub fn switch_times(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        self.switches.iter().map(|&(t, _)| t)
    }

    /// All modes taken by the signal, deduplicated and sorted.
    pub fn modes_used(&self) -> Vec<ModeId> {
        let mut set: BTreeSet<ModeId> = self.switches.iter().map(|&(_, m)| m).collect();
        set.insert(self.initial_mode);
        set.into_iter().collect()
    }

    fn check_in_horizon(&self, t: T, half_open: bool) -> Result<(), SignalError<T>> {
        let ok = t >= self.t_begin && if half_open { t < self.t_end } else { t <= self.t_end };
        if ok {
            Ok(())
        } else {
            Err(SignalError::OutsideHorizon {
                t,
                t_begin: self.t_begin,
                t_end: self.t_end,
                half_open,
            })
        }
    }

    /// Active mode at `t` (right-continuous), for `t` in `[t_begin, t_end]`.
    pub fn mode_at(&self, t: T) -> Result<ModeId, SignalError<T>> {
        self.check_in_horizon(t, false)?;
        let idx = self.switches.partition_point(|&(s, _)| s <= t);
        Ok(if idx == 0 {
            self.initial_mode
        } else {
            self.switches[idx - 1].1
        })
    }

    /// First switch time strictly greater than `t`, or `None` if the signal
    /// never switches again inside the horizon (the +infinity case).
    ///
    /// `t` must lie in `[t_begin, t_end)`.
    pub fn next_switch_time(&self, t: T) -> Result<Option<T>, SignalError<T>> {
        self.check_in_horizon(t, true)?;
        let idx = self.switches.partition_point(|&(s, _)| s <= t);
        Ok(self.switches.get(idx).map(|&(s, _)| s))
    }

    /// Number of switch times strictly inside the open interval `(tau1, tau2)`.
    ///
    /// An empty interval (`tau1 >= tau2`) contains no switches.
    pub fn count_switches(&self, tau1: T, tau2: T) -> usize {
        let lo = self.switches.partition_point(|&(s, _)| s <= tau1);
        let hi = self.switches.partition_point(|&(s, _)| s < tau2);
        hi.saturating_sub(lo)
    }

    /// Time translation: the returned signal satisfies `shifted(t) = self(t + s)`
    /// on the shifted horizon `[t_begin - s, t_end - s]`.
    pub fn shift(&self, s: T) -> Self {
        let switches = self
            .switches
            .iter()
            .map(|&(t, m)| (t - s, m))
            .collect::<Vec<_>>();
        debug_assert!(switches.windows(2).all(|w| w[0].0 < w[1].0));
        Self {
            t_begin: self.t_begin - s,
            t_end: self.t_end - s,
            initial_mode: self.initial_mode,
            switches,
        }
    }

    /// Total time in `[t_begin, t_end]` during which `mode` is active.
    pub fn occupancy(&self, mode: ModeId) -> T {
        let mut total = T::zero();
        let mut cur = self.initial_mode;
        let mut start = self.t_begin;
        for &(t, m) in &self.switches {
            if cur == mode {
                total += t - start;
            }
            cur = m;
            start = t;
        }
        if cur == mode {
            total += self.t_end - start;
        }
        total
    }
}

#[derive(Serialize)]
struct SignalDtoRef<'a, T: Scalar + Serialize> {
    t_begin: T,
    t_end: T,
    initial_mode: ModeId,
    switches: &'a [(T, ModeId)],
}

#[derive(Deserialize)]
struct SignalDto<T> {
    t_begin: T,
    t_end: T,
    initial_mode: ModeId,
    switches: Vec<(T, ModeId)>,
}

impl<T: Scalar + Serialize> Serialize for SwitchingSignal<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SignalDtoRef {
            t_begin: self.t_begin,
            t_end: self.t_end,
            initial_mode: self.initial_mode,
            switches: &self.switches,
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for SwitchingSignal<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto = SignalDto::deserialize(deserializer)?;
        SwitchingSignal::new(dto.t_begin, dto.t_end, dto.initial_mode, dto.switches)
            .map_err(serde::de::Error::custom)
    }
}

/// Set-valued successor map `H` constraining which mode each jump may enter.
///
/// The graph of `H` is the edge set `{(gamma, gamma') : gamma' in H(gamma)}`;
/// adding an edge extends the domain as needed, so `H(gamma)` is always a
/// subset of the domain.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetValuedMap {
    domain: BTreeSet<ModeId>,
    successors: BTreeMap<ModeId, BTreeSet<ModeId>>,
}

impl SetValuedMap {
    pub fn new(domain: impl IntoIterator<Item = ModeId>) -> Self {
        Self {
            domain: domain.into_iter().collect(),
            successors: BTreeMap::new(),
        }
    }

    pub fn from_edges(edges: impl IntoIterator<Item = (ModeId, ModeId)>) -> Self {
        let mut map = Self::default();
        for (from, to) in edges {
            map.add_edge(from, to);
        }
        map
    }

    pub fn add_edge(&mut self, from: ModeId, to: ModeId) {
        self.domain.insert(from);
        self.domain.insert(to);
        self.successors.entry(from).or_default().insert(to);
    }

    pub fn domain(&self) -> impl ExactSizeIterator<Item = ModeId> + '_ {
        self.domain.iter().copied()
    }

    pub fn contains_edge(&self, from: ModeId, to: ModeId) -> bool {
        self.successors
            .get(&from)
            .is_some_and(|set| set.contains(&to))
    }

    /// Successor set `H(mode)`; empty if the mode has no outgoing edges.
    pub fn successors(&self, mode: ModeId) -> impl Iterator<Item = ModeId> + '_ {
        self.successors
            .get(&mode)
            .into_iter()
            .flat_map(|set| set.iter().copied())
    }

    pub fn edge_count(&self) -> usize {
        self.successors.values().map(BTreeSet::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(switches: &[(f64, u32)]) -> SwitchingSignal {
        SwitchingSignal::new(
            0.0,
            10.0,
            ModeId(1),
            switches.iter().map(|&(t, m)| (t, ModeId(m))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn next_switch_time_cases() {
        let s = sig(&[(1.0, 2), (2.5, 1)]);
        assert_eq!(s.next_switch_time(0.0).unwrap(), Some(1.0));
        assert_eq!(s.next_switch_time(1.0).unwrap(), Some(2.5));
        assert_eq!(s.next_switch_time(3.0).unwrap(), None);
        assert!(s.next_switch_time(10.0).is_err());
        assert!(s.next_switch_time(-0.1).is_err());
    }

    #[test]
    fn count_switches_open_interval() {
        let s = sig(&[(1.0, 2), (2.5, 1), (3.0, 2)]);
        assert_eq!(s.count_switches(0.0, 4.0), 3);
        assert_eq!(s.count_switches(1.0, 3.0), 1);
        assert_eq!(s.count_switches(5.0, 9.0), 0);
        assert_eq!(s.count_switches(4.0, 4.0), 0);
        let empty = sig(&[]);
        assert_eq!(empty.count_switches(-100.0, 100.0), 0);
    }

    #[test]
    fn mode_at_is_right_continuous() {
        let s = sig(&[(1.0, 2), (2.5, 1)]);
        assert_eq!(s.mode_at(0.0).unwrap(), ModeId(1));
        assert_eq!(s.mode_at(1.0).unwrap(), ModeId(2));
        assert_eq!(s.mode_at(2.4).unwrap(), ModeId(2));
        assert_eq!(s.mode_at(2.5).unwrap(), ModeId(1));
        assert_eq!(s.mode_at(10.0).unwrap(), ModeId(1));
    }

    #[test]
    fn shift_translates_switches() {
        let s = sig(&[(1.0, 2), (2.5, 1)]);
        let shifted = s.shift(1.0);
        assert_eq!(shifted.t_begin(), -1.0);
        assert_eq!(shifted.t_end(), 9.0);
        assert_eq!(shifted.switches(), &[(0.0, ModeId(2)), (1.5, ModeId(1))]);
        // shifted(t) = s(t + 1)
        assert_eq!(shifted.mode_at(0.0).unwrap(), s.mode_at(1.0).unwrap());
        assert_eq!(shifted.mode_at(-0.5).unwrap(), s.mode_at(0.5).unwrap());
        // zero shift is the identity
        assert_eq!(s.shift(0.0), s);
    }

    #[test]
    fn construction_rejects_bad_switch_lists() {
        let err = SwitchingSignal::new(0.0, 1.0, ModeId(1), vec![(0.5, ModeId(1))]).unwrap_err();
        assert!(matches!(err, SignalError::SwitchWithoutModeChange { .. }));

        let err = SwitchingSignal::new(
            0.0,
            1.0,
            ModeId(1),
            vec![(0.5, ModeId(2)), (0.5, ModeId(1))],
        )
        .unwrap_err();
        assert!(matches!(err, SignalError::NonIncreasingSwitchTimes { .. }));

        let err = SwitchingSignal::new(0.0, 1.0, ModeId(1), vec![(1.0, ModeId(2))]).unwrap_err();
        assert!(matches!(err, SignalError::SwitchOutsideHorizon { .. }));

        let err = SwitchingSignal::<f64>::new(1.0, 1.0, ModeId(1), vec![]).unwrap_err();
        assert!(matches!(err, SignalError::EmptyHorizon { .. }));
    }

    #[test]
    fn occupancy_partitions_the_horizon() {
        let s = sig(&[(4.0, 2), (6.0, 1)]);
        assert_eq!(s.occupancy(ModeId(1)), 8.0);
        assert_eq!(s.occupancy(ModeId(2)), 2.0);
        assert_eq!(s.occupancy(ModeId(3)), 0.0);
    }

    #[test]
    fn json_round_trip_and_shape() {
        let s = sig(&[(1.0, 2), (2.5, 1)]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"t_begin":0.0,"t_end":10.0,"initial_mode":1,"switches":[[1.0,2],[2.5,1]]}"#
        );
        let back: SwitchingSignal = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        // invalid payloads are rejected on deserialization
        let bad = r#"{"t_begin":0.0,"t_end":10.0,"initial_mode":1,"switches":[[1.0,1]]}"#;
        assert!(serde_json::from_str::<SwitchingSignal>(bad).is_err());
    }

    #[test]
    fn set_valued_map_edges() {
        let map = SetValuedMap::from_edges([
            (ModeId(1), ModeId(2)),
            (ModeId(2), ModeId(3)),
            (ModeId(3), ModeId(1)),
        ]);
        assert_eq!(map.domain().count(), 3);
        assert!(map.contains_edge(ModeId(1), ModeId(2)));
        assert!(!map.contains_edge(ModeId(1), ModeId(3)));
        assert_eq!(map.successors(ModeId(9)).count(), 0);
    }

    #[test]
    fn works_at_f32() {
        let s = SwitchingSignal::<f32>::new(0.0, 4.0, ModeId(1), vec![(1.5, ModeId(2))]).unwrap();
        assert_eq!(s.mode_at(2.0).unwrap(), ModeId(2));
        assert_eq!(s.count_switches(0.0, 4.0), 1);
    }
}

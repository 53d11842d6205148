//! Petri nets with rate constants: data model, normalization, firing rule,
//! rate evaluation and bounded reachability.
//!
//! A net is kept in normalized form at all times: no transition has equal
//! input and output bags, and no two transitions share the same pair of
//! bags (duplicates are merged by summing their rate constants). Neither
//! operation changes the marking process, the deficiency or weak
//! reversibility.

mod format;
mod parse;
mod reach;

use std::collections::HashMap;
use std::fmt;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rational, to_f64, Rational};

pub use format::serialize_net;
pub use parse::{parse_net, ParseError, ParseErrorKind};
pub use reach::{MarkingArc, MarkingGraph, DEFAULT_REACHABILITY_CAP};

/// Token count of a place, or arc weight.
pub type Count = u64;

/// A multiset of places, stored densely in place order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bag(Vec<Count>);

/// Complexes are the input and output bags of transitions.
pub type Complex = Bag;

impl Bag {
    pub fn new(weights: Vec<Count>) -> Self {
        Self(weights)
    }

    pub fn empty(places: usize) -> Self {
        Self(vec![0; places])
    }

    pub fn unit(places: usize, place: usize) -> Self {
        let mut b = Self::empty(places);
        b.0[place] = 1;
        b
    }

    pub fn as_slice(&self) -> &[Count] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for the empty complex.
    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn get(&self, place: usize) -> Count {
        self.0[place]
    }

    /// Places with a nonzero weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &w)| w > 0).map(|(p, _)| p)
    }

    pub fn support_size(&self) -> usize {
        self.support().count()
    }

    pub fn max_weight(&self) -> Count {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Token counts per place.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Marking(Vec<Count>);

impl Marking {
    pub fn new(tokens: Vec<Count>) -> Self {
        Self(tokens)
    }

    pub fn zeros(places: usize) -> Self {
        Self(vec![0; places])
    }

    pub fn as_slice(&self) -> &[Count] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, place: usize) -> Count {
        self.0[place]
    }

    /// Componentwise `self >= bag`.
    pub fn covers(&self, bag: &Bag) -> bool {
        self.0.iter().zip(bag.as_slice()).all(|(m, w)| m >= w)
    }

    pub fn total(&self) -> Count {
        self.0.iter().sum()
    }

    /// `self - input + output`; caller guarantees `self.covers(input)`.
    fn shifted(&self, input: &Bag, output: &Bag) -> Marking {
        Marking(
            self.0
                .iter()
                .zip(input.as_slice().iter().zip(output.as_slice()))
                .map(|(m, (i, o))| m - i + o)
                .collect(),
        )
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// How firing rates depend on the marking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kinetics {
    /// Rate `κ_t` whenever the transition is enabled.
    #[default]
    Constant,
    /// Rate `κ_t · Π_p M_p! / (M_p - I(t)_p)!`.
    MassAction,
}

impl fmt::Display for Kinetics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kinetics::Constant => "constant",
            Kinetics::MassAction => "mass-action",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub input: Bag,
    pub output: Bag,
    pub rate: Rational,
}

/// Non-fatal adjustments made while normalizing a net.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    DroppedSelfLoop { transition: String },
    MergedDuplicate { kept: String, merged: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DroppedSelfLoop { transition } => {
                write!(f, "transition {transition} has equal input and output bags; dropped")
            }
            Warning::MergedDuplicate { kept, merged } => write!(
                f,
                "transition {merged} has the same bags as {kept}; merged into {kept} with summed rate"
            ),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("duplicate place `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("`{0}` is reserved and cannot name a transition")]
    ReservedIdentifier(String),
    #[error("transition `{id}` has non-positive rate {rate}")]
    NonPositiveRate { id: String, rate: String },
    #[error("vector of length {found} does not match {expected} places")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FireError {
    #[error("transition {transition} is not enabled at {marking}")]
    NotEnabled { transition: String, marking: Marking },
}

/// A net together with the warnings produced while normalizing it.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub net: PetriNet,
    pub warnings: Vec<Warning>,
}

/// A (possibly weighted) Petri net with rate constants and an initial
/// marking. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    initial: Marking,
    kinetics: Kinetics,
}

const RESERVED: [&str; 3] = ["places", "init", "kinetics"];

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '\''))
}

impl PetriNet {
    /// Builds and normalizes a net, discarding warnings.
    pub fn new(
        places: Vec<String>,
        transitions: Vec<Transition>,
        initial: Marking,
        kinetics: Kinetics,
    ) -> Result<Self, NetError> {
        Self::normalized(places, transitions, initial, kinetics).map(|n| n.net)
    }

    /// Validates the pieces, drops transitions with `I(t) = O(t)` and merges
    /// transitions with identical bags (rates summed, first id kept).
    pub fn normalized(
        places: Vec<String>,
        transitions: Vec<Transition>,
        initial: Marking,
        kinetics: Kinetics,
    ) -> Result<Normalized, NetError> {
        let mut seen = HashMap::new();
        for p in &places {
            if !is_identifier(p) {
                return Err(NetError::InvalidIdentifier(p.clone()));
            }
            if seen.insert(p.as_str(), ()).is_some() {
                return Err(NetError::DuplicatePlace(p.clone()));
            }
        }
        let n = places.len();
        if initial.len() != n {
            return Err(NetError::DimensionMismatch {
                expected: n,
                found: initial.len(),
            });
        }
        let mut ids = HashMap::new();
        for t in &transitions {
            if !is_identifier(&t.id) {
                return Err(NetError::InvalidIdentifier(t.id.clone()));
            }
            if RESERVED.contains(&t.id.as_str()) {
                return Err(NetError::ReservedIdentifier(t.id.clone()));
            }
            if ids.insert(t.id.as_str(), ()).is_some() {
                return Err(NetError::DuplicateTransition(t.id.clone()));
            }
            for bag in [&t.input, &t.output] {
                if bag.len() != n {
                    return Err(NetError::DimensionMismatch {
                        expected: n,
                        found: bag.len(),
                    });
                }
            }
            if !t.rate.is_positive() {
                return Err(NetError::NonPositiveRate {
                    id: t.id.clone(),
                    rate: format_rational(&t.rate),
                });
            }
        }

        let mut warnings = Vec::new();
        let mut kept: Vec<Transition> = Vec::with_capacity(transitions.len());
        let mut by_bags: HashMap<(Bag, Bag), usize> = HashMap::new();
        for t in transitions {
            if t.input == t.output {
                warnings.push(Warning::DroppedSelfLoop { transition: t.id });
                continue;
            }
            match by_bags.get(&(t.input.clone(), t.output.clone())) {
                Some(&k) => {
                    let target = &mut kept[k];
                    target.rate += &t.rate;
                    warnings.push(Warning::MergedDuplicate {
                        kept: target.id.clone(),
                        merged: t.id,
                    });
                }
                None => {
                    by_bags.insert((t.input.clone(), t.output.clone()), kept.len());
                    kept.push(t);
                }
            }
        }

        Ok(Normalized {
            net: PetriNet {
                places,
                transitions: kept,
                initial,
                kinetics,
            },
            warnings,
        })
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: usize) -> &Transition {
        &self.transitions[t]
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn kinetics(&self) -> Kinetics {
        self.kinetics
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_index(&self, name: &str) -> Option<usize> {
        self.places.iter().position(|p| p == name)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }

    pub fn rates(&self) -> Vec<Rational> {
        self.transitions.iter().map(|t| t.rate.clone()).collect()
    }

    pub fn with_initial_marking(&self, initial: Marking) -> Result<Self, NetError> {
        if initial.len() != self.places.len() {
            return Err(NetError::DimensionMismatch {
                expected: self.places.len(),
                found: initial.len(),
            });
        }
        Ok(Self {
            initial,
            ..self.clone()
        })
    }

    pub fn with_kinetics(&self, kinetics: Kinetics) -> Self {
        Self {
            kinetics,
            ..self.clone()
        }
    }

    /// Replaces the rate constants, in transition order.
    pub fn with_rates(&self, rates: &[Rational]) -> Result<Self, NetError> {
        if rates.len() != self.transitions.len() {
            return Err(NetError::DimensionMismatch {
                expected: self.transitions.len(),
                found: rates.len(),
            });
        }
        let mut net = self.clone();
        for (t, r) in net.transitions.iter_mut().zip(rates) {
            if !r.is_positive() {
                return Err(NetError::NonPositiveRate {
                    id: t.id.clone(),
                    rate: format_rational(r),
                });
            }
            t.rate = r.clone();
        }
        Ok(net)
    }

    /// Renders a bag in chemical notation, e.g. `2p+q`; the empty bag is `∅`.
    pub fn bag_label(&self, bag: &Bag) -> String {
        if bag.is_empty() {
            return "∅".to_string();
        }
        bag.support()
            .map(|p| match bag.get(p) {
                1 => self.places[p].clone(),
                w => format!("{w}{}", self.places[p]),
            })
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Transitions enabled at `m`, in transition order.
    pub fn enabled(&self, m: &Marking) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| m.covers(&self.transitions[t].input))
            .collect()
    }

    pub fn is_enabled(&self, m: &Marking, t: usize) -> bool {
        m.covers(&self.transitions[t].input)
    }

    /// Fires `t` at `m`, returning `m - I(t) + O(t)`.
    pub fn fire(&self, m: &Marking, t: usize) -> Result<Marking, FireError> {
        let tr = &self.transitions[t];
        if !m.covers(&tr.input) {
            return Err(FireError::NotEnabled {
                transition: tr.id.clone(),
                marking: m.clone(),
            });
        }
        Ok(m.shifted(&tr.input, &tr.output))
    }

    /// Exact firing rate `μ_t(m)`; zero when `t` is not enabled.
    pub fn rate(&self, m: &Marking, t: usize) -> Rational {
        let tr = &self.transitions[t];
        if !m.covers(&tr.input) {
            return Rational::zero();
        }
        match self.kinetics {
            Kinetics::Constant => tr.rate.clone(),
            Kinetics::MassAction => {
                let mut factor = num::BigInt::one();
                for p in tr.input.support() {
                    let have = m.get(p);
                    for k in 0..tr.input.get(p) {
                        factor *= have - k;
                    }
                }
                &tr.rate * Rational::from_integer(factor)
            }
        }
    }

    /// Floating-point firing rate, for numerical solvers and simulation.
    pub fn rate_f64(&self, m: &Marking, t: usize) -> f64 {
        let tr = &self.transitions[t];
        if !m.covers(&tr.input) {
            return 0.0;
        }
        let kappa = to_f64(&tr.rate);
        match self.kinetics {
            Kinetics::Constant => kappa,
            Kinetics::MassAction => tr.input.support().fold(kappa, |acc, p| {
                let have = m.get(p);
                (0..tr.input.get(p)).fold(acc, |a, k| a * (have - k) as f64)
            }),
        }
    }

    /// Transition effect `O(t) - I(t)` as signed integers.
    pub fn effect(&self, t: usize) -> Vec<i64> {
        let tr = &self.transitions[t];
        tr.output
            .as_slice()
            .iter()
            .zip(tr.input.as_slice())
            .map(|(&o, &i)| o as i64 - i as i64)
            .collect()
    }

    /// Breadth-first exploration of the reachable markings, capped at `cap`
    /// nodes.
    pub fn reachability(&self, cap: usize) -> MarkingGraph {
        reach::explore(self, cap)
    }
}

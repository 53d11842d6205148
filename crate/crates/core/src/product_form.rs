//! Product-form invariant measures `π(x) = Φ(x)⁻¹ Π_p u_p^{x_p}` and their
//! normalization on finite reachability sets.
//!
//! Everything is evaluated in log space, so large markings and extreme
//! rates neither overflow nor underflow before normalization.

use serde::Serialize;
use thiserror::Error;

use crate::net::{Kinetics, Marking, MarkingGraph, PetriNet};
use crate::traffic::relative_gap;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProductFormError {
    #[error("u must be strictly positive and finite, one entry per place")]
    NonPositiveInput,
    #[error("the marking graph was truncated; the state space is not known to be finite")]
    Truncated,
    #[error("the marking graph is not strongly connected")]
    NotIrreducible,
}

/// Rates of the form `μ_t(x) = κ_t Φ(x) / Φ(x - I(t))`, described by `log Φ`.
pub trait RateShape {
    fn log_phi(&self, m: &Marking) -> f64;
}

impl RateShape for Kinetics {
    /// `Φ ≡ 1` for constant rates, `Φ(x) = Π_p x_p!` for mass action.
    fn log_phi(&self, m: &Marking) -> f64 {
        match self {
            Kinetics::Constant => 0.0,
            Kinetics::MassAction => m.as_slice().iter().map(|&k| ln_factorial(k)).sum(),
        }
    }
}

pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// An invariant measure of product form.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantMeasure<S = Kinetics> {
    log_u: Vec<f64>,
    shape: S,
}

impl InvariantMeasure<Kinetics> {
    pub fn new(u: &[f64], kinetics: Kinetics) -> Result<Self, ProductFormError> {
        Self::with_shape(u, kinetics)
    }

    pub fn kinetics(&self) -> Kinetics {
        self.shape
    }
}

impl<S: RateShape> InvariantMeasure<S> {
    pub fn with_shape(u: &[f64], shape: S) -> Result<Self, ProductFormError> {
        if u.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(ProductFormError::NonPositiveInput);
        }
        Ok(Self {
            log_u: u.iter().map(|x| x.ln()).collect(),
            shape,
        })
    }

    pub fn from_log(log_u: Vec<f64>, shape: S) -> Result<Self, ProductFormError> {
        if log_u.iter().any(|x| !x.is_finite()) {
            return Err(ProductFormError::NonPositiveInput);
        }
        Ok(Self { log_u, shape })
    }

    pub fn log_u(&self) -> &[f64] {
        &self.log_u
    }

    pub fn u(&self) -> Vec<f64> {
        self.log_u.iter().map(|x| x.exp()).collect()
    }

    /// `log π(x)`.
    pub fn log_value(&self, m: &Marking) -> f64 {
        let dot: f64 = m
            .as_slice()
            .iter()
            .zip(&self.log_u)
            .map(|(&k, l)| if k == 0 { 0.0 } else { k as f64 * l })
            .sum();
        dot - self.shape.log_phi(m)
    }

    pub fn value(&self, m: &Marking) -> f64 {
        self.log_value(m).exp()
    }
}

/// A probability distribution on a finite set of markings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub support: Vec<Marking>,
    pub probabilities: Vec<f64>,
    /// `log K` where `p(x) = π(x) / K`; zero when the values were
    /// already normalized.
    pub log_normalizing_constant: f64,
}

impl StationaryDistribution {
    /// Normalizes nonnegative weights given in log space (log-sum-exp).
    pub fn from_log_weights(support: Vec<Marking>, log_w: &[f64]) -> Self {
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = scaled.iter().sum();
        StationaryDistribution {
            support,
            probabilities: scaled.iter().map(|x| x / total).collect(),
            log_normalizing_constant: top + total.ln(),
        }
    }

    pub fn probability_of(&self, m: &Marking) -> Option<f64> {
        self.support.iter().position(|x| x == m).map(|i| self.probabilities[i])
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Normalizes `measure` over the nodes of a complete, strongly connected
/// marking graph.
pub fn normalize<S: RateShape>(
    measure: &InvariantMeasure<S>,
    graph: &MarkingGraph,
) -> Result<StationaryDistribution, ProductFormError> {
    if graph.truncated() {
        return Err(ProductFormError::Truncated);
    }
    if !graph.is_strongly_connected() {
        return Err(ProductFormError::NotIrreducible);
    }
    let log_w: Vec<f64> = graph.nodes().iter().map(|m| measure.log_value(m)).collect();
    Ok(StationaryDistribution::from_log_weights(graph.nodes().to_vec(), &log_w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Ergodicity {
    /// Finite, strongly connected marking graph.
    ErgodicFinite { states: usize },
    /// Mass-action kinetics: `Σ_x π(x) ≤ Π_p e^{u_p} < ∞`.
    ErgodicMassAction { log_mass_bound: f64 },
    /// Infinite (or unexplored) reachability set under constant rates.
    /// `log_explored_mass` is `log Σ π` over the explored markings, a lower
    /// bound on the normalizing constant; nothing is claimed beyond it.
    ConditionallyErgodic {
        explored_states: usize,
        log_explored_mass: f64,
        note: String,
    },
    Unknown { note: String },
}

/// What can be said about positive recurrence given a product-form measure
/// from a positive solution of the non-linear traffic equations.
pub fn ergodicity_report(net: &PetriNet, measure: &InvariantMeasure, graph: &MarkingGraph) -> Ergodicity {
    if net.kinetics() == Kinetics::MassAction {
        return Ergodicity::ErgodicMassAction {
            log_mass_bound: measure.u().iter().sum(),
        };
    }
    let strongly_connected = graph.is_strongly_connected();
    if !graph.truncated() && strongly_connected {
        return Ergodicity::ErgodicFinite { states: graph.len() };
    }
    if graph.truncated() {
        let log_w: Vec<f64> = graph.nodes().iter().map(|m| measure.log_value(m)).collect();
        let dist = StationaryDistribution::from_log_weights(graph.nodes().to_vec(), &log_w);
        return Ergodicity::ConditionallyErgodic {
            explored_states: graph.len(),
            log_explored_mass: dist.log_normalizing_constant,
            note: "constant rates on an infinite reachability set: ergodic iff Σ π converges, \
                   which is not decided here"
                .into(),
        };
    }
    Ergodicity::Unknown {
        note: "finite marking graph that is not strongly connected".into(),
    }
}

/// Relative residual of the global balance equation at marking `x`:
/// `π(x) Σ_t μ_t(x)` against `Σ_{y -t-> x} π(y) μ_t(y)`.
///
/// Predecessors are taken from the whole lattice, `y = x - O(t) + I(t)`.
/// For weakly reversible nets every such `y` is reachable whenever `x` is,
/// so this is the balance equation of the marking process on `R(M₀)`.
pub fn balance_residual_at<S: RateShape>(net: &PetriNet, measure: &InvariantMeasure<S>, x: &Marking) -> f64 {
    let log_pi_x = measure.log_value(x);
    let mut outflow = Vec::new();
    let mut inflow = Vec::new();
    for t in 0..net.transition_count() {
        let rate = net.rate_f64(x, t);
        if rate > 0.0 {
            outflow.push(log_pi_x + rate.ln());
        }
        let tr = net.transition(t);
        if x.covers(&tr.output) {
            let y = Marking::new(
                x.as_slice()
                    .iter()
                    .zip(tr.output.as_slice().iter().zip(tr.input.as_slice()))
                    .map(|(m, (o, i))| m - o + i)
                    .collect(),
            );
            inflow.push(measure.log_value(&y) + net.rate_f64(&y, t).ln());
        }
    }
    relative_gap(&outflow, &inflow)
}

/// Balance residual at every node of a complete marking graph, using only
/// the arcs of the graph.
pub fn balance_residuals<S: RateShape>(
    net: &PetriNet,
    measure: &InvariantMeasure<S>,
    graph: &MarkingGraph,
) -> Result<Vec<f64>, ProductFormError> {
    if graph.truncated() {
        return Err(ProductFormError::Truncated);
    }
    let log_pi: Vec<f64> = graph.nodes().iter().map(|m| measure.log_value(m)).collect();
    let mut outflow = vec![Vec::new(); graph.len()];
    let mut inflow = vec![Vec::new(); graph.len()];
    for a in graph.arcs() {
        let flow = log_pi[a.source] + net.rate_f64(&graph.nodes()[a.source], a.transition).ln();
        outflow[a.source].push(flow);
        inflow[a.target].push(flow);
    }
    Ok(outflow.iter().zip(&inflow).map(|(o, i)| relative_gap(o, i)).collect())
}

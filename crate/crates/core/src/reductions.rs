//! Structure-preserving transformations:
//!
//! * a generalized state machine (every transition has at most one input
//!   and one output place) into a state machine, by routing the empty
//!   complex through a fresh place;
//! * a weakly reversible free-choice net into its reduced generalized state
//!   machine, whose places are the non-empty complexes;
//! * a weakly reversible generalized state machine with constant rates to
//!   and from a Jackson network of single-server exponential queues.

use std::collections::HashMap;

use num::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::net::{Bag, Complex, Kinetics, Marking, NetError, PetriNet, Transition};
use crate::rational::{format_rational, parse_rational, to_f64, Rational, RationalMatrix};
use crate::graph;
use crate::product_form::StationaryDistribution;
use crate::structure;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("the net is not a generalized state machine")]
    NotGSM,
    #[error("the net is not free-choice")]
    NotFreeChoice,
    #[error("the net is not weakly reversible")]
    NotWeaklyReversible,
    #[error("the net does not have constant rates")]
    NotConstantRates,
    #[error("invalid routing: {0}")]
    InvalidRouting(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Suffix reserved for generated places.
pub const FRESH_SUFFIX: char = '\'';

fn fresh_name(taken: &[String], base: &str) -> String {
    let mut name = format!("{base}{FRESH_SUFFIX}");
    while taken.contains(&name) {
        name.push(FRESH_SUFFIX);
    }
    name
}

/// Adds a fresh place (named `void'`, with more `'` if taken) that feeds
/// every transition with empty input and receives from every transition
/// with empty output. The result is a state machine with the same
/// reaction graph, up to renaming `∅` to the fresh place.
pub fn associated_sm(net: &PetriNet) -> Result<PetriNet, ReductionError> {
    if !structure::classify(net).generalized_state_machine {
        return Err(ReductionError::NotGSM);
    }
    let n = net.place_count();
    let mut places = net.places().to_vec();
    places.push(fresh_name(&places, "void"));
    let widen = |b: &Bag| {
        let mut w = b.as_slice().to_vec();
        w.push(u64::from(b.is_empty()));
        Bag::new(w)
    };
    let transitions = net
        .transitions()
        .iter()
        .map(|t| Transition {
            id: t.id.clone(),
            input: widen(&t.input),
            output: widen(&t.output),
            rate: t.rate.clone(),
        })
        .collect();
    let mut m0 = net.initial_marking().as_slice().to_vec();
    m0.push(0);
    debug_assert_eq!(m0.len(), n + 1);
    Ok(PetriNet::new(places, transitions, Marking::new(m0), net.kinetics())?)
}

/// Reduced generalized state machine of a free-choice net.
#[derive(Clone, Debug)]
pub struct Rgsm {
    pub net: PetriNet,
    /// Place `i` of `net` stands for `complexes[i]` of the original net.
    pub complexes: Vec<Complex>,
    /// Produced with `force` from a net that is not weakly reversible; the
    /// marking processes are then unrelated in general.
    pub forced: bool,
    pub warnings: Vec<String>,
}

impl Rgsm {
    /// `f(M)_C = min_{p ∈ C} M_p`.
    pub fn project(&self, m: &Marking) -> Marking {
        Marking::new(
            self.complexes
                .iter()
                .map(|c| c.support().map(|p| m.get(p)).min().unwrap_or(0))
                .collect(),
        )
    }
}

/// Collapses every non-empty complex into one place. Requires a free-choice
/// net; requires weak reversibility unless `force` is set.
pub fn rgsm(net: &PetriNet, force: bool) -> Result<Rgsm, ReductionError> {
    if !structure::classify(net).free_choice {
        return Err(ReductionError::NotFreeChoice);
    }
    let g = structure::reaction_graph(net);
    let wr = g.is_weakly_reversible();
    if !wr && !force {
        return Err(ReductionError::NotWeaklyReversible);
    }
    let mut warnings = Vec::new();
    if !wr {
        warnings.push("net is not weakly reversible: the reduction is structural only".to_string());
    }

    let complexes: Vec<Complex> = g.complexes.iter().filter(|c| !c.is_empty()).cloned().collect();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, c) in complexes.iter().enumerate() {
        for p in c.support() {
            if let Some(prev) = owner.insert(p, i) {
                warnings.push(format!(
                    "place {} lies in complexes {} and {}",
                    net.places()[p],
                    net.bag_label(&complexes[prev]),
                    net.bag_label(c)
                ));
            }
        }
    }
    if net.kinetics() == Kinetics::MassAction {
        warnings.push("mass-action rates do not carry over: generators agree only for constant rates".into());
    }

    let mut places: Vec<String> = Vec::new();
    for c in &complexes {
        let base = c.support().map(|p| net.places()[p].as_str()).collect::<Vec<_>>().join(".");
        let name = if places.contains(&base) { fresh_name(&places, &base) } else { base };
        places.push(name);
    }
    let index: HashMap<&Complex, usize> = complexes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let k = complexes.len();
    let lift = |c: &Complex| {
        if c.is_empty() {
            Bag::empty(k)
        } else {
            Bag::unit(k, index[c])
        }
    };
    let transitions = net
        .transitions()
        .iter()
        .map(|t| Transition {
            id: t.id.clone(),
            input: lift(&t.input),
            output: lift(&t.output),
            rate: t.rate.clone(),
        })
        .collect();
    let mut out = Rgsm {
        net: PetriNet::new(places, transitions, Marking::zeros(k), net.kinetics())?,
        complexes,
        forced: !wr,
        warnings,
    };
    let m0 = out.project(net.initial_marking());
    out.net = out.net.with_initial_marking(m0)?;
    Ok(out)
}

/// Open or closed network of single-server exponential queues with
/// Markovian routing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacksonNetwork {
    pub queues: Vec<String>,
    /// Service rate per queue; zero only for queues nothing is routed to
    /// or from.
    pub service_rates: Vec<Rational>,
    /// `routing[u][v]`: probability of joining `v` after service at `u`;
    /// the row deficit is the probability of leaving the network.
    pub routing: Vec<Vec<Rational>>,
    pub arrival_rates: Vec<Rational>,
    pub open: bool,
    pub initial_customers: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct JacksonJson {
    queues: Vec<String>,
    service_rates: Vec<String>,
    routing: Vec<Vec<String>>,
    arrival_rates: Vec<String>,
    open: bool,
    initial_customers: Vec<u64>,
}

impl Serialize for JacksonNetwork {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let strs = |v: &[Rational]| v.iter().map(format_rational).collect::<Vec<_>>();
        JacksonJson {
            queues: self.queues.clone(),
            service_rates: strs(&self.service_rates),
            routing: self.routing.iter().map(|r| strs(r)).collect(),
            arrival_rates: strs(&self.arrival_rates),
            open: self.open,
            initial_customers: self.initial_customers.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JacksonNetwork {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = JacksonJson::deserialize(d)?;
        let parse = |v: &[String]| {
            v.iter()
                .map(|s| parse_rational(s).ok_or_else(|| D::Error::custom(format!("bad rational `{s}`"))))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(JacksonNetwork {
            service_rates: parse(&j.service_rates)?,
            routing: j.routing.iter().map(|r| parse(r)).collect::<Result<_, _>>()?,
            arrival_rates: parse(&j.arrival_rates)?,
            queues: j.queues,
            open: j.open,
            initial_customers: j.initial_customers,
        })
    }
}

/// One queue per place: `μ_s = Σ_{•t = s} κ_t`, `P_{u,v} = μ_u⁻¹ Σ_{•t=u, t•=v} κ_t`,
/// and transitions with empty input become arrival streams.
pub fn to_jackson(net: &PetriNet) -> Result<JacksonNetwork, ReductionError> {
    if !structure::classify(net).generalized_state_machine {
        return Err(ReductionError::NotGSM);
    }
    if !structure::is_weakly_reversible(net) {
        return Err(ReductionError::NotWeaklyReversible);
    }
    if net.kinetics() != Kinetics::Constant {
        return Err(ReductionError::NotConstantRates);
    }
    let n = net.place_count();
    let mut mu = vec![Rational::zero(); n];
    let mut flow = vec![vec![Rational::zero(); n]; n];
    let mut arrivals = vec![Rational::zero(); n];
    let mut open = false;
    let single = |b: &Bag| b.support().next();
    for t in net.transitions() {
        match (single(&t.input), single(&t.output)) {
            (Some(u), target) => {
                mu[u] += &t.rate;
                match target {
                    Some(v) => flow[u][v] += &t.rate,
                    None => open = true,
                }
            }
            (None, Some(v)) => {
                arrivals[v] += &t.rate;
                open = true;
            }
            (None, None) => unreachable!("normalized nets have no ∅ -> ∅ transition"),
        }
    }
    let routing = flow
        .into_iter()
        .zip(&mu)
        .map(|(row, m)| {
            row.into_iter()
                .map(|f| if m.is_zero() { f } else { f / m })
                .collect()
        })
        .collect();
    Ok(JacksonNetwork {
        queues: net.places().to_vec(),
        service_rates: mu,
        routing,
        arrival_rates: arrivals,
        open,
        initial_customers: net.initial_marking().as_slice().to_vec(),
    })
}

/// Inverse construction: `u -> v` at rate `μ_u P_{u,v}`, `u -> ∅` at rate
/// `μ_u (1 - Σ_v P_{u,v})`, `∅ -> v` at the arrival rate of `v`.
pub fn from_jackson(j: &JacksonNetwork) -> Result<PetriNet, ReductionError> {
    j.validate()?;
    let n = j.queues.len();
    let mut transitions = Vec::new();
    for u in 0..n {
        let mu = &j.service_rates[u];
        let mut stay = Rational::zero();
        for v in 0..n {
            let p = &j.routing[u][v];
            stay += p;
            if p.is_positive() && mu.is_positive() {
                transitions.push(Transition {
                    id: format!("{}_to_{}", j.queues[u], j.queues[v]),
                    input: Bag::unit(n, u),
                    output: Bag::unit(n, v),
                    rate: mu * p,
                });
            }
        }
        let leave = mu * (Rational::one() - stay);
        if leave.is_positive() {
            transitions.push(Transition {
                id: format!("{}_out", j.queues[u]),
                input: Bag::unit(n, u),
                output: Bag::empty(n),
                rate: leave,
            });
        }
    }
    for v in 0..n {
        if j.arrival_rates[v].is_positive() {
            transitions.push(Transition {
                id: format!("{}_in", j.queues[v]),
                input: Bag::empty(n),
                output: Bag::unit(n, v),
                rate: j.arrival_rates[v].clone(),
            });
        }
    }
    Ok(PetriNet::new(
        j.queues.clone(),
        transitions,
        Marking::new(j.initial_customers.clone()),
        Kinetics::Constant,
    )?)
}

impl JacksonNetwork {
    pub fn validate(&self) -> Result<(), ReductionError> {
        let n = self.queues.len();
        let bad = |msg: String| Err(ReductionError::InvalidRouting(msg));
        if self.service_rates.len() != n
            || self.arrival_rates.len() != n
            || self.initial_customers.len() != n
            || self.routing.len() != n
            || self.routing.iter().any(|r| r.len() != n)
        {
            return bad("dimensions do not match the number of queues".into());
        }
        for (u, row) in self.routing.iter().enumerate() {
            if row.iter().any(|p| p.is_negative()) {
                return bad(format!("negative routing probability out of {}", self.queues[u]));
            }
            let total: Rational = row.iter().sum();
            if total > Rational::one() {
                return bad(format!("routing row of {} sums to {}", self.queues[u], format_rational(&total)));
            }
            if !self.open && self.service_rates[u].is_positive() && !total.is_one() {
                return bad(format!("closed network loses customers at {}", self.queues[u]));
            }
        }
        if self.service_rates.iter().chain(&self.arrival_rates).any(|r| r.is_negative()) {
            return bad("negative rate".into());
        }
        if !self.open && self.arrival_rates.iter().any(|r| r.is_positive()) {
            return bad("closed network with external arrivals".into());
        }
        Ok(())
    }

    /// Solutions of the traffic equations `λ_v = a_v + Σ_u λ_u P_{u,v}`,
    /// component by component of the routing graph. In a component without
    /// arrivals or departures the solution is only defined up to a factor;
    /// its first queue is pinned to visit rate 1.
    pub fn visit_rates(&self) -> Vec<Rational> {
        let n = self.queues.len();
        let edges = (0..n).flat_map(|u| (0..n).filter(move |&v| u != v).map(move |v| (u, v)));
        let edges: Vec<(usize, usize)> = edges.filter(|&(u, v)| self.routing[u][v].is_positive()).collect();
        let comps = graph::weakly_connected(n, edges).members();
        let mut lambda = vec![Rational::zero(); n];
        for members in comps {
            let k = members.len();
            if members.iter().all(|&u| self.service_rates[u].is_zero()) {
                // Queues that never serve only hold what arrives.
                for &u in &members {
                    lambda[u] = self.arrival_rates[u].clone();
                }
                continue;
            }
            let leaks = members.iter().any(|&u| {
                self.arrival_rates[u].is_positive()
                    || (self.service_rates[u].is_positive()
                        && self.routing[u].iter().sum::<Rational>() < Rational::one())
            });
            // Rows: balance at each member (λ_v - Σ_u λ_u P_uv = a_v), plus a
            // pin row for closed components.
            let rows = k + usize::from(!leaks);
            let mut m = RationalMatrix::zeros(rows, k);
            let mut rhs = vec![Rational::zero(); rows];
            for (i, &v) in members.iter().enumerate() {
                m[(i, i)] += Rational::one();
                for (j, &u) in members.iter().enumerate() {
                    m[(i, j)] -= &self.routing[u][v];
                }
                rhs[i] = self.arrival_rates[v].clone();
            }
            if !leaks {
                m[(k, 0)] = Rational::one();
                rhs[k] = Rational::one();
            }
            let x = m.solve_vec(&rhs).expect("traffic equations of a valid network are consistent");
            for (i, &v) in members.iter().enumerate() {
                lambda[v] = x[i].clone();
            }
        }
        lambda
    }

    /// `log ρ_s = log(λ_s / μ_s)`, with 0 for queues that never serve.
    pub fn log_loads(&self) -> Vec<f64> {
        self.visit_rates()
            .iter()
            .zip(&self.service_rates)
            .map(|(l, m)| {
                if m.is_zero() || l.is_zero() {
                    0.0
                } else {
                    (to_f64(l) / to_f64(m)).ln()
                }
            })
            .collect()
    }

    /// The classical product form `Π_s ρ_s^{n_s}`, normalized over `states`.
    pub fn product_form(&self, states: &[Marking]) -> StationaryDistribution {
        let log_rho = self.log_loads();
        let log_w: Vec<f64> = states
            .iter()
            .map(|m| m.as_slice().iter().zip(&log_rho).map(|(&k, r)| k as f64 * r).sum())
            .collect();
        StationaryDistribution::from_log_weights(states.to_vec(), &log_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_net;
    use crate::rational::{int, ratio};

    fn net(src: &str) -> PetriNet {
        parse_net(src).unwrap().net
    }

    #[test]
    fn associated_sm_of_a_source_sink_gsm() {
        let g = net("a: 0 -> q @ 1\nb: q -> 0 @ 2\n");
        let sm = associated_sm(&g).unwrap();
        assert_eq!(sm.places(), ["q", "void'"]);
        assert!(structure::classify(&sm).state_machine);
        assert_eq!(sm.transition(0).input, Bag::new(vec![0, 1]));
        assert_eq!(sm.transition(1).output, Bag::new(vec![0, 1]));
        assert_eq!(structure::deficiency(&sm), structure::deficiency(&g));
    }

    #[test]
    fn associated_sm_of_an_sm_only_adds_an_isolated_place() {
        let s = net("x: P -> a @ 1\ny: P -> b @ 1\n");
        let sm = associated_sm(&s).unwrap();
        assert_eq!(sm.place_count(), 4);
        assert!(sm.transitions().iter().all(|t| t.input.get(3) == 0 && t.output.get(3) == 0));
    }

    #[test]
    fn fresh_place_avoids_collisions() {
        let s = net("0 -> void' @ 1\nvoid' -> 0 @ 1\n");
        assert_eq!(associated_sm(&s).unwrap().places()[1], "void''");
    }

    #[test]
    fn associated_sm_rejects_non_gsm() {
        let s = net("a + b -> c @ 1\n");
        assert_eq!(associated_sm(&s), Err(ReductionError::NotGSM));
    }

    #[test]
    fn rgsm_of_a_non_wr_free_choice_net_needs_force() {
        let n = net("places: p q r\ninit: q=2 r=1\nt1: p -> q + r @ 1\nt2: q -> p @ 1\nt3: r -> p @ 1\n");
        assert!(matches!(rgsm(&n, false), Err(ReductionError::NotWeaklyReversible)));
        let r = rgsm(&n, true).unwrap();
        assert!(r.forced);
        assert_eq!(r.net.places(), ["p", "q.r", "q", "r"]);
        assert_eq!(r.net.initial_marking(), &Marking::new(vec![0, 1, 2, 1]));
        assert!(r.warnings.len() >= 2);
    }

    #[test]
    fn rgsm_of_singleton_complexes_is_a_renaming() {
        let n = net("init: a=2\nx: a -> b @ 1\ny: b -> a @ 3\n");
        let r = rgsm(&n, false).unwrap();
        assert_eq!(r.net.places(), ["a", "b"]);
        assert_eq!(r.net.transitions(), n.transitions());
        assert_eq!(r.net.initial_marking(), n.initial_marking());
    }

    #[test]
    fn rgsm_rejects_non_free_choice() {
        let n = net("t3: p3 + p4 -> a @ 1\nt4: p4 -> b @ 1\n");
        assert!(matches!(rgsm(&n, true), Err(ReductionError::NotFreeChoice)));
    }

    #[test]
    fn one_place_three_branches() {
        let n = net("init: s=1\nt1: s -> a @ 1\nt2: s -> b @ 2\nt3: s -> c @ 3\n\
                     a -> s @ 1\nb -> s @ 1\nc -> s @ 1\n");
        let j = to_jackson(&n).unwrap();
        assert_eq!(j.service_rates[0], int(6));
        assert_eq!(j.routing[0][1..], [ratio(1, 6), ratio(2, 6), ratio(3, 6)]);
        assert!(!j.open);
        assert!(j.routing.iter().all(|r| r.iter().sum::<Rational>() == int(1)));
    }

    #[test]
    fn closed_two_queue_cycle() {
        let j = JacksonNetwork {
            queues: vec!["a".into(), "b".into()],
            service_rates: vec![int(1), int(2)],
            routing: vec![vec![int(0), int(1)], vec![int(1), int(0)]],
            arrival_rates: vec![int(0), int(0)],
            open: false,
            initial_customers: vec![1, 0],
        };
        let n = from_jackson(&j).unwrap();
        assert!(structure::classify(&n).state_machine);
        assert_eq!(n.rates(), vec![int(1), int(2)]);
        assert_eq!(to_jackson(&n).unwrap(), j);
        let json = serde_json::to_string(&j).unwrap();
        assert!(json.contains("\"1\""));
        assert_eq!(serde_json::from_str::<JacksonNetwork>(&json).unwrap(), j);
    }

    #[test]
    fn open_single_queue() {
        let j = JacksonNetwork {
            queues: vec!["p".into()],
            service_rates: vec![int(3)],
            routing: vec![vec![int(0)]],
            arrival_rates: vec![int(2)],
            open: true,
            initial_customers: vec![0],
        };
        let n = from_jackson(&j).unwrap();
        assert_eq!(n, net("places: p\np_out: p -> 0 @ 3\np_in: 0 -> p @ 2\n"));
        assert_eq!(j.visit_rates(), vec![int(2)]);
        assert!((j.log_loads()[0] - (2.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_routing_is_rejected() {
        let j = JacksonNetwork {
            queues: vec!["a".into()],
            service_rates: vec![int(1)],
            routing: vec![vec![ratio(3, 2)]],
            arrival_rates: vec![int(0)],
            open: true,
            initial_customers: vec![0],
        };
        assert!(matches!(from_jackson(&j), Err(ReductionError::InvalidRouting(_))));
    }

    #[test]
    fn jackson_preconditions() {
        assert_eq!(
            to_jackson(&net("a -> b @ 1\n")).unwrap_err(),
            ReductionError::NotWeaklyReversible
        );
        let ma = net("kinetics: mass-action\na -> b @ 1\nb -> a @ 1\n");
        assert_eq!(to_jackson(&ma).unwrap_err(), ReductionError::NotConstantRates);
    }

    #[test]
    fn idle_queue_has_zero_visit_rate() {
        let j = to_jackson(&net("places: a b c\ninit: a=1 c=2\na -> b @ 2\nb -> a @ 1\n")).unwrap();
        assert_eq!(j.visit_rates(), vec![int(1), int(1), int(0)]);
        assert_eq!(j.log_loads()[2], 0.0);
    }
}

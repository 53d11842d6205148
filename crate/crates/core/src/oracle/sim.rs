//! Race-policy simulation of the marking process.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; stream
//! `k` of a seed (`set_stream(k)`) gives independent, reproducible
//! sub-generators. Holding times are drawn by inversion, `-ln(1 - U) / λ`,
//! with `U` uniform on `[0, 1)`.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::net::{Marking, PetriNet};
use crate::product_form::StationaryDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be positive and finite, got {0}")]
    NonPositiveHorizon(f64),
}

/// The generator used for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub horizon: f64,
    /// Visited markings in order of first visit.
    pub states: Vec<Marking>,
    /// Fraction of model time spent in each visited marking.
    pub occupancy: Vec<f64>,
    pub jumps: u64,
    /// Marking with no enabled transition, if one was reached; it absorbs
    /// the rest of the horizon.
    pub deadlock: Option<Marking>,
}

impl SimulationResult {
    pub fn distribution(&self) -> StationaryDistribution {
        StationaryDistribution {
            support: self.states.clone(),
            probabilities: self.occupancy.clone(),
            log_normalizing_constant: 0.0,
        }
    }

    /// Occupancy laid out over `support`; unvisited markings get 0 and
    /// visited markings outside `support` are dropped.
    pub fn empirical_on(&self, support: &[Marking]) -> StationaryDistribution {
        let seen: HashMap<&Marking, f64> = self.states.iter().zip(self.occupancy.iter().copied()).collect();
        StationaryDistribution {
            support: support.to_vec(),
            probabilities: support.iter().map(|m| seen.get(m).copied().unwrap_or(0.0)).collect(),
            log_normalizing_constant: 0.0,
        }
    }
}

/// Simulates from the initial marking up to model time `horizon`:
/// exponential holding time with the total enabled rate, then a transition
/// chosen proportionally to its rate.
pub fn simulate(net: &PetriNet, seed: u64, horizon: f64) -> Result<SimulationResult, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::NonPositiveHorizon(horizon));
    }
    let mut rng = rng_for(seed, 0);
    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut time_in = Vec::new();
    let mut m = net.initial_marking().clone();
    let mut now = 0.0;
    let mut jumps = 0;
    let mut deadlock = None;
    let mut rates = vec![0.0; net.transition_count()];

    loop {
        let k = *index.entry(m.clone()).or_insert_with(|| {
            states.push(m.clone());
            time_in.push(0.0);
            states.len() - 1
        });
        for (t, r) in rates.iter_mut().enumerate() {
            *r = net.rate_f64(&m, t);
        }
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            time_in[k] += horizon - now;
            deadlock = Some(m);
            break;
        }
        let u: f64 = rng.random();
        let hold = -(1.0 - u).ln() / total;
        if now + hold >= horizon {
            time_in[k] += horizon - now;
            break;
        }
        time_in[k] += hold;
        now += hold;

        let mut pick = rng.random::<f64>() * total;
        let mut chosen = None;
        for (t, &r) in rates.iter().enumerate() {
            if r > 0.0 {
                chosen = Some(t);
                if pick < r {
                    break;
                }
                pick -= r;
            }
        }
        let t = chosen.expect("some transition is enabled");
        m = net.fire(&m, t).expect("chosen transition is enabled");
        jumps += 1;
    }

    Ok(SimulationResult {
        seed,
        horizon,
        states,
        occupancy: time_in.iter().map(|t| t / horizon).collect(),
        jumps,
        deadlock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_net;

    const CYCLE: &str = "places: p q r\ninit: p=2\n\
        t1: 2p -> p + q + r @ 1\nt2: 2q -> 2p @ 1\nt3: p + q + r -> 2q @ 1\n";

    #[test]
    fn same_seed_same_trajectory() {
        let n = parse_net(CYCLE).unwrap().net;
        let a = simulate(&n, 7, 500.0).unwrap();
        let b = simulate(&n, 7, 500.0).unwrap();
        assert_eq!(a, b);
        let c = simulate(&n, 8, 500.0).unwrap();
        assert_ne!(a.occupancy, c.occupancy);
    }

    #[test]
    fn occupancy_is_a_distribution() {
        let n = parse_net(CYCLE).unwrap().net;
        let r = simulate(&n, 1, 1000.0).unwrap();
        assert!((r.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.states.len(), 3);
        assert!(r.deadlock.is_none());
    }

    #[test]
    fn deadlock_absorbs_the_horizon() {
        let n = parse_net("init: a=1\na -> b @ 1\n").unwrap().net;
        let r = simulate(&n, 3, 1e6).unwrap();
        assert_eq!(r.deadlock, Some(Marking::new(vec![0, 1])));
        assert_eq!(r.jumps, 1);
        assert!(r.empirical_on(&[Marking::new(vec![0, 1])]).probabilities[0] > 0.999);
    }

    #[test]
    fn horizon_must_be_positive() {
        let n = parse_net(CYCLE).unwrap().net;
        assert!(simulate(&n, 1, 0.0).is_err());
        assert!(simulate(&n, 1, f64::NAN).is_err());
    }

    #[test]
    fn streams_differ() {
        let a: u64 = rng_for(5, 0).random();
        let b: u64 = rng_for(5, 1).random();
        assert_ne!(a, b);
    }
}

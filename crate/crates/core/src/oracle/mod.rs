//! Brute-force ground truth: the generator of the marking process on a
//! finite reachability set, its stationary distribution by a dense solve,
//! distances between distributions, and seeded simulation.

mod sim;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::graph;
use crate::net::{Marking, MarkingGraph, PetriNet};
use crate::product_form::{RateShape, StationaryDistribution};

pub use sim::{rng_for, simulate, SimError, SimulationResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the marking graph was truncated")]
    Truncated,
    #[error("the generator is not irreducible")]
    NotIrreducible,
    #[error("stationary solve residual {residual:e} exceeds {tolerance:e}")]
    SingularBeyondTolerance { residual: f64, tolerance: f64 },
    #[error("distributions have different supports")]
    SupportMismatch,
}

/// Residual accepted from the dense stationary solve, relative to the
/// largest exit rate.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Generator of a finite continuous-time Markov chain, stored by rows:
/// off-diagonal rates (merged per target) and exit rates.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    states: Vec<Marking>,
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl Generator {
    /// Builds `Q` from explicit off-diagonal entries; duplicates are summed
    /// and self-loops dropped.
    pub fn from_entries(states: Vec<Marking>, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
        for (i, j, r) in entries {
            if i != j && r > 0.0 {
                rows[i].push((j, r));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, r) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += r,
                    _ => merged.push((j, r)),
                }
            }
            *row = merged;
        }
        let exit = rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
        Self { states, rows, exit }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Marking] {
        &self.states
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// `q_{ij}`, including the diagonal `-exit_rate(i)`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = -self.exit[i];
            for &(j, r) in &self.rows[i] {
                q[(i, j)] = r;
            }
        }
        q
    }

    /// Row vector times generator, `πQ`.
    pub fn apply_left(&self, pi: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = pi.iter().zip(&self.exit).map(|(p, e)| -p * e).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                out[j] += pi[i] * r;
            }
        }
        out
    }

    /// Largest `|Σ_j q_ij|` relative to the row's exit rate.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.exit)
            .map(|(row, e)| {
                let s: f64 = row.iter().map(|x| x.1).sum::<f64>() - e;
                s.abs() / e.max(1.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows.iter().map(|r| r.iter().map(|e| e.0).collect()).collect()
    }

    pub fn is_irreducible(&self) -> bool {
        graph::is_strongly_connected(&self.adjacency())
    }

    /// Restriction to the given states (in that order); transitions to
    /// states outside are dropped, which reflects the chain at the border.
    pub fn restricted(&self, keep: &[usize]) -> Generator {
        let mut pos = vec![usize::MAX; self.len()];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let entries = keep.iter().enumerate().flat_map(|(k, &i)| {
            let pos = &pos;
            self.rows[i]
                .iter()
                .filter(move |e| pos[e.0] != usize::MAX)
                .map(move |&(j, r)| (k, pos[j], r))
        });
        let states = keep.iter().map(|&i| self.states[i].clone()).collect();
        Generator::from_entries(states, entries.collect::<Vec<_>>())
    }
}

fn generator_unchecked(net: &PetriNet, graph: &MarkingGraph) -> Generator {
    let entries = graph
        .arcs()
        .iter()
        .map(|a| (a.source, a.target, net.rate_f64(&graph.nodes()[a.source], a.transition)));
    Generator::from_entries(graph.nodes().to_vec(), entries.collect::<Vec<_>>())
}

/// `q_{M,M'} = Σ_{t: M -t-> M'} μ_t(M)` on a complete marking graph.
pub fn generator(net: &PetriNet, graph: &MarkingGraph) -> Result<Generator, OracleError> {
    if graph.truncated() {
        return Err(OracleError::Truncated);
    }
    Ok(generator_unchecked(net, graph))
}

/// Diagnostic only: the generator on the explored part of a possibly
/// truncated marking graph, reflected at the border. Transitions leaving
/// the kept set are suppressed, and the kept set is the communicating class
/// of the initial marking within the explored graph, so frontier markings
/// that cannot return are dropped rather than becoming absorbing. Returns
/// the generator and the kept node indices.
pub fn truncated_generator(net: &PetriNet, graph: &MarkingGraph) -> (Generator, Vec<usize>) {
    let q = generator_unchecked(net, graph);
    let scc = graph::strongly_connected(&q.adjacency());
    let keep: Vec<usize> = (0..q.len()).filter(|&i| scc.component[i] == scc.component[0]).collect();
    (q.restricted(&keep), keep)
}

/// Solves `πQ = 0, Σπ = 1` by dense LU on `Qᵀ` with its last row replaced
/// by ones.
pub fn stationary_numeric(q: &Generator) -> Result<StationaryDistribution, OracleError> {
    if !q.is_irreducible() {
        return Err(OracleError::NotIrreducible);
    }
    let n = q.len();
    let mut a = q.to_dense().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(OracleError::SingularBeyondTolerance {
        residual: f64::INFINITY,
        tolerance: SOLVE_TOLERANCE,
    })?;
    let pi: Vec<f64> = x.iter().copied().collect();
    let residual = q.apply_left(&pi).iter().fold(0.0f64, |m, r| m.max(r.abs())) / q.max_exit_rate().max(1.0);
    if !(residual < SOLVE_TOLERANCE) {
        return Err(OracleError::SingularBeyondTolerance {
            residual,
            tolerance: SOLVE_TOLERANCE,
        });
    }
    Ok(StationaryDistribution {
        support: q.states.clone(),
        probabilities: pi,
        log_normalizing_constant: 0.0,
    })
}

fn aligned<'a>(
    a: &'a StationaryDistribution,
    b: &'a StationaryDistribution,
) -> Result<Vec<(f64, f64)>, OracleError> {
    if a.support.len() != b.support.len() {
        return Err(OracleError::SupportMismatch);
    }
    if a.support == b.support {
        return Ok(a.probabilities.iter().copied().zip(b.probabilities.iter().copied()).collect());
    }
    let index: std::collections::HashMap<&Marking, usize> =
        b.support.iter().enumerate().map(|(i, m)| (m, i)).collect();
    a.support
        .iter()
        .zip(&a.probabilities)
        .map(|(m, &p)| {
            index
                .get(m)
                .map(|&i| (p, b.probabilities[i]))
                .ok_or(OracleError::SupportMismatch)
        })
        .collect()
}

/// `max_x |a(x) - b(x)| / max(a(x), b(x))`; supports must coincide as sets.
pub fn compare(a: &StationaryDistribution, b: &StationaryDistribution) -> Result<f64, OracleError> {
    Ok(aligned(a, b)?
        .into_iter()
        .map(|(x, y)| {
            let top = x.abs().max(y.abs());
            if top == 0.0 {
                0.0
            } else {
                (x - y).abs() / top
            }
        })
        .fold(0.0, f64::max))
}

/// `½ Σ_x |a(x) - b(x)|` over a common support.
pub fn total_variation(a: &StationaryDistribution, b: &StationaryDistribution) -> Result<f64, OracleError> {
    Ok(0.5 * aligned(a, b)?.into_iter().map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Least-squares fit of `log p(x) = c + Σ_p a_p x_p - log Φ(x)`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductFormFit {
    pub log_u: Vec<f64>,
    pub log_scale: f64,
    /// Max relative error of the fitted (normalized) ansatz.
    pub max_relative_error: f64,
    /// No product form of this shape can get closer than this in max
    /// relative error: with `e` the least-squares log residual vector,
    /// every ansatz has a log error of at least `‖e‖₂ / √n` somewhere.
    pub lower_bound: f64,
}

pub fn fit_product_form<S: RateShape>(dist: &StationaryDistribution, shape: &S) -> ProductFormFit {
    let n = dist.len();
    let places = dist.support.first().map_or(0, Marking::len);
    let design = DMatrix::from_fn(n, places + 1, |i, j| {
        if j == places {
            1.0
        } else {
            dist.support[i].get(j) as f64
        }
    });
    let target = DVector::from_iterator(
        n,
        dist.support
            .iter()
            .zip(&dist.probabilities)
            .map(|(m, p)| p.ln() + shape.log_phi(m)),
    );
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .expect("SVD with both factors computed");
    let residual = &target - &design * &coef;
    let rms = (residual.norm_squared() / n as f64).sqrt();

    let log_u: Vec<f64> = coef.iter().take(places).copied().collect();
    let log_w: Vec<f64> = dist
        .support
        .iter()
        .map(|m| m.as_slice().iter().zip(&log_u).map(|(&k, a)| k as f64 * a).sum::<f64>() - shape.log_phi(m))
        .collect();
    let fitted = StationaryDistribution::from_log_weights(dist.support.clone(), &log_w);
    ProductFormFit {
        max_relative_error: compare(&fitted, dist).expect("same support"),
        log_scale: coef[places],
        log_u,
        lower_bound: 1.0 - (-rms).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{parse_net, Kinetics};

    fn net(src: &str) -> PetriNet {
        parse_net(src).unwrap().net
    }

    const CYCLE: &str = "places: p q r\ninit: p=2\n\
        t1: 2p -> p + q + r @ 1\nt2: 2q -> 2p @ 2\nt3: p + q + r -> 2q @ 3\n";

    #[test]
    fn cycle_generator_follows_the_circuit() {
        let n = net(&CYCLE.replace("@ 2", "@ 1").replace("@ 3", "@ 1"));
        let q = generator(&n, &n.reachability(10)).unwrap();
        // (2,0,0) -> (1,1,1) -> (0,2,0) -> (2,0,0)
        assert_eq!(q.rate(0, 1), 1.0);
        assert_eq!(q.rate(1, 2), 1.0);
        assert_eq!(q.rate(2, 0), 1.0);
        assert_eq!(q.rate(0, 2), 0.0);
        assert_eq!(q.rate(1, 1), -1.0);
        assert_eq!(q.max_row_sum_error(), 0.0);
        let pi = stationary_numeric(&q).unwrap();
        for p in pi.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cycle_with_distinct_rates() {
        let n = net(CYCLE);
        let pi = stationary_numeric(&generator(&n, &n.reachability(10)).unwrap()).unwrap();
        for (p, e) in pi.probabilities.iter().zip([6.0 / 11.0, 2.0 / 11.0, 3.0 / 11.0]) {
            assert!((p - e).abs() < 1e-14);
        }
    }

    #[test]
    fn never_enabled_transition_gives_a_zero_generator() {
        let n = net("places: p q\nt: p -> q @ 1\n");
        let q = generator(&n, &n.reachability(10)).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.to_dense(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn parallel_transitions_add_up() {
        let n = net("init: a=1 c=1\nx: a -> b @ 1\ny: a + c -> b + c @ 2\nz: b -> a @ 1\n");
        let q = generator(&n, &n.reachability(10)).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.exit_rate(0), 3.0);
        assert_eq!(q.rate(0, 1), 3.0);
    }

    #[test]
    fn truncation_is_refused_and_reflected_on_request() {
        let n = net(&CYCLE.replace("p=2", "p=3"));
        let g = n.reachability(40);
        assert_eq!(generator(&n, &g), Err(OracleError::Truncated));
        let (q, keep) = truncated_generator(&n, &g);
        assert!(q.is_irreducible());
        assert!(keep.len() <= 40 && keep[0] == 0);
        assert!(stationary_numeric(&q).is_ok());
        // The last explored marking can only move outward; it is dropped.
        assert!(!keep.contains(&(g.len() - 1)));
    }

    #[test]
    fn reducible_chain_is_refused() {
        let n = net("init: a=1\na -> b @ 1\n");
        let q = generator(&n, &n.reachability(10)).unwrap();
        assert_eq!(stationary_numeric(&q), Err(OracleError::NotIrreducible));
    }

    #[test]
    fn distances() {
        let n = net(CYCLE);
        let pi = stationary_numeric(&generator(&n, &n.reachability(10)).unwrap()).unwrap();
        assert_eq!(compare(&pi, &pi).unwrap(), 0.0);
        assert_eq!(total_variation(&pi, &pi).unwrap(), 0.0);
        let mut other = pi.clone();
        other.support.reverse();
        other.probabilities.reverse();
        assert_eq!(compare(&pi, &other).unwrap(), 0.0);
        other.support[0] = Marking::new(vec![9, 9, 9]);
        assert_eq!(compare(&pi, &other), Err(OracleError::SupportMismatch));
    }

    #[test]
    fn exact_product_forms_fit_perfectly() {
        let n = net(CYCLE);
        let pi = stationary_numeric(&generator(&n, &n.reachability(10)).unwrap()).unwrap();
        let fit = fit_product_form(&pi, &Kinetics::Constant);
        assert!(fit.max_relative_error < 1e-12);
        assert!(fit.lower_bound < 1e-12);
    }
}

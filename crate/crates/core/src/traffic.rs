//! Linear and non-linear traffic equations.
//!
//! The linear equations (one unknown `y_C` per complex)
//!
//! ```text
//! y_C · Σ_{I(t)=C} κ_t  =  Σ_{O(t)=C} κ_t · y_{I(t)},      y_∅ = 1
//! ```
//!
//! are the balance equations of the reaction graph read as a Markov chain;
//! they are solved exactly. When the deficiency is zero a rational matrix
//! `B` with `B·N = A` exists and `u_p = Π_C v_C^{B_{C,p}}` turns a positive
//! solution `v` into a positive solution `u` of the non-linear equations
//!
//! ```text
//! u^C · Σ_{I(t)=C} κ_t  =  Σ_{O(t)=C} κ_t · u^{I(t)}.
//! ```

use num::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::net::{Complex, PetriNet};
use crate::rational::{format_rational, int, ln_abs, to_f64, Rational, RationalMatrix};
use crate::structure::{self, ReactionGraph};

/// Default relative residual accepted for non-linear solutions.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("non-linear residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("u must be strictly positive and finite, one entry per place")]
    NonPositiveInput,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("the linear traffic equations have no strictly positive solution (component of complex {complex})")]
pub struct NoPositiveSolution {
    /// Label of a complex in an offending weak component.
    pub complex: String,
}

/// Exact positive solution of the linear traffic equations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LteSolution {
    pub complexes: Vec<Complex>,
    /// `v[i]` belongs to `complexes[i]`.
    pub v: Vec<Rational>,
    /// Per weak component, the complex pinned to 1.
    pub reference: Vec<usize>,
}

impl LteSolution {
    pub fn log_v(&self) -> Vec<f64> {
        self.v.iter().map(ln_abs).collect()
    }

    /// Multiplies the values of each weak component by its own factor.
    /// The component holding `∅` must keep factor 1 for the result to stay
    /// a solution.
    pub fn rescaled(&self, graph: &ReactionGraph, factors: &[Rational]) -> LteSolution {
        LteSolution {
            v: self
                .v
                .iter()
                .enumerate()
                .map(|(c, v)| v * &factors[graph.component[c]])
                .collect(),
            ..self.clone()
        }
    }
}

/// Total rate out of each complex, `Σ_{I(t)=C} κ_t`.
fn out_rates(net: &PetriNet, g: &ReactionGraph) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); g.complexes.len()];
    for a in &g.arcs {
        out[a.source] += &net.transition(a.transition).rate;
    }
    out
}

/// Solves the linear traffic equations per weak component, pinning `v_∅ = 1`
/// or, in components without `∅`, the value of the component's first
/// complex. Weak reversibility is not consulted: the verdict comes from the
/// sign of the exact solution.
pub fn solve_lte(net: &PetriNet) -> Result<LteSolution, NoPositiveSolution> {
    let g = structure::reaction_graph(net);
    let out = out_rates(net, &g);
    let mut v = vec![Rational::zero(); g.complexes.len()];
    let mut reference = Vec::new();

    for members in g.component_members() {
        let local = |c: usize| members.binary_search(&c).expect("complex in component");
        let k = members.len();
        let pinned = members
            .iter()
            .copied()
            .find(|&c| g.complexes[c].is_empty())
            .unwrap_or(members[0]);
        reference.push(pinned);

        // k balance rows plus the normalization row.
        let mut m = RationalMatrix::zeros(k + 1, k);
        for (i, &c) in members.iter().enumerate() {
            m[(i, i)] = out[c].clone();
        }
        for a in &g.arcs {
            if g.component[a.source] != g.component[members[0]] {
                continue;
            }
            let (row, col) = (local(a.target), local(a.source));
            m[(row, col)] -= &net.transition(a.transition).rate;
        }
        m[(k, local(pinned))] = Rational::one();
        let mut rhs = vec![Rational::zero(); k + 1];
        rhs[k] = Rational::one();

        let label = || NoPositiveSolution {
            complex: net.bag_label(&g.complexes[pinned]),
        };
        let x = m.solve_vec(&rhs).ok_or_else(label)?;
        if x.iter().any(|x| !x.is_positive()) {
            return Err(label());
        }
        for (i, &c) in members.iter().enumerate() {
            v[c] = x[i].clone();
        }
    }

    Ok(LteSolution {
        complexes: g.complexes,
        v,
        reference,
    })
}

/// Checks the linear traffic equations exactly.
pub fn verify_lte(net: &PetriNet, v: &[Rational]) -> bool {
    let g = structure::reaction_graph(net);
    if v.len() != g.complexes.len() {
        return false;
    }
    let out = out_rates(net, &g);
    let mut inflow = vec![Rational::zero(); v.len()];
    for a in &g.arcs {
        inflow[a.target] += &net.transition(a.transition).rate * &v[a.source];
    }
    let empty_ok = g
        .complexes
        .iter()
        .zip(v)
        .all(|(c, v)| !c.is_empty() || v.is_one());
    empty_ok && (0..v.len()).all(|c| &out[c] * &v[c] == inflow[c])
}

/// A matrix with `B·N = A`; rows are complexes, columns places.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BMatrix {
    pub matrix: RationalMatrix,
    /// True when additionally `Σ_p C_p B_{D,p} = [C = D]` for non-empty
    /// complexes `C, D`, which makes `u^C = v_C` exactly.
    pub aligned: bool,
}

/// Finds `B` with `B·N = A`, which exists exactly when the deficiency is
/// zero. Free variables are set to zero in column order. The first attempt
/// also asks `B` to invert the complex matrix on non-empty complexes; if
/// that is inconsistent, any solution is taken.
pub fn solve_b_matrix(net: &PetriNet) -> Option<BMatrix> {
    let g = structure::reaction_graph(net);
    let n = structure::incidence_matrix(net);
    let a = structure::node_arc_matrix(net);
    let nt = n.transpose();
    let at = a.transpose();
    let (np, nc) = (net.place_count(), g.complexes.len());

    let nonempty: Vec<usize> = (0..nc).filter(|&c| !g.complexes[c].is_empty()).collect();
    let complex_rows = RationalMatrix::from_fn(nonempty.len(), np, |i, p| {
        int(g.complexes[nonempty[i]].get(p) as i64)
    });

    // Columns of Bᵀ are rows of B. Solve non-empty rows with the extra
    // alignment rows, the ∅ row (if any) without.
    let aligned = {
        let lhs = nt.vstack(&complex_rows);
        let rhs = RationalMatrix::from_fn(nt.rows() + nonempty.len(), nonempty.len(), |i, j| {
            if i < nt.rows() {
                at[(i, nonempty[j])].clone()
            } else if i - nt.rows() == j {
                Rational::one()
            } else {
                Rational::zero()
            }
        });
        lhs.solve(&rhs).and_then(|x| {
            let mut bt = RationalMatrix::zeros(np, nc);
            for (j, &c) in nonempty.iter().enumerate() {
                for p in 0..np {
                    bt[(p, c)] = x[(p, j)].clone();
                }
            }
            if nonempty.len() < nc {
                let empty = (0..nc).find(|&c| g.complexes[c].is_empty()).unwrap();
                let col = RationalMatrix::from_fn(nt.rows(), 1, |i, _| at[(i, empty)].clone());
                let y = nt.solve(&col)?;
                for p in 0..np {
                    bt[(p, empty)] = y[(p, 0)].clone();
                }
            }
            Some(bt.transpose())
        })
    };

    let (matrix, is_aligned) = match aligned {
        Some(b) => (b, true),
        None => (nt.solve(&at)?.transpose(), false),
    };
    assert!(&matrix * &n == a, "B·N must equal A");
    Some(BMatrix {
        matrix,
        aligned: is_aligned,
    })
}

/// Positive solution of the non-linear traffic equations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NlteSolution {
    pub log_u: Vec<f64>,
    pub u: Vec<f64>,
    /// Relative residual per complex, in complex order.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// `log u_p = Σ_C B_{C,p} log v_C`, with the residual of every equation.
pub fn nlte_from_lte(
    net: &PetriNet,
    lte: &LteSolution,
    b: &BMatrix,
    tolerance: f64,
) -> Result<NlteSolution, TrafficError> {
    let log_v = lte.log_v();
    let log_u: Vec<f64> = (0..net.place_count())
        .map(|p| {
            (0..log_v.len())
                .map(|c| {
                    let coeff = &b.matrix[(c, p)];
                    if coeff.is_zero() {
                        0.0
                    } else {
                        to_f64(coeff) * log_v[c]
                    }
                })
                .sum()
        })
        .collect();
    let residuals = nlte_residuals(net, &log_u);
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    if !(max_residual <= tolerance) {
        return Err(TrafficError::ResidualTooLarge {
            residual: max_residual,
            tolerance,
        });
    }
    Ok(NlteSolution {
        u: log_u.iter().map(|l| l.exp()).collect(),
        log_u,
        residuals,
        max_residual,
    })
}

/// The non-linear equations of a net, prepared for repeated evaluation.
#[derive(Clone, Debug)]
pub struct NlteSystem {
    complexes: Vec<Complex>,
    /// (source complex, target complex, log κ) per transition.
    arcs: Vec<(usize, usize, f64)>,
}

impl NlteSystem {
    pub fn new(net: &PetriNet) -> Self {
        let g = structure::reaction_graph(net);
        let arcs = g
            .arcs
            .iter()
            .map(|a| (a.source, a.target, ln_abs(&net.transition(a.transition).rate)))
            .collect();
        Self {
            complexes: g.complexes,
            arcs,
        }
    }

    /// Relative residual of each equation, in complex order, evaluated in
    /// log space: `|L - R| / max(L, R)` with `L = u^C Σ_{I(t)=C} κ_t` and
    /// `R = Σ_{O(t)=C} κ_t u^{I(t)}`.
    pub fn residuals(&self, log_u: &[f64]) -> Vec<f64> {
        let dot: Vec<f64> = self
            .complexes
            .iter()
            .map(|c| c.support().map(|p| c.get(p) as f64 * log_u[p]).sum())
            .collect();
        let mut lhs: Vec<Vec<f64>> = vec![Vec::new(); self.complexes.len()];
        let mut rhs: Vec<Vec<f64>> = vec![Vec::new(); self.complexes.len()];
        for &(s, t, log_k) in &self.arcs {
            lhs[s].push(log_k + dot[s]);
            rhs[t].push(log_k + dot[s]);
        }
        lhs.iter().zip(&rhs).map(|(l, r)| relative_gap(l, r)).collect()
    }

    pub fn max_residual(&self, log_u: &[f64]) -> f64 {
        self.residuals(log_u).into_iter().fold(0.0, f64::max)
    }
}

/// Relative residual of each non-linear equation; see [`NlteSystem::residuals`].
pub fn nlte_residuals(net: &PetriNet, log_u: &[f64]) -> Vec<f64> {
    NlteSystem::new(net).residuals(log_u)
}

/// `|Σ e^l - Σ e^r| / max(Σ e^l, Σ e^r)` without overflow.
pub(crate) fn relative_gap(l: &[f64], r: &[f64]) -> f64 {
    let top = l.iter().chain(r).copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum = |xs: &[f64]| xs.iter().map(|x| (x - top).exp()).sum::<f64>();
    let (a, b) = (sum(l), sum(r));
    (a - b).abs() / a.max(b)
}

/// Largest relative residual of the non-linear equations at `u`.
pub fn verify_nlte(net: &PetriNet, u: &[f64]) -> Result<f64, TrafficError> {
    if u.len() != net.place_count() || u.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(TrafficError::NonPositiveInput);
    }
    let log_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    Ok(nlte_residuals(net, &log_u).into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoSolutionReason {
    NotWeaklyReversible,
    DeficiencyPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Existence {
    /// Proven impossible for every choice of rates.
    Impossible,
    /// Depends on the rates; no decision procedure is attempted.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NoSolutionWitness {
    pub reason: NoSolutionReason,
    pub existence: Existence,
    pub deficiency: usize,
}

/// A full solve: the exact linear solution, the `B` matrix and `u`.
#[derive(Clone, Debug)]
pub struct Solved {
    pub lte: LteSolution,
    pub b: BMatrix,
    pub nlte: NlteSolution,
}

#[derive(Clone, Debug)]
pub enum NlteOutcome {
    Solved(Box<Solved>),
    NoSolution(NoSolutionWitness),
}

impl NlteOutcome {
    pub fn solution(&self) -> Option<&Solved> {
        match self {
            NlteOutcome::Solved(s) => Some(s),
            NlteOutcome::NoSolution(_) => None,
        }
    }
}

/// Weakly reversible and deficiency zero: solve linear equations, find `B`,
/// transfer. Not weakly reversible: no positive solution exists at all.
/// Weakly reversible with positive deficiency: existence depends on the
/// rates and is reported as unknown.
pub fn solve_nlte(net: &PetriNet, tolerance: f64) -> Result<NlteOutcome, TrafficError> {
    let report = structure::analyze(net);
    let witness = |reason, existence| {
        Ok(NlteOutcome::NoSolution(NoSolutionWitness {
            reason,
            existence,
            deficiency: report.deficiency,
        }))
    };
    if !report.weakly_reversible {
        return witness(NoSolutionReason::NotWeaklyReversible, Existence::Impossible);
    }
    if report.deficiency > 0 {
        return witness(NoSolutionReason::DeficiencyPositive, Existence::Unknown);
    }
    let lte = solve_lte(net).expect("weakly reversible nets have a positive linear solution");
    let b = solve_b_matrix(net).expect("deficiency zero nets admit B with BN = A");
    let nlte = nlte_from_lte(net, &lte, &b, tolerance)?;
    Ok(NlteOutcome::Solved(Box::new(Solved { lte, b, nlte })))
}

/// Rationals of `v` as `a/b` strings, for reports.
pub fn format_values(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

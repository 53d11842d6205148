//! Product-form analysis of Markovian Petri nets.
//!
//! Start from [`net::parse_net`], inspect structure with [`structure::analyze`],
//! and obtain the invariant measure through [`traffic::solve_nlte`] and
//! [`product_form`]. [`oracle`] enumerates the marking process directly and
//! is the reference every closed-form result is checked against.

pub mod export;
pub mod graph;
pub mod net;
pub mod oracle;
pub mod product_form;
pub mod rational;
pub mod reductions;
pub mod structure;
pub mod traffic;

//! Causal compatibility testing for latent-variable DAGs via the inflation technique.
//!
//! The library decides whether an observed joint distribution can arise from a
//! hypothesized causal structure with latent variables. It does so by analyzing
//! *inflations* of the structure: copy-indexed structures whose nodes mirror the
//! ancestry of their originals. Marginals of the candidate distribution induce a
//! family of marginals on the inflation, and consistency of that family with a
//! single joint distribution is a linear program. Infeasibility comes with an
//! exact Farkas certificate that translates into a polynomial causal
//! compatibility inequality for the original structure. Facet enumeration of the
//! marginal polytope and hypergraph-transversal (Hardy-type) arguments derive
//! complete or quick partial inequality sets.
//!
//! Module map:
//! - [`graph`]: causal structures (DAGs with an observed/latent split), ancestry,
//!   d-separation.
//! - [`inflation`]: inflation verification, injectable / ai-expressible /
//!   expressible sets, copy isomorphisms, fan-out detection.
//! - [`table`], [`model`], [`family`]: discrete joint tables, causal models and
//!   forward simulation, inflation-induced marginal families.
//! - [`lp`]: the marginal description matrix, exact LP feasibility, Farkas
//!   certificates.
//! - [`polytope`]: facet enumeration of marginal polytopes by exact
//!   Fourier-Motzkin elimination with saturation-rank pruning.
//! - [`hardy`]: possibilistic (Hardy-type) implications via minimal hypergraph
//!   transversals.
//! - [`ineq`], [`symmetry`]: polynomial causal compatibility inequalities,
//!   correlator form, symmetry reduction.
//! - [`fixtures`]: bundled causal structures, inflations and distributions.

pub mod family;
pub mod fixtures;
pub mod graph;
pub mod hardy;
pub mod ineq;
pub mod inflation;
pub mod lp;
pub mod model;
pub mod polytope;
pub mod ratio;
pub mod symmetry;
pub mod table;

pub use graph::{CausalStructure, GraphError, NodeId};
pub use inflation::InflationStructure;
pub use table::JointTable;

//! Hardy-type (possibilistic) causal compatibility inequalities via minimal
//! hypergraph transversals.
//!
//! The context hypergraph has one vertex per context valuation and one
//! hyperedge per global valuation; an edge contains the vertices it extends,
//! so its incidence matrix is the marginal description matrix. Fixing an
//! antecedent valuation and restricting to consistent vertices and extending
//! edges, every minimal transversal of the restriction is a minimal
//! consequent: the implication `antecedent => term_1 ∨ ... ∨ term_k` is a
//! tautology, and the union bound turns it into a linear marginal inequality
//! that block factorization translates into a polynomial causal inequality.

use std::collections::BTreeSet;

use num::bigint::BigInt;
use num::Zero;
use thiserror::Error;

use crate::ineq::PolynomialInequality;
use crate::inflation::InflationStructure;
use crate::lp::{linear_form_to_causal, LinearForm, LpError, MarginalProblem, RowLabel};

#[derive(Debug, Error)]
pub enum HardyError {
    #[error("antecedent row {0} is out of range")]
    BadAntecedent(usize),
    #[error("restricted hypergraph has an uncoverable edge: no consequent exists")]
    EmptyConsequent,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// The context hypergraph of a marginal problem.
pub struct ContextHypergraph {
    /// Vertex labels, indexing rows of the marginal description matrix.
    pub vertices: Vec<RowLabel>,
    /// Row indices (into the problem) per vertex.
    pub vertex_rows: Vec<usize>,
    /// Hyperedges: for each global valuation, the sorted vertex list it
    /// contains.
    pub edges: Vec<Vec<usize>>,
    /// Global valuation (column index) per edge.
    pub edge_columns: Vec<usize>,
}

/// Builds the full hypergraph: all marginal rows as vertices, all global
/// valuations as edges, incidence given by the matrix.
pub fn build_hypergraph(p: &MarginalProblem) -> ContextHypergraph {
    let vertices: Vec<RowLabel> = p.rows[..p.n_marginal_rows].to_vec();
    let vertex_rows: Vec<usize> = (0..p.n_marginal_rows).collect();
    let n_cols = p.n_cols();
    let mut edges = Vec::with_capacity(n_cols);
    for col in 0..n_cols {
        let contains: Vec<usize> =
            (0..p.n_marginal_rows).filter(|&r| p.matrix[r][col] == 1).collect();
        edges.push(contains);
    }
    ContextHypergraph { vertices, vertex_rows, edges, edge_columns: (0..n_cols).collect() }
}

/// Whether two context valuations agree on every shared variable.
fn consistent(p: &MarginalProblem, a: &RowLabel, b: &RowLabel) -> bool {
    let ma = p.context_specs[a.context].sorted_members();
    let mb = p.context_specs[b.context].sorted_members();
    for (i, v) in ma.iter().enumerate() {
        if let Some(j) = mb.iter().position(|u| u == v) {
            if a.valuation[i] != b.valuation[j] {
                return false;
            }
        }
    }
    true
}

/// Restricts the hypergraph to an antecedent vertex: deletes vertices that
/// contradict the antecedent's values (and the antecedent itself) and keeps
/// only hyperedges extending the antecedent.
pub fn restrict(
    p: &MarginalProblem,
    h: &ContextHypergraph,
    antecedent: usize,
) -> Result<ContextHypergraph, HardyError> {
    if antecedent >= h.vertices.len() {
        return Err(HardyError::BadAntecedent(antecedent));
    }
    let ante = &h.vertices[antecedent];
    let keep: Vec<usize> = (0..h.vertices.len())
        .filter(|&v| v != antecedent && consistent(p, &h.vertices[v], ante))
        .collect();
    let old_to_new: std::collections::HashMap<usize, usize> =
        keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let mut edges = Vec::new();
    let mut edge_columns = Vec::new();
    for (e, contains) in h.edges.iter().enumerate() {
        if !contains.contains(&antecedent) {
            continue;
        }
        let mapped: Vec<usize> =
            contains.iter().filter_map(|v| old_to_new.get(v).copied()).collect();
        edges.push(mapped);
        edge_columns.push(h.edge_columns[e]);
    }
    Ok(ContextHypergraph {
        vertices: keep.iter().map(|&v| h.vertices[v].clone()).collect(),
        vertex_rows: keep.iter().map(|&v| h.vertex_rows[v]).collect(),
        edges,
        edge_columns,
    })
}

/// All minimal transversals (minimal hitting sets of the hyperedges), as
/// sorted vertex lists. MMCS-style branch and bound: each chosen vertex must
/// keep a critical edge it alone covers.
pub fn minimal_transversals(h: &ContextHypergraph) -> Vec<Vec<usize>> {
    let n = h.vertices.len();
    let edges: Vec<BTreeSet<usize>> =
        h.edges.iter().map(|e| e.iter().copied().collect()).collect();
    if edges.iter().any(|e| e.is_empty()) {
        return Vec::new();
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    fn critical_ok(chosen: &[usize], edges: &[BTreeSet<usize>]) -> bool {
        // Every chosen vertex needs an edge only it covers.
        chosen.iter().all(|&v| {
            edges
                .iter()
                .any(|e| e.contains(&v) && chosen.iter().filter(|&&u| e.contains(&u)).count() == 1)
        })
    }
    fn rec(
        n: usize,
        edges: &[BTreeSet<usize>],
        chosen: &mut Vec<usize>,
        banned: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let uncovered: Option<&BTreeSet<usize>> =
            edges.iter().find(|e| !e.iter().any(|v| chosen.contains(v)));
        match uncovered {
            None => {
                if critical_ok(chosen, edges) {
                    let mut t = chosen.clone();
                    t.sort_unstable();
                    out.push(t);
                }
            }
            Some(edge) => {
                let candidates: Vec<usize> =
                    edge.iter().copied().filter(|&v| !banned[v]).collect();
                let mut newly_banned = Vec::new();
                for v in candidates {
                    chosen.push(v);
                    if critical_ok(chosen, edges) {
                        rec(n, edges, chosen, banned, out);
                    }
                    chosen.pop();
                    banned[v] = true;
                    newly_banned.push(v);
                }
                for v in newly_banned {
                    banned[v] = false;
                }
            }
        }
    }
    rec(n, &edges, &mut chosen, &mut vec![false; n], &mut out);
    out.sort();
    out.dedup();
    out
}

/// One possibilistic implication: every global valuation extending the
/// antecedent satisfies at least one consequent term.
#[derive(Clone, Debug)]
pub struct HardyImplication {
    /// Row index (into the problem) of the antecedent valuation.
    pub antecedent_row: usize,
    pub antecedent: RowLabel,
    /// Row indices of the consequent terms.
    pub consequent_rows: Vec<usize>,
    pub consequent: Vec<RowLabel>,
    pub minimal: bool,
}

impl HardyImplication {
    /// The union-bound linear form `Σ consequent - antecedent >= 0` over the
    /// marginal rows.
    pub fn to_linear_form(&self, n_marginal_rows: usize) -> LinearForm {
        let mut coeffs = vec![BigInt::zero(); n_marginal_rows];
        coeffs[self.antecedent_row] = BigInt::from(-1);
        for &r in &self.consequent_rows {
            coeffs[r] += 1;
        }
        LinearForm { constant: BigInt::zero(), coeffs }
    }

    /// Exhaustive tautology check over all global valuations.
    pub fn verify(&self, p: &MarginalProblem) -> bool {
        let n_cols = p.n_cols();
        for col in 0..n_cols {
            if p.matrix[self.antecedent_row][col] != 1 {
                continue;
            }
            if !self.consequent_rows.iter().any(|&r| p.matrix[r][col] == 1) {
                return false;
            }
        }
        true
    }
}

/// Derives every minimal Hardy implication for one antecedent row.
pub fn implications_for_antecedent(
    p: &MarginalProblem,
    h: &ContextHypergraph,
    antecedent: usize,
) -> Result<Vec<HardyImplication>, HardyError> {
    let restricted = restrict(p, h, antecedent)?;
    if restricted.edges.iter().any(|e| e.is_empty()) {
        return Err(HardyError::EmptyConsequent);
    }
    let transversals = minimal_transversals(&restricted);
    let mut out = Vec::with_capacity(transversals.len());
    for t in transversals {
        let imp = HardyImplication {
            antecedent_row: h.vertex_rows[antecedent],
            antecedent: h.vertices[antecedent].clone(),
            consequent_rows: t.iter().map(|&v| restricted.vertex_rows[v]).collect(),
            consequent: t.iter().map(|&v| restricted.vertices[v].clone()).collect(),
            minimal: true,
        };
        debug_assert!(imp.verify(p));
        out.push(imp);
    }
    Ok(out)
}

/// Translates implications into causal compatibility inequalities by the
/// union bound, block factorization, and copy-index dropping.
pub fn implications_to_inequalities(
    inf: &InflationStructure,
    p: &MarginalProblem,
    imps: &[HardyImplication],
) -> Result<Vec<(HardyImplication, PolynomialInequality)>, HardyError> {
    let mut out = Vec::with_capacity(imps.len());
    for imp in imps {
        if imp.consequent_rows.is_empty() {
            return Err(HardyError::EmptyConsequent);
        }
        let form = imp.to_linear_form(p.n_marginal_rows);
        let ineq = linear_form_to_causal(inf, p, &form)?;
        out.push((imp.clone(), ineq));
    }
    Ok(out)
}

/// Full antecedent sweep: every (context, valuation) pair in turn, with the
/// resulting inequalities deduplicated by canonical form.
pub fn derive_hardy(
    inf: &InflationStructure,
    p: &MarginalProblem,
) -> Result<Vec<(HardyImplication, PolynomialInequality)>, HardyError> {
    let h = build_hypergraph(p);
    let mut out: Vec<(HardyImplication, PolynomialInequality)> = Vec::new();
    let mut seen: BTreeSet<PolynomialInequality> = BTreeSet::new();
    for antecedent in 0..h.vertices.len() {
        let imps = match implications_for_antecedent(p, &h, antecedent) {
            Ok(i) => i,
            Err(HardyError::EmptyConsequent) => continue,
            Err(e) => return Err(e),
        };
        for (imp, ineq) in implications_to_inequalities(inf, p, &imps)? {
            if seen.insert(ineq.clone()) {
                out.push((imp, ineq));
            }
        }
    }
    Ok(out)
}

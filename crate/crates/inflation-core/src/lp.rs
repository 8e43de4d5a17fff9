//! The marginal satisfiability problem as an exact linear program.
//!
//! `build_problem` assembles the 0/1 marginal description matrix `M` (rows:
//! context valuations, columns: global valuations) and the marginal vector
//! `b`; `solve` decides `∃ v >= 0 : M v = b` by a phase-1 simplex, either in
//! exact rational arithmetic or in floats with exact post-verification.
//! Infeasibility always comes with an exactly verified Farkas certificate
//! (`yᵀM >= 0` componentwise and `yᵀb < 0`), which `certificate_to_inequality`
//! turns into a polynomial causal compatibility inequality for the original
//! structure.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use thiserror::Error;

use crate::family::{Block, ContextSpec, FamilyError, MarginalFamily};
use crate::graph::NodeId;
use crate::ineq::{Atom, Monomial, Poly, PolynomialInequality};
use crate::inflation::{InflationStructure, Recipe};
use crate::ratio::{integerize, q, to_f64, Q};
use crate::table::{valuation_of, JointTable, TableError};

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("problem too large: {0} columns exceeds the cap of {1}")]
    TooLarge(usize, usize),
    #[error("simplex did not terminate within {0} pivots")]
    PivotCap(usize),
    #[error("certificate failed exact verification")]
    BadCertificate,
    #[error("zero certificate is impossible: yᵀb < 0 is required")]
    ZeroCertificate,
    #[error("expressible block on {0} conditions on a non-injectable set; no polynomial rendering")]
    NonInjectableConditioning(String),
}

const COLUMN_CAP: usize = 1 << 22;

/// One marginal row: a context index and a valuation of that context.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RowLabel {
    pub context: usize,
    pub valuation: Vec<u32>,
}

/// The assembled marginal problem.
pub struct MarginalProblem {
    pub joint_vars: Vec<(NodeId, u32)>,
    pub context_specs: Vec<ContextSpec>,
    /// Variable positions (into `joint_vars`) per context, in context order.
    pub context_positions: Vec<Vec<usize>>,
    pub rows: Vec<RowLabel>,
    /// Marginal rows (0/1) followed by optional equality rows (-1/0/1).
    pub matrix: Vec<Vec<i8>>,
    pub b: Vec<Q>,
    pub n_marginal_rows: usize,
}

impl MarginalProblem {
    pub fn n_cols(&self) -> usize {
        self.joint_vars.iter().map(|(_, c)| *c as usize).product()
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.len()
    }

    /// The polytope vertex for one global valuation: the marginal-row block of
    /// the corresponding column of `M`.
    pub fn column(&self, col: usize) -> Vec<Q> {
        (0..self.n_marginal_rows).map(|r| q(self.matrix[r][col] as i64)).collect()
    }
}

/// Builds the marginal description matrix for a family of context marginals.
/// Rows are grouped by context in family order, valuations in row-major order;
/// columns are global valuations of the observed inflated nodes in canonical
/// order. With `use_copy_isomorphism_equalities`, marginal-equality rows
/// induced by inflationary isomorphisms between context subsets are appended
/// (with right-hand side 0).
pub fn build_problem(
    inf: &InflationStructure,
    family: &MarginalFamily,
    use_copy_isomorphism_equalities: bool,
) -> Result<MarginalProblem, LpError> {
    let joint_vars: Vec<(NodeId, u32)> = inf
        .inflated()
        .observed_nodes()
        .into_iter()
        .map(|id| {
            let card = inf.inflated().cardinality(&id).expect("observed node").expect("card");
            (id, card)
        })
        .collect();
    let n_cols: usize = joint_vars.iter().map(|(_, c)| *c as usize).product();
    if n_cols > COLUMN_CAP {
        return Err(LpError::TooLarge(n_cols, COLUMN_CAP));
    }
    let var_pos: BTreeMap<NodeId, usize> =
        joint_vars.iter().enumerate().map(|(i, (v, _))| (v.clone(), i)).collect();
    let mut context_positions = Vec::new();
    let mut rows = Vec::new();
    let mut matrix: Vec<Vec<i8>> = Vec::new();
    let mut b = Vec::new();
    let all_columns: Vec<Vec<u32>> =
        (0..n_cols).map(|ix| valuation_of(&joint_vars, ix)).collect();
    for (ci, (spec, table)) in family.contexts.iter().enumerate() {
        let members = spec.sorted_members();
        let positions: Vec<usize> = members.iter().map(|v| var_pos[v]).collect();
        let ctx_vars: Vec<(NodeId, u32)> =
            members.iter().map(|v| (v.clone(), joint_vars[var_pos[v]].1)).collect();
        let ctx_size: usize = ctx_vars.iter().map(|(_, c)| *c as usize).product();
        let table = table.reorder(&members)?;
        for o in 0..ctx_size {
            let val = valuation_of(&ctx_vars, o);
            let mut row = vec![0i8; n_cols];
            for (col, global) in all_columns.iter().enumerate() {
                if positions.iter().zip(&val).all(|(&p, &x)| global[p] == x) {
                    row[col] = 1;
                }
            }
            matrix.push(row);
            rows.push(RowLabel { context: ci, valuation: val.clone() });
            b.push(table.prob(&val).clone());
        }
        context_positions.push(positions);
    }
    let n_marginal_rows = matrix.len();
    if use_copy_isomorphism_equalities {
        let context_sets: Vec<BTreeSet<NodeId>> = family.context_sets();
        let mut seen: HashSet<Vec<i8>> = HashSet::new();
        for ciso in inf.context_isomorphisms(&context_sets) {
            let src: Vec<NodeId> = ciso.iso.source.iter().cloned().collect();
            let src_pos: Vec<usize> = src.iter().map(|v| var_pos[v]).collect();
            let tgt_pos: Vec<usize> =
                src.iter().map(|v| var_pos[&ciso.iso.node_map[v]]).collect();
            let src_vars: Vec<(NodeId, u32)> =
                src.iter().map(|v| (v.clone(), joint_vars[var_pos[v]].1)).collect();
            let n_vals: usize = src_vars.iter().map(|(_, c)| *c as usize).product();
            for o in 0..n_vals {
                let val = valuation_of(&src_vars, o);
                let mut row = vec![0i8; n_cols];
                for (col, global) in all_columns.iter().enumerate() {
                    let on_src = src_pos.iter().zip(&val).all(|(&p, &x)| global[p] == x);
                    let on_tgt = tgt_pos.iter().zip(&val).all(|(&p, &x)| global[p] == x);
                    row[col] = (on_src as i8) - (on_tgt as i8);
                }
                if row.iter().all(|&x| x == 0) || !seen.insert(row.clone()) {
                    continue;
                }
                matrix.push(row);
                rows.push(RowLabel { context: usize::MAX, valuation: val });
                b.push(Q::zero());
            }
        }
    }
    Ok(MarginalProblem {
        joint_vars,
        context_specs: family.contexts.iter().map(|(s, _)| s.clone()).collect(),
        context_positions,
        rows,
        matrix,
        b,
        n_marginal_rows,
    })
}

/// Marginal-equality forms over the b-coordinates (constant slot first),
/// induced by inflationary isomorphisms between context subsets. These hold
/// for every inflation model and are the quotient relations used when
/// reducing facet systems.
pub fn iso_equalities_bspace(inf: &InflationStructure, p: &MarginalProblem) -> Vec<Vec<BigInt>> {
    let context_sets: Vec<BTreeSet<NodeId>> =
        p.context_specs.iter().map(|s| s.members()).collect();
    let width = 1 + p.n_marginal_rows;
    let mut out: Vec<Vec<BigInt>> = Vec::new();
    let mut seen: HashSet<Vec<BigInt>> = HashSet::new();
    let row_range = |ctx: usize| -> (usize, usize) {
        let start = p.rows.iter().position(|r| r.context == ctx).unwrap();
        let len = p.rows[start..].iter().take_while(|r| r.context == ctx).count();
        (start, len)
    };
    for ciso in inf.context_isomorphisms(&context_sets) {
        let (ci, cj) = (ciso.source_context, ciso.target_context);
        let src: Vec<NodeId> = ciso.iso.source.iter().cloned().collect();
        let members_i = p.context_specs[ci].sorted_members();
        let members_j = p.context_specs[cj].sorted_members();
        let pos_i: Vec<usize> =
            src.iter().map(|v| members_i.iter().position(|m| m == v).unwrap()).collect();
        let pos_j: Vec<usize> = src
            .iter()
            .map(|v| members_j.iter().position(|m| m == &ciso.iso.node_map[v]).unwrap())
            .collect();
        let src_vars: Vec<(NodeId, u32)> = src
            .iter()
            .map(|v| {
                let c = p.joint_vars.iter().find(|(u, _)| u == v).unwrap().1;
                (v.clone(), c)
            })
            .collect();
        let n_vals: usize = src_vars.iter().map(|(_, c)| *c as usize).product();
        let (start_i, len_i) = row_range(ci);
        let (start_j, len_j) = row_range(cj);
        for o in 0..n_vals {
            let val = valuation_of(&src_vars, o);
            let mut form = vec![BigInt::zero(); width];
            for k in 0..len_i {
                let r = &p.rows[start_i + k];
                if pos_i.iter().zip(&val).all(|(&pp, &x)| r.valuation[pp] == x) {
                    form[1 + start_i + k] += 1;
                }
            }
            for k in 0..len_j {
                let r = &p.rows[start_j + k];
                if pos_j.iter().zip(&val).all(|(&pp, &x)| r.valuation[pp] == x) {
                    form[1 + start_j + k] -= 1;
                }
            }
            if form.iter().all(|x| x.is_zero()) || !seen.insert(form.clone()) {
                continue;
            }
            out.push(form);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArithmeticMode {
    /// Exact rational simplex throughout.
    Exact,
    /// Float simplex; infeasibility certificates are promoted to exact
    /// rationals and verified (with exact fallback), feasible witnesses are
    /// reported with their residual.
    Float,
}

#[derive(Clone, Debug)]
pub enum FeasibleWitness {
    /// Exact: `M v = b` holds exactly and `v >= 0`.
    Exact(JointTable),
    /// Float-mode witness with max-norm residual.
    Approx { probs: Vec<f64>, residual: f64 },
}

#[derive(Clone, Debug)]
pub struct FarkasCertificate {
    /// Integer certificate over all rows of the problem, gcd 1, oriented so
    /// that `yᵀM >= 0` componentwise and `yᵀb < 0`.
    pub y: Vec<BigInt>,
}

#[derive(Clone, Debug)]
pub enum FeasibilityVerdict {
    Feasible(FeasibleWitness),
    Infeasible(FarkasCertificate),
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityVerdict::Feasible(_))
    }
}

impl fmt::Display for FeasibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeasibilityVerdict::Feasible(_) => write!(f, "feasible"),
            FeasibilityVerdict::Infeasible(_) => write!(f, "infeasible"),
        }
    }
}

/// Decides feasibility of `∃ v >= 0 : M v = b`.
///
/// Exact mode always returns exact verdicts: small problems run a dense
/// rational phase-1 simplex over all columns; large ones run a float presolve
/// followed by exact column generation. Float mode returns a fast approximate
/// witness for feasible problems (exact when the float basis confirms) and an
/// exactly verified certificate for infeasible ones.
pub fn solve(p: &MarginalProblem, mode: ArithmeticMode) -> Result<FeasibilityVerdict, LpError> {
    match mode {
        ArithmeticMode::Exact => {
            if p.n_cols() <= 512 {
                solve_exact(p)
            } else {
                solve_float_then_exact(p, false)
            }
        }
        ArithmeticMode::Float => solve_float_then_exact(p, true),
    }
}

/// Float presolve; exact confirmation or column generation as needed.
fn solve_float_then_exact(
    p: &MarginalProblem,
    allow_approx: bool,
) -> Result<FeasibilityVerdict, LpError> {
    match solve_float(p)? {
        FeasibilityVerdict::Feasible(FeasibleWitness::Approx { probs, residual }) => {
            if allow_approx && residual <= 1e-7 {
                Ok(FeasibilityVerdict::Feasible(FeasibleWitness::Approx { probs, residual }))
            } else {
                // The float basis did not confirm exactly; decide rigorously.
                let seed: Vec<usize> =
                    (0..probs.len()).filter(|&j| probs[j] > 1e-12).collect();
                column_generation(p, seed)
            }
        }
        other => Ok(other),
    }
}

fn verify_certificate(p: &MarginalProblem, y: &[BigInt]) -> bool {
    if y.iter().all(|x| x.is_zero()) {
        return false;
    }
    let n = p.n_cols();
    for col in 0..n {
        let mut acc = BigInt::zero();
        for (r, yr) in y.iter().enumerate() {
            let m = p.matrix[r][col];
            if m != 0 {
                acc += yr * m;
            }
        }
        if acc.is_negative() {
            return false;
        }
    }
    let mut yb = Q::zero();
    for (r, yr) in y.iter().enumerate() {
        yb += Q::from_integer(yr.clone()) * &p.b[r];
    }
    yb.is_negative()
}

fn normalize_certificate(y: Vec<Q>) -> Vec<BigInt> {
    integerize(&y)
}

/// Incremental exact phase-1 simplex over a growing column set. The tableau
/// keeps the artificial block first, which always holds the current basis
/// inverse, so appending a column only costs a sparse multiply.
struct ExactPhase1 {
    m: usize,
    /// Sparse flipped columns (row, value) of the structural variables added
    /// so far, in append order; `ids[k]` is the original column index.
    ids: Vec<usize>,
    /// Tableau rows over [artificials | structurals]; right-hand side apart.
    tab: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    cost: Vec<Q>,
    cost_rhs: Q,
    basis: Vec<usize>,
}

impl ExactPhase1 {
    fn new(b: &[Q]) -> ExactPhase1 {
        let m = b.len();
        let tab: Vec<Vec<Q>> = (0..m)
            .map(|r| {
                let mut row = vec![Q::zero(); m];
                row[r] = Q::one();
                row
            })
            .collect();
        let rhs: Vec<Q> = b.to_vec();
        let mut cost_rhs = Q::zero();
        for x in &rhs {
            cost_rhs -= x;
        }
        ExactPhase1 {
            m,
            ids: Vec::new(),
            tab,
            rhs,
            cost: vec![Q::zero(); m],
            cost_rhs,
            basis: (0..m).collect(),
        }
    }

    /// Current dual prices `y_r = 1 - cost[artificial r]`.
    fn dual(&self) -> Vec<Q> {
        (0..self.m).map(|r| Q::one() - &self.cost[r]).collect()
    }

    fn objective(&self) -> Q {
        -self.cost_rhs.clone()
    }

    /// Appends a structural column (sparse, already row-flipped).
    fn add_column(&mut self, id: usize, col: &[(usize, Q)]) {
        let y = self.dual();
        let mut rc = Q::zero();
        for (r, v) in col {
            rc -= &y[*r] * v;
        }
        for r in 0..self.m {
            let mut entry = Q::zero();
            for (rr, v) in col {
                if !self.tab[r][*rr].is_zero() {
                    entry += &self.tab[r][*rr] * v;
                }
            }
            self.tab[r].push(entry);
        }
        self.cost.push(rc);
        self.ids.push(id);
    }

    /// Runs the simplex to optimality. Dantzig rule with a permanent switch to
    /// Bland after stalling; returns Err on the pivot cap.
    fn optimize(&mut self, cap: usize) -> Result<(), LpError> {
        let m = self.m;
        let mut stalls = 0usize;
        let mut bland = false;
        for _ in 0..cap {
            let width = self.cost.len();
            let entering = if bland {
                (0..width).find(|&c| self.cost[c].is_negative())
            } else {
                let mut best: Option<(usize, &Q)> = None;
                for c in 0..width {
                    if self.cost[c].is_negative() {
                        match best {
                            Some((_, bc)) if *bc <= self.cost[c] => {}
                            _ => best = Some((c, &self.cost[c])),
                        }
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(e) = entering else { return Ok(()) };
            let mut leave: Option<(usize, Q)> = None;
            for r in 0..m {
                if self.tab[r][e].is_positive() {
                    let ratio = &self.rhs[r] / &self.tab[r][e];
                    match &leave {
                        Some((lr, lratio)) => {
                            if ratio < *lratio
                                || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                        None => leave = Some((r, ratio)),
                    }
                }
            }
            // Phase-1 is bounded below, so a missing leaving row means a
            // numerically impossible state.
            let Some((lr, _)) = leave else { return Err(LpError::PivotCap(cap)) };
            let piv = self.tab[lr][e].clone();
            for x in self.tab[lr].iter_mut() {
                if !x.is_zero() {
                    *x /= &piv;
                }
            }
            self.rhs[lr] /= &piv;
            let prow = self.tab[lr].clone();
            let pnz: Vec<usize> = (0..prow.len()).filter(|&c| !prow[c].is_zero()).collect();
            let prhs = self.rhs[lr].clone();
            for r in 0..m {
                if r != lr && !self.tab[r][e].is_zero() {
                    let f = self.tab[r][e].clone();
                    let row = &mut self.tab[r];
                    for &c in &pnz {
                        row[c] -= &f * &prow[c];
                    }
                    self.rhs[r] -= &f * &prhs;
                }
            }
            if !self.cost[e].is_zero() {
                let f = self.cost[e].clone();
                for &c in &pnz {
                    self.cost[c] -= &f * &prow[c];
                }
                let delta = &f * &prhs;
                if delta.is_zero() {
                    stalls += 1;
                    if stalls > 40 {
                        bland = true;
                    }
                } else {
                    stalls = 0;
                }
                self.cost_rhs -= delta;
            }
            self.basis[lr] = e;
        }
        Err(LpError::PivotCap(cap))
    }
}

/// Sparse flipped column of the problem matrix.
fn sparse_column(p: &MarginalProblem, flip: &[bool], j: usize) -> Vec<(usize, Q)> {
    (0..p.n_rows())
        .filter(|&r| p.matrix[r][j] != 0)
        .map(|r| {
            let v = p.matrix[r][j] as i64;
            (r, q(if flip[r] { -v } else { v }))
        })
        .collect()
}

/// Dense exact phase-1 over all columns (small problems).
fn solve_exact(p: &MarginalProblem) -> Result<FeasibilityVerdict, LpError> {
    column_generation(p, (0..p.n_cols()).collect())
}

/// Exact phase-1 with delayed column generation: solve the master over a
/// working column set, price the remaining columns against the exact dual of
/// an infeasible master, and repeat until the dual verifies globally or the
/// master turns feasible. Every verdict is exact.
fn column_generation(p: &MarginalProblem, seed: Vec<usize>) -> Result<FeasibilityVerdict, LpError> {
    let m = p.n_rows();
    let n = p.n_cols();
    let flip: Vec<bool> = p.b.iter().map(|x| x.is_negative()).collect();
    let b: Vec<Q> = p.b.iter().zip(&flip).map(|(x, &f)| if f { -x } else { x.clone() }).collect();
    let mut active: Vec<bool> = vec![false; n];
    let mut master = ExactPhase1::new(&b);
    let mut add = |master: &mut ExactPhase1, active: &mut Vec<bool>, j: usize| {
        if !active[j] {
            active[j] = true;
            master.add_column(j, &sparse_column(p, &flip, j));
        }
    };
    for j in seed {
        add(&mut master, &mut active, j);
    }
    // Cheap cover so every row can leave the artificial basis early.
    for r in 0..m {
        if let Some(j) = (0..n).find(|&j| p.matrix[r][j] > 0) {
            add(&mut master, &mut active, j);
        }
    }
    let cap = 20_000 + 60 * (m + n);
    let rounds = n + 1;
    let trace = std::env::var("INFLATION_LP_TRACE").is_ok();
    for round in 0..rounds {
        master.optimize(cap)?;
        if trace {
            eprintln!(
                "cg: round {round}, {} active columns, objective {}",
                master.ids.len(),
                crate::ratio::to_f64(&master.objective())
            );
        }
        if master.objective().is_zero() {
            let mut v = vec![Q::zero(); n];
            for (r, &bvar) in master.basis.iter().enumerate() {
                if bvar >= m {
                    v[master.ids[bvar - m]] = master.rhs[r].clone();
                }
            }
            let witness = JointTable::new(p.joint_vars.clone(), v)?;
            return Ok(FeasibilityVerdict::Feasible(FeasibleWitness::Exact(witness)));
        }
        // Master infeasible: certificate in spec orientation, then price.
        let y = master.dual();
        let mut yhat: Vec<Q> = y.iter().map(|x| -x.clone()).collect();
        for (r, &f) in flip.iter().enumerate() {
            if f {
                yhat[r] = -yhat[r].clone();
            }
        }
        let mut worst: Vec<(Q, usize)> = Vec::new();
        for j in 0..n {
            if active[j] {
                continue;
            }
            let mut acc = Q::zero();
            for r in 0..m {
                let a = p.matrix[r][j];
                if a != 0 {
                    acc += &yhat[r] * q(a as i64);
                }
            }
            if acc.is_negative() {
                worst.push((acc, j));
            }
        }
        if worst.is_empty() {
            let ints = normalize_certificate(yhat);
            if !verify_certificate(p, &ints) {
                return Err(LpError::BadCertificate);
            }
            return Ok(FeasibilityVerdict::Infeasible(FarkasCertificate { y: ints }));
        }
        worst.sort();
        for (_, j) in worst.into_iter().take(256) {
            add(&mut master, &mut active, j);
        }
    }
    Err(LpError::PivotCap(cap))
}

/// Float phase-1 revised simplex with sparse column pricing. The columns of
/// a marginal description matrix have one entry per context, so pricing and
/// pivot-column computation run on sparse columns while the basis inverse is
/// kept densely. Infeasibility gets an exact certificate by snapping the
/// float dual to small rationals and verifying; failing that, the exact
/// solver runs. Feasible outcomes report the float witness and residual.
fn solve_float(p: &MarginalProblem) -> Result<FeasibilityVerdict, LpError> {
    const EPS: f64 = 1e-9;
    let m = p.n_rows();
    let n = p.n_cols();
    let flip: Vec<f64> = p.b.iter().map(|x| if x.is_negative() { -1.0 } else { 1.0 }).collect();
    // Sparse structural columns (row, value) with the row flips applied.
    let cols: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|c| {
            (0..m)
                .filter(|&r| p.matrix[r][c] != 0)
                .map(|r| (r as u32, p.matrix[r][c] as f64 * flip[r]))
                .collect()
        })
        .collect();
    let b: Vec<f64> = p.b.iter().zip(&flip).map(|(x, f)| to_f64(x) * f).collect();
    // Basis: artificial variable r is column id n + r.
    let mut binv: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let mut row = vec![0.0; m];
            row[r] = 1.0;
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut xb: Vec<f64> = b.clone();
    // Phase-1 costs: 1 for artificials, 0 for structurals; y = c_B B^{-1}.
    let mut y: Vec<f64> = vec![1.0; m];
    let price = |y: &[f64], j: usize| -> f64 {
        let mut acc = 0.0;
        for &(r, v) in &cols[j] {
            acc += y[r as usize] * v;
        }
        -acc
    };
    let cap = 4000 + 80 * (m + n);
    let mut stalls = 0usize;
    let mut bland = false;
    let mut finished = false;
    let mut best_mass = f64::INFINITY;
    let trace = std::env::var("INFLATION_LP_TRACE").is_ok();
    for pivot_no in 0..cap {
        if pivot_no % 256 == 0 {
            let mass: f64 = (0..m).filter(|&r| basis[r] >= n).map(|r| xb[r].abs()).sum();
            best_mass = best_mass.min(mass);
            if !mass.is_finite() || mass > 1e3 * best_mass.max(1.0) {
                // Numerical collapse; give up on the float run.
                break;
            }
        }
        if trace && pivot_no % 2000 == 0 {
            let obj: f64 = (0..m).filter(|&r| basis[r] >= n).map(|r| xb[r]).sum();
            eprintln!("lp: pivot {pivot_no}, artificial mass {obj:.6e}, bland {bland}");
        }
        // Entering column: structural reduced cost is -y.A_j, artificial r is
        // 1 - y_r (artificials may re-enter, so optimality is genuine).
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..n {
            let rc = price(&y, j);
            if rc < -EPS {
                if bland {
                    entering = Some((j, rc));
                    break;
                }
                match entering {
                    Some((_, best)) if best <= rc => {}
                    _ => entering = Some((j, rc)),
                }
            }
        }
        if entering.is_none() || !bland {
            for r in 0..m {
                let rc = 1.0 - y[r];
                if rc < -EPS {
                    if bland {
                        if entering.is_none() {
                            entering = Some((n + r, rc));
                        }
                        break;
                    }
                    match entering {
                        Some((_, best)) if best <= rc => {}
                        _ => entering = Some((n + r, rc)),
                    }
                }
            }
        }
        let Some((e, _)) = entering else {
            finished = true;
            break;
        };
        // Pivot column w = B^{-1} A_e.
        let mut w = vec![0.0; m];
        if e < n {
            for &(r, v) in &cols[e] {
                let col = r as usize;
                for i in 0..m {
                    w[i] += binv[i][col] * v;
                }
            }
        } else {
            let col = e - n;
            for i in 0..m {
                w[i] = binv[i][col];
            }
        }
        // Ratio test.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if w[r] > EPS {
                let ratio = xb[r] / w[r];
                match leave {
                    Some((lr, lratio)) => {
                        if ratio < lratio - EPS
                            || ((ratio - lratio).abs() <= EPS && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                    None => leave = Some((r, ratio)),
                }
            }
        }
        let Some((lr, ratio)) = leave else { break };
        if ratio <= EPS {
            stalls += 1;
            if stalls > 60 {
                bland = true;
            }
        } else {
            stalls = 0;
        }
        // Update B^{-1}, xb, y, basis.
        let piv = w[lr];
        for c in 0..m {
            binv[lr][c] /= piv;
        }
        xb[lr] /= piv;
        let lrow = binv[lr].clone();
        let lx = xb[lr];
        for r in 0..m {
            if r != lr && w[r].abs() > 1e-300 {
                let f = w[r];
                for c in 0..m {
                    binv[r][c] -= f * lrow[c];
                }
                xb[r] -= f * lx;
            }
        }
        // Dual update: y = c_B B^{-1}; entering cost minus old reduced cost.
        let ce = if e < n { 0.0 } else { 1.0 };
        let rc_e = if e < n { price(&y, e) } else { 1.0 - y[e - n] };
        let _ = ce;
        for c in 0..m {
            y[c] += rc_e * lrow[c];
        }
        basis[lr] = e;
        // Periodic refactorization: rebuild the basis inverse from the basis
        // columns to stop floating-point drift, then refresh xb and y.
        if pivot_no % 256 == 255 {
            if let Some(fresh) = invert_basis(&cols, &basis, n, m) {
                binv = fresh;
            }
            for r in 0..m {
                xb[r] = (0..m).map(|c| binv[r][c] * b[c]).sum();
            }
            for c in 0..m {
                y[c] = (0..m)
                    .filter(|&r| basis[r] >= n)
                    .map(|r| binv[r][c])
                    .sum();
            }
        }
    }
    if !finished {
        // Did not converge; fall back to the exact path.
        return solve_exact(p);
    }
    let objective: f64 = (0..m).filter(|&r| basis[r] >= n).map(|r| xb[r].max(0.0)).sum();
    if objective <= 1e-7 {
        // Confirm the claimed basis exactly: solve the basis system in
        // rational arithmetic and check nonnegativity and zero artificials.
        if let Some(witness) = exact_basic_solution(p, &basis, &flip) {
            return Ok(FeasibilityVerdict::Feasible(FeasibleWitness::Exact(witness)));
        }
        let mut v = vec![0.0; n];
        for (r, &bvar) in basis.iter().enumerate() {
            if bvar < n {
                v[bvar] = xb[r];
            }
        }
        let mut residual: f64 = 0.0;
        for r in 0..m {
            let mut acc = 0.0;
            for c in 0..n {
                if p.matrix[r][c] != 0 {
                    acc += p.matrix[r][c] as f64 * v[c];
                }
            }
            residual = residual.max((acc - to_f64(&p.b[r])).abs());
        }
        return Ok(FeasibilityVerdict::Feasible(FeasibleWitness::Approx { probs: v, residual }));
    }
    // Infeasible according to the float run: promote the dual. The certificate
    // convention wants yM >= 0 and yb < 0; phase-1 duals satisfy yA <= 0 with
    // yb > 0 before the row flips are undone.
    let yv: Vec<f64> = (0..m).map(|r| -y[r] * flip[r]).collect();
    if let Some(ints) = promote_certificate(p, &yv) {
        return Ok(FeasibilityVerdict::Infeasible(FarkasCertificate { y: ints }));
    }
    solve_exact(p)
}

/// Exact rational solve of the basis system for a float-found basis: returns
/// the witness table when the basic solution is nonnegative, artificial
/// variables are all zero, and the system is consistent.
fn exact_basic_solution(p: &MarginalProblem, basis: &[usize], flip: &[f64]) -> Option<JointTable> {
    let m = p.n_rows();
    let n = p.n_cols();
    // Augmented system [B | b] over the flipped rows.
    let mut a: Vec<Vec<Q>> = (0..m)
        .map(|r| {
            let sign = q(if flip[r] < 0.0 { -1 } else { 1 });
            let mut row: Vec<Q> = basis
                .iter()
                .map(|&j| {
                    if j < n {
                        q(p.matrix[r][j] as i64) * &sign
                    } else if j - n == r {
                        sign.clone()
                    } else {
                        Q::zero()
                    }
                })
                .collect();
            row.push(&p.b[r] * &sign);
            row
        })
        .collect();
    // Gaussian elimination with partial (first nonzero) pivoting.
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row_at = 0usize;
    for col in 0..m {
        let pr = (row_at..m).find(|&r| !a[r][col].is_zero());
        let Some(pr) = pr else { continue };
        a.swap(row_at, pr);
        let piv = a[row_at][col].clone();
        for x in a[row_at].iter_mut() {
            *x /= &piv;
        }
        let prow = a[row_at].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != row_at && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= &f * y;
                }
            }
        }
        pivot_cols.push(col);
        row_at += 1;
        if row_at == m {
            break;
        }
    }
    // Rows with no pivot must have zero right-hand side (consistency).
    for r in row_at..m {
        if !a[r][m].is_zero() {
            return None;
        }
    }
    let mut values = vec![Q::zero(); m];
    for (k, &col) in pivot_cols.iter().enumerate() {
        values[col] = a[k][m].clone();
    }
    let mut v = vec![Q::zero(); n];
    for (k, &j) in basis.iter().enumerate() {
        let val = &values[k];
        if val.is_negative() {
            return None;
        }
        if j < n {
            v[j] += val;
        } else if !val.is_zero() {
            // Nonzero artificial: not a solution of Mv = b.
            return None;
        }
    }
    JointTable::new(p.joint_vars.clone(), v).ok()
}

/// Dense inversion of the current basis matrix by Gauss-Jordan with partial
/// pivoting; `None` if the basis is numerically singular.
fn invert_basis(
    cols: &[Vec<(u32, f64)>],
    basis: &[usize],
    n: usize,
    m: usize,
) -> Option<Vec<Vec<f64>>> {
    let mut a: Vec<Vec<f64>> = vec![vec![0.0; 2 * m]; m];
    for (k, &bvar) in basis.iter().enumerate() {
        if bvar < n {
            for &(r, v) in &cols[bvar] {
                a[r as usize][k] = v;
            }
        } else {
            a[bvar - n][k] = 1.0;
        }
    }
    for r in 0..m {
        a[r][m + r] = 1.0;
    }
    for col in 0..m {
        let pivot_row = (col..m).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        let piv = a[col][col];
        for c in 0..2 * m {
            a[col][c] /= piv;
        }
        let prow = a[col].clone();
        for r in 0..m {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..2 * m {
                    a[r][c] -= f * prow[c];
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[m..].to_vec()).collect())
}

/// Snaps a float Farkas dual to integers and verifies it exactly. Tries
/// growing denominators, then per-entry continued fractions.
fn promote_certificate(p: &MarginalProblem, y: &[f64]) -> Option<Vec<BigInt>> {
    let scale = y.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let normalized: Vec<f64> = y.iter().map(|&x| x / scale).collect();
    for denom in [1u32, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 256, 512, 1024, 4096] {
        let ints: Vec<BigInt> = normalized
            .iter()
            .map(|&x| BigInt::from((x * denom as f64).round() as i64))
            .collect();
        let mut norm = ints.clone();
        crate::ratio::normalize_ints(&mut norm);
        if verify_certificate(p, &norm) {
            return Some(norm);
        }
    }
    let rats: Vec<Q> = normalized.iter().map(|&x| crate::ratio::rationalize(x, 1 << 20)).collect();
    let ints = integerize(&rats);
    if verify_certificate(p, &ints) {
        return Some(ints);
    }
    None
}

// ---------------------------------------------------------------------------
// Certificates and linear forms as causal inequalities
// ---------------------------------------------------------------------------

/// A linear inequality (or the left side of an equality) over the marginal
/// rows: `constant + Σ coeffs[r] * P_ctx(valuation_r) >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearForm {
    pub constant: BigInt,
    pub coeffs: Vec<BigInt>,
}

impl LinearForm {
    pub fn width(&self) -> usize {
        1 + self.coeffs.len()
    }

    pub fn to_vec(&self) -> Vec<BigInt> {
        let mut v = Vec::with_capacity(self.width());
        v.push(self.constant.clone());
        v.extend(self.coeffs.iter().cloned());
        v
    }

    pub fn from_vec(v: &[BigInt]) -> LinearForm {
        LinearForm { constant: v[0].clone(), coeffs: v[1..].to_vec() }
    }

    /// Evaluates against the b-vector of a problem (exact).
    pub fn evaluate_b(&self, b: &[Q]) -> Q {
        let mut acc = Q::from_integer(self.constant.clone());
        for (c, x) in self.coeffs.iter().zip(b) {
            if !c.is_zero() {
                acc += Q::from_integer(c.clone()) * x;
            }
        }
        acc
    }
}

/// Symbolic marginal of an expressible recipe: each valuation of the block's
/// members maps to a polynomial in original-structure atoms. Conditioning
/// sets must be injectable so denominators stay single atoms.
fn recipe_symbolic(
    inf: &InflationStructure,
    recipe: &Recipe,
) -> Result<BTreeMap<Vec<u32>, Poly>, LpError> {
    let members: Vec<NodeId> = recipe.members().into_iter().collect();
    let vars: Vec<(NodeId, u32)> = members
        .iter()
        .map(|v| {
            let c = inf.inflated().cardinality(v).expect("observed").expect("card");
            (v.clone(), c)
        })
        .collect();
    let size: usize = vars.iter().map(|(_, c)| *c as usize).product();
    match recipe {
        Recipe::Injectable(set) => {
            let image: Vec<NodeId> = set.image.iter().cloned().collect();
            // Sorted members project to sorted images within one injectable
            // block (names are distinct), so valuations carry over in order.
            let mut out = BTreeMap::new();
            for ix in 0..size {
                let val = valuation_of(&vars, ix);
                let atom = Atom::prob(image.iter().cloned().zip(val.iter().copied()).collect());
                out.insert(val, Poly::atom(atom));
            }
            Ok(out)
        }
        Recipe::CondProduct { x: _, y: _, z, left, right } => {
            if !inf.is_injectable(z).map_err(FamilyError::from)? {
                let names: Vec<String> = z.iter().map(|n| n.label()).collect();
                return Err(LpError::NonInjectableConditioning(names.join(" ")));
            }
            let left_sym = recipe_symbolic(inf, left)?;
            let right_sym = recipe_symbolic(inf, right)?;
            let left_members: Vec<NodeId> = left.members().into_iter().collect();
            let right_members: Vec<NodeId> = right.members().into_iter().collect();
            let z_sorted: Vec<NodeId> = z.iter().cloned().collect();
            let z_image: Vec<(NodeId, u32)> = z_sorted
                .iter()
                .map(|v| {
                    let img = inf.project(v).expect("observed");
                    let c = inf.inflated().cardinality(v).unwrap().unwrap();
                    (img, c)
                })
                .collect();
            let mut out = BTreeMap::new();
            for ix in 0..size {
                let val = valuation_of(&vars, ix);
                let pick = |sub: &[NodeId]| -> Vec<u32> {
                    sub.iter()
                        .map(|v| val[members.iter().position(|m| m == v).unwrap()])
                        .collect()
                };
                let lv = pick(&left_members);
                let rv = pick(&right_members);
                let zv = pick(&z_sorted);
                let mut poly = left_sym[&lv].mul(&right_sym[&rv]);
                if !z_sorted.is_empty() {
                    let z_atom = Atom::prob(
                        z_image.iter().map(|(v, _)| v.clone()).zip(zv.iter().copied()).collect(),
                    );
                    let inv = Monomial { factors: vec![(z_atom, -1)] };
                    let mut divided = Poly::zero();
                    for (m, c) in &poly.terms {
                        divided.add_term(m.mul(&inv), c.clone());
                    }
                    poly = divided;
                }
                out.insert(val, poly);
            }
            Ok(out)
        }
        Recipe::Marginalize { keep, inner } => {
            let inner_sym = recipe_symbolic(inf, inner)?;
            let inner_members: Vec<NodeId> = inner.members().into_iter().collect();
            let keep_pos: Vec<usize> = members
                .iter()
                .map(|v| inner_members.iter().position(|m| m == v).unwrap())
                .collect();
            debug_assert_eq!(keep.len(), members.len());
            let mut out: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
            for (val, poly) in &inner_sym {
                let sub: Vec<u32> = keep_pos.iter().map(|&k| val[k]).collect();
                out.entry(sub).or_insert_with(Poly::zero).add(poly);
            }
            Ok(out)
        }
    }
}

/// The probability of one context valuation as a polynomial in
/// original-structure marginal atoms: the product over blocks, injectable
/// blocks contributing their image atom and expressible blocks their recipe
/// expansion (Corollary-style block factorization plus copy-index dropping).
fn context_atom_poly(
    inf: &InflationStructure,
    spec: &ContextSpec,
    members: &[NodeId],
    valuation: &[u32],
) -> Result<Poly, LpError> {
    let mut poly = Poly::constant(Q::one());
    for block in &spec.blocks {
        let block_members: Vec<NodeId> = block.members().into_iter().collect();
        let val: Vec<u32> = block_members
            .iter()
            .map(|v| valuation[members.iter().position(|m| m == v).unwrap()])
            .collect();
        let factor = match block {
            Block::Injectable(set) => {
                let image: Vec<NodeId> = set.image.iter().cloned().collect();
                Poly::atom(Atom::prob(image.into_iter().zip(val.iter().copied()).collect()))
            }
            Block::Expressible(set) => {
                let sym = recipe_symbolic(inf, &set.recipe)?;
                sym[&val].clone()
            }
        };
        poly = poly.mul(&factor);
    }
    Ok(poly)
}

/// Translates a linear form over context probabilities into a polynomial
/// causal compatibility inequality for the original structure.
pub fn linear_form_to_causal(
    inf: &InflationStructure,
    p: &MarginalProblem,
    form: &LinearForm,
) -> Result<PolynomialInequality, LpError> {
    let mut out = Poly::constant(Q::from_integer(form.constant.clone()));
    for (r, coeff) in form.coeffs.iter().enumerate() {
        if coeff.is_zero() {
            continue;
        }
        let label = &p.rows[r];
        debug_assert!(label.context != usize::MAX, "equality rows carry no marginal");
        let spec = &p.context_specs[label.context];
        let members = spec.sorted_members();
        let mut poly = context_atom_poly(inf, spec, &members, &label.valuation)?;
        poly.scale(&Q::from_integer(coeff.clone()));
        out.add(&poly);
    }
    Ok(PolynomialInequality::from_poly(&out))
}

/// Turns a verified Farkas certificate into the causal compatibility
/// inequality `yᵀb >= 0`, rewritten over original-structure marginals.
///
/// Components on appended equality rows are dropped: an inflation-model joint
/// satisfies those rows with value 0, so `Σ_marginal y_r P_r >= 0` remains
/// valid for every compatible family, and the input family still violates it
/// because the dropped rows had `b = 0`.
pub fn certificate_to_inequality(
    inf: &InflationStructure,
    p: &MarginalProblem,
    cert: &FarkasCertificate,
) -> Result<PolynomialInequality, LpError> {
    if cert.y.iter().all(|x| x.is_zero()) {
        return Err(LpError::ZeroCertificate);
    }
    if !verify_certificate(p, &cert.y) {
        return Err(LpError::BadCertificate);
    }
    let coeffs: Vec<BigInt> = cert.y[..p.n_marginal_rows].to_vec();
    let form = LinearForm { constant: BigInt::zero(), coeffs };
    linear_form_to_causal(inf, p, &form)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_form_roundtrip() {
        let f = LinearForm { constant: BigInt::from(2), coeffs: vec![BigInt::from(-1), BigInt::zero()] };
        assert_eq!(LinearForm::from_vec(&f.to_vec()), f);
    }
}

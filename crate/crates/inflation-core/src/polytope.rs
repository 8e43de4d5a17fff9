//! Facet enumeration for marginal polytopes by exact Fourier-Motzkin
//! elimination.
//!
//! The marginal polytope is `{ b : ∃ x >= 0, Σx = 1, b = M x }`, the convex
//! hull of the columns of `M`. Starting from that half-space description in
//! `(b, x)` space, the `x` variables are eliminated one at a time: through an
//! equality when one contains the variable, otherwise by combining positive
//! and negative inequality pairs.
//!
//! Redundancy control keys on the vertices: at every stage the feasible set is
//! the convex hull of the projected columns, a combined inequality saturates
//! exactly the vertices both parents saturate, and an inequality is a facet of
//! the current projection iff its saturated vertex set has affine rank
//! `dim - 1`. Saturation sets are bitmasks, so candidate pruning and
//! deduplication are cheap, and only near-facets pay for a rank computation.

use std::collections::HashMap;

use num::bigint::BigInt;
use num::{Signed, Zero};
use thiserror::Error;

use crate::ineq::reduce_modulo;
use crate::lp::{LinearForm, MarginalProblem};
use crate::ratio::{normalize_ints, Q};

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error("intermediate system exceeded the cap of {0} inequalities")]
    Capacity(usize),
    #[error("problems with more than 256 vertices are not supported by the facet engine")]
    TooManyVertices,
}

/// V- and H-description of a marginal polytope: vertices (columns of `M`),
/// affine hull equalities, and the irredundant facet list. Facet and equality
/// forms have a constant slot first, then one slot per marginal row of the
/// problem, are integer with gcd 1, and are canonical representatives modulo
/// the affine hull.
pub struct Polytope {
    pub vertices: Vec<Vec<Q>>,
    pub affine_hull: Vec<LinearForm>,
    pub facets: Vec<LinearForm>,
    pub dim: usize,
}

/// Saturation mask over up to 256 vertices.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Mask([u64; 4]);

impl Mask {
    fn empty() -> Mask {
        Mask([0; 4])
    }

    fn full(n: usize) -> Mask {
        let mut m = Mask::empty();
        for i in 0..n {
            m.set(i);
        }
        m
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn and(&self, other: &Mask) -> Mask {
        Mask([
            self.0[0] & other.0[0],
            self.0[1] & other.0[1],
            self.0[2] & other.0[2],
            self.0[3] & other.0[3],
        ])
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Clone)]
struct Ineq {
    /// Homogeneous integer form over the current coordinates (constant first).
    form: Vec<BigInt>,
    sat: Mask,
}

struct Eliminator {
    /// Current coordinate labels: 0 = constant, 1.. = marginal rows, then
    /// remaining x columns (by original column index + offset).
    coords: Vec<usize>,
    /// Projected vertices, one row per original column, over `coords`
    /// (without the constant slot; forms carry it in slot 0).
    points: Vec<Vec<i64>>,
    eqs: Vec<Vec<BigInt>>,
    ineqs: Vec<Ineq>,
    cap: usize,
}

const X_OFFSET: usize = 1 << 20;

impl Eliminator {
    /// Affine dimension of the current projected vertex set.
    fn current_dim(&self) -> usize {
        rank_homogeneous(&self.points, None) - 1
    }

    /// Removes coordinate `pos` from every form and point.
    fn drop_coord(&mut self, pos: usize) {
        self.coords.remove(pos);
        for p in &mut self.points {
            p.remove(pos);
        }
        for e in &mut self.eqs {
            e.remove(pos);
        }
        for i in &mut self.ineqs {
            i.form.remove(pos);
        }
    }

    /// Substitutes coordinate `pos` away using equality `eq` (removed from the
    /// system). Directions are preserved by scaling with |eq[pos]|.
    fn substitute(&mut self, eq_index: usize, pos: usize) {
        let eq = self.eqs.remove(eq_index);
        let pivot = eq[pos].clone();
        let apply = |form: &mut Vec<BigInt>| {
            if form[pos].is_zero() {
                return;
            }
            let fcoef = form[pos].clone();
            for (f, e) in form.iter_mut().zip(eq.iter()) {
                *f = &*f * &pivot - e * &fcoef;
            }
            if pivot.is_negative() {
                for f in form.iter_mut() {
                    *f = -&*f;
                }
            }
            normalize_ints(form);
        };
        for e in &mut self.eqs {
            apply(e);
        }
        for i in &mut self.ineqs {
            apply(&mut i.form);
        }
        self.drop_coord(pos);
    }

    fn eliminate_var(&mut self, pos: usize) -> Result<(), PolytopeError> {
        // Prefer substitution through an equality.
        if let Some(eq_index) = self.eqs.iter().position(|e| !e[pos].is_zero()) {
            self.substitute(eq_index, pos);
            return Ok(());
        }
        // Fourier-Motzkin on the inequalities: every kept form keeps its full
        // width until the coordinate is dropped at the end.
        let mut zero = Vec::new();
        let mut plus: Vec<Ineq> = Vec::new();
        let mut minus: Vec<Ineq> = Vec::new();
        for i in self.ineqs.drain(..) {
            match i.form[pos].sign() {
                num::bigint::Sign::NoSign => zero.push(i),
                num::bigint::Sign::Plus => plus.push(i),
                num::bigint::Sign::Minus => minus.push(i),
            }
        }
        // Projection dimension, computed on the points without `pos`.
        let dropped_points: Vec<Vec<i64>> = self
            .points
            .iter()
            .map(|p| {
                let mut row = p.clone();
                row.remove(pos);
                row
            })
            .collect();
        let dim_next = rank_homogeneous(&dropped_points, None) - 1;
        let full = Mask::full(self.points.len());
        // Pass 1: collect unique candidate saturation masks. A combination's
        // saturation set is exactly the intersection of its parents', so no
        // arithmetic happens here; masks below the facet popcount die
        // immediately.
        enum Source {
            Zero(usize),
            Pair(usize, usize),
        }
        let mut uniq: HashMap<Mask, Source> = HashMap::new();
        for (zi, z) in zero.iter().enumerate() {
            if z.sat.count() >= dim_next {
                uniq.insert(z.sat, Source::Zero(zi));
            }
        }
        let mut new_eqs: Vec<Vec<BigInt>> = Vec::new();
        for (pi, p) in plus.iter().enumerate() {
            for (mi, m) in minus.iter().enumerate() {
                let sat = p.sat.and(&m.sat);
                if sat == full {
                    // A combination saturating every vertex is an affine-hull
                    // equality of the projection.
                    let mut form = combine(&p.form, &m.form, pos);
                    normalize_ints(&mut form);
                    if form.iter().any(|x| !x.is_zero()) {
                        new_eqs.push(form);
                    }
                    continue;
                }
                if sat.count() >= dim_next {
                    uniq.entry(sat).or_insert(Source::Pair(pi, mi));
                }
            }
        }
        if uniq.len() > self.cap {
            return Err(PolytopeError::Capacity(self.cap));
        }
        // Pass 2: descending popcount. Any proper face's vertex set lies
        // inside some facet's vertex set, and facets are never contained in
        // one another, so a candidate contained in an accepted facet mask is
        // settled without a rank computation; facets themselves always arrive
        // before their sub-faces in this order.
        let mut order: Vec<(usize, Mask)> = uniq.keys().map(|m| (m.count(), *m)).collect();
        order.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1 .0.cmp(&b.1 .0)));
        let mut accepted: Vec<Mask> = Vec::new();
        let mut kept: Vec<Ineq> = Vec::new();
        for (_, sat) in order {
            if accepted.iter().any(|t| t.and(&sat) == sat) {
                continue;
            }
            let selected: Vec<usize> =
                (0..dropped_points.len()).filter(|&i| sat.get(i)).collect();
            if rank_homogeneous(&dropped_points, Some(&selected)) != dim_next {
                continue;
            }
            accepted.push(sat);
            let form = match &uniq[&sat] {
                Source::Zero(zi) => zero[*zi].form.clone(),
                Source::Pair(pi, mi) => {
                    let mut f = combine(&plus[*pi].form, &minus[*mi].form, pos);
                    normalize_ints(&mut f);
                    f
                }
            };
            kept.push(Ineq { form, sat });
        }
        // Drop the coordinate everywhere.
        self.points = dropped_points;
        self.coords.remove(pos);
        for e in &mut self.eqs {
            debug_assert!(e[pos].is_zero());
            e.remove(pos);
        }
        for i in &mut kept {
            debug_assert!(i.form[pos].is_zero());
            i.form.remove(pos);
        }
        for mut e in new_eqs {
            e.remove(pos);
            normalize_ints(&mut e);
            if e.iter().any(|x| !x.is_zero()) && !self.eqs.contains(&e) {
                self.eqs.push(e);
            }
        }
        // If new equalities cut the dimension further, re-prune.
        let dim_now = rank_homogeneous(&self.points, None) - 1;
        if dim_now < dim_next {
            let points = std::mem::take(&mut self.points);
            kept.retain(|i| {
                let selected: Vec<usize> = (0..points.len()).filter(|&k| i.sat.get(k)).collect();
                i.sat.count() >= dim_now && rank_homogeneous(&points, Some(&selected)) == dim_now
            });
            self.points = points;
        }
        self.ineqs = kept;
        Ok(())
    }
}

fn combine(plus: &[BigInt], minus: &[BigInt], pos: usize) -> Vec<BigInt> {
    let a = plus[pos].clone();
    let b = -minus[pos].clone();
    debug_assert!(a.is_positive() && b.is_positive());
    plus.iter().zip(minus).map(|(pf, mf)| pf * &b + mf * &a).collect()
}

/// Rank of the point matrix over the selected rows (all when `None`). Points
/// already carry their homogenizing 1 in slot 0. Exact fraction-free
/// elimination in `i128`, falling back to big integers on overflow.
fn rank_homogeneous(points: &[Vec<i64>], selected: Option<&[usize]>) -> usize {
    let rows: Vec<usize> = match selected {
        Some(s) => s.to_vec(),
        None => (0..points.len()).collect(),
    };
    if rows.is_empty() {
        return 0;
    }
    let mut mat: Vec<Vec<i128>> =
        rows.iter().map(|&r| points[r].iter().map(|&x| x as i128).collect()).collect();
    match rank_i128(&mut mat) {
        Some(r) => r,
        None => {
            let mut big: Vec<Vec<BigInt>> = rows
                .iter()
                .map(|&r| points[r].iter().map(|&x| BigInt::from(x)).collect())
                .collect();
            rank_big(&mut big)
        }
    }
}

/// Fraction-free (Bareiss) rank; `None` on overflow.
fn rank_i128(mat: &mut [Vec<i128>]) -> Option<usize> {
    let nrows = mat.len();
    let ncols = if nrows == 0 { 0 } else { mat[0].len() };
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let pivot_row = (rank..nrows).find(|&r| mat[r][col] != 0);
        let Some(pr) = pivot_row else { continue };
        mat.swap(rank, pr);
        let pivot = mat[rank][col];
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                let num = pivot.checked_mul(mat[r][c])?.checked_sub(mat[r][col].checked_mul(mat[rank][c])?)?;
                mat[r][c] = num / prev;
            }
            mat[r][col] = 0;
        }
        prev = pivot;
        rank += 1;
    }
    Some(rank)
}

fn rank_big(mat: &mut [Vec<BigInt>]) -> usize {
    let nrows = mat.len();
    let ncols = if nrows == 0 { 0 } else { mat[0].len() };
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let pivot_row = (rank..nrows).find(|&r| !mat[r][col].is_zero());
        let Some(pr) = pivot_row else { continue };
        mat.swap(rank, pr);
        let pivot = mat[rank][col].clone();
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                let num = &pivot * &mat[r][c] - &mat[r][col] * &mat[rank][c];
                mat[r][c] = num / &prev;
            }
            mat[r][col] = BigInt::zero();
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

/// Enumerates the affine hull and all facets of the marginal polytope of a
/// problem. `cap` bounds the intermediate inequality count.
pub fn enumerate_facets(p: &MarginalProblem, cap: usize) -> Result<Polytope, PolytopeError> {
    let n_b = p.n_marginal_rows;
    let n_x = p.n_cols();
    if n_x > 256 {
        return Err(PolytopeError::TooManyVertices);
    }
    // Coordinates: constant, b rows, x columns.
    let mut coords: Vec<usize> = vec![0];
    coords.extend((0..n_b).map(|r| 1 + r));
    coords.extend((0..n_x).map(|j| X_OFFSET + j));
    // Points: vertex i has b = column i of M, x = e_i; slot 0 homogenizes.
    let points: Vec<Vec<i64>> = (0..n_x)
        .map(|i| {
            let mut row = Vec::with_capacity(1 + n_b + n_x);
            row.push(1);
            row.extend((0..n_b).map(|r| p.matrix[r][i] as i64));
            row.extend((0..n_x).map(|j| (j == i) as i64));
            row
        })
        .collect();
    // Equalities: b_r - Σ_j M[r,j] x_j = 0 and Σ_j x_j - 1 = 0.
    let width = 1 + n_b + n_x;
    let mut eqs: Vec<Vec<BigInt>> = Vec::with_capacity(n_b + 1);
    for r in 0..n_b {
        let mut e = vec![BigInt::zero(); width];
        e[1 + r] = BigInt::from(1);
        for j in 0..n_x {
            e[1 + n_b + j] = BigInt::from(-(p.matrix[r][j] as i64));
        }
        eqs.push(e);
    }
    let mut norm = vec![BigInt::zero(); width];
    norm[0] = BigInt::from(-1);
    for j in 0..n_x {
        norm[1 + n_b + j] = BigInt::from(1);
    }
    eqs.push(norm);
    // Inequalities: x_j >= 0, saturated by every vertex except j.
    let mut ineqs = Vec::with_capacity(n_x);
    for j in 0..n_x {
        let mut f = vec![BigInt::zero(); width];
        f[1 + n_b + j] = BigInt::from(1);
        let mut sat = Mask::full(n_x);
        sat.0[j / 64] &= !(1 << (j % 64));
        ineqs.push(Ineq { form: f, sat });
    }
    let mut st = Eliminator { coords, points, eqs, ineqs, cap };
    // Eliminate all x coordinates; cheapest first (fewest pos*neg pairs).
    while st.coords.iter().any(|&c| c >= X_OFFSET) {
        let mut best: Option<(usize, usize)> = None;
        for (pos, &c) in st.coords.iter().enumerate() {
            if c < X_OFFSET {
                continue;
            }
            if st.eqs.iter().any(|e| !e[pos].is_zero()) {
                best = Some((pos, 0));
                break;
            }
            let mut np = 0usize;
            let mut nm = 0usize;
            for i in &st.ineqs {
                match i.form[pos].sign() {
                    num::bigint::Sign::Plus => np += 1,
                    num::bigint::Sign::Minus => nm += 1,
                    num::bigint::Sign::NoSign => {}
                }
            }
            let work = np * nm;
            if best.map(|(_, w)| work < w).unwrap_or(true) {
                best = Some((pos, work));
            }
        }
        let (pos, _) = best.expect("x coordinate present");
        st.eliminate_var(pos)?;
        if std::env::var("INFLATION_FM_TRACE").is_ok() {
            eprintln!(
                "fm: {} x-coords left, {} ineqs, {} eqs, dim {}",
                st.coords.iter().filter(|&&c| c >= X_OFFSET).count(),
                st.ineqs.len(),
                st.eqs.len(),
                st.current_dim()
            );
        }
    }
    // All remaining coordinates are (constant, b). Canonicalize.
    let dim = st.current_dim();
    let eq_forms: Vec<Vec<BigInt>> = st.eqs.clone();
    let facet_vecs: Vec<Vec<BigInt>> = st.ineqs.iter().map(|i| i.form.clone()).collect();
    let reduced = reduce_modulo(&facet_vecs, &eq_forms);
    let mut facets: Vec<LinearForm> = reduced.iter().map(|v| LinearForm::from_vec(v)).collect();
    facets.sort_by(|a, b| a.to_vec().cmp(&b.to_vec()));
    facets.dedup();
    let mut affine_hull: Vec<LinearForm> = canonical_equalities(&eq_forms)
        .iter()
        .map(|v| LinearForm::from_vec(v))
        .collect();
    affine_hull.sort_by(|a, b| a.to_vec().cmp(&b.to_vec()));
    let vertices = (0..n_x).map(|i| p.column(i)).collect();
    Ok(Polytope { vertices, affine_hull, facets, dim })
}

/// Row-reduced, integer-normalized equality basis.
fn canonical_equalities(eqs: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    if eqs.is_empty() {
        return Vec::new();
    }
    let width = eqs[0].len();
    let mut basis: Vec<(usize, Vec<Q>)> = Vec::new();
    for e in eqs {
        let mut row: Vec<Q> = e.iter().map(|x| Q::from_integer(x.clone())).collect();
        for (pivot, b) in &basis {
            if !row[*pivot].is_zero() {
                let f = row[*pivot].clone();
                for (x, y) in row.iter_mut().zip(b.iter()) {
                    *x -= &f * y;
                }
            }
        }
        if let Some(pivot) = row.iter().position(|x| !x.is_zero()) {
            let lead = row[pivot].clone();
            for x in row.iter_mut() {
                *x /= &lead;
            }
            basis.push((pivot, row));
        }
    }
    // Back-substitute for a unique reduced form.
    let pivots: Vec<usize> = basis.iter().map(|(p, _)| *p).collect();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            if i != j {
                let p = pivots[j];
                let f = basis[i].1[p].clone();
                if !f.is_zero() {
                    let other = basis[j].1.clone();
                    for (x, y) in basis[i].1.iter_mut().zip(other.iter()) {
                        *x -= &f * y;
                    }
                }
            }
        }
    }
    basis
        .into_iter()
        .map(|(_, row)| {
            debug_assert_eq!(row.len(), width);
            crate::ratio::integerize(&row)
        })
        .collect()
}

/// Rewrites every facet into a polynomial causal compatibility inequality for
/// the original structure (block factorization plus copy-index dropping),
/// deduplicating canonical forms.
pub fn facets_to_causal_inequalities(
    inf: &crate::inflation::InflationStructure,
    p: &MarginalProblem,
    poly: &Polytope,
) -> Result<Vec<crate::ineq::PolynomialInequality>, crate::lp::LpError> {
    let mut out = Vec::with_capacity(poly.facets.len());
    for f in &poly.facets {
        out.push(crate::lp::linear_form_to_causal(inf, p, f)?);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Validity check used by tests and the acceptance suite: every vertex must
/// satisfy every facet and saturate every affine-hull equality.
pub fn check_valid(poly: &Polytope) -> bool {
    for v in &poly.vertices {
        for f in &poly.facets {
            if f.evaluate_b(v).is_negative() {
                return false;
            }
        }
        for e in &poly.affine_hull {
            if !e.evaluate_b(v).is_zero() {
                return false;
            }
        }
    }
    true
}

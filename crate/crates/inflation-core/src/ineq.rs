//! Polynomial causal compatibility inequalities.
//!
//! An inequality is `expression >= 0` where the expression is an integer
//! combination of monomials; a monomial multiplies marginal-probability atoms
//! `P_S(o)` and binary correlator atoms `<S>`, each with a (possibly negative)
//! integer exponent. Negative exponents arise only from expressible-set
//! substitutions (conditional products) and from conditioning on root
//! "settings" variables.
//!
//! Evaluation uses the value encoding 0 -> +1, 1 -> -1 for correlators, and
//! the convention that a monomial with a vanishing denominator atom evaluates
//! to 0 (matching the conditional-product convention that sets the joint to 0
//! where the conditioning marginal vanishes).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::ratio::{integerize, Q};
use crate::table::{JointTable, TableError};

#[derive(Debug, Error)]
pub enum IneqError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("atom references `{0}` which the distribution does not cover")]
    MissingVariable(String),
    #[error("correlator conversion needs binary variables; `{0}` is not binary")]
    NotBinary(String),
    #[error("conversion requires a pure polynomial (no negative exponents)")]
    NegativeExponent,
    #[error("invalid inequality file: {0}")]
    BadFile(String),
    #[error("unknown monomial label `{0}`")]
    BadLabel(String),
}

/// A single multiplicative atom.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum Atom {
    /// Marginal probability of valuation `vals` on variables `vars` (sorted).
    Prob { vars: Vec<NodeId>, vals: Vec<u32> },
    /// Binary correlator over `vars` (sorted), values encoded 0 -> +1, 1 -> -1.
    Corr { vars: Vec<NodeId> },
}

impl Atom {
    pub fn prob(mut pairs: Vec<(NodeId, u32)>) -> Atom {
        pairs.sort();
        let vars = pairs.iter().map(|(v, _)| v.clone()).collect();
        let vals = pairs.iter().map(|(_, x)| *x).collect();
        Atom::Prob { vars, vals }
    }

    pub fn corr(mut vars: Vec<NodeId>) -> Atom {
        vars.sort();
        Atom::Corr { vars }
    }

    pub fn vars(&self) -> &[NodeId] {
        match self {
            Atom::Prob { vars, .. } => vars,
            Atom::Corr { vars } => vars,
        }
    }

    fn sort_key(&self) -> (usize, u8, &[NodeId], Option<&[u32]>) {
        match self {
            Atom::Prob { vars, vals } => (vars.len(), 0, vars, Some(vals)),
            Atom::Corr { vars } => (vars.len(), 1, vars, None),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    /// Canonical atom order: subset size, then subset, then valuation.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// A product of atoms with nonzero integer exponents, kept sorted.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash, Default)]
pub struct Monomial {
    pub factors: Vec<(Atom, i32)>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial { factors: Vec::new() }
    }

    pub fn atom(a: Atom) -> Monomial {
        Monomial { factors: vec![(a, 1)] }
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps: BTreeMap<Atom, i32> = BTreeMap::new();
        for (a, e) in self.factors.iter().chain(other.factors.iter()) {
            *exps.entry(a.clone()).or_insert(0) += e;
        }
        Monomial {
            factors: exps.into_iter().filter(|(_, e)| *e != 0).collect(),
        }
    }

    pub fn degree(&self) -> i32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }
}

/// A polynomial under construction: rational coefficients keyed by monomial.
#[derive(Clone, Debug, Default)]
pub struct Poly {
    pub terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Q) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn atom(a: Atom) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::atom(a), Q::one());
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn scale(&mut self, c: &Q) {
        if c.is_zero() {
            self.terms.clear();
            return;
        }
        for v in self.terms.values_mut() {
            *v *= c;
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

/// A canonical polynomial causal compatibility inequality: `sum >= 0` with
/// integer coefficients of overall gcd 1 and sorted terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct PolynomialInequality {
    pub terms: Vec<(BigInt, Monomial)>,
}

impl PolynomialInequality {
    pub fn from_poly(p: &Poly) -> PolynomialInequality {
        let monos: Vec<Monomial> = p.terms.keys().cloned().collect();
        let coeffs: Vec<Q> = p.terms.values().cloned().collect();
        let ints = integerize(&coeffs);
        let mut terms: Vec<(BigInt, Monomial)> =
            ints.into_iter().zip(monos).map(|(c, m)| (c, m)).collect();
        terms.retain(|(c, _)| !c.is_zero());
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        PolynomialInequality { terms }
    }

    pub fn to_poly(&self) -> Poly {
        let mut p = Poly::zero();
        for (c, m) in &self.terms {
            p.add_term(m.clone(), Q::from_integer(c.clone()));
        }
        p
    }

    pub fn is_trivial(&self) -> bool {
        self.terms.is_empty()
    }

    /// All variables referenced by any atom.
    pub fn variables(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for (_, m) in &self.terms {
            for (a, _) in &m.factors {
                out.extend(a.vars().iter().cloned());
            }
        }
        out
    }

    /// Exact evaluation against a joint distribution covering all referenced
    /// variables. Returns the expression value; `>= 0` means satisfied.
    pub fn evaluate(&self, dist: &JointTable) -> Result<Q, IneqError> {
        let covered = dist.var_set();
        for v in self.variables() {
            if !covered.contains(&v) {
                return Err(IneqError::MissingVariable(v.label()));
            }
        }
        let mut cache: BTreeMap<Atom, Q> = BTreeMap::new();
        let mut total = Q::zero();
        'terms: for (c, m) in &self.terms {
            let mut value = Q::from_integer(c.clone());
            for (a, e) in &m.factors {
                let av = match cache.get(a) {
                    Some(v) => v.clone(),
                    None => {
                        let v = eval_atom(a, dist)?;
                        cache.insert(a.clone(), v.clone());
                        v
                    }
                };
                if *e < 0 {
                    if av.is_zero() {
                        // Vanishing denominator: the whole monomial follows the
                        // conditional-product convention and contributes 0.
                        continue 'terms;
                    }
                    for _ in 0..(-e) {
                        value /= &av;
                    }
                } else {
                    if av.is_zero() {
                        continue 'terms;
                    }
                    for _ in 0..*e {
                        value *= &av;
                    }
                }
            }
            total += value;
        }
        Ok(total)
    }

    pub fn evaluate_f64(&self, dist: &JointTable) -> Result<f64, IneqError> {
        Ok(crate::ratio::to_f64(&self.evaluate(dist)?))
    }

    pub fn satisfied(&self, dist: &JointTable) -> Result<bool, IneqError> {
        Ok(!self.evaluate(dist)?.is_negative())
    }

    /// Rewrites every probability atom over binary variables into the
    /// correlator basis. Requires a pure polynomial.
    pub fn correlator_form(&self) -> Result<PolynomialInequality, IneqError> {
        let mut out = Poly::zero();
        for (c, m) in &self.terms {
            let mut term = Poly::constant(Q::from_integer(c.clone()));
            for (a, e) in &m.factors {
                if *e < 0 {
                    return Err(IneqError::NegativeExponent);
                }
                let expanded = match a {
                    Atom::Corr { .. } => Poly::atom(a.clone()),
                    Atom::Prob { vars, vals } => prob_as_correlators(vars, vals)?,
                };
                for _ in 0..*e {
                    term = term.mul(&expanded);
                }
            }
            out.add(&term);
        }
        Ok(PolynomialInequality::from_poly(&out))
    }

    /// Rewrites every correlator atom into probability atoms on its own
    /// variable set.
    pub fn probability_form(&self) -> Result<PolynomialInequality, IneqError> {
        let mut out = Poly::zero();
        for (c, m) in &self.terms {
            let mut term = Poly::constant(Q::from_integer(c.clone()));
            for (a, e) in &m.factors {
                if *e < 0 {
                    return Err(IneqError::NegativeExponent);
                }
                let expanded = match a {
                    Atom::Prob { .. } => Poly::atom(a.clone()),
                    Atom::Corr { vars } => corr_as_probabilities(vars),
                };
                for _ in 0..*e {
                    term = term.mul(&expanded);
                }
            }
            out.add(&term);
        }
        Ok(PolynomialInequality::from_poly(&out))
    }

    /// Divides the whole inequality by a product of atoms (used to condition
    /// Bell-type inequalities on their settings distributions). Every monomial
    /// gets the atoms appended with negated exponents; atoms canceling an
    /// existing positive power simplify.
    pub fn divide_by(&self, atoms: &[Atom]) -> PolynomialInequality {
        let mut divisor = Monomial::one();
        for a in atoms {
            divisor = divisor.mul(&Monomial { factors: vec![(a.clone(), -1)] });
        }
        let mut out = Poly::zero();
        for (c, m) in &self.terms {
            out.add_term(m.mul(&divisor), Q::from_integer(c.clone()));
        }
        PolynomialInequality::from_poly(&out)
    }
}

fn eval_atom(a: &Atom, dist: &JointTable) -> Result<Q, IneqError> {
    match a {
        Atom::Prob { vars, vals } => {
            let keep: BTreeSet<NodeId> = vars.iter().cloned().collect();
            let marg = dist.marginalize(&keep)?;
            let marg = marg.reorder(vars)?;
            Ok(marg.prob(vals).clone())
        }
        Atom::Corr { vars } => {
            let set: BTreeSet<NodeId> = vars.iter().cloned().collect();
            Ok(dist.correlator(&set)?)
        }
    }
}

/// `P_S(o)` expanded in the correlator basis: `2^-|S| * sum_{T subset S}
/// sign(o, T) <T>` with `sign(o, T) = prod_{v in T} (o_v == 0 ? +1 : -1)`.
fn prob_as_correlators(vars: &[NodeId], vals: &[u32]) -> Result<Poly, IneqError> {
    for (v, &x) in vars.iter().zip(vals) {
        if x > 1 {
            return Err(IneqError::NotBinary(v.label()));
        }
    }
    let n = vars.len();
    let scale = Q::new(BigInt::one(), BigInt::from(1u64 << n));
    let mut out = Poly::zero();
    for mask in 0u32..1 << n {
        let mut sign = 1i64;
        let mut subset = Vec::new();
        for (i, (v, &x)) in vars.iter().zip(vals).enumerate() {
            if mask >> i & 1 == 1 {
                subset.push(v.clone());
                if x == 1 {
                    sign = -sign;
                }
            }
        }
        let mono = if subset.is_empty() {
            Monomial::one()
        } else {
            Monomial::atom(Atom::corr(subset))
        };
        out.add_term(mono, &scale * Q::from_integer(BigInt::from(sign)));
    }
    Ok(out)
}

/// `<T>` expanded into probability atoms on `T`.
fn corr_as_probabilities(vars: &[NodeId]) -> Poly {
    let n = vars.len();
    let mut out = Poly::zero();
    for mask in 0u32..1 << n {
        let vals: Vec<u32> = (0..n).map(|i| mask >> i & 1).collect();
        let ones = vals.iter().filter(|&&x| x == 1).count();
        let sign = if ones % 2 == 0 { 1 } else { -1 };
        let atom = Atom::Prob { vars: vars.to_vec(), vals };
        out.add_term(Monomial::atom(atom), Q::from_integer(BigInt::from(sign)));
    }
    out
}

// ---------------------------------------------------------------------------
// Rendering and files
// ---------------------------------------------------------------------------

fn var_run(vars: &[NodeId]) -> String {
    vars.iter().map(|v| v.label()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Prob { vars, vals } => {
                let digits: String = vals.iter().map(|x| x.to_string()).collect();
                write!(f, "P[{}]({})", var_run(vars), digits)
            }
            Atom::Corr { vars } => write!(f, "<{}>", var_run(vars).replace(' ', "")),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, (a, e)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if *e == 1 {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for PolynomialInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0 <= ")?;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, m)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_constant() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag} {m}")?;
            }
        }
        Ok(())
    }
}

/// Monomial label syntax used in inequality files: `1` for the constant,
/// `<AB>` for one correlator, `<A><BC>` for products, `P[A B](01)` for
/// probability atoms, `*^-1` suffix for negative exponents.
pub fn monomial_label(m: &Monomial) -> String {
    if m.factors.is_empty() {
        return "1".to_string();
    }
    let mut out = String::new();
    for (a, e) in &m.factors {
        let base = a.to_string();
        if *e == 1 {
            out.push_str(&base);
        } else {
            out.push_str(&format!("{base}^{e}"));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct IneqFile {
    /// Column labels in display order.
    monomials: Vec<String>,
    /// One row of coefficients per inequality, aligned with `monomials`.
    rows: Vec<Vec<i64>>,
}

fn parse_label(label: &str) -> Result<Monomial, IneqError> {
    if label.trim() == "1" {
        return Ok(Monomial::one());
    }
    let mut factors: Vec<(Atom, i32)> = Vec::new();
    let mut rest = label.trim();
    while !rest.is_empty() {
        if let Some(stripped) = rest.strip_prefix('<') {
            let end = stripped.find('>').ok_or_else(|| IneqError::BadLabel(label.into()))?;
            let names = &stripped[..end];
            let vars: Vec<NodeId> = split_names(names);
            if vars.is_empty() {
                return Err(IneqError::BadLabel(label.into()));
            }
            factors.push((Atom::corr(vars), 1));
            rest = &stripped[end + 1..];
        } else {
            return Err(IneqError::BadLabel(label.into()));
        }
    }
    let mut m = Monomial::one();
    for (a, e) in factors {
        m = m.mul(&Monomial { factors: vec![(a, e)] });
    }
    Ok(m)
}

/// Splits a correlator label like `"AB"` or `"A1 B2"` into node ids. Labels
/// without spaces are split per uppercase letter plus trailing digits.
fn split_names(names: &str) -> Vec<NodeId> {
    if names.contains(' ') {
        return names.split_whitespace().map(parse_node_label).collect();
    }
    let mut out = Vec::new();
    let chars: Vec<char> = names.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        out.push(parse_node_label(&chars[start..i].iter().collect::<String>()));
    }
    out
}

fn parse_node_label(label: &str) -> NodeId {
    let digits = label.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        NodeId::plain(label)
    } else {
        let split = label.len() - digits;
        NodeId::copy(&label[..split], label[split..].parse().unwrap())
    }
}

/// Loads correlator-table inequality files (one coefficient row per
/// inequality, columns labeled by monomials).
pub fn load_correlator_rows(text: &str) -> Result<Vec<PolynomialInequality>, IneqError> {
    let file: IneqFile =
        serde_json::from_str(text).map_err(|e| IneqError::BadFile(e.to_string()))?;
    let monos: Vec<Monomial> =
        file.monomials.iter().map(|l| parse_label(l)).collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(file.rows.len());
    for row in &file.rows {
        if row.len() != monos.len() {
            return Err(IneqError::BadFile(format!(
                "row has {} entries, expected {}",
                row.len(),
                monos.len()
            )));
        }
        let mut p = Poly::zero();
        for (c, m) in row.iter().zip(monos.iter()) {
            p.add_term(m.clone(), crate::ratio::q(*c));
        }
        out.push(PolynomialInequality::from_poly(&p));
    }
    Ok(out)
}

/// Serializes inequalities that live entirely in a shared correlator basis.
pub fn save_correlator_rows(ineqs: &[PolynomialInequality]) -> Result<String, IneqError> {
    let mut monos: BTreeSet<Monomial> = BTreeSet::new();
    for i in ineqs {
        for (_, m) in &i.terms {
            monos.insert(m.clone());
        }
    }
    let monos: Vec<Monomial> = monos.into_iter().collect();
    let mut rows = Vec::with_capacity(ineqs.len());
    for i in ineqs {
        let mut row = vec![0i64; monos.len()];
        for (c, m) in &i.terms {
            let pos = monos.iter().position(|x| x == m).unwrap();
            row[pos] = i64::try_from(c.clone()).map_err(|_| {
                IneqError::BadFile("coefficient exceeds i64 range".to_string())
            })?;
        }
        rows.push(row);
    }
    let file = IneqFile { monomials: monos.iter().map(monomial_label).collect(), rows };
    serde_json::to_string_pretty(&file).map_err(|e| IneqError::BadFile(e.to_string()))
}

/// Reduces linear forms over a shared coordinate space modulo a set of
/// equality forms: Gaussian elimination picks pivot coordinates of the
/// equality span and zeroes them in every form. Forms and equalities are
/// integer vectors including a constant slot; scaling is positive so
/// inequality directions survive.
pub fn reduce_modulo(
    forms: &[Vec<BigInt>],
    equalities: &[Vec<BigInt>],
) -> Vec<Vec<BigInt>> {
    if forms.is_empty() {
        return Vec::new();
    }
    let width = forms[0].len();
    // Row-reduce the equalities over Q (represented as integer rows).
    let mut basis: Vec<(usize, Vec<Q>)> = Vec::new();
    for e in equalities {
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
    forms
        .iter()
        .map(|f| {
            let mut row: Vec<Q> = f.iter().map(|x| Q::from_integer(x.clone())).collect();
            for (pivot, b) in &basis {
                if !row[*pivot].is_zero() {
                    let fac = row[*pivot].clone();
                    for (x, y) in row.iter_mut().zip(b.iter()) {
                        *x -= &fac * y;
                    }
                }
            }
            let ints = integerize(&row);
            debug_assert_eq!(ints.len(), width);
            ints
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{q, qfrac};

    fn node(name: &str) -> NodeId {
        NodeId::plain(name)
    }

    fn w_table() -> JointTable {
        let vars = vec![(node("A"), 2), (node("B"), 2), (node("C"), 2)];
        let mut probs = vec![Q::zero(); 8];
        probs[0b100] = qfrac(1, 3);
        probs[0b010] = qfrac(1, 3);
        probs[0b001] = qfrac(1, 3);
        JointTable::new(vars, probs).unwrap()
    }

    #[test]
    fn pair_probability_in_correlators() {
        // P_AB(11) = (1 - <A> - <B> + <AB>) / 4 under 0 -> +1.
        let atom = Atom::prob(vec![(node("A"), 1), (node("B"), 1)]);
        let mut p = Poly::zero();
        p.add_term(Monomial::atom(atom), Q::one());
        let ineq = PolynomialInequality::from_poly(&p);
        let corr = ineq.correlator_form().unwrap();
        let rendered = corr.to_string();
        assert_eq!(rendered, "0 <= 1 - <A> - <B> + <AB>");
    }

    #[test]
    fn correlator_round_trip_is_identity() {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), q(1));
        p.add_term(Monomial::atom(Atom::corr(vec![node("A"), node("C")])), q(-1));
        p.add_term(
            Monomial::atom(Atom::corr(vec![node("A")])).mul(&Monomial::atom(Atom::corr(vec![node("B")]))),
            q(1),
        );
        let ineq = PolynomialInequality::from_poly(&p);
        let back = ineq.probability_form().unwrap().correlator_form().unwrap();
        assert_eq!(ineq, back);
    }

    #[test]
    fn monogamy_inequality_on_w() {
        // 0 <= 1 - <AC> - <BC> + <A><B>, evaluated on the W table.
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), q(1));
        p.add_term(Monomial::atom(Atom::corr(vec![node("A"), node("C")])), q(-1));
        p.add_term(Monomial::atom(Atom::corr(vec![node("B"), node("C")])), q(-1));
        p.add_term(
            Monomial::atom(Atom::corr(vec![node("A")])).mul(&Monomial::atom(Atom::corr(vec![node("B")]))),
            q(1),
        );
        let ineq = PolynomialInequality::from_poly(&p);
        // <AC> = <BC> = -1/3, <A> = <B> = 1/3 on W.
        let value = ineq.evaluate(&w_table()).unwrap();
        assert_eq!(value, q(1) + qfrac(1, 3) + qfrac(1, 3) + qfrac(1, 9));
    }

    #[test]
    fn zero_denominator_follows_convention() {
        // P_A(1) / P_B(1) with P_B(1) = 0 contributes 0.
        let pa = Atom::prob(vec![(node("A"), 1)]);
        let pb = Atom::prob(vec![(node("B"), 1)]);
        let mono = Monomial { factors: vec![(pa, 1), (pb, -1)] };
        let mut p = Poly::zero();
        p.add_term(mono, q(1));
        let ineq = PolynomialInequality::from_poly(&p);
        let vars = vec![(node("A"), 2), (node("B"), 2)];
        let mut probs = vec![Q::zero(); 4];
        probs[0b10] = q(1); // A=1, B=0 always
        let t = JointTable::new(vars, probs).unwrap();
        assert_eq!(ineq.evaluate(&t).unwrap(), Q::zero());
    }

    #[test]
    fn label_round_trip() {
        let m = Monomial::atom(Atom::corr(vec![node("A")]))
            .mul(&Monomial::atom(Atom::corr(vec![node("B"), node("C")])));
        let label = monomial_label(&m);
        assert_eq!(label, "<A><BC>");
        assert_eq!(parse_label(&label).unwrap(), m);
    }

    #[test]
    fn reduce_modulo_kills_equality_components() {
        // Forms in coordinates (const, b1, b2); equality b1 - b2 = 0.
        let forms = vec![
            vec![BigInt::from(0), BigInt::from(1), BigInt::from(1)],
            vec![BigInt::from(1), BigInt::from(2), BigInt::from(0)],
        ];
        let eqs = vec![vec![BigInt::from(0), BigInt::from(1), BigInt::from(-1)]];
        let reduced = reduce_modulo(&forms, &eqs);
        // b1 is eliminated in favour of b2 in both forms.
        assert_eq!(reduced[0], vec![BigInt::from(0), BigInt::from(0), BigInt::from(1)]);
        assert_eq!(reduced[1], vec![BigInt::from(1), BigInt::from(0), BigInt::from(2)]);
    }
}

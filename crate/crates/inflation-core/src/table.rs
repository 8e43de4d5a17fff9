//! Finite discrete joint probability tables with exact rational entries.
//!
//! Tables are immutable values: every operation returns a new table. Entries
//! are stored row-major in the table's variable order. Rational arithmetic is
//! exact; entropy and batch evaluation go through `f64` views.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::ratio::{parse_ratio, q, ratio_to_string, to_f64, Q};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("variable `{0}` is not part of the table")]
    UnknownVariable(String),
    #[error("variable `{0}` appears in more than one operand")]
    DuplicateVariable(String),
    #[error("table entries must be nonnegative, entry {0} is {1}")]
    NegativeEntry(usize, String),
    #[error("table entries sum to {0}, expected 1")]
    NotNormalized(String),
    #[error("expected {0} entries for the declared variables, found {1}")]
    WrongLength(usize, usize),
    #[error("conditioning marginals disagree: {0}")]
    ConditionalMismatch(String),
    #[error("cardinality of `{0}` must be at least 2")]
    BadCardinality(String),
    #[error("tables must share the variable set; `{0}` is one-sided")]
    VariableMismatch(String),
    #[error("invalid distribution file: {0}")]
    BadFile(String),
    #[error("correlators need binary variables; `{0}` is not binary")]
    NotBinary(String),
}

/// A joint distribution over an ordered list of finite variables.
#[derive(Clone, PartialEq, Eq)]
pub struct JointTable {
    vars: Vec<(NodeId, u32)>,
    probs: Vec<Q>,
}

impl JointTable {
    /// Builds a table and checks nonnegativity and exact normalization.
    pub fn new(vars: Vec<(NodeId, u32)>, probs: Vec<Q>) -> Result<JointTable, TableError> {
        for (v, c) in &vars {
            if *c < 2 {
                return Err(TableError::BadCardinality(v.label()));
            }
        }
        let size: usize = vars.iter().map(|(_, c)| *c as usize).product();
        if probs.len() != size {
            return Err(TableError::WrongLength(size, probs.len()));
        }
        let mut sum = Q::zero();
        for (i, p) in probs.iter().enumerate() {
            if p.is_negative() {
                return Err(TableError::NegativeEntry(i, ratio_to_string(p)));
            }
            sum += p;
        }
        if !sum.is_one() {
            return Err(TableError::NotNormalized(ratio_to_string(&sum)));
        }
        Ok(JointTable { vars, probs })
    }

    /// A point mass on one valuation.
    pub fn point_mass(vars: Vec<(NodeId, u32)>, valuation: &[u32]) -> Result<JointTable, TableError> {
        let size: usize = vars.iter().map(|(_, c)| *c as usize).product();
        let mut probs = vec![Q::zero(); size];
        let ix = index_of(&vars, valuation);
        probs[ix] = Q::one();
        JointTable::new(vars, probs)
    }

    pub fn uniform(vars: Vec<(NodeId, u32)>) -> JointTable {
        let size: usize = vars.iter().map(|(_, c)| *c as usize).product();
        let p = Q::one() / q(size as i64);
        JointTable::new(vars, vec![p; size]).expect("uniform is a distribution")
    }

    pub fn vars(&self) -> &[(NodeId, u32)] {
        &self.vars
    }

    pub fn var_set(&self) -> BTreeSet<NodeId> {
        self.vars.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn probs(&self) -> &[Q] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn var_pos(&self, v: &NodeId) -> Result<usize, TableError> {
        self.vars
            .iter()
            .position(|(u, _)| u == v)
            .ok_or_else(|| TableError::UnknownVariable(v.label()))
    }

    /// Probability of one full valuation, in table variable order.
    pub fn prob(&self, valuation: &[u32]) -> &Q {
        &self.probs[index_of(&self.vars, valuation)]
    }

    /// Iterates `(valuation, probability)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u32>, &Q)> {
        let vars = self.vars.clone();
        self.probs.iter().enumerate().map(move |(i, p)| (valuation_of(&vars, i), p))
    }

    /// Sums out everything not in `keep`; the surviving variables keep their
    /// relative order.
    pub fn marginalize(&self, keep: &BTreeSet<NodeId>) -> Result<JointTable, TableError> {
        for v in keep {
            self.var_pos(v)?;
        }
        let keep_pos: Vec<usize> =
            (0..self.vars.len()).filter(|i| keep.contains(&self.vars[*i].0)).collect();
        let out_vars: Vec<(NodeId, u32)> = keep_pos.iter().map(|&i| self.vars[i].clone()).collect();
        let out_size: usize = out_vars.iter().map(|(_, c)| *c as usize).product();
        let mut out = vec![Q::zero(); out_size];
        for (i, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let val = valuation_of(&self.vars, i);
            let sub: Vec<u32> = keep_pos.iter().map(|&k| val[k]).collect();
            out[index_of(&out_vars, &sub)] += p;
        }
        JointTable::new(out_vars, out)
    }

    /// Reorders the variables (same set, new order).
    pub fn reorder(&self, order: &[NodeId]) -> Result<JointTable, TableError> {
        if order.len() != self.vars.len() {
            return Err(TableError::VariableMismatch(format!(
                "{} vs {} variables",
                order.len(),
                self.vars.len()
            )));
        }
        let pos: Vec<usize> = order.iter().map(|v| self.var_pos(v)).collect::<Result<_, _>>()?;
        let out_vars: Vec<(NodeId, u32)> = pos.iter().map(|&i| self.vars[i].clone()).collect();
        let mut out = vec![Q::zero(); self.probs.len()];
        for (i, p) in self.probs.iter().enumerate() {
            let val = valuation_of(&self.vars, i);
            let sub: Vec<u32> = pos.iter().map(|&k| val[k]).collect();
            out[index_of(&out_vars, &sub)] = p.clone();
        }
        JointTable::new(out_vars, out)
    }

    /// Renames variables through the given map, then sorts them canonically.
    pub fn rename(&self, map: &BTreeMap<NodeId, NodeId>) -> Result<JointTable, TableError> {
        let renamed: Vec<(NodeId, u32)> = self
            .vars
            .iter()
            .map(|(v, c)| (map.get(v).cloned().unwrap_or_else(|| v.clone()), *c))
            .collect();
        let mut names: BTreeSet<NodeId> = BTreeSet::new();
        for (v, _) in &renamed {
            if !names.insert(v.clone()) {
                return Err(TableError::DuplicateVariable(v.label()));
            }
        }
        let tmp = JointTable { vars: renamed.clone(), probs: self.probs.clone() };
        let mut order: Vec<NodeId> = renamed.iter().map(|(v, _)| v.clone()).collect();
        order.sort();
        tmp.reorder(&order)
    }

    /// Independent product over disjoint variable sets, variables sorted
    /// canonically in the result.
    pub fn product(tables: &[JointTable]) -> Result<JointTable, TableError> {
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        for t in tables {
            for (v, _) in &t.vars {
                if !seen.insert(v.clone()) {
                    return Err(TableError::DuplicateVariable(v.label()));
                }
            }
        }
        let mut vars: Vec<(NodeId, u32)> = Vec::new();
        let mut probs = vec![Q::one()];
        for t in tables {
            let mut next_vars = vars.clone();
            next_vars.extend(t.vars.iter().cloned());
            let mut next = Vec::with_capacity(probs.len() * t.probs.len());
            for p in &probs {
                for p2 in &t.probs {
                    next.push(p * p2);
                }
            }
            vars = next_vars;
            probs = next;
        }
        let table = JointTable { vars: vars.clone(), probs };
        let mut order: Vec<NodeId> = vars.iter().map(|(v, _)| v.clone()).collect();
        order.sort();
        if tables.is_empty() {
            return JointTable::new(Vec::new(), vec![Q::one()]);
        }
        table.reorder(&order)
    }

    /// The conditional product `P(x,y,z) = P(x,z) P(y,z) / P(z)`, with entries
    /// set to 0 wherever `P(z) = 0`. The two operands must agree exactly on
    /// their `z`-marginals.
    pub fn conditional_product(
        xz: &JointTable,
        yz: &JointTable,
        z_vars: &BTreeSet<NodeId>,
    ) -> Result<JointTable, TableError> {
        let zx = xz.marginalize(z_vars)?;
        let zy = yz.marginalize(z_vars)?;
        let mut order: Vec<NodeId> = z_vars.iter().cloned().collect();
        order.sort();
        let zx = zx.reorder(&order)?;
        let zy = zy.reorder(&order)?;
        if zx != zy {
            return Err(TableError::ConditionalMismatch(format!(
                "z-marginals differ on {}",
                order.iter().map(|v| v.label()).collect::<Vec<_>>().join(" ")
            )));
        }
        for (v, _) in xz.vars.iter() {
            if !z_vars.contains(v) && yz.vars.iter().any(|(u, _)| u == v) {
                return Err(TableError::DuplicateVariable(v.label()));
            }
        }
        let mut out_vars: Vec<(NodeId, u32)> = xz.vars.iter().cloned().collect();
        for (v, c) in yz.vars.iter() {
            if !z_vars.contains(v) {
                out_vars.push((v.clone(), *c));
            }
        }
        out_vars.sort();
        let out_size: usize = out_vars.iter().map(|(_, c)| *c as usize).product();
        let mut probs = vec![Q::zero(); out_size];
        let xz_pos: Vec<usize> =
            xz.vars.iter().map(|(v, _)| out_vars.iter().position(|(u, _)| u == v).unwrap()).collect();
        let yz_pos: Vec<usize> =
            yz.vars.iter().map(|(v, _)| out_vars.iter().position(|(u, _)| u == v).unwrap()).collect();
        let z_pos: Vec<usize> =
            zx.vars.iter().map(|(v, _)| out_vars.iter().position(|(u, _)| u == v).unwrap()).collect();
        for (ix, slot) in probs.iter_mut().enumerate() {
            let val = valuation_of(&out_vars, ix);
            let zv: Vec<u32> = z_pos.iter().map(|&k| val[k]).collect();
            let pz = zx.prob(&zv);
            if pz.is_zero() {
                continue;
            }
            let xv: Vec<u32> = xz_pos.iter().map(|&k| val[k]).collect();
            let yv: Vec<u32> = yz_pos.iter().map(|&k| val[k]).collect();
            let num = xz.prob(&xv) * yz.prob(&yv);
            if !num.is_zero() {
                *slot = num / pz;
            }
        }
        JointTable::new(out_vars, probs)
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .map(|p| {
                let p = to_f64(p);
                if p > 0.0 {
                    -p * p.log2()
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Mutual information `I(X:Y) = H(X) + H(Y) - H(XY)` in bits, where the
    /// table is marginalized to the relevant sets first.
    pub fn mutual_information(
        &self,
        x: &BTreeSet<NodeId>,
        y: &BTreeSet<NodeId>,
    ) -> Result<f64, TableError> {
        let hx = self.marginalize(x)?.entropy();
        let hy = self.marginalize(y)?.entropy();
        let union: BTreeSet<NodeId> = x.union(y).cloned().collect();
        let hxy = self.marginalize(&union)?.entropy();
        Ok(hx + hy - hxy)
    }

    /// The correlator `<S>` with the value encoding 0 -> +1, 1 -> -1; all
    /// requested variables must be binary.
    pub fn correlator(&self, subset: &BTreeSet<NodeId>) -> Result<Q, TableError> {
        for v in subset {
            let pos = self.var_pos(v)?;
            if self.vars[pos].1 != 2 {
                return Err(TableError::NotBinary(v.label()));
            }
        }
        let marg = self.marginalize(subset)?;
        let mut acc = Q::zero();
        for (val, p) in marg.iter() {
            let ones = val.iter().filter(|&&x| x == 1).count();
            if ones % 2 == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }

    pub fn probs_f64(&self) -> Vec<f64> {
        self.probs.iter().map(to_f64).collect()
    }

    /// Max-norm distance, for float-mode comparisons.
    pub fn max_diff_f64(&self, other: &JointTable) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| to_f64(&(a - b)).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for JointTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P[")?;
        for (i, (v, _)) in self.vars.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "](")?;
        let mut first = true;
        for (val, p) in self.iter() {
            if p.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let digits: String = val.iter().map(|x| x.to_string()).collect();
            write!(f, "{}[{digits}]", ratio_to_string(p))?;
        }
        write!(f, ")")
    }
}

pub(crate) fn index_of(vars: &[(NodeId, u32)], valuation: &[u32]) -> usize {
    debug_assert_eq!(vars.len(), valuation.len());
    let mut ix = 0usize;
    for ((_, c), &v) in vars.iter().zip(valuation) {
        debug_assert!(v < *c);
        ix = ix * *c as usize + v as usize;
    }
    ix
}

pub(crate) fn valuation_of(vars: &[(NodeId, u32)], mut ix: usize) -> Vec<u32> {
    let mut val = vec![0u32; vars.len()];
    for (k, (_, c)) in vars.iter().enumerate().rev() {
        val[k] = (ix % *c as usize) as u32;
        ix /= *c as usize;
    }
    val
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VarFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    copy_index: Option<u32>,
    cardinality: u32,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    variables: Vec<VarFile>,
    probs: Vec<serde_json::Value>,
}

impl JointTable {
    /// Parses `{"variables":[{"name","cardinality"}], "probs":[...]}` with
    /// row-major entries; entries may be exact strings (`"1/3"`), integers, or
    /// floats (converted exactly from their binary representation).
    pub fn from_json(text: &str) -> Result<JointTable, TableError> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| TableError::BadFile(e.to_string()))?;
        let vars: Vec<(NodeId, u32)> = file
            .variables
            .iter()
            .map(|v| (NodeId { name: v.name.clone(), copy_index: v.copy_index }, v.cardinality))
            .collect();
        let mut probs = Vec::with_capacity(file.probs.len());
        for (i, raw) in file.probs.iter().enumerate() {
            let p = match raw {
                serde_json::Value::String(s) => {
                    parse_ratio(s).ok_or_else(|| TableError::BadFile(format!("bad entry `{s}`")))?
                }
                serde_json::Value::Number(n) => {
                    if let Some(k) = n.as_i64() {
                        q(k)
                    } else {
                        crate::ratio::from_f64_exact(n.as_f64().unwrap_or(f64::NAN))
                            .ok_or_else(|| TableError::BadFile(format!("bad entry #{i}")))?
                    }
                }
                _ => return Err(TableError::BadFile(format!("bad entry #{i}"))),
            };
            probs.push(p);
        }
        JointTable::new(vars, probs)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            variables: self
                .vars
                .iter()
                .map(|(v, c)| VarFile {
                    name: v.name.clone(),
                    copy_index: v.copy_index,
                    cardinality: *c,
                })
                .collect(),
            probs: self
                .probs
                .iter()
                .map(|p| serde_json::Value::String(ratio_to_string(p)))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::qfrac;

    fn var(name: &str) -> NodeId {
        NodeId::plain(name)
    }

    fn ghz_like() -> JointTable {
        // (1/2)([000] + [111]) over A, B, C.
        let vars = vec![(var("A"), 2), (var("B"), 2), (var("C"), 2)];
        let mut probs = vec![Q::zero(); 8];
        probs[0] = qfrac(1, 2);
        probs[7] = qfrac(1, 2);
        JointTable::new(vars, probs).unwrap()
    }

    #[test]
    fn marginalize_to_full_set_is_identity() {
        let t = ghz_like();
        let full: BTreeSet<NodeId> = t.var_set();
        assert_eq!(t.marginalize(&full).unwrap(), t);
    }

    #[test]
    fn pair_marginal_of_perfect_correlation() {
        let t = ghz_like();
        let keep: BTreeSet<NodeId> = [var("A"), var("C")].into_iter().collect();
        let m = t.marginalize(&keep).unwrap();
        assert_eq!(*m.prob(&[0, 0]), qfrac(1, 2));
        assert_eq!(*m.prob(&[1, 1]), qfrac(1, 2));
        assert_eq!(*m.prob(&[0, 1]), Q::zero());
    }

    #[test]
    fn product_of_uniforms_is_uniform() {
        let a = JointTable::uniform(vec![(var("A"), 2)]);
        let b = JointTable::uniform(vec![(var("B"), 2)]);
        let ab = JointTable::product(&[a, b]).unwrap();
        assert!(ab.probs().iter().all(|p| *p == qfrac(1, 4)));
    }

    #[test]
    fn product_of_single_table_is_itself() {
        let t = ghz_like();
        assert_eq!(JointTable::product(std::slice::from_ref(&t)).unwrap(), t);
    }

    #[test]
    fn product_third_entries() {
        let third = |name: &str| {
            JointTable::new(vec![(var(name), 2)], vec![qfrac(2, 3), qfrac(1, 3)]).unwrap()
        };
        let t = JointTable::product(&[third("A"), third("B"), third("C")]).unwrap();
        assert_eq!(*t.prob(&[1, 1, 1]), qfrac(1, 27));
    }

    #[test]
    fn conditional_product_with_empty_z_is_product() {
        let a = JointTable::uniform(vec![(var("A"), 2)]);
        let b = JointTable::uniform(vec![(var("B"), 2)]);
        let joint = JointTable::conditional_product(&a, &b, &BTreeSet::new()).unwrap();
        assert_eq!(joint, JointTable::product(&[a, b]).unwrap());
    }

    #[test]
    fn conditional_product_restores_ci_joint() {
        // P(z) uniform, X = z, Y = z deterministically: X ⟂⟂ Y | Z holds.
        let vars_xz = vec![(var("X"), 2), (var("Z"), 2)];
        let vars_yz = vec![(var("Y"), 2), (var("Z"), 2)];
        let mut px = vec![Q::zero(); 4];
        px[index_of(&vars_xz, &[0, 0])] = qfrac(1, 2);
        px[index_of(&vars_xz, &[1, 1])] = qfrac(1, 2);
        let xz = JointTable::new(vars_xz, px).unwrap();
        let mut py = vec![Q::zero(); 4];
        py[index_of(&vars_yz, &[0, 0])] = qfrac(1, 2);
        py[index_of(&vars_yz, &[1, 1])] = qfrac(1, 2);
        let yz = JointTable::new(vars_yz, py).unwrap();
        let z: BTreeSet<NodeId> = [var("Z")].into_iter().collect();
        let joint = JointTable::conditional_product(&xz, &yz, &z).unwrap();
        assert_eq!(*joint.prob(&[0, 0, 0]), qfrac(1, 2));
        assert_eq!(*joint.prob(&[1, 1, 1]), qfrac(1, 2));
        // Marginalizing out X recovers the yz table exactly.
        let back = joint
            .marginalize(&[var("Y"), var("Z")].into_iter().collect())
            .unwrap();
        assert_eq!(back, yz);
    }

    #[test]
    fn entropy_of_point_mass_and_uniform() {
        let point =
            JointTable::point_mass(vec![(var("A"), 2)], &[1]).unwrap();
        assert_eq!(point.entropy(), 0.0);
        let uni = JointTable::uniform(vec![(var("A"), 2)]);
        assert!((uni.entropy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlator_sign_convention() {
        // 0 -> +1, 1 -> -1, so a point mass on 1 has correlator -1.
        let point = JointTable::point_mass(vec![(var("A"), 2)], &[1]).unwrap();
        let s: BTreeSet<NodeId> = [var("A")].into_iter().collect();
        assert_eq!(point.correlator(&s).unwrap(), q(-1));
    }

    #[test]
    fn json_round_trip_with_fraction_strings() {
        let t = ghz_like();
        let again = JointTable::from_json(&t.to_json()).unwrap();
        assert_eq!(t, again);
        let parsed = JointTable::from_json(
            r#"{"variables":[{"name":"A","cardinality":2}],"probs":["1/3","2/3"]}"#,
        )
        .unwrap();
        assert_eq!(*parsed.prob(&[0]), qfrac(1, 3));
    }

    #[test]
    fn rejects_unnormalized() {
        let err = JointTable::new(vec![(var("A"), 2)], vec![qfrac(1, 2), qfrac(1, 3)]);
        assert!(matches!(err, Err(TableError::NotNormalized(_))));
    }
}

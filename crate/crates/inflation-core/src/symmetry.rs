//! Symmetry groups of causal structures and their action on inequalities.
//!
//! The group is generated by observed-variable permutations extendable to DAG
//! automorphisms, together with per-variable value relabelings. For the
//! Triangle with binary variables this is the order-48 group (6 observed
//! permutations times 2^3 value flips).

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use thiserror::Error;

use crate::graph::{bits_iter, CausalStructure, GraphError, NodeId};
use crate::ineq::{Atom, Monomial, Poly, PolynomialInequality};
use crate::ratio::Q;
use crate::table::{JointTable, TableError};

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("group enumeration above {0} observed nodes is not supported")]
    TooLarge(usize),
}

const MAX_OBSERVED: usize = 8;

/// One symmetry: an observed-variable permutation (extendable to a DAG
/// automorphism) and a value permutation per observed variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupElement {
    pub perm: BTreeMap<NodeId, NodeId>,
    pub value_perms: BTreeMap<NodeId, Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    pub elements: Vec<GroupElement>,
}

impl SymmetryGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }
}

/// Enumerates the full symmetry group of a structure with finite observed
/// cardinalities.
pub fn symmetry_group(g: &CausalStructure) -> Result<SymmetryGroup, SymmetryError> {
    let observed: Vec<usize> = bits_iter(g.observed_bits()).collect();
    if observed.len() > MAX_OBSERVED {
        return Err(SymmetryError::TooLarge(observed.len()));
    }
    let latent: Vec<usize> = (0..g.len()).filter(|&i| !g.is_observed_ix(i)).collect();
    let mut obs_perms: Vec<BTreeMap<usize, usize>> = Vec::new();
    for perm in observed.iter().permutations(observed.len()) {
        let mapping: BTreeMap<usize, usize> =
            observed.iter().zip(perm.iter()).map(|(&a, &&b)| (a, b)).collect();
        // Cardinalities must match under the permutation.
        if mapping.iter().any(|(&a, &b)| g.cardinality_ix(a) != g.cardinality_ix(b)) {
            continue;
        }
        if extendable_to_automorphism(g, &mapping, &latent) {
            obs_perms.push(mapping);
        }
    }
    // Value permutations: the product over observed variables of all value
    // bijections of that variable.
    let mut value_choices: Vec<Vec<Vec<u32>>> = Vec::new();
    for &o in &observed {
        let card = g.cardinality_ix(o).unwrap() as usize;
        let perms: Vec<Vec<u32>> = (0..card as u32)
            .permutations(card)
            .collect();
        value_choices.push(perms);
    }
    let mut elements = Vec::new();
    for mapping in &obs_perms {
        for combo in value_choices.iter().multi_cartesian_product() {
            let perm: BTreeMap<NodeId, NodeId> = mapping
                .iter()
                .map(|(&a, &b)| (g.node(a).clone(), g.node(b).clone()))
                .collect();
            let value_perms: BTreeMap<NodeId, Vec<u32>> = observed
                .iter()
                .zip(combo.iter())
                .map(|(&o, vp)| (g.node(o).clone(), (*vp).clone()))
                .collect();
            elements.push(GroupElement { perm, value_perms });
        }
    }
    Ok(SymmetryGroup { elements })
}

/// Checks whether an observed permutation extends to a full automorphism by
/// backtracking over latent-node images.
fn extendable_to_automorphism(
    g: &CausalStructure,
    obs_map: &BTreeMap<usize, usize>,
    latent: &[usize],
) -> bool {
    fn consistent(g: &CausalStructure, map: &BTreeMap<usize, usize>) -> bool {
        for (&a, &fa) in map {
            for (&b, &fb) in map {
                let e1 = g.parent_bits(b) >> a & 1 == 1;
                let e2 = g.parent_bits(fb) >> fa & 1 == 1;
                if e1 != e2 {
                    return false;
                }
            }
        }
        true
    }
    fn rec(
        g: &CausalStructure,
        latent: &[usize],
        pos: usize,
        used: &mut BTreeSet<usize>,
        map: &mut BTreeMap<usize, usize>,
    ) -> bool {
        if pos == latent.len() {
            return consistent(g, map);
        }
        let l = latent[pos];
        for &t in latent {
            if used.contains(&t) {
                continue;
            }
            map.insert(l, t);
            used.insert(t);
            if rec(g, latent, pos + 1, used, map) {
                map.remove(&l);
                used.remove(&t);
                return true;
            }
            used.remove(&t);
            map.remove(&l);
        }
        false
    }
    let mut map = obs_map.clone();
    rec(g, latent, 0, &mut BTreeSet::new(), &mut map)
}

impl GroupElement {
    /// Transforms an atom: variables are renamed through the permutation and
    /// valuations pushed through the value permutations. A binary correlator
    /// picks up a sign flip per variable whose values are swapped.
    fn apply_atom(&self, a: &Atom) -> (Atom, i64) {
        match a {
            Atom::Prob { vars, vals } => {
                let pairs: Vec<(NodeId, u32)> = vars
                    .iter()
                    .zip(vals)
                    .map(|(v, &x)| {
                        let nv = self.perm.get(v).cloned().unwrap_or_else(|| v.clone());
                        let nx = self
                            .value_perms
                            .get(v)
                            .map(|p| p[x as usize])
                            .unwrap_or(x);
                        (nv, nx)
                    })
                    .collect();
                (Atom::prob(pairs), 1)
            }
            Atom::Corr { vars } => {
                let mut sign = 1i64;
                let new_vars: Vec<NodeId> = vars
                    .iter()
                    .map(|v| {
                        if let Some(p) = self.value_perms.get(v) {
                            if p == &[1, 0] {
                                sign = -sign;
                            }
                        }
                        self.perm.get(v).cloned().unwrap_or_else(|| v.clone())
                    })
                    .collect();
                (Atom::corr(new_vars), sign)
            }
        }
    }

    pub fn apply(&self, ineq: &PolynomialInequality) -> PolynomialInequality {
        let mut out = Poly::zero();
        for (c, m) in &ineq.terms {
            let mut mono = Monomial::one();
            let mut sign = 1i64;
            for (a, e) in &m.factors {
                let (na, s) = self.apply_atom(a);
                if e % 2 != 0 {
                    sign *= s;
                }
                mono = mono.mul(&Monomial { factors: vec![(na, *e)] });
            }
            out.add_term(mono, Q::from_integer(c * sign));
        }
        PolynomialInequality::from_poly(&out)
    }

    /// Transforms a joint distribution: the returned table assigns to the
    /// permuted variables the relabeled values.
    pub fn apply_table(&self, t: &JointTable) -> Result<JointTable, TableError> {
        let vars = t.vars().to_vec();
        let new_vars: Vec<(NodeId, u32)> = vars
            .iter()
            .map(|(v, c)| (self.perm.get(v).cloned().unwrap_or_else(|| v.clone()), *c))
            .collect();
        let mut sorted = new_vars.clone();
        sorted.sort();
        let size = t.len();
        let mut probs = vec![<Q as num::Zero>::zero(); size];
        for (val, p) in t.iter() {
            let moved: Vec<u32> = vars
                .iter()
                .zip(&val)
                .map(|((v, _), &x)| self.value_perms.get(v).map(|vp| vp[x as usize]).unwrap_or(x))
                .collect();
            // Entry lands at the permuted variable positions.
            let mut assignment: BTreeMap<NodeId, u32> = BTreeMap::new();
            for ((v, _), x) in new_vars.iter().zip(moved) {
                assignment.insert(v.clone(), x);
            }
            let target: Vec<u32> = sorted.iter().map(|(v, _)| assignment[v]).collect();
            let ix = crate::table::index_of(&sorted, &target);
            probs[ix] += p;
        }
        JointTable::new(sorted, probs)
    }

    pub fn inverse(&self) -> GroupElement {
        let perm: BTreeMap<NodeId, NodeId> =
            self.perm.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        // Inverse value permutation is attached to the image variable.
        let mut value_perms = BTreeMap::new();
        for (v, p) in &self.value_perms {
            let image = self.perm.get(v).cloned().unwrap_or_else(|| v.clone());
            let mut inv = vec![0u32; p.len()];
            for (i, &x) in p.iter().enumerate() {
                inv[x as usize] = i as u32;
            }
            value_perms.insert(image, inv);
        }
        GroupElement { perm, value_perms }
    }
}

/// The orbit of an inequality under the group, as a set of canonical forms.
pub fn orbit(ineq: &PolynomialInequality, group: &SymmetryGroup) -> BTreeSet<PolynomialInequality> {
    group.elements.iter().map(|e| e.apply(ineq)).collect()
}

/// The lexicographically smallest orbit member, a canonical representative for
/// symmetry-aware deduplication.
pub fn orbit_canonical(
    ineq: &PolynomialInequality,
    group: &SymmetryGroup,
) -> PolynomialInequality {
    orbit(ineq, group).into_iter().next().expect("orbit is nonempty")
}

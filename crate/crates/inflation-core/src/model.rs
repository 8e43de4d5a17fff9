//! Causal models: a causal structure plus a conditional probability kernel per
//! node, with exact forward simulation and rational random-model sampling.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::graph::{bits_iter, CausalStructure, GraphError, NodeId};
use crate::inflation::InflationStructure;
use crate::ratio::{q, Q};
use crate::table::{valuation_of, JointTable, TableError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("node `{0}` has no kernel")]
    MissingKernel(String),
    #[error("latent node `{0}` has no declared cardinality")]
    MissingLatentCardinality(String),
    #[error("kernel for `{0}` has the wrong shape: expected {1} entries, found {2}")]
    KernelShape(String, usize, usize),
    #[error("kernel column for `{0}` given parents {1:?} does not sum to 1")]
    KernelColumn(String, Vec<u32>),
}

/// The conditional distribution of one node given its parents. Entries are
/// indexed row-major by the parent valuation (in `parent_order`), then by the
/// node's own value.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub parent_order: Vec<NodeId>,
    /// `probs[parent_index * cardinality + value]`
    pub probs: Vec<Q>,
}

/// A causal structure together with causal parameters and explicit latent
/// cardinalities.
#[derive(Clone)]
pub struct CausalModel {
    pub structure: CausalStructure,
    pub latent_cardinality: BTreeMap<NodeId, u32>,
    pub kernels: BTreeMap<NodeId, Kernel>,
}

impl CausalModel {
    fn cardinality_of(&self, ix: usize) -> Result<u32, ModelError> {
        let id = self.structure.node(ix);
        match self.structure.cardinality_ix(ix) {
            Some(c) => Ok(c),
            None => self
                .latent_cardinality
                .get(id)
                .copied()
                .ok_or_else(|| ModelError::MissingLatentCardinality(id.label())),
        }
    }

    /// Checks kernel shapes and that every column is a distribution.
    pub fn validate(&self) -> Result<(), ModelError> {
        for ix in 0..self.structure.len() {
            let id = self.structure.node(ix);
            let kernel =
                self.kernels.get(id).ok_or_else(|| ModelError::MissingKernel(id.label()))?;
            let card = self.cardinality_of(ix)? as usize;
            let parent_vars = self.parent_vars(ix)?;
            let cols: usize = parent_vars.iter().map(|(_, c)| *c as usize).product();
            if kernel.probs.len() != cols * card {
                return Err(ModelError::KernelShape(id.label(), cols * card, kernel.probs.len()));
            }
            for col in 0..cols {
                let mut sum = Q::zero();
                for v in 0..card {
                    let p = &kernel.probs[col * card + v];
                    if p.is_negative() {
                        return Err(ModelError::KernelColumn(
                            id.label(),
                            valuation_of(&parent_vars, col),
                        ));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    return Err(ModelError::KernelColumn(
                        id.label(),
                        valuation_of(&parent_vars, col),
                    ));
                }
            }
        }
        Ok(())
    }

    fn parent_vars(&self, ix: usize) -> Result<Vec<(NodeId, u32)>, ModelError> {
        let kernel = self
            .kernels
            .get(self.structure.node(ix))
            .ok_or_else(|| ModelError::MissingKernel(self.structure.node(ix).label()))?;
        kernel
            .parent_order
            .iter()
            .map(|p| {
                let pix = self.structure.node_index(p)?;
                Ok((p.clone(), self.cardinality_of(pix)?))
            })
            .collect()
    }

    /// Exact forward computation: the product of kernels in topological order,
    /// marginalized over the latent nodes. Returns the joint over the observed
    /// nodes in canonical order.
    pub fn simulate(&self) -> Result<JointTable, ModelError> {
        self.validate()?;
        let g = &self.structure;
        let n = g.len();
        let cards: Vec<u32> =
            (0..n).map(|ix| self.cardinality_of(ix)).collect::<Result<_, _>>()?;
        let all_vars: Vec<(NodeId, u32)> =
            (0..n).map(|ix| (g.node(ix).clone(), cards[ix])).collect();
        let size: usize = cards.iter().map(|&c| c as usize).product();
        let mut joint = Vec::with_capacity(size);
        let kernel_info: Vec<(&Kernel, Vec<usize>, u32)> = (0..n)
            .map(|ix| {
                let kernel = &self.kernels[g.node(ix)];
                let parent_ixs: Vec<usize> = kernel
                    .parent_order
                    .iter()
                    .map(|p| g.node_index(p).expect("validated"))
                    .collect();
                (kernel, parent_ixs, cards[ix])
            })
            .collect();
        for flat in 0..size {
            let val = valuation_of(&all_vars, flat);
            let mut p = Q::one();
            for (ix, (kernel, parent_ixs, card)) in kernel_info.iter().enumerate() {
                let mut col = 0usize;
                for &pix in parent_ixs {
                    col = col * cards[pix] as usize + val[pix] as usize;
                }
                let entry = &kernel.probs[col * *card as usize + val[ix] as usize];
                if entry.is_zero() {
                    p = Q::zero();
                    break;
                }
                p *= entry;
            }
            joint.push(p);
        }
        let full = JointTable::new(all_vars, joint)?;
        let observed = g.observed_nodes().into_iter().collect();
        Ok(full.marginalize(&observed)?)
    }
}

/// Samples a random causal model. Kernel columns are drawn approximately
/// Dirichlet-uniform, then snapped to exact rationals on a dyadic grid and
/// renormalized so the model is exact.
pub fn random_model<R: Rng>(
    structure: &CausalStructure,
    latent_cardinality: u32,
    rng: &mut R,
) -> CausalModel {
    const GRID: i64 = 1 << 16;
    let mut latent_map = BTreeMap::new();
    for id in structure.latent_nodes() {
        latent_map.insert(id, latent_cardinality);
    }
    let card_of = |ix: usize| structure.cardinality_ix(ix).unwrap_or(latent_cardinality);
    let mut kernels = BTreeMap::new();
    for ix in 0..structure.len() {
        let id = structure.node(ix).clone();
        let parent_order: Vec<NodeId> =
            bits_iter(structure.parent_bits(ix)).map(|p| structure.node(p).clone()).collect();
        let card = card_of(ix) as usize;
        let cols: usize =
            bits_iter(structure.parent_bits(ix)).map(|p| card_of(p) as usize).product();
        let mut probs = Vec::with_capacity(cols * card);
        for _ in 0..cols {
            // Exponential spacings give a uniform point on the simplex.
            let mut ws: Vec<f64> = (0..card)
                .map(|_| -(rng.gen_range(1e-9..1.0f64)).ln())
                .collect();
            let total: f64 = ws.iter().sum();
            ws.iter_mut().for_each(|w| *w /= total);
            let mut ints: Vec<i64> =
                ws.iter().map(|w| ((w * GRID as f64).round() as i64).max(1)).collect();
            let sum: i64 = ints.iter().sum();
            // Repair rounding drift on the largest entry, keeping positivity.
            let largest = (0..card).max_by_key(|&i| ints[i]).unwrap();
            ints[largest] += GRID - sum;
            debug_assert!(ints[largest] > 0);
            let denom: i64 = ints.iter().sum();
            for v in ints {
                probs.push(Q::new(v.into(), denom.into()));
            }
        }
        kernels.insert(id, Kernel { parent_order, probs });
    }
    CausalModel { structure: structure.clone(), latent_cardinality: latent_map, kernels }
}

/// Transfers a model on the original structure to its inflation: every copy
/// depends on its parents exactly as its original does, with parents matched
/// through the copy-index-erasing projection.
pub fn inflate_model(
    inf: &InflationStructure,
    model: &CausalModel,
) -> Result<CausalModel, ModelError> {
    let inflated = inf.inflated();
    let mut latent_map = BTreeMap::new();
    for id in inflated.latent_nodes() {
        let orig = inf.project(&id)?;
        let card = model
            .latent_cardinality
            .get(&orig)
            .copied()
            .ok_or_else(|| ModelError::MissingLatentCardinality(orig.label()))?;
        latent_map.insert(id, card);
    }
    let mut kernels = BTreeMap::new();
    for ix in 0..inflated.len() {
        let id = inflated.node(ix).clone();
        let orig = inf.project(&id)?;
        let orig_kernel =
            model.kernels.get(&orig).ok_or_else(|| ModelError::MissingKernel(orig.label()))?;
        // Order the inflated parents so they project onto the original kernel's
        // parent order; the projection restricted to parents is a bijection.
        let inflated_parents: Vec<NodeId> =
            bits_iter(inflated.parent_bits(ix)).map(|p| inflated.node(p).clone()).collect();
        let mut parent_order = Vec::with_capacity(inflated_parents.len());
        for want in &orig_kernel.parent_order {
            let found = inflated_parents
                .iter()
                .find(|p| inf.project(p).map(|b| &b == want).unwrap_or(false))
                .ok_or_else(|| ModelError::MissingKernel(id.label()))?;
            parent_order.push(found.clone());
        }
        kernels.insert(id, Kernel { parent_order, probs: orig_kernel.probs.clone() });
    }
    Ok(CausalModel { structure: inflated.clone(), latent_cardinality: latent_map, kernels })
}

/// Builds a kernel from a closure giving each column distribution.
pub fn kernel_from_fn(
    parent_order: Vec<NodeId>,
    parent_cards: &[u32],
    cardinality: u32,
    f: impl Fn(&[u32]) -> Vec<Q>,
) -> Kernel {
    let vars: Vec<(NodeId, u32)> = parent_order
        .iter()
        .cloned()
        .zip(parent_cards.iter().copied())
        .collect();
    let cols: usize = parent_cards.iter().map(|&c| c as usize).product();
    let mut probs = Vec::with_capacity(cols * cardinality as usize);
    for col in 0..cols {
        let valuation = valuation_of(&vars, col);
        let column = f(&valuation);
        assert_eq!(column.len(), cardinality as usize);
        probs.extend(column);
    }
    Kernel { parent_order, probs }
}

/// Deterministic kernel: the node copies a function of its parents.
pub fn deterministic_kernel(
    parent_order: Vec<NodeId>,
    parent_cards: &[u32],
    cardinality: u32,
    f: impl Fn(&[u32]) -> u32,
) -> Kernel {
    kernel_from_fn(parent_order, parent_cards, cardinality, |val| {
        let mut col = vec![Q::zero(); cardinality as usize];
        col[f(val) as usize] = q(1);
        col
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeDecl, NodeId};
    use crate::ratio::qfrac;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn root_copy_chain() -> CausalModel {
        // Latent U uniform over 2 values; A copies U; B copies A.
        let g = CausalStructure::new(
            vec![
                NodeDecl::observed(NodeId::plain("A"), 2),
                NodeDecl::observed(NodeId::plain("B"), 2),
                NodeDecl::latent(NodeId::plain("U")),
            ],
            &[
                (NodeId::plain("U"), NodeId::plain("A")),
                (NodeId::plain("A"), NodeId::plain("B")),
            ],
        )
        .unwrap();
        let mut kernels = BTreeMap::new();
        kernels.insert(
            NodeId::plain("U"),
            Kernel { parent_order: vec![], probs: vec![qfrac(1, 2), qfrac(1, 2)] },
        );
        kernels.insert(
            NodeId::plain("A"),
            deterministic_kernel(vec![NodeId::plain("U")], &[2], 2, |v| v[0]),
        );
        kernels.insert(
            NodeId::plain("B"),
            deterministic_kernel(vec![NodeId::plain("A")], &[2], 2, |v| v[0]),
        );
        CausalModel {
            structure: g,
            latent_cardinality: [(NodeId::plain("U"), 2)].into_iter().collect(),
            kernels,
        }
    }

    #[test]
    fn deterministic_copies_give_perfect_correlation() {
        let joint = root_copy_chain().simulate().unwrap();
        assert_eq!(*joint.prob(&[0, 0]), qfrac(1, 2));
        assert_eq!(*joint.prob(&[1, 1]), qfrac(1, 2));
        assert_eq!(*joint.prob(&[0, 1]), Q::zero());
    }

    #[test]
    fn random_models_are_exactly_normalized() {
        let model = root_copy_chain();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let random = random_model(&model.structure, 4, &mut rng);
        random.validate().unwrap();
        random.simulate().unwrap();
    }
}

//! Causal structures: DAGs whose nodes are split into observed and latent
//! variables, with the graph predicates the rest of the crate consumes
//! (ancestry, induced and ancestral subgraphs, d-separation, ancestral
//! independence).
//!
//! Structures are immutable after construction and all operations are pure.
//! Node sets are represented internally as `u128` bitmasks, which caps a
//! structure at 128 nodes; every bundled fixture and every structure this
//! toolkit is meant for is far below that.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_NODES: usize = 128;

/// Bitmask over node indices of one structure.
pub type Bits = u128;

/// A node label: a name plus an optional copy index. Original structures carry
/// no copy indices; inflations tag each copy of a node `X` as `X1, X2, ...`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub name: String,
    pub copy_index: Option<u32>,
}

impl NodeId {
    pub fn plain(name: &str) -> Self {
        NodeId { name: name.to_string(), copy_index: None }
    }

    pub fn copy(name: &str, index: u32) -> Self {
        NodeId { name: name.to_string(), copy_index: Some(index) }
    }

    /// The node stripped of its copy index.
    pub fn base(&self) -> NodeId {
        NodeId { name: self.name.clone(), copy_index: None }
    }

    pub fn label(&self) -> String {
        match self.copy_index {
            Some(i) => format!("{}{}", self.name, i),
            None => self.name.clone(),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("edge endpoint `{0}` is not a declared node")]
    UnknownEndpoint(String),
    #[error("the directed graph has a cycle")]
    Cyclic,
    #[error("observed node `{0}` needs a cardinality of at least 2")]
    BadCardinality(String),
    #[error("latent node `{0}` must not carry a cardinality")]
    LatentCardinality(String),
    #[error("node sets must be pairwise disjoint but share `{0}`")]
    OverlappingSets(String),
    #[error("structures with more than {MAX_NODES} nodes are not supported")]
    TooLarge,
    #[error("invalid graph file: {0}")]
    BadFile(String),
}

/// A DAG with an observed/latent node partition and per-observed-node
/// cardinalities.
#[derive(Clone, PartialEq, Eq)]
pub struct CausalStructure {
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    parents: Vec<Bits>,
    children: Vec<Bits>,
    observed: Bits,
    cardinality: Vec<Option<u32>>,
}

/// One node declaration for [`CausalStructure::new`].
#[derive(Clone, Debug)]
pub struct NodeDecl {
    pub id: NodeId,
    pub observed: bool,
    pub cardinality: Option<u32>,
}

impl NodeDecl {
    pub fn observed(id: NodeId, cardinality: u32) -> Self {
        NodeDecl { id, observed: true, cardinality: Some(cardinality) }
    }

    pub fn latent(id: NodeId) -> Self {
        NodeDecl { id, observed: false, cardinality: None }
    }
}

pub(crate) fn bits_iter(bits: Bits) -> impl Iterator<Item = usize> {
    let mut rest = bits;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

impl CausalStructure {
    /// Builds and validates a structure. Nodes are sorted by `(name,
    /// copy_index)`; that order is the canonical node order everywhere.
    pub fn new(
        mut decls: Vec<NodeDecl>,
        edges: &[(NodeId, NodeId)],
    ) -> Result<CausalStructure, GraphError> {
        if decls.len() > MAX_NODES {
            return Err(GraphError::TooLarge);
        }
        decls.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, d) in decls.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(d.id.label()));
            }
        }
        let n = decls.len();
        let mut parents = vec![0 as Bits; n];
        let mut children = vec![0 as Bits; n];
        for (from, to) in edges {
            let &f = index.get(from).ok_or_else(|| GraphError::UnknownEndpoint(from.label()))?;
            let &t = index.get(to).ok_or_else(|| GraphError::UnknownEndpoint(to.label()))?;
            parents[t] |= 1 << f;
            children[f] |= 1 << t;
        }
        let mut observed: Bits = 0;
        let mut cardinality = vec![None; n];
        for (i, d) in decls.iter().enumerate() {
            if d.observed {
                observed |= 1 << i;
                match d.cardinality {
                    Some(c) if c >= 2 => cardinality[i] = Some(c),
                    _ => return Err(GraphError::BadCardinality(d.id.label())),
                }
            } else if d.cardinality.is_some() {
                return Err(GraphError::LatentCardinality(d.id.label()));
            }
        }
        let g = CausalStructure {
            nodes: decls.into_iter().map(|d| d.id).collect(),
            index,
            parents,
            children,
            observed,
            cardinality,
        };
        g.topological_order().ok_or(GraphError::Cyclic)?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, ix: usize) -> &NodeId {
        &self.nodes[ix]
    }

    pub fn node_index(&self, id: &NodeId) -> Result<usize, GraphError> {
        self.index.get(id).copied().ok_or_else(|| GraphError::UnknownNode(id.label()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn is_observed_ix(&self, ix: usize) -> bool {
        self.observed >> ix & 1 == 1
    }

    pub fn is_observed(&self, id: &NodeId) -> Result<bool, GraphError> {
        Ok(self.is_observed_ix(self.node_index(id)?))
    }

    pub fn observed_bits(&self) -> Bits {
        self.observed
    }

    /// Observed nodes in canonical order.
    pub fn observed_nodes(&self) -> Vec<NodeId> {
        bits_iter(self.observed).map(|i| self.nodes[i].clone()).collect()
    }

    pub fn latent_nodes(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&i| !self.is_observed_ix(i))
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    pub fn cardinality_ix(&self, ix: usize) -> Option<u32> {
        self.cardinality[ix]
    }

    pub fn cardinality(&self, id: &NodeId) -> Result<Option<u32>, GraphError> {
        Ok(self.cardinality[self.node_index(id)?])
    }

    pub fn parent_bits(&self, ix: usize) -> Bits {
        self.parents[ix]
    }

    pub fn child_bits(&self, ix: usize) -> Bits {
        self.children[ix]
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for t in 0..self.len() {
            for f in bits_iter(self.parents[t]) {
                out.push((self.nodes[f].clone(), self.nodes[t].clone()));
            }
        }
        out.sort();
        out
    }

    pub fn set_to_bits(&self, set: &BTreeSet<NodeId>) -> Result<Bits, GraphError> {
        let mut bits = 0;
        for id in set {
            bits |= 1 << self.node_index(id)?;
        }
        Ok(bits)
    }

    pub fn bits_to_set(&self, bits: Bits) -> BTreeSet<NodeId> {
        bits_iter(bits).map(|i| self.nodes[i].clone()).collect()
    }

    /// Parents of a single node.
    pub fn parents(&self, x: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        let ix = self.node_index(x)?;
        Ok(self.bits_to_set(self.parents[ix]))
    }

    pub fn children(&self, x: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        let ix = self.node_index(x)?;
        Ok(self.bits_to_set(self.children[ix]))
    }

    /// Least fixed point of the parent closure, containing `s` itself.
    pub fn ancestors_bits(&self, s: Bits) -> Bits {
        let mut acc = s;
        loop {
            let mut next = acc;
            for i in bits_iter(acc) {
                next |= self.parents[i];
            }
            if next == acc {
                return acc;
            }
            acc = next;
        }
    }

    pub fn ancestors(&self, s: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, GraphError> {
        Ok(self.bits_to_set(self.ancestors_bits(self.set_to_bits(s)?)))
    }

    /// The subgraph induced by `keep`: nodes in `keep` and edges with both
    /// endpoints inside, with kind and cardinality restricted.
    pub fn induced_subgraph_bits(&self, keep: Bits) -> CausalStructure {
        let decls: Vec<NodeDecl> = bits_iter(keep)
            .map(|i| NodeDecl {
                id: self.nodes[i].clone(),
                observed: self.is_observed_ix(i),
                cardinality: self.cardinality[i],
            })
            .collect();
        let mut edges = Vec::new();
        for t in bits_iter(keep) {
            for f in bits_iter(self.parents[t] & keep) {
                edges.push((self.nodes[f].clone(), self.nodes[t].clone()));
            }
        }
        CausalStructure::new(decls, &edges).expect("induced subgraph of a valid structure")
    }

    /// The subgraph induced by the ancestry of `s`.
    pub fn ancestral_subgraph(&self, s: &BTreeSet<NodeId>) -> Result<CausalStructure, GraphError> {
        let bits = self.ancestors_bits(self.set_to_bits(s)?);
        Ok(self.induced_subgraph_bits(bits))
    }

    /// Kahn topological order; `None` if cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg: Vec<u32> = (0..n).map(|i| self.parents[i].count_ones()).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop() {
            order.push(i);
            for c in bits_iter(self.children[i]) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// d-separation of `x` and `y` given `z`, decided on the moralized
    /// ancestral graph of `x ∪ y ∪ z` by undirected reachability.
    pub fn d_separated(
        &self,
        x: &BTreeSet<NodeId>,
        y: &BTreeSet<NodeId>,
        z: &BTreeSet<NodeId>,
    ) -> Result<bool, GraphError> {
        let xb = self.set_to_bits(x)?;
        let yb = self.set_to_bits(y)?;
        let zb = self.set_to_bits(z)?;
        for (a, b) in [(xb, yb), (xb, zb), (yb, zb)] {
            if a & b != 0 {
                let shared = (a & b).trailing_zeros() as usize;
                return Err(GraphError::OverlappingSets(self.nodes[shared].label()));
            }
        }
        Ok(self.d_separated_bits(xb, yb, zb))
    }

    pub(crate) fn d_separated_bits(&self, x: Bits, y: Bits, z: Bits) -> bool {
        let anc = self.ancestors_bits(x | y | z);
        // Moralize: undirected parent edges plus edges between co-parents.
        let n = self.len();
        let mut adj = vec![0 as Bits; n];
        for t in bits_iter(anc) {
            let ps = self.parents[t] & anc;
            for f in bits_iter(ps) {
                adj[f] |= 1 << t;
                adj[t] |= 1 << f;
            }
            for f in bits_iter(ps) {
                adj[f] |= ps & !(1 << f);
            }
        }
        // Undirected reachability from x, avoiding z.
        let blocked = z;
        let mut reach = x & !blocked;
        loop {
            let mut next = reach;
            for i in bits_iter(reach) {
                next |= adj[i] & anc & !blocked;
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        reach & y == 0
    }

    /// True iff the ancestries of the given parts are pairwise disjoint.
    pub fn ancestrally_independent(&self, parts: &[BTreeSet<NodeId>]) -> Result<bool, GraphError> {
        let mut bits = Vec::with_capacity(parts.len());
        for p in parts {
            bits.push(self.set_to_bits(p)?);
        }
        for i in 0..bits.len() {
            for j in i + 1..bits.len() {
                if bits[i] & bits[j] != 0 {
                    let shared = (bits[i] & bits[j]).trailing_zeros() as usize;
                    return Err(GraphError::OverlappingSets(self.nodes[shared].label()));
                }
            }
        }
        let anc: Vec<Bits> = bits.iter().map(|&b| self.ancestors_bits(b)).collect();
        for i in 0..anc.len() {
            for j in i + 1..anc.len() {
                if anc[i] & anc[j] != 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

impl fmt::Debug for CausalStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CausalStructure[")?;
        for (i, id) in self.nodes.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}{}", id, if self.is_observed_ix(i) { "" } else { "*" })?;
        }
        write!(f, "; ")?;
        for (i, (from, to)) in self.edges().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{from}->{to}")?;
        }
        write!(f, "]")
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NodeFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    copy_index: Option<u32>,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    cardinality: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeFile>,
    edges: Vec<(String, String)>,
}

impl CausalStructure {
    /// Parses the JSON graph format:
    /// `{"nodes":[{"name","copy_index"?,"kind":"observed"|"latent","cardinality"?}],
    ///   "edges":[[from,to],...]}` where edge endpoints are node labels
    /// (`name` followed by the copy index, if any).
    pub fn from_json(text: &str) -> Result<CausalStructure, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::BadFile(e.to_string()))?;
        let mut decls = Vec::new();
        let mut by_label: BTreeMap<String, NodeId> = BTreeMap::new();
        for n in &file.nodes {
            let id = NodeId { name: n.name.clone(), copy_index: n.copy_index };
            let observed = match n.kind.as_str() {
                "observed" => true,
                "latent" => false,
                other => {
                    return Err(GraphError::BadFile(format!(
                        "node `{}` has unknown kind `{other}`",
                        id.label()
                    )))
                }
            };
            if by_label.insert(id.label(), id.clone()).is_some() {
                return Err(GraphError::DuplicateNode(id.label()));
            }
            decls.push(NodeDecl { id, observed, cardinality: n.cardinality });
        }
        let mut edges = Vec::new();
        for (from, to) in &file.edges {
            let f = by_label.get(from).ok_or_else(|| GraphError::UnknownEndpoint(from.clone()))?;
            let t = by_label.get(to).ok_or_else(|| GraphError::UnknownEndpoint(to.clone()))?;
            edges.push((f.clone(), t.clone()));
        }
        CausalStructure::new(decls, &edges)
    }

    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, id)| NodeFile {
                name: id.name.clone(),
                copy_index: id.copy_index,
                kind: if self.is_observed_ix(i) { "observed" } else { "latent" }.to_string(),
                cardinality: self.cardinality[i],
            })
            .collect();
        let edges = self.edges().iter().map(|(f, t)| (f.label(), t.label())).collect();
        serde_json::to_string_pretty(&GraphFile { nodes, edges }).expect("serializable")
    }
}

/// Convenience for building node sets in tests and fixtures.
pub fn node_set(ids: &[NodeId]) -> BTreeSet<NodeId> {
    ids.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> CausalStructure {
        // U -> A -> B with U latent.
        CausalStructure::new(
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
        .unwrap()
    }

    #[test]
    fn rejects_cycles() {
        let err = CausalStructure::new(
            vec![
                NodeDecl::observed(NodeId::plain("A"), 2),
                NodeDecl::observed(NodeId::plain("B"), 2),
            ],
            &[
                (NodeId::plain("A"), NodeId::plain("B")),
                (NodeId::plain("B"), NodeId::plain("A")),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Cyclic));
    }

    #[test]
    fn rejects_missing_cardinality() {
        let err = CausalStructure::new(
            vec![NodeDecl { id: NodeId::plain("A"), observed: true, cardinality: None }],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::BadCardinality(_)));
    }

    #[test]
    fn ancestors_of_empty_set_is_empty() {
        let g = chain();
        assert!(g.ancestors(&BTreeSet::new()).unwrap().is_empty());
    }

    #[test]
    fn ancestors_follow_parents() {
        let g = chain();
        let anc = g.ancestors(&node_set(&[NodeId::plain("B")])).unwrap();
        assert_eq!(anc, node_set(&[NodeId::plain("A"), NodeId::plain("B"), NodeId::plain("U")]));
    }

    #[test]
    fn parents_of_unknown_node_errors() {
        let g = chain();
        assert!(g.parents(&NodeId::plain("Z")).is_err());
    }

    #[test]
    fn d_separation_overlap_errors() {
        let g = chain();
        let a = node_set(&[NodeId::plain("A")]);
        assert!(g.d_separated(&a, &a, &BTreeSet::new()).is_err());
        assert!(g
            .ancestrally_independent(&[a.clone(), a.clone()])
            .is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = chain();
        let again = CausalStructure::from_json(&g.to_json()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn ancestral_subgraph_of_everything_is_identity() {
        let g = chain();
        let all: BTreeSet<NodeId> = g.nodes().iter().cloned().collect();
        assert_eq!(g.ancestral_subgraph(&all).unwrap(), g);
    }
}

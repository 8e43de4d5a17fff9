//! Inflation analysis: verifying that one structure inflates another, and
//! enumerating the injectable / ai-expressible / expressible sets that link
//! distributions on the original structure to marginals on the inflation.
//!
//! An inflation is verified by the local criterion: for every node of the
//! inflated structure, erasing copy indices must put its parent set in
//! bijection with the parent set of its original. Injectable sets are the
//! cliques of the injection graph; ai-expressible sets come from maximal
//! cliques of the ai-expressibility graph; general expressible sets are found
//! by a bounded search over conditional-product and marginalization recipes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::graph::{bits_iter, Bits, CausalStructure, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum InflationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("inflated node `{0}` has no original counterpart named `{1}`")]
    NoOriginal(String, String),
    #[error("node `{0}` is {1} but its original is {2}")]
    KindMismatch(String, &'static str, &'static str),
    #[error("node `{0}` has cardinality {1:?} but its original has {2:?}")]
    CardinalityMismatch(String, Option<u32>, Option<u32>),
    #[error("parentage mismatch at `{0}`: parents project to {1} but the original's parents are {2}")]
    ParentMismatch(String, String, String),
    #[error("set {0} is not observed in the inflated structure")]
    NotObserved(String),
}

/// A verified inflation: the original structure, the inflated structure, and
/// the copy-index-erasing projection between them.
#[derive(Clone)]
pub struct InflationStructure {
    original: CausalStructure,
    inflated: CausalStructure,
    /// `projection[i]` = index in the original of inflated node `i`.
    projection: Vec<usize>,
}

fn fmt_set(set: &BTreeSet<NodeId>) -> String {
    let labels: Vec<String> = set.iter().map(|n| n.label()).collect();
    format!("{{{}}}", labels.join(" "))
}

/// Checks the local inflation condition at every inflated node and builds the
/// projection map. Fails with the offending node on any mismatch.
pub fn verify_inflation(
    original: &CausalStructure,
    inflated: &CausalStructure,
) -> Result<InflationStructure, InflationError> {
    let mut projection = Vec::with_capacity(inflated.len());
    for ix in 0..inflated.len() {
        let id = inflated.node(ix);
        let base = id.base();
        let oix = original
            .node_index(&base)
            .map_err(|_| InflationError::NoOriginal(id.label(), base.label()))?;
        let kind = |obs: bool| if obs { "observed" } else { "latent" };
        if inflated.is_observed_ix(ix) != original.is_observed_ix(oix) {
            return Err(InflationError::KindMismatch(
                id.label(),
                kind(inflated.is_observed_ix(ix)),
                kind(original.is_observed_ix(oix)),
            ));
        }
        if inflated.cardinality_ix(ix) != original.cardinality_ix(oix) {
            return Err(InflationError::CardinalityMismatch(
                id.label(),
                inflated.cardinality_ix(ix),
                original.cardinality_ix(oix),
            ));
        }
        projection.push(oix);
    }
    // Local condition: the projection restricted to parents(X_i) must be a
    // bijection onto parents(X).
    for ix in 0..inflated.len() {
        let projected: BTreeSet<usize> =
            bits_iter(inflated.parent_bits(ix)).map(|p| projection[p]).collect();
        let expected: BTreeSet<usize> = bits_iter(original.parent_bits(projection[ix])).collect();
        let distinct_ok = projected.len() == bits_iter(inflated.parent_bits(ix)).count();
        if !distinct_ok || projected != expected {
            let got: BTreeSet<NodeId> = bits_iter(inflated.parent_bits(ix))
                .map(|p| inflated.node(p).base())
                .collect();
            let want: BTreeSet<NodeId> =
                expected.iter().map(|&p| original.node(p).clone()).collect();
            return Err(InflationError::ParentMismatch(
                inflated.node(ix).label(),
                fmt_set(&got),
                fmt_set(&want),
            ));
        }
    }
    Ok(InflationStructure { original: original.clone(), inflated: inflated.clone(), projection })
}

/// An observed set of the inflation whose ancestry projects injectively onto
/// the original; its marginal in any inflation model equals the original
/// marginal on the `image`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InjectableSet {
    pub members: BTreeSet<NodeId>,
    pub image: BTreeSet<NodeId>,
}

impl fmt::Debug for InjectableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_set(&self.members))
    }
}

/// A union of pairwise ancestrally independent injectable sets; its marginal
/// factorizes into the block marginals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct AiExpressibleSet {
    pub members: BTreeSet<NodeId>,
    pub blocks: Vec<InjectableSet>,
}

/// A recipe computing the marginal of an expressible set from injectable
/// marginals via verified conditional products and marginalization.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Recipe {
    Injectable(InjectableSet),
    /// Joint on `x ∪ y ∪ z` from the recipes for `x ∪ z` and `y ∪ z`, justified
    /// by the d-separation `x ⟂d y | z` in the inflated structure.
    CondProduct {
        x: BTreeSet<NodeId>,
        y: BTreeSet<NodeId>,
        z: BTreeSet<NodeId>,
        left: Box<Recipe>,
        right: Box<Recipe>,
    },
    Marginalize {
        keep: BTreeSet<NodeId>,
        inner: Box<Recipe>,
    },
}

impl Recipe {
    pub fn members(&self) -> BTreeSet<NodeId> {
        match self {
            Recipe::Injectable(s) => s.members.clone(),
            Recipe::CondProduct { x, y, z, .. } => {
                x.iter().chain(y.iter()).chain(z.iter()).cloned().collect()
            }
            Recipe::Marginalize { keep, .. } => keep.clone(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Recipe::Injectable(_) => 0,
            Recipe::CondProduct { left, right, .. } => 1 + left.depth().max(right.depth()),
            Recipe::Marginalize { inner, .. } => inner.depth(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExpressibleSet {
    pub members: BTreeSet<NodeId>,
    pub recipe: Recipe,
}

/// Outcome of the bounded recipe search for one target set.
#[derive(Clone, Debug)]
pub enum ExpressibleResult {
    Found(ExpressibleSet),
    /// No recipe with conditional-product nesting up to `depth` was found.
    NoRecipe { target: BTreeSet<NodeId>, depth: usize },
}

/// A copy isomorphism between two observed sets that extends to a copy
/// isomorphism of their ancestral subgraphs; it forces equality of the two
/// marginals in every inflation model.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InflationaryIsomorphism {
    pub source: BTreeSet<NodeId>,
    pub target: BTreeSet<NodeId>,
    pub node_map: BTreeMap<NodeId, NodeId>,
    pub ancestral_extension: BTreeMap<NodeId, NodeId>,
}

impl InflationStructure {
    pub fn original(&self) -> &CausalStructure {
        &self.original
    }

    pub fn inflated(&self) -> &CausalStructure {
        &self.inflated
    }

    /// Image of one inflated node under copy-index erasure.
    pub fn project(&self, id: &NodeId) -> Result<NodeId, GraphError> {
        let ix = self.inflated.node_index(id)?;
        Ok(self.original.node(self.projection[ix]).clone())
    }

    pub fn project_ix(&self, ix: usize) -> usize {
        self.projection[ix]
    }

    pub fn project_set(&self, set: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, GraphError> {
        set.iter().map(|id| self.project(id)).collect()
    }

    /// True iff the projection restricted to the ancestry of `bits` is
    /// injective (no two distinct copies of one original node).
    fn ancestry_injective(&self, bits: Bits) -> bool {
        let anc = self.inflated.ancestors_bits(bits);
        let mut seen: Bits = 0;
        for i in bits_iter(anc) {
            let o = 1 << self.projection[i];
            if seen & o != 0 {
                return false;
            }
            seen |= o;
        }
        true
    }

    fn observed_set_bits(&self, set: &BTreeSet<NodeId>) -> Result<Bits, InflationError> {
        let bits = self.inflated.set_to_bits(set)?;
        if bits & !self.inflated.observed_bits() != 0 {
            return Err(InflationError::NotObserved(fmt_set(set)));
        }
        Ok(bits)
    }

    pub fn is_injectable(&self, set: &BTreeSet<NodeId>) -> Result<bool, InflationError> {
        Ok(self.ancestry_injective(self.observed_set_bits(set)?))
    }

    fn injectable_from_bits(&self, bits: Bits) -> InjectableSet {
        let members = self.inflated.bits_to_set(bits);
        let image = members.iter().map(|id| self.project(id).unwrap()).collect();
        InjectableSet { members, image }
    }

    /// The injection graph: vertices are observed inflated nodes, an edge means
    /// the pair's joint ancestry projects injectively.
    fn injection_graph(&self) -> (Vec<usize>, Vec<Bits>) {
        let verts: Vec<usize> = bits_iter(self.inflated.observed_bits()).collect();
        let mut adj = vec![0 as Bits; self.inflated.len()];
        for (a, &i) in verts.iter().enumerate() {
            for &j in verts.iter().skip(a + 1) {
                if self.ancestry_injective(1 << i | 1 << j) {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        (verts, adj)
    }

    /// All injectable sets: the nonempty cliques of the injection graph,
    /// ordered by size then lexicographically. Singletons of a valid inflation
    /// are always injectable.
    pub fn injectable_sets(&self) -> Vec<InjectableSet> {
        let (verts, adj) = self.injection_graph();
        let mut cliques: Vec<Bits> = Vec::new();
        // Every clique extends a clique over smaller-indexed vertices, so a
        // recursive scan over candidates above the last vertex emits each
        // clique exactly once.
        fn grow(clique: Bits, cand: Bits, adj: &[Bits], out: &mut Vec<Bits>) {
            for v in bits_iter(cand) {
                let c = clique | 1 << v;
                out.push(c);
                let above = cand & !((1 << (v + 1)) - 1);
                grow(c, above & adj[v], adj, out);
            }
        }
        let all: Bits = verts.iter().map(|&v| 1 << v).fold(0, |a, b| a | b);
        grow(0, all, &adj, &mut cliques);
        let mut sets: Vec<InjectableSet> =
            cliques.into_iter().map(|c| self.injectable_from_bits(c)).collect();
        sets.sort_by(|a, b| (a.members.len(), &a.members).cmp(&(b.members.len(), &b.members)));
        sets
    }

    /// Maximal cliques of the ai-expressibility graph (vertices: injectable
    /// sets, edges: ancestral independence), as block lists.
    fn ai_cliques(&self) -> Vec<Vec<InjectableSet>> {
        let inj = self.injectable_sets();
        let bits: Vec<Bits> = inj.iter().map(|s| self.inflated.set_to_bits(&s.members).unwrap()).collect();
        let anc: Vec<Bits> = bits.iter().map(|&b| self.inflated.ancestors_bits(b)).collect();
        let n = inj.len();
        let mut adj: Vec<Vec<bool>> = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if anc[i] & anc[j] == 0 {
                    adj[i][j] = true;
                    adj[j][i] = true;
                }
            }
        }
        // Bron-Kerbosch with pivoting over the injectable-set vertices.
        let mut out: Vec<Vec<usize>> = Vec::new();
        let neighbors = |v: usize| -> BTreeSet<usize> {
            (0..n).filter(|&u| adj[v][u]).collect()
        };
        fn bk(
            r: &mut Vec<usize>,
            mut p: BTreeSet<usize>,
            mut x: BTreeSet<usize>,
            neighbors: &dyn Fn(usize) -> BTreeSet<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if p.is_empty() && x.is_empty() {
                out.push(r.clone());
                return;
            }
            let pivot = p.iter().chain(x.iter()).copied().max_by_key(|&u| {
                let nu = neighbors(u);
                p.iter().filter(|v| nu.contains(v)).count()
            });
            let cand: Vec<usize> = match pivot {
                Some(u) => {
                    let nu = neighbors(u);
                    p.iter().filter(|v| !nu.contains(v)).copied().collect()
                }
                None => p.iter().copied().collect(),
            };
            for v in cand {
                let nv = neighbors(v);
                r.push(v);
                bk(
                    r,
                    p.intersection(&nv).copied().collect(),
                    x.intersection(&nv).copied().collect(),
                    neighbors,
                    out,
                );
                r.pop();
                p.remove(&v);
                x.insert(v);
            }
        }
        bk(&mut Vec::new(), (0..n).collect(), BTreeSet::new(), &neighbors, &mut out);
        out.into_iter()
            .map(|c| {
                let mut blocks: Vec<InjectableSet> = c.into_iter().map(|i| inj[i].clone()).collect();
                blocks.sort();
                blocks
            })
            .collect()
    }

    /// Every clique of the ai-expressibility graph gives an ai-expressible set;
    /// this returns the ones arising from maximal cliques, without filtering
    /// for set-maximal unions.
    pub fn all_ai_expressible_sets(&self) -> Vec<AiExpressibleSet> {
        let mut out: Vec<AiExpressibleSet> = self
            .ai_cliques()
            .into_iter()
            .map(|blocks| AiExpressibleSet {
                members: blocks.iter().flat_map(|b| b.members.iter().cloned()).collect(),
                blocks,
            })
            .collect();
        out.sort_by(|a, b| {
            (a.members.len(), &a.members, &a.blocks).cmp(&(b.members.len(), &b.members, &b.blocks))
        });
        out
    }

    /// The maximal ai-expressible sets: unions of maximal cliques that are not
    /// proper subsets of another such union. When several cliques share one
    /// union, the finest partition (most blocks) is kept.
    pub fn ai_expressible_sets(&self) -> Vec<AiExpressibleSet> {
        let all = self.all_ai_expressible_sets();
        let mut by_union: BTreeMap<BTreeSet<NodeId>, Vec<InjectableSet>> = BTreeMap::new();
        for s in all {
            let replace = match by_union.get(&s.members) {
                None => true,
                // Finest partition wins; ties go to the lexicographically
                // smaller block list.
                Some(prev) => {
                    s.blocks.len() > prev.len()
                        || (s.blocks.len() == prev.len() && s.blocks < *prev)
                }
            };
            if replace {
                by_union.insert(s.members, s.blocks);
            }
        }
        let unions: Vec<&BTreeSet<NodeId>> = by_union.keys().collect();
        let mut out = Vec::new();
        for (members, blocks) in &by_union {
            let maximal = unions
                .iter()
                .all(|u| *u == members || !members.is_subset(u));
            if maximal {
                out.push(AiExpressibleSet { members: members.clone(), blocks: blocks.clone() });
            }
        }
        out.sort_by(|a, b| (a.members.len(), &a.members).cmp(&(b.members.len(), &b.members)));
        out
    }

    /// Bounded search for recipes expressing each target set from injectable
    /// marginals. `depth` bounds conditional-product nesting; supersets of a
    /// target with up to `extra` additional observed nodes are explored before
    /// marginalizing back down.
    pub fn expressible_closure(
        &self,
        targets: &[BTreeSet<NodeId>],
        depth: usize,
        extra: usize,
    ) -> Result<Vec<ExpressibleResult>, InflationError> {
        let mut memo: HashMap<(Bits, usize), Option<Recipe>> = HashMap::new();
        let mut out = Vec::new();
        for t in targets {
            let bits = self.observed_set_bits(t)?;
            let found = self.search_recipe(bits, depth, extra, &mut memo);
            out.push(match found {
                Some(recipe) => {
                    ExpressibleResult::Found(ExpressibleSet { members: t.clone(), recipe })
                }
                None => ExpressibleResult::NoRecipe { target: t.clone(), depth },
            });
        }
        Ok(out)
    }

    fn search_recipe(
        &self,
        target: Bits,
        depth: usize,
        extra: usize,
        memo: &mut HashMap<(Bits, usize), Option<Recipe>>,
    ) -> Option<Recipe> {
        if let Some(hit) = memo.get(&(target, depth)) {
            return hit.clone();
        }
        memo.insert((target, depth), None); // cut cycles while searching
        let result = self.search_recipe_inner(target, depth, extra, memo);
        memo.insert((target, depth), result.clone());
        result
    }

    fn search_recipe_inner(
        &self,
        target: Bits,
        depth: usize,
        extra: usize,
        memo: &mut HashMap<(Bits, usize), Option<Recipe>>,
    ) -> Option<Recipe> {
        if self.ancestry_injective(target) {
            return Some(Recipe::Injectable(self.injectable_from_bits(target)));
        }
        if depth == 0 {
            return None;
        }
        // Supersets of the target, smallest first; a found superset recipe is
        // marginalized back down to the target.
        let observed = self.inflated.observed_bits();
        let spare: Vec<usize> = bits_iter(observed & !target).collect();
        let mut supersets: Vec<Bits> = vec![target];
        for k in 1..=extra.min(spare.len()) {
            let mut combos: Vec<Bits> = Vec::new();
            fn choose(spare: &[usize], start: usize, k: usize, acc: Bits, out: &mut Vec<Bits>) {
                if k == 0 {
                    out.push(acc);
                    return;
                }
                for i in start..spare.len() {
                    choose(spare, i + 1, k - 1, acc | 1 << spare[i], out);
                }
            }
            choose(&spare, 0, k, 0, &mut combos);
            combos.sort();
            supersets.extend(combos.into_iter().map(|c| target | c));
        }
        for sup in supersets {
            if sup != target && self.ancestry_injective(sup) {
                return Some(Recipe::Marginalize {
                    keep: self.inflated.bits_to_set(target),
                    inner: Box::new(Recipe::Injectable(self.injectable_from_bits(sup))),
                });
            }
            if let Some(recipe) = self.split_recipe(sup, depth, extra, memo) {
                if sup == target {
                    return Some(recipe);
                }
                return Some(Recipe::Marginalize {
                    keep: self.inflated.bits_to_set(target),
                    inner: Box::new(recipe),
                });
            }
        }
        None
    }

    /// Tries every (X, Y, Z) partition of `set` with X, Y nonempty; on a
    /// verified d-separation X ⟂d Y | Z, recurses into X∪Z and Y∪Z.
    fn split_recipe(
        &self,
        set: Bits,
        depth: usize,
        extra: usize,
        memo: &mut HashMap<(Bits, usize), Option<Recipe>>,
    ) -> Option<Recipe> {
        let members: Vec<usize> = bits_iter(set).collect();
        let n = members.len();
        if n < 2 {
            return None;
        }
        // Enumerate assignments of members to X(0)/Y(1)/Z(2), canonically with
        // the first non-Z member in X.
        let mut assign = vec![0u8; n];
        loop {
            let mut x: Bits = 0;
            let mut y: Bits = 0;
            let mut z: Bits = 0;
            for (i, &m) in members.iter().enumerate() {
                match assign[i] {
                    0 => x |= 1 << m,
                    1 => y |= 1 << m,
                    _ => z |= 1 << m,
                }
            }
            let canonical = match (x, y) {
                (0, _) | (_, 0) => false,
                _ => bits_iter(x).next() < bits_iter(y).next(),
            };
            if canonical && self.inflated.d_separated_bits(x, y, z) {
                let left = self.search_recipe(x | z, depth - 1, extra, memo);
                if let Some(left) = left {
                    if let Some(right) = self.search_recipe(y | z, depth - 1, extra, memo) {
                        return Some(Recipe::CondProduct {
                            x: self.inflated.bits_to_set(x),
                            y: self.inflated.bits_to_set(y),
                            z: self.inflated.bits_to_set(z),
                            left: Box::new(left),
                            right: Box::new(right),
                        });
                    }
                }
            }
            // Next assignment in base 3.
            let mut i = 0;
            loop {
                if i == n {
                    return None;
                }
                assign[i] += 1;
                if assign[i] < 3 {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
        }
    }

    /// All copy isomorphisms `source -> target` that extend to copy
    /// isomorphisms of the ancestral subgraphs.
    pub fn inflationary_isomorphisms(
        &self,
        source: &BTreeSet<NodeId>,
        target: &BTreeSet<NodeId>,
    ) -> Result<Vec<InflationaryIsomorphism>, InflationError> {
        let src_bits = self.observed_set_bits(source)?;
        let tgt_bits = self.observed_set_bits(target)?;
        let src: Vec<usize> = bits_iter(src_bits).collect();
        let tgt: Vec<usize> = bits_iter(tgt_bits).collect();
        if src.len() != tgt.len() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut map: Vec<Option<usize>> = vec![None; src.len()];
        let mut used: Bits = 0;
        self.enumerate_copy_maps(&src, &tgt, src_bits, tgt_bits, 0, &mut map, &mut used, &mut out);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_copy_maps(
        &self,
        src: &[usize],
        tgt: &[usize],
        src_bits: Bits,
        tgt_bits: Bits,
        pos: usize,
        map: &mut Vec<Option<usize>>,
        used: &mut Bits,
        out: &mut Vec<InflationaryIsomorphism>,
    ) {
        if pos == src.len() {
            // map is a name-preserving bijection; require a subgraph
            // isomorphism, then try to extend over the ancestral subgraphs.
            let assoc: BTreeMap<usize, usize> =
                src.iter().enumerate().map(|(i, &s)| (s, map[i].unwrap())).collect();
            let inflated = &self.inflated;
            for (&a, &fa) in &assoc {
                for (&b, &fb) in &assoc {
                    let edge_src = inflated.parent_bits(b) >> a & 1 == 1;
                    let edge_tgt = inflated.parent_bits(fb) >> fa & 1 == 1;
                    if edge_src != edge_tgt {
                        return;
                    }
                }
            }
            if let Some(ext) = self.extend_to_ancestral(&assoc, src_bits, tgt_bits) {
                let node_map = assoc
                    .iter()
                    .map(|(&a, &b)| (inflated.node(a).clone(), inflated.node(b).clone()))
                    .collect();
                let ancestral_extension = ext
                    .iter()
                    .map(|(&a, &b)| (inflated.node(a).clone(), inflated.node(b).clone()))
                    .collect();
                out.push(InflationaryIsomorphism {
                    source: inflated.bits_to_set(src_bits),
                    target: inflated.bits_to_set(tgt_bits),
                    node_map,
                    ancestral_extension,
                });
            }
            return;
        }
        let s = src[pos];
        for (j, &t) in tgt.iter().enumerate() {
            if *used >> j & 1 == 1 {
                continue;
            }
            if self.projection[s] != self.projection[t] {
                continue;
            }
            map[pos] = Some(t);
            *used |= 1 << j;
            self.enumerate_copy_maps(src, tgt, src_bits, tgt_bits, pos + 1, map, used, out);
            *used &= !(1 << j);
            map[pos] = None;
        }
    }

    /// Backtracking extension of a copy map on `src_bits` to a copy
    /// isomorphism of the ancestral subgraphs. Returns the first extension in
    /// lexicographic node order, or `None`.
    fn extend_to_ancestral(
        &self,
        assoc: &BTreeMap<usize, usize>,
        src_bits: Bits,
        tgt_bits: Bits,
    ) -> Option<BTreeMap<usize, usize>> {
        let inflated = &self.inflated;
        let src_anc: Vec<usize> = bits_iter(inflated.ancestors_bits(src_bits)).collect();
        let tgt_anc = inflated.ancestors_bits(tgt_bits);
        if src_anc.len() != tgt_anc.count_ones() as usize {
            return None;
        }
        let mut map: BTreeMap<usize, usize> = assoc.clone();
        // The copy map must stay within the target ancestry.
        if map.values().any(|&v| tgt_anc >> v & 1 == 0) {
            return None;
        }
        let mut used: Bits = map.values().fold(0, |a, &v| a | 1 << v);
        self.extend_rec(&src_anc, tgt_anc, 0, &mut map, &mut used)
    }

    fn extend_rec(
        &self,
        src_anc: &[usize],
        tgt_anc: Bits,
        pos: usize,
        map: &mut BTreeMap<usize, usize>,
        used: &mut Bits,
    ) -> Option<BTreeMap<usize, usize>> {
        let inflated = &self.inflated;
        // Skip entries already mapped.
        let mut pos = pos;
        while pos < src_anc.len() && map.contains_key(&src_anc[pos]) {
            pos += 1;
        }
        if pos == src_anc.len() {
            // Verify edges are preserved and reflected within the ancestral
            // subgraphs before accepting.
            for (&a, &fa) in map.iter() {
                for (&b, &fb) in map.iter() {
                    let edge_src = inflated.parent_bits(b) >> a & 1 == 1;
                    let edge_tgt = inflated.parent_bits(fb) >> fa & 1 == 1;
                    if edge_src != edge_tgt {
                        return None;
                    }
                }
            }
            return Some(map.clone());
        }
        let s = src_anc[pos];
        for t in bits_iter(tgt_anc & !*used) {
            if self.projection[s] != self.projection[t] {
                continue;
            }
            map.insert(s, t);
            *used |= 1 << t;
            if let Some(done) = self.extend_rec(src_anc, tgt_anc, pos + 1, map, used) {
                return Some(done);
            }
            *used &= !(1 << t);
            map.remove(&s);
        }
        None
    }

    /// All inflationary isomorphisms between equal-size subsets of the given
    /// context sets, reported as `(source context index, source subset, target
    /// context index, target subset, node map)`. Used to generate
    /// marginal-equality rows for the LP and quotient relations for facet
    /// reduction.
    pub fn context_isomorphisms(
        &self,
        contexts: &[BTreeSet<NodeId>],
    ) -> Vec<ContextIsomorphism> {
        let mut out = Vec::new();
        for (ci, a) in contexts.iter().enumerate() {
            for (cj, b) in contexts.iter().enumerate().skip(ci) {
                for sub_a in subsets(a) {
                    if sub_a.is_empty() {
                        continue;
                    }
                    for sub_b in subsets(b) {
                        if sub_b.len() != sub_a.len() {
                            continue;
                        }
                        // Within one context keep one orientation per
                        // unordered pair; automorphisms (sub_a == sub_b) stay.
                        if ci == cj && sub_b < sub_a {
                            continue;
                        }
                        let isos = self
                            .inflationary_isomorphisms(&sub_a, &sub_b)
                            .expect("context subsets are observed");
                        for iso in isos {
                            let identity = iso.node_map.iter().all(|(k, v)| k == v);
                            if identity {
                                continue;
                            }
                            out.push(ContextIsomorphism {
                                source_context: ci,
                                target_context: cj,
                                iso,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Detects an inflationary fan-out: a latent node with two or more
    /// children that are copies of the same original node. Inflations without
    /// fan-outs yield inequalities valid beyond classical causal models.
    pub fn has_inflationary_fanout(&self) -> Option<FanoutWitness> {
        for ix in 0..self.inflated.len() {
            if self.inflated.is_observed_ix(ix) {
                continue;
            }
            let mut by_original: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
            for c in bits_iter(self.inflated.child_bits(ix)) {
                by_original.entry(self.projection[c]).or_default().push(self.inflated.node(c).clone());
            }
            for (_, copies) in by_original {
                if copies.len() >= 2 {
                    return Some(FanoutWitness {
                        latent: self.inflated.node(ix).clone(),
                        children: copies,
                    });
                }
            }
        }
        None
    }
}

/// A copy-isomorphism between subsets of two contexts.
#[derive(Clone, Debug)]
pub struct ContextIsomorphism {
    pub source_context: usize,
    pub target_context: usize,
    pub iso: InflationaryIsomorphism,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FanoutWitness {
    pub latent: NodeId,
    pub children: Vec<NodeId>,
}

fn subsets(set: &BTreeSet<NodeId>) -> Vec<BTreeSet<NodeId>> {
    let items: Vec<&NodeId> = set.iter().collect();
    let mut out = Vec::with_capacity(1 << items.len());
    for mask in 0u32..1 << items.len() {
        out.push(
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, id)| (*id).clone())
                .collect(),
        );
    }
    out
}

//! Inflation-induced marginal families: given a distribution on the original
//! structure, the marginals it forces on injectable, ai-expressible and
//! expressible contexts of the inflation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::NodeId;
use crate::inflation::{
    AiExpressibleSet, ExpressibleResult, ExpressibleSet, InflationError, InflationStructure,
    InjectableSet, Recipe,
};
use crate::table::{JointTable, TableError};

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error(transparent)]
    Inflation(#[from] InflationError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("context blocks must be pairwise ancestrally independent: {0}")]
    BlocksNotIndependent(String),
    #[error("contexts {0} and {1} disagree on their intersection")]
    Inconsistent(String, String),
    #[error("no recipe found for target {0} within depth {1}")]
    NoRecipe(String, usize),
}

/// One factor of a context: either an injectable set (marginal copied from the
/// original) or an expressible set (marginal computed by a recipe).
#[derive(Clone, Debug)]
pub enum Block {
    Injectable(InjectableSet),
    Expressible(ExpressibleSet),
}

impl Block {
    pub fn members(&self) -> BTreeSet<NodeId> {
        match self {
            Block::Injectable(s) => s.members.clone(),
            Block::Expressible(s) => s.members.clone(),
        }
    }
}

/// A context of the marginal problem: a list of pairwise ancestrally
/// independent blocks whose union is the context's variable set.
#[derive(Clone, Debug)]
pub struct ContextSpec {
    pub blocks: Vec<Block>,
}

impl ContextSpec {
    pub fn injectable(set: InjectableSet) -> Self {
        ContextSpec { blocks: vec![Block::Injectable(set)] }
    }

    pub fn from_ai(set: &AiExpressibleSet) -> Self {
        ContextSpec { blocks: set.blocks.iter().cloned().map(Block::Injectable).collect() }
    }

    pub fn members(&self) -> BTreeSet<NodeId> {
        self.blocks.iter().flat_map(|b| b.members()).collect()
    }

    /// Context variables in canonical order.
    pub fn sorted_members(&self) -> Vec<NodeId> {
        self.members().into_iter().collect()
    }

    fn validate(&self, inf: &InflationStructure) -> Result<(), FamilyError> {
        let parts: Vec<BTreeSet<NodeId>> = self.blocks.iter().map(|b| b.members()).collect();
        if parts.len() > 1 {
            let ok = inf.inflated().ancestrally_independent(&parts).map_err(InflationError::from)?;
            if !ok {
                let labels: Vec<String> = parts
                    .iter()
                    .map(|p| {
                        let names: Vec<String> = p.iter().map(|n| n.label()).collect();
                        format!("{{{}}}", names.join(" "))
                    })
                    .collect();
                return Err(FamilyError::BlocksNotIndependent(labels.join(" vs ")));
            }
        }
        Ok(())
    }
}

/// A family of context marginals, consistent on intersections.
#[derive(Clone, Debug)]
pub struct MarginalFamily {
    pub contexts: Vec<(ContextSpec, JointTable)>,
}

impl MarginalFamily {
    /// Pairwise intersection-consistency check; exact.
    pub fn check_consistency(&self) -> Result<(), FamilyError> {
        for i in 0..self.contexts.len() {
            for j in i + 1..self.contexts.len() {
                let (a, ta) = &self.contexts[i];
                let (b, tb) = &self.contexts[j];
                let shared: BTreeSet<NodeId> =
                    a.members().intersection(&b.members()).cloned().collect();
                if shared.is_empty() {
                    continue;
                }
                let ma = ta.marginalize(&shared)?;
                let mb = tb.marginalize(&shared)?;
                if ma != mb {
                    let label = |s: &ContextSpec| {
                        s.sorted_members()
                            .iter()
                            .map(|n| n.label())
                            .collect::<Vec<_>>()
                            .join(" ")
                    };
                    return Err(FamilyError::Inconsistent(label(a), label(b)));
                }
            }
        }
        Ok(())
    }

    pub fn context_sets(&self) -> Vec<BTreeSet<NodeId>> {
        self.contexts.iter().map(|(c, _)| c.members()).collect()
    }
}

/// Computes the marginal an injectable set inherits from the original
/// distribution: the image marginal with variables renamed to the copies.
fn injectable_marginal(
    inf: &InflationStructure,
    observed: &JointTable,
    set: &InjectableSet,
) -> Result<JointTable, FamilyError> {
    let marg = observed.marginalize(&set.image)?;
    let rename: BTreeMap<NodeId, NodeId> = set
        .members
        .iter()
        .map(|m| inf.project(m).map_err(InflationError::from).map(|img| (img, m.clone())))
        .collect::<Result<_, _>>()?;
    Ok(marg.rename(&rename)?)
}

/// Replays a recipe against the original observed distribution.
pub fn replay_recipe(
    inf: &InflationStructure,
    observed: &JointTable,
    recipe: &Recipe,
) -> Result<JointTable, FamilyError> {
    match recipe {
        Recipe::Injectable(set) => injectable_marginal(inf, observed, set),
        Recipe::CondProduct { x: _, y: _, z, left, right } => {
            let lt = replay_recipe(inf, observed, left)?;
            let rt = replay_recipe(inf, observed, right)?;
            Ok(JointTable::conditional_product(&lt, &rt, z)?)
        }
        Recipe::Marginalize { keep, inner } => {
            let t = replay_recipe(inf, observed, inner)?;
            Ok(t.marginalize(keep)?)
        }
    }
}

/// Builds the marginal family induced on the given contexts by a distribution
/// on the original observed nodes: injectable blocks copy the image marginal,
/// expressible blocks replay their recipe, and each context is the product of
/// its blocks. The result is consistency-checked.
pub fn inflation_family(
    inf: &InflationStructure,
    observed: &JointTable,
    contexts: &[ContextSpec],
) -> Result<MarginalFamily, FamilyError> {
    let mut out = Vec::with_capacity(contexts.len());
    for spec in contexts {
        spec.validate(inf)?;
        let mut tables = Vec::with_capacity(spec.blocks.len());
        for block in &spec.blocks {
            let t = match block {
                Block::Injectable(set) => injectable_marginal(inf, observed, set)?,
                Block::Expressible(set) => replay_recipe(inf, observed, &set.recipe)?,
            };
            tables.push(t);
        }
        let table = JointTable::product(&tables)?;
        let order = spec.sorted_members();
        let table = table.reorder(&order)?;
        out.push((spec.clone(), table));
    }
    let family = MarginalFamily { contexts: out };
    family.check_consistency()?;
    Ok(family)
}

/// The default context selection: one context per maximal ai-expressible set.
pub fn maximal_ai_contexts(inf: &InflationStructure) -> Vec<ContextSpec> {
    inf.ai_expressible_sets().iter().map(ContextSpec::from_ai).collect()
}

/// One context per clique of the ai-expressibility graph (maximal cliques,
/// without the set-maximality filter).
pub fn all_ai_contexts(inf: &InflationStructure) -> Vec<ContextSpec> {
    inf.all_ai_expressible_sets().iter().map(ContextSpec::from_ai).collect()
}

/// Resolves a requested expressible target into a context: searches for a
/// recipe, then extends the expressible block with every injectable singleton
/// that is ancestrally independent of it and of the already-chosen singletons.
pub fn expressible_context(
    inf: &InflationStructure,
    target: &BTreeSet<NodeId>,
    depth: usize,
    extra: usize,
) -> Result<ContextSpec, FamilyError> {
    let results = inf.expressible_closure(std::slice::from_ref(target), depth, extra)?;
    let set = match results.into_iter().next().unwrap() {
        ExpressibleResult::Found(set) => set,
        ExpressibleResult::NoRecipe { target, depth } => {
            let names: Vec<String> = target.iter().map(|n| n.label()).collect();
            return Err(FamilyError::NoRecipe(format!("{{{}}}", names.join(" ")), depth));
        }
    };
    let mut blocks = vec![Block::Expressible(set)];
    let inflated = inf.inflated();
    for node in inflated.observed_nodes() {
        if blocks.iter().any(|b| b.members().contains(&node)) {
            continue;
        }
        let mut parts: Vec<BTreeSet<NodeId>> = blocks.iter().map(|b| b.members()).collect();
        parts.push([node.clone()].into_iter().collect());
        let independent = inflated
            .ancestrally_independent(&parts)
            .map_err(InflationError::from)?;
        if independent {
            let single: BTreeSet<NodeId> = [node.clone()].into_iter().collect();
            if inf.is_injectable(&single)? {
                let image = inf.project_set(&single).map_err(InflationError::from)?;
                blocks.push(Block::Injectable(InjectableSet { members: single, image }));
            }
        }
    }
    Ok(ContextSpec { blocks })
}

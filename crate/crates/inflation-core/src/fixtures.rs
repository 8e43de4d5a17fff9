//! Bundled causal structures, inflations, distributions and inequality
//! tables. These mirror the JSON files shipped under `data/` (embedded at
//! compile time so the library is self-contained).

use std::collections::BTreeSet;

use crate::graph::{CausalStructure, NodeId};
use crate::ineq::PolynomialInequality;
use crate::inflation::{verify_inflation, InflationStructure};
use crate::ratio::{qfrac, Q};
use crate::table::JointTable;

macro_rules! graph_fixture {
    ($name:ident, $file:literal) => {
        pub fn $name() -> CausalStructure {
            CausalStructure::from_json(include_str!(concat!("../../../data/", $file)))
                .expect(concat!("bundled fixture ", $file))
        }
    };
}

graph_fixture!(triangle, "triangle.json");
graph_fixture!(cut, "cut.json");
graph_fixture!(capped, "capped.json");
graph_fixture!(spiral, "spiral.json");
graph_fixture!(web, "web.json");
graph_fixture!(bell, "bell.json");
graph_fixture!(bell_inflation_graph, "bell_inflation.json");
graph_fixture!(instrumental, "instrumental.json");
graph_fixture!(instrumental_inflation_graph, "instrumental_inflation.json");
graph_fixture!(hlp15, "hlp15.json");
graph_fixture!(hlp16, "hlp16.json");
graph_fixture!(hlp20, "hlp20.json");
graph_fixture!(russian_dolls, "russian_dolls.json");

pub fn triangle_cut() -> InflationStructure {
    verify_inflation(&triangle(), &cut()).expect("cut inflates the triangle")
}

pub fn triangle_capped() -> InflationStructure {
    verify_inflation(&triangle(), &capped()).expect("capped inflates the triangle")
}

pub fn triangle_spiral() -> InflationStructure {
    verify_inflation(&triangle(), &spiral()).expect("spiral inflates the triangle")
}

pub fn triangle_web() -> InflationStructure {
    verify_inflation(&triangle(), &web()).expect("web inflates the triangle")
}

pub fn bell_inflation() -> InflationStructure {
    verify_inflation(&bell(), &bell_inflation_graph()).expect("bell inflation")
}

pub fn instrumental_inflation() -> InflationStructure {
    verify_inflation(&instrumental(), &instrumental_inflation_graph())
        .expect("instrumental inflation")
}

pub fn hlp16_russian_dolls() -> InflationStructure {
    verify_inflation(&hlp16(), &russian_dolls()).expect("russian dolls inflates #16")
}

macro_rules! dist_fixture {
    ($name:ident, $file:literal) => {
        pub fn $name() -> JointTable {
            JointTable::from_json(include_str!(concat!("../../../data/", $file)))
                .expect(concat!("bundled distribution ", $file))
        }
    };
}

dist_fixture!(ghz, "ghz.json");
dist_fixture!(w_distribution, "w.json");
dist_fixture!(pr_box, "pr_box.json");
dist_fixture!(pienaar, "pienaar.json");
dist_fixture!(hlp16_ci_distribution, "hlp16_ci.json");

/// The noisy three-way correlated family: weight `alpha` on the perfectly
/// correlated outcomes, the rest uniform over the other six.
pub fn noisy_ghz(alpha: &Q) -> JointTable {
    let vars: Vec<(NodeId, u32)> =
        vec![(NodeId::plain("A"), 2), (NodeId::plain("B"), 2), (NodeId::plain("C"), 2)];
    let on = alpha * qfrac(1, 2);
    let off = (Q::from_integer(1.into()) - alpha) * qfrac(1, 6);
    let probs = (0..8)
        .map(|ix| if ix == 0 || ix == 7 { on.clone() } else { off.clone() })
        .collect();
    JointTable::new(vars, probs).expect("noisy family is a distribution")
}

/// The 52-row correlator inequality table for the binary triangle, closed
/// under the order-48 symmetry group.
pub fn triangle_inequalities() -> Vec<PolynomialInequality> {
    crate::ineq::load_correlator_rows(include_str!("../../../data/triangle_inequalities.json"))
        .expect("bundled inequality table")
}

/// Indices (into [`triangle_inequalities`]) of one representative per
/// symmetry class, with orbit sizes 12, 8, 24, 8.
pub const TRIANGLE_CLASS_REPRESENTATIVES: [usize; 4] = [0, 12, 20, 44];

pub fn node(name: &str) -> NodeId {
    NodeId::plain(name)
}

pub fn copy(name: &str, index: u32) -> NodeId {
    NodeId::copy(name, index)
}

pub fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
    ids.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_graphs_parse() {
        for g in [
            triangle(),
            cut(),
            capped(),
            spiral(),
            web(),
            bell(),
            bell_inflation_graph(),
            instrumental(),
            instrumental_inflation_graph(),
            hlp15(),
            hlp16(),
            hlp20(),
            russian_dolls(),
        ] {
            assert!(!g.is_empty());
        }
    }

    #[test]
    fn all_bundled_inflations_verify() {
        triangle_cut();
        triangle_capped();
        triangle_spiral();
        triangle_web();
        bell_inflation();
        instrumental_inflation();
        hlp16_russian_dolls();
    }

    #[test]
    fn inequality_table_has_52_rows() {
        assert_eq!(triangle_inequalities().len(), 52);
    }
}

//! Model-level submodel check.
//!
//! Models are reduced to structural signatures: which variables each
//! constraint and objective term touches, the constraint sense, and a
//! sign-plus-arity summary of each objective coefficient. Parameter values are
//! deliberately ignored.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoefficientSignature {
    pub sign: Sign,
    /// Degree of the term (1 linear, 2 bilinear, ...).
    pub arity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectiveTerm {
    pub support: BTreeSet<String>,
    pub signature: CoefficientSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    pub support: BTreeSet<String>,
    pub sense: Sense,
    pub tag: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub variables: BTreeSet<String>,
    pub objective_terms: BTreeSet<ObjectiveTerm>,
    pub constraints: Vec<Constraint>,
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl StructuralModel {
    pub fn new(variables: &[&str]) -> Self {
        Self {
            variables: set(variables),
            ..Self::default()
        }
    }

    pub fn constraint(mut self, tag: &str, support: &[&str], sense: Sense) -> Self {
        self.constraints.push(Constraint {
            support: set(support),
            sense,
            tag: tag.to_string(),
        });
        self
    }

    pub fn objective(mut self, support: &[&str], sign: Sign, arity: u8) -> Self {
        self.objective_terms.insert(ObjectiveTerm {
            support: set(support),
            signature: CoefficientSignature { sign, arity },
        });
        self
    }

    /// Every support set lies inside the variable set.
    pub fn is_well_formed(&self) -> bool {
        self.constraints
            .iter()
            .all(|c| c.support.is_subset(&self.variables))
            && self
                .objective_terms
                .iter()
                .all(|t| t.support.is_subset(&self.variables))
    }

    /// The model seen through `vars` only: supports are intersected with
    /// `vars`, and anything left with an empty support is dropped.
    pub fn restrict(&self, vars: &BTreeSet<String>) -> Self {
        let keep = |s: &BTreeSet<String>| -> BTreeSet<String> { s.intersection(vars).cloned().collect() };
        Self {
            variables: self.variables.intersection(vars).cloned().collect(),
            objective_terms: self
                .objective_terms
                .iter()
                .map(|t| ObjectiveTerm {
                    support: keep(&t.support),
                    signature: t.signature,
                })
                .filter(|t| !t.support.is_empty())
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    support: keep(&c.support),
                    sense: c.sense,
                    tag: c.tag.clone(),
                })
                .filter(|c| !c.support.is_empty())
                .collect(),
        }
    }
}

/// True iff `sub` uses only variables of `full`, and each of its constraints
/// and objective terms appears in `full` once `full` is restricted to
/// `sub`'s variables. Constraint tags are labels and do not take part.
pub fn is_structural_submodel(sub: &StructuralModel, full: &StructuralModel) -> bool {
    if !sub.variables.is_subset(&full.variables) {
        return false;
    }
    let seen = full.restrict(&sub.variables);
    let constraints_ok = sub.constraints.iter().all(|c| {
        seen.constraints
            .iter()
            .any(|f| f.support == c.support && f.sense == c.sense)
    });
    constraints_ok
        && sub
            .objective_terms
            .iter()
            .all(|t| seen.objective_terms.contains(t))
}

/// Signatures of the routing models used as the reference pair.
pub mod toy {
    use super::{Sense, Sign, StructuralModel};

    /// Vehicle routing core: visit-once and flow conservation over route arcs.
    pub fn vrp() -> StructuralModel {
        StructuralModel::new(&["x"])
            .objective(&["x"], Sign::Positive, 1)
            .constraint("customer_visited_once", &["x"], Sense::Eq)
            .constraint("flow_conservation", &["x"], Sense::Eq)
    }

    pub fn cvrp() -> StructuralModel {
        vrp()
            .constraint("fleet_size", &["x"], Sense::Le)
            .constraint("subtour_elimination", &["x"], Sense::Le)
    }

    /// CVRP plus service-start times `t`.
    pub fn cvrptw() -> StructuralModel {
        let mut m = cvrp()
            .constraint("time_window_lower", &["t"], Sense::Ge)
            .constraint("time_window_upper", &["t"], Sense::Le)
            .constraint("time_consistency", &["t", "x"], Sense::Ge)
            .constraint("start_time_nonnegative", &["t"], Sense::Ge);
        m.variables.insert("t".into());
        m
    }
}

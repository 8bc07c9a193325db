//! The modeling tree: a rooted taxonomy of [`NodeSchema`]s in which every
//! ancestor is a subproblem of each of its descendants.
//!
//! Nodes are only ever added. [`ModelingTree::add_node`] implements node
//! expansion: the new node becomes a child of the given parent, and any of the
//! parent's children that the new problem is a subproblem of are moved under
//! it. Everything else stays a sibling.

mod persist;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, RwLock};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{validate_schema, NodeSchema, Violation};

pub use persist::{load_tree, save_tree, TREE_FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("unknown parent node {0}")]
    UnknownParent(NodeId),
    #[error("node {child} is not a child of {parent}")]
    NotAChild { parent: NodeId, child: NodeId },
    #[error("problem type `{0}` already exists in the tree")]
    DuplicateType(String),
    #[error("schema for `{problem_type}` is invalid: {violations:?}")]
    InvalidSchema {
        problem_type: String,
        violations: Vec<Violation>,
    },
    #[error("malformed tree document: {0}")]
    MalformedDocument(String),
    #[error("tree invariant violated: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub schema: NodeSchema,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub node_count: usize,
    /// Edges on the longest root-to-leaf path.
    pub depth: usize,
    /// Mean child count over nodes that have at least one child.
    pub avg_degree: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelingTree {
    nodes: IndexMap<NodeId, TreeNode>,
    root: NodeId,
    by_type: HashMap<String, NodeId>,
    next_id: u64,
}

impl Default for ModelingTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelingTree {
    /// A tree holding only the `AbstractOR` root.
    pub fn new() -> Self {
        let root = NodeId::new("n0");
        let schema = NodeSchema::root();
        let mut by_type = HashMap::new();
        by_type.insert(schema.problem_type.clone(), root.clone());
        let mut nodes = IndexMap::new();
        nodes.insert(
            root.clone(),
            TreeNode {
                schema,
                parent: None,
                children: Vec::new(),
            },
        );
        Self {
            nodes,
            root,
            by_type,
            next_id: 1,
        }
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: &NodeId) -> Option<&TreeNode> {
        self.nodes.get(id)
    }

    pub fn schema(&self, id: &NodeId) -> Option<&NodeSchema> {
        self.nodes.get(id).map(|n| &n.schema)
    }

    pub fn children(&self, id: &NodeId) -> &[NodeId] {
        self.nodes.get(id).map(|n| n.children.as_slice()).unwrap_or(&[])
    }

    pub fn parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.nodes.get(id).and_then(|n| n.parent.as_ref())
    }

    pub fn find_by_type(&self, problem_type: &str) -> Option<&NodeId> {
        self.by_type.get(problem_type)
    }

    /// Node ids in stable (insertion) order.
    pub fn ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &TreeNode)> {
        self.nodes.iter()
    }

    /// Ancestors of `id`, nearest first, root last.
    pub fn ancestors(&self, id: &NodeId) -> Vec<&NodeId> {
        let mut out = Vec::new();
        let mut cur = self.parent(id);
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    /// Edge count from the root to `id`.
    pub fn depth_of(&self, id: &NodeId) -> usize {
        self.ancestors(id).len()
    }

    /// Path from the first level below the root down to `id` (root excluded).
    pub fn path_to(&self, id: &NodeId) -> Vec<NodeId> {
        if id == &self.root {
            return Vec::new();
        }
        let mut path: Vec<NodeId> = self
            .ancestors(id)
            .into_iter()
            .filter(|a| *a != &self.root)
            .cloned()
            .collect();
        path.reverse();
        path.push(id.clone());
        path
    }

    fn fresh_id(&mut self) -> NodeId {
        loop {
            let id = NodeId::new(format!("n{}", self.next_id));
            self.next_id += 1;
            if !self.nodes.contains_key(&id) {
                return id;
            }
        }
    }

    /// Inserts `schema` as a child of `parent`, moving every node in
    /// `reparent` (all current children of `parent`) underneath the new node.
    pub fn add_node(
        &mut self,
        parent: &NodeId,
        schema: NodeSchema,
        reparent: &[NodeId],
    ) -> Result<NodeId, TreeError> {
        let parent_node = self
            .nodes
            .get(parent)
            .ok_or_else(|| TreeError::UnknownParent(parent.clone()))?;
        for child in reparent {
            if !parent_node.children.contains(child) {
                return Err(TreeError::NotAChild {
                    parent: parent.clone(),
                    child: child.clone(),
                });
            }
        }
        if self.by_type.contains_key(&schema.problem_type) {
            return Err(TreeError::DuplicateType(schema.problem_type));
        }
        let violations = validate_schema(&schema);
        if !violations.is_empty() || schema.is_root() {
            return Err(TreeError::InvalidSchema {
                problem_type: schema.problem_type,
                violations,
            });
        }

        let id = self.fresh_id();
        let moved: HashSet<&NodeId> = reparent.iter().collect();
        let parent_node = self.nodes.get_mut(parent).expect("checked above");
        // Moved children keep their relative order under the new node.
        let new_children: Vec<NodeId> = parent_node
            .children
            .iter()
            .filter(|c| moved.contains(c))
            .cloned()
            .collect();
        parent_node.children.retain(|c| !moved.contains(c));
        parent_node.children.push(id.clone());

        for child in &new_children {
            self.nodes.get_mut(child).expect("child exists").parent = Some(id.clone());
        }
        self.by_type.insert(schema.problem_type.clone(), id.clone());
        self.nodes.insert(
            id.clone(),
            TreeNode {
                schema,
                parent: Some(parent.clone()),
                children: new_children,
            },
        );
        Ok(id)
    }

    pub fn stats(&self) -> TreeStats {
        let mut depth = 0;
        let mut stack = vec![(&self.root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            depth = depth.max(d);
            for c in self.children(id) {
                stack.push((c, d + 1));
            }
        }
        let (internal, edges) = self
            .nodes
            .values()
            .filter(|n| !n.children.is_empty())
            .fold((0usize, 0usize), |(i, e), n| (i + 1, e + n.children.len()));
        let avg_degree = if internal == 0 {
            0.0
        } else {
            edges as f64 / internal as f64
        };
        TreeStats {
            node_count: self.nodes.len(),
            depth,
            avg_degree,
        }
    }

    /// Every (ancestor, descendant) pair, root excluded, for which
    /// `is_subproblem(ancestor, descendant)` is false. Empty means the tree is
    /// subproblem order-preserving under `is_subproblem`.
    pub fn check_order_preserving<F>(&self, mut is_subproblem: F) -> Vec<(NodeId, NodeId)>
    where
        F: FnMut(&NodeSchema, &NodeSchema) -> bool,
    {
        let mut out = Vec::new();
        for (id, node) in &self.nodes {
            if id == &self.root {
                continue;
            }
            let mut ancestors = self.ancestors(id);
            ancestors.retain(|a| *a != &self.root);
            ancestors.reverse();
            for anc in ancestors {
                if !is_subproblem(&self.nodes[anc].schema, &node.schema) {
                    out.push((anc.clone(), id.clone()));
                }
            }
        }
        out
    }

    /// Structural invariants: single root, consistent links, acyclic, no
    /// duplicate children, unique problem types, valid schemas.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let bad = |m: String| Err(TreeError::InvariantViolation(m));
        let Some(root) = self.nodes.get(&self.root) else {
            return bad(format!("root {} is not a node", self.root));
        };
        if root.parent.is_some() {
            return bad("root has a parent".into());
        }
        if !root.schema.is_root() {
            return bad(format!(
                "root node is `{}`, not the reserved root",
                root.schema.problem_type
            ));
        }
        let roots = self.nodes.values().filter(|n| n.parent.is_none()).count();
        if roots != 1 {
            return bad(format!("expected exactly one parentless node, found {roots}"));
        }
        let mut types = HashSet::new();
        for (id, node) in &self.nodes {
            if !types.insert(node.schema.problem_type.as_str()) {
                return bad(format!("duplicate problem type `{}`", node.schema.problem_type));
            }
            let v = validate_schema(&node.schema);
            if !v.is_empty() {
                return bad(format!("node {id} schema invalid: {v:?}"));
            }
            if id != &self.root && node.schema.is_root() {
                return bad(format!("node {id} reuses the reserved root type"));
            }
            let mut seen = HashSet::new();
            for c in &node.children {
                if !seen.insert(c) {
                    return bad(format!("node {id} lists child {c} twice"));
                }
                match self.nodes.get(c) {
                    Some(child) if child.parent.as_ref() == Some(id) => {}
                    Some(_) => return bad(format!("child {c} of {id} points to another parent")),
                    None => return bad(format!("node {id} lists unknown child {c}")),
                }
            }
            if let Some(p) = &node.parent {
                match self.nodes.get(p) {
                    Some(pn) if pn.children.contains(id) => {}
                    Some(_) => return bad(format!("{p} does not list its child {id}")),
                    None => return bad(format!("node {id} has unknown parent {p}")),
                }
            }
        }
        // Reachability from the root rules out detached cycles.
        let mut reached = 0usize;
        let mut stack = vec![&self.root];
        let mut visited = HashSet::new();
        while let Some(id) = stack.pop() {
            if !visited.insert(id) {
                return bad(format!("cycle through {id}"));
            }
            reached += 1;
            stack.extend(self.children(id));
        }
        if reached != self.nodes.len() {
            return bad(format!(
                "{} nodes unreachable from the root",
                self.nodes.len() - reached
            ));
        }
        Ok(())
    }

    pub(crate) fn from_parts(root: NodeId, nodes: IndexMap<NodeId, TreeNode>) -> Result<Self, TreeError> {
        let mut by_type = HashMap::new();
        for (id, n) in &nodes {
            by_type.insert(n.schema.problem_type.clone(), id.clone());
        }
        let next_id = nodes
            .keys()
            .filter_map(|id| id.as_str().strip_prefix('n')?.parse::<u64>().ok())
            .max()
            .map_or(0, |m| m + 1);
        let tree = Self {
            nodes,
            root,
            by_type,
            next_id,
        };
        tree.check_invariants()?;
        Ok(tree)
    }
}

/// Single-writer, many-reader handle. Readers take an immutable snapshot and
/// keep using it while a writer swaps in a new version.
#[derive(Debug, Clone, Default)]
pub struct SharedTree {
    inner: Arc<RwLock<Arc<ModelingTree>>>,
}

impl SharedTree {
    pub fn new(tree: ModelingTree) -> Self {
        Self {
            inner: Arc::new(RwLock::new(Arc::new(tree))),
        }
    }

    pub fn snapshot(&self) -> Arc<ModelingTree> {
        self.inner.read().expect("tree lock poisoned").clone()
    }

    /// Applies `f` to a private copy, then publishes it. Readers holding an
    /// older snapshot are unaffected.
    pub fn update<R>(&self, f: impl FnOnce(&mut ModelingTree) -> R) -> R {
        let mut guard = self.inner.write().expect("tree lock poisoned");
        let mut next = (**guard).clone();
        let out = f(&mut next);
        *guard = Arc::new(next);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ModelingStep, ModelingThoughts, StatementThought};

    fn leaf(name: &str) -> NodeSchema {
        NodeSchema::new(
            name,
            vec![StatementThought::new(name, "feature")],
            ModelingThoughts {
                steps: vec![ModelingStep::new("Define Decision Variables", "x")],
                code_template: "pass\n".into(),
                error_tips: vec![],
            },
        )
    }

    #[test]
    fn new_tree_is_root_only() {
        let t = ModelingTree::new();
        let s = t.stats();
        assert_eq!((s.node_count, s.depth, s.avg_degree), (1, 0, 0.0));
        assert!(validate_schema(t.schema(t.root()).unwrap()).is_empty());
        assert!(t.check_invariants().is_ok());
        assert!(t.check_order_preserving(|_, _| false).is_empty());
    }

    #[test]
    fn add_under_root_makes_leaf() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let a = t.add_node(&root, leaf("A"), &[]).unwrap();
        assert_eq!(t.depth_of(&a), 1);
        assert_eq!(t.children(&root), std::slice::from_ref(&a));
        assert_eq!(t.stats().depth, 1);
    }

    #[test]
    fn add_errors() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let a = t.add_node(&root, leaf("A"), &[]).unwrap();
        let b = t.add_node(&a, leaf("B"), &[]).unwrap();
        assert_eq!(
            t.add_node(&root, leaf("C"), std::slice::from_ref(&b)),
            Err(TreeError::NotAChild {
                parent: root.clone(),
                child: b
            })
        );
        assert_eq!(
            t.add_node(&root, leaf("A"), &[]),
            Err(TreeError::DuplicateType("A".into()))
        );
        let ghost = NodeId::new("nope");
        assert_eq!(
            t.add_node(&ghost, leaf("D"), &[]),
            Err(TreeError::UnknownParent(ghost))
        );
        assert!(matches!(
            t.add_node(&root, NodeSchema::root(), &[]),
            Err(TreeError::DuplicateType(_))
        ));
        let mut empty = leaf("E");
        empty.modeling_thoughts.steps.clear();
        assert!(matches!(
            t.add_node(&root, empty, &[]),
            Err(TreeError::InvalidSchema { .. })
        ));
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn reparent_keeps_order_and_siblings() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let a = t.add_node(&root, leaf("A"), &[]).unwrap();
        let b = t.add_node(&root, leaf("B"), &[]).unwrap();
        let c = t.add_node(&root, leaf("C"), &[]).unwrap();
        let p = t.add_node(&root, leaf("P"), &[c.clone(), a.clone()]).unwrap();
        assert_eq!(t.children(&root), &[b.clone(), p.clone()]);
        assert_eq!(t.children(&p), &[a.clone(), c.clone()]);
        assert_eq!(t.parent(&a), Some(&p));
        assert!(t.check_invariants().is_ok());
        assert_eq!(t.path_to(&c), vec![p, c]);
    }

    #[test]
    fn stats_examples() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        for n in ["A", "B", "C"] {
            t.add_node(&root, leaf(n), &[]).unwrap();
        }
        let s = t.stats();
        assert_eq!((s.node_count, s.depth, s.avg_degree), (4, 1, 3.0));

        let mut chain = ModelingTree::new();
        let mut cur = chain.root().clone();
        for i in 0..10 {
            cur = chain.add_node(&cur, leaf(&format!("L{i}")), &[]).unwrap();
        }
        let s = chain.stats();
        assert_eq!((s.node_count, s.depth, s.avg_degree), (11, 10, 1.0));
    }

    #[test]
    fn shared_tree_snapshots_are_isolated() {
        let shared = SharedTree::new(ModelingTree::new());
        let before = shared.snapshot();
        let id = shared.update(|t| {
            let root = t.root().clone();
            t.add_node(&root, leaf("A"), &[]).unwrap()
        });
        assert_eq!(before.len(), 1);
        assert!(shared.snapshot().get(&id).is_some());
    }
}

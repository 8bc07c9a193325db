//! Tree document: `{version, root, nodes: [{id, parent, children, schema}]}`
//! with nodes in stable id order and each schema in its canonical form.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ModelingTree, NodeId, TreeError, TreeNode};
use crate::schema::{schema_from_value, NodeSchema};

pub const TREE_FORMAT_VERSION: &str = "1";

#[derive(Serialize)]
struct TreeDocOut<'a> {
    version: &'static str,
    root: &'a NodeId,
    nodes: Vec<NodeDocOut<'a>>,
}

#[derive(Serialize)]
struct NodeDocOut<'a> {
    id: &'a NodeId,
    parent: Option<&'a NodeId>,
    children: &'a [NodeId],
    schema: &'a NodeSchema,
}

#[derive(Deserialize)]
struct TreeDocIn {
    version: String,
    root: NodeId,
    nodes: Vec<NodeDocIn>,
}

#[derive(Deserialize)]
struct NodeDocIn {
    id: NodeId,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    schema: serde_json::Value,
}

pub fn save_tree(tree: &ModelingTree) -> Result<String, TreeError> {
    tree.check_invariants()?;
    let doc = TreeDocOut {
        version: TREE_FORMAT_VERSION,
        root: &tree.root,
        nodes: tree
            .nodes
            .iter()
            .map(|(id, n)| NodeDocOut {
                id,
                parent: n.parent.as_ref(),
                children: &n.children,
                schema: &n.schema,
            })
            .collect(),
    };
    let mut out =
        serde_json::to_string_pretty(&doc).map_err(|e| TreeError::MalformedDocument(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

/// Parses and validates a tree document. Invalid trees are rejected, never repaired.
pub fn load_tree(document: &str) -> Result<ModelingTree, TreeError> {
    let doc: TreeDocIn =
        serde_json::from_str(document).map_err(|e| TreeError::MalformedDocument(e.to_string()))?;
    if doc.version != TREE_FORMAT_VERSION {
        return Err(TreeError::MalformedDocument(format!(
            "unsupported tree format version `{}`",
            doc.version
        )));
    }
    let mut nodes = IndexMap::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        let schema = schema_from_value(n.schema)
            .map_err(|e| TreeError::MalformedDocument(format!("node {}: {e}", n.id)))?;
        let node = TreeNode {
            schema,
            parent: n.parent,
            children: n.children,
        };
        if nodes.insert(n.id.clone(), node).is_some() {
            return Err(TreeError::InvariantViolation(format!(
                "duplicate node id {}",
                n.id
            )));
        }
    }
    ModelingTree::from_parts(doc.root, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ModelingStep, ModelingThoughts, StatementThought};

    fn leaf(name: &str) -> NodeSchema {
        NodeSchema::new(
            name,
            vec![StatementThought::new(name, "t")],
            ModelingThoughts {
                steps: vec![ModelingStep::new("Step", "s")],
                code_template: "pass\n".into(),
                error_tips: vec!["tip".into()],
            },
        )
    }

    #[test]
    fn root_only_round_trip() {
        let t = ModelingTree::new();
        let text = save_tree(&t).unwrap();
        assert_eq!(load_tree(&text).unwrap(), t);
    }

    #[test]
    fn ids_continue_after_load() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        let a = t.add_node(&root, leaf("A"), &[]).unwrap();
        let mut loaded = load_tree(&save_tree(&t).unwrap()).unwrap();
        let b = loaded.add_node(&root, leaf("B"), &[]).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn two_roots_rejected() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        t.add_node(&root, leaf("A"), &[]).unwrap();
        let text = save_tree(&t).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["nodes"][1]["parent"] = serde_json::Value::Null;
        v["nodes"][0]["children"] = serde_json::json!([]);
        let err = load_tree(&v.to_string()).unwrap_err();
        assert!(matches!(err, TreeError::InvariantViolation(_)), "{err:?}");
    }

    #[test]
    fn inconsistent_links_rejected() {
        let mut t = ModelingTree::new();
        let root = t.root().clone();
        t.add_node(&root, leaf("A"), &[]).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&save_tree(&t).unwrap()).unwrap();
        v["nodes"][0]["children"] = serde_json::json!(["n1", "n1"]);
        assert!(matches!(
            load_tree(&v.to_string()),
            Err(TreeError::InvariantViolation(_))
        ));

        v["nodes"][0]["children"] = serde_json::json!([]);
        assert!(matches!(
            load_tree(&v.to_string()),
            Err(TreeError::InvariantViolation(_))
        ));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(load_tree("nope"), Err(TreeError::MalformedDocument(_))));
        let doc = r#"{"version":"2","root":"n0","nodes":[]}"#;
        assert!(matches!(load_tree(doc), Err(TreeError::MalformedDocument(_))));
        let doc = r#"{"version":"1","root":"n0","nodes":[]}"#;
        assert!(matches!(load_tree(doc), Err(TreeError::InvariantViolation(_))));
    }
}

//! Insert a node between a parent and some of its children.
//!
//! ```bash
//! cargo run --example node_expansion
//! ```

use optitree::oracle::{feature_schema, FeatureProblem};
use optitree::tree::ModelingTree;

fn node(features: &[&str]) -> optitree::schema::NodeSchema {
    feature_schema(&FeatureProblem::from_features(features.iter().copied()).unwrap())
}

fn show(tree: &ModelingTree, id: &optitree::tree::NodeId, indent: usize) {
    println!(
        "{:indent$}{} ({})",
        "",
        tree.schema(id).unwrap().problem_type,
        id.as_str()
    );
    for c in tree.children(id) {
        show(tree, c, indent + 2);
    }
}

fn main() {
    let mut tree = ModelingTree::new();
    let root = tree.root().clone();
    let routing_tw = tree
        .add_node(&root, node(&["route", "capacity", "time_window"]), &[])
        .unwrap();
    let routing_pd = tree
        .add_node(&root, node(&["route", "capacity", "pickup"]), &[])
        .unwrap();
    tree.add_node(&root, node(&["diet"]), &[]).unwrap();
    println!("before:");
    show(&tree, &root, 2);

    // A more general routing node adopts both specific routing nodes.
    let cvrp = tree
        .add_node(
            &root,
            node(&["route", "capacity"]),
            &[routing_tw.clone(), routing_pd],
        )
        .unwrap();
    println!("\nafter inserting {}:", tree.schema(&cvrp).unwrap().problem_type);
    show(&tree, &root, 2);

    tree.check_invariants().unwrap();
    let path: Vec<String> = tree
        .path_to(&routing_tw)
        .iter()
        .map(|id| id.as_str().to_string())
        .collect();
    println!("\npath to {}: {}", routing_tw.as_str(), path.join(" > "));
    let s = tree.stats();
    println!(
        "nodes {} depth {} avg_degree {:.2}",
        s.node_count, s.depth, s.avg_degree
    );
}

//! Check the structural submodel relation on the routing toy models.
//!
//! ```bash
//! cargo run --example structural_submodel
//! ```

use optitree::oracle::is_structural_submodel;
use optitree::oracle::structural::{toy, Sense, Sign, StructuralModel};

fn main() {
    let (vrp, cvrp, cvrptw) = (toy::vrp(), toy::cvrp(), toy::cvrptw());
    let pairs = [
        ("VRP", &vrp, "CVRP", &cvrp),
        ("CVRP", &cvrp, "CVRPTW", &cvrptw),
        ("CVRPTW", &cvrptw, "CVRP", &cvrp),
    ];
    for (a, ma, b, mb) in pairs {
        println!("{a:>7} sub of {b:<7} {}", is_structural_submodel(ma, mb));
    }

    // Only supports and senses are compared, so rows over x alone look alike.
    let assignment = StructuralModel::new(&["x"])
        .objective(&["x"], Sign::Positive, 1)
        .constraint("assign_once", &["x"], Sense::Eq);
    println!(
        "assignment sub of CVRPTW {}",
        is_structural_submodel(&assignment, &cvrptw)
    );
    let knapsack = StructuralModel::new(&["z"])
        .objective(&["z"], Sign::Negative, 1)
        .constraint("weight", &["z"], Sense::Le);
    println!(
        "knapsack sub of CVRPTW   {}",
        is_structural_submodel(&knapsack, &cvrptw)
    );

    let seen = cvrptw.restrict(&["x".to_string()].into_iter().collect());
    println!(
        "\nCVRPTW restricted to x keeps {} constraints:",
        seen.constraints.len()
    );
    for c in &seen.constraints {
        println!("  {:<24} {:?}", c.tag, c.sense);
    }
}

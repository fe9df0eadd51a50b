#![allow(dead_code)]

use trilab::TransitiveGraph;

pub const BATTERY: [&str; 6] = ["complete:2", "complete:3", "complete:4", "cycle:6", "cycle:8", "torus:2,3"];
pub const PROBABILITIES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

pub fn graph(spec: &str) -> TransitiveGraph {
    TransitiveGraph::build(spec.parse().unwrap()).unwrap()
}

pub fn battery() -> Vec<TransitiveGraph> {
    BATTERY.iter().map(|s| graph(s)).collect()
}

// Scratch probe; removed before release.
use ergm::ego::{synth_population, SynthSpec};
use std::time::Instant;

fn main() {
    let spec: SynthSpec = serde_json::from_str(
        &std::fs::read_to_string("data/synth/partnership_population.json").unwrap(),
    ).unwrap();
    let t0 = Instant::now();
    let (net, _attrs, fit) = synth_population(&spec, 1000, 4242).unwrap();
    println!("took {:?} converged={} edges={}", t0.elapsed(), fit.converged, net.edge_count());
    println!("target:   {:?}", fit.target.as_slice());
    println!("achieved: {:?}", fit.achieved.as_slice().iter().map(|v| (v*10.0).round()/10.0).collect::<Vec<_>>());
}

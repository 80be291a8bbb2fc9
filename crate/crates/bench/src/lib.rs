//! Fixtures shared by the benchmarks.

use narrow_core::{generate_kb, Evidence, Findings, GeneratorSpec, Network};

pub fn network(n_diseases: usize, n_manifestations: usize, n_treatments: usize, seed: u64) -> Network {
    Network::new(generate_kb(&GeneratorSpec::new(n_diseases, n_manifestations, n_treatments, seed)).unwrap()).unwrap()
}

/// The first `present` manifestations observed present, the next `absent` absent.
pub fn findings(net: &Network, present: usize, absent: usize) -> Findings {
    let mut f = Findings::empty();
    let n = net.manifestations().len();
    for m in 0..present.min(n) {
        f.set_present(net.manifestation_id(m));
    }
    for m in present.min(n)..(present + absent).min(n) {
        f.set_absent(net.manifestation_id(m));
    }
    f
}

pub fn evidence(net: &Network, present: usize, absent: usize) -> Evidence {
    net.evidence(&findings(net, present, absent)).unwrap()
}

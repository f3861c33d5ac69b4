//! Ready-made networks and data used by the tests, the experiments and the
//! command-line examples.

use std::collections::BTreeMap;

use super::{Junction, Network, PathSpec, Road};
use crate::series::PiecewiseConstant;
use crate::network::NetworkData;

fn road(id: &str, length: f64, n_cells: usize) -> Road {
    Road {
        id: id.into(),
        length,
        n_cells,
    }
}

fn junction(id: &str, incoming: &str, outgoing: &[&str]) -> Junction {
    Junction {
        id: id.into(),
        incoming: vec![incoming.into()],
        outgoing: outgoing.iter().map(|s| s.to_string()).collect(),
    }
}

fn path(id: &str, roads: &[&str]) -> PathSpec {
    PathSpec {
        id: id.into(),
        roads: roads.iter().map(|s| s.to_string()).collect(),
    }
}

/// Tree with 15 unit-length roads, 5 junctions, one source and 10
/// destinations; every destination is reached by exactly one path.
pub fn tree_network(n_cells: usize) -> Network {
    let edges = [
        "S-N1", "N1-N21", "N1-N22", "N1-N23", "N21-D1", "N21-D2", "N22-D3", "N22-D4", "N22-D5",
        "N22-D6", "N23-D7", "N23-D8", "N23-D9", "D4-D41", "D4-D42",
    ];
    let roads = edges.iter().map(|e| road(e, 1.0, n_cells)).collect();
    let junctions = vec![
        junction("N1", "S-N1", &["N1-N21", "N1-N22", "N1-N23"]),
        junction("N21", "N1-N21", &["N21-D1", "N21-D2"]),
        junction("N22", "N1-N22", &["N22-D3", "N22-D4", "N22-D5", "N22-D6"]),
        junction("N23", "N1-N23", &["N23-D7", "N23-D8", "N23-D9"]),
        junction("D4", "N22-D4", &["D4-D41", "D4-D42"]),
    ];
    let paths = vec![
        path("P1", &["S-N1", "N1-N21", "N21-D1"]),
        path("P2", &["S-N1", "N1-N21", "N21-D2"]),
        path("P3", &["S-N1", "N1-N22", "N22-D3"]),
        path("P4", &["S-N1", "N1-N22", "N22-D4", "D4-D41"]),
        path("P5", &["S-N1", "N1-N22", "N22-D4", "D4-D42"]),
        path("P6", &["S-N1", "N1-N22", "N22-D5"]),
        path("P7", &["S-N1", "N1-N22", "N22-D6"]),
        path("P8", &["S-N1", "N1-N23", "N23-D7"]),
        path("P9", &["S-N1", "N1-N23", "N23-D8"]),
        path("P10", &["S-N1", "N1-N23", "N23-D9"]),
    ];
    Network {
        roads,
        junctions,
        paths,
    }
}

/// Source road `S` splitting at junction `J` into roads `A` and `B`; path
/// `P1` takes `A`, path `P2` takes `B`.
pub fn split_network(n_cells: usize, length: f64) -> Network {
    Network {
        roads: vec![road("S", length, n_cells), road("A", length, n_cells), road("B", length, n_cells)],
        junctions: vec![junction("J", "S", &["A", "B"])],
        paths: vec![path("P1", &["S", "A"]), path("P2", &["S", "B"])],
    }
}

/// Source road `S` continuing through junction `J` onto road `C`; both paths
/// use `C`, so the junction should be transparent.
pub fn pass_through_network(n_cells: usize, length: f64) -> Network {
    Network {
        roads: vec![road("S", length, n_cells), road("C", length, n_cells)],
        junctions: vec![junction("J", "S", &["C"])],
        paths: vec![path("P1", &["S", "C"]), path("P2", &["S", "C"])],
    }
}

/// Two junctions in series: `S` splits at `J1` into `A` and `B`, and `A`
/// splits at `J2` into `A1` and `A2`. Paths: `P1 = S,A,A1`, `P2 = S,A,A2`,
/// `P3 = S,B`.
pub fn two_junction_network(n_cells: usize, length: f64) -> Network {
    Network {
        roads: vec![
            road("S", length, n_cells),
            road("A", length, n_cells),
            road("B", length, n_cells),
            road("A1", length, n_cells),
            road("A2", length, n_cells),
        ],
        junctions: vec![junction("J1", "S", &["A", "B"]), junction("J2", "A", &["A1", "A2"])],
        paths: vec![
            path("P1", &["S", "A", "A1"]),
            path("P2", &["S", "A", "A2"]),
            path("P3", &["S", "B"]),
        ],
    }
}

/// Constant data: density `rho` everywhere and fraction `shares[k]` for
/// path `k` at the source and on every road, renormalized over the paths
/// sharing each road.
pub fn uniform_data(net: &Network, rho: f64, shares: &[f64]) -> NetworkData {
    let mut data = NetworkData {
        rho_in: PiecewiseConstant::constant(rho),
        ..NetworkData::default()
    };
    for (k, p) in net.paths.iter().enumerate() {
        data.theta_in.insert(p.id.clone(), PiecewiseConstant::constant(shares[k]));
    }
    for r in &net.roads {
        data.rho0.insert(r.id.clone(), PiecewiseConstant::constant(rho));
        let users: Vec<usize> = (0..net.paths.len())
            .filter(|&k| net.paths[k].roads.contains(&r.id))
            .collect();
        let total: f64 = users.iter().map(|&k| shares[k]).sum();
        for &k in &users {
            let value = if total > 0.0 { shares[k] / total } else { 1.0 / users.len() as f64 };
            data.theta0
                .insert((net.paths[k].id.clone(), r.id.clone()), PiecewiseConstant::constant(value));
        }
    }
    data
}

/// The fixture with a steady density `0.2` on the source road, split 60/40
/// between two paths, and empty downstream roads.
pub fn split_steady_data(net: &Network) -> NetworkData {
    let mut data = uniform_data(net, 0.2, &[0.6, 0.4]);
    for r in &net.roads {
        if r.id != "S" {
            data.rho0.insert(r.id.clone(), PiecewiseConstant::constant(0.0));
        }
    }
    data
}

/// Splits `values` on `[0, length)` into equal pieces.
pub fn equal_pieces(length: f64, values: &[f64]) -> PiecewiseConstant {
    let n = values.len();
    let breakpoints = (1..n).map(|i| length * i as f64 / n as f64).collect();
    PiecewiseConstant::new(breakpoints, values.to_vec()).expect("increasing breakpoints")
}

/// Normalizes per-path fraction profiles on equal pieces so they sum to one
/// in every piece.
pub fn normalized_shares(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pieces = raw[0].len();
    let mut out = vec![vec![0.0; pieces]; raw.len()];
    for i in 0..pieces {
        let total: f64 = raw.iter().map(|r| r[i]).sum();
        for (k, r) in raw.iter().enumerate() {
            out[k][i] = r[i] / total;
        }
    }
    // Put the rounding defect on the last path so the sum is exactly one.
    for i in 0..pieces {
        let head: f64 = out[..raw.len() - 1].iter().map(|r| r[i]).sum();
        out[raw.len() - 1][i] = (1.0 - head).max(0.0);
    }
    out
}

/// Builds data from per-road density pieces, per-(path, road) raw fraction
/// weights, a source inflow density and raw inflow fraction weights. Weights
/// are normalized over the paths sharing each road.
pub fn data_from_weights(
    net: &Network,
    rho0: &BTreeMap<String, Vec<f64>>,
    weights0: &BTreeMap<(String, String), Vec<f64>>,
    rho_in: PiecewiseConstant,
    weights_in: &[Vec<f64>],
    horizon: f64,
) -> NetworkData {
    let mut data = NetworkData {
        rho_in,
        ..NetworkData::default()
    };
    for r in &net.roads {
        data.rho0.insert(r.id.clone(), equal_pieces(r.length, &rho0[&r.id]));
        let users: Vec<usize> = (0..net.paths.len())
            .filter(|&k| net.paths[k].roads.contains(&r.id))
            .collect();
        let raw: Vec<Vec<f64>> = users
            .iter()
            .map(|&k| weights0[&(net.paths[k].id.clone(), r.id.clone())].clone())
            .collect();
        for (i, shares) in normalized_shares(&raw).into_iter().enumerate() {
            let k = users[i];
            data.theta0
                .insert((net.paths[k].id.clone(), r.id.clone()), equal_pieces(r.length, &shares));
        }
    }
    for (k, shares) in normalized_shares(weights_in).into_iter().enumerate() {
        data.theta_in.insert(net.paths[k].id.clone(), equal_pieces(horizon, &shares));
    }
    data
}

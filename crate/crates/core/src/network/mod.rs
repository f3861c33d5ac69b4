//! Road networks whose junctions have exactly one incoming road, the paths
//! driven through them, and the road-by-road solve.

pub mod fixtures;
mod solve;

pub use solve::*;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub length: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: String,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub id: String,
    pub roads: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub roads: Vec<Road>,
    pub junctions: Vec<Junction>,
    pub paths: Vec<PathSpec>,
}

/// Index structure of a validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub source: usize,
    /// Roads in an order where every road follows the road feeding it.
    pub order: Vec<usize>,
    pub upstream_junction: Vec<Option<usize>>,
    pub downstream_junction: Vec<Option<usize>>,
    /// Road indices of each path.
    pub paths: Vec<Vec<usize>>,
    /// Path indices through each road, increasing.
    pub paths_on_road: Vec<Vec<usize>>,
}

impl Network {
    pub fn road_index(&self, id: &str) -> Option<usize> {
        self.roads.iter().position(|r| r.id == id)
    }

    pub fn path_index(&self, id: &str) -> Option<usize> {
        self.paths.iter().position(|p| p.id == id)
    }

    pub fn junction_index(&self, id: &str) -> Option<usize> {
        self.junctions.iter().position(|j| j.id == id)
    }

    /// Checks the single-incoming-road property, path consistency, the common
    /// source road, coverage of every road and acyclicity. Returns every
    /// violation found.
    pub fn validate(&self) -> std::result::Result<Topology, Vec<String>> {
        let mut errs = Vec::new();
        duplicates("road", self.roads.iter().map(|r| &r.id), &mut errs);
        duplicates("junction", self.junctions.iter().map(|j| &j.id), &mut errs);
        duplicates("path", self.paths.iter().map(|p| &p.id), &mut errs);
        for r in &self.roads {
            if !(r.length > 0.0 && r.length.is_finite()) {
                errs.push(format!("road {}: length must be positive", r.id));
            }
            if r.n_cells < 2 {
                errs.push(format!("road {}: needs at least 2 cells", r.id));
            }
        }
        if self.roads.is_empty() {
            errs.push("network has no roads".into());
        }
        if self.paths.is_empty() {
            errs.push("network has no paths".into());
        }
        let index: BTreeMap<&str, usize> = self
            .roads
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        let n = self.roads.len();
        let mut upstream = vec![None; n];
        let mut downstream = vec![None; n];
        for (ji, j) in self.junctions.iter().enumerate() {
            if j.incoming.len() != 1 {
                errs.push(format!(
                    "junction {}: non-T junction ({} incoming roads)",
                    j.id,
                    j.incoming.len()
                ));
            }
            if j.outgoing.is_empty() {
                errs.push(format!("junction {}: no outgoing road", j.id));
            }
            for (role, ids, slot) in [
                ("incoming", &j.incoming, &mut downstream),
                ("outgoing", &j.outgoing, &mut upstream),
            ] {
                for id in ids {
                    match index.get(id.as_str()) {
                        None => errs.push(format!("junction {}: unknown {role} road {id}", j.id)),
                        Some(&r) => {
                            if let Some(other) = slot[r] {
                                let other: usize = other;
                                errs.push(format!(
                                    "road {id} is {role} at both junction {} and junction {}",
                                    self.junctions[other].id, j.id
                                ));
                            } else {
                                slot[r] = Some(ji);
                            }
                        }
                    }
                }
            }
        }
        let sources: Vec<usize> = (0..n).filter(|&r| upstream[r].is_none()).collect();
        if sources.len() != 1 {
            let names: Vec<&str> = sources.iter().map(|&r| self.roads[r].id.as_str()).collect();
            errs.push(format!(
                "expected a single source road, found {} ({})",
                sources.len(),
                names.join(", ")
            ));
        }
        let source = sources.first().copied().unwrap_or(0);

        let mut paths = Vec::with_capacity(self.paths.len());
        let mut paths_on_road = vec![Vec::new(); n];
        for (pi, p) in self.paths.iter().enumerate() {
            let mut roads = Vec::with_capacity(p.roads.len());
            for id in &p.roads {
                match index.get(id.as_str()) {
                    Some(&r) => roads.push(r),
                    None => errs.push(format!("path {}: unknown road {id}", p.id)),
                }
            }
            if roads.len() != p.roads.len() {
                continue;
            }
            if roads.is_empty() {
                errs.push(format!("path {}: no roads", p.id));
                continue;
            }
            if sources.len() == 1 && roads[0] != source {
                errs.push(format!("path {}: does not start at the source road", p.id));
            }
            let distinct: BTreeSet<usize> = roads.iter().copied().collect();
            if distinct.len() != roads.len() {
                errs.push(format!("path {}: visits a road twice", p.id));
            }
            for w in roads.windows(2) {
                let consecutive = matches!(
                    (downstream[w[0]], upstream[w[1]]),
                    (Some(a), Some(b)) if a == b
                );
                if !consecutive {
                    errs.push(format!(
                        "path {}: roads {} and {} are not consecutive",
                        p.id, self.roads[w[0]].id, self.roads[w[1]].id
                    ));
                }
            }
            let last = *roads.last().unwrap();
            if downstream[last].is_some() {
                errs.push(format!(
                    "path {}: ends on road {}, which is not a destination",
                    p.id, self.roads[last].id
                ));
            }
            for &r in &distinct {
                paths_on_road[r].push(pi);
            }
            paths.push(roads);
        }
        for r in 0..n {
            if paths_on_road[r].is_empty() {
                errs.push(format!("road {} is not on any path", self.roads[r].id));
            }
        }

        // Kahn's algorithm on the road graph.
        let mut indegree: Vec<usize> = upstream.iter().map(|u| usize::from(u.is_some())).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&r| indegree[r] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut released = vec![false; self.junctions.len()];
        while let Some(r) = queue.pop_front() {
            order.push(r);
            if let Some(j) = downstream[r].filter(|&j| !released[j]) {
                released[j] = true;
                for id in &self.junctions[j].outgoing {
                    if let Some(&o) = index.get(id.as_str()) {
                        if upstream[o] == Some(j) {
                            indegree[o] -= 1;
                            if indegree[o] == 0 {
                                queue.push_back(o);
                            }
                        }
                    }
                }
            }
        }
        if order.len() != n {
            errs.push("network contains a cycle".into());
        }
        if errs.is_empty() {
            Ok(Topology {
                source,
                order,
                upstream_junction: upstream,
                downstream_junction: downstream,
                paths,
                paths_on_road,
            })
        } else {
            Err(errs)
        }
    }
}

fn duplicates<'a>(what: &str, ids: impl Iterator<Item = &'a String>, errs: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            errs.push(format!("duplicate {what} id {id}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures;
    use super::*;

    #[test]
    fn tree_topology_is_valid() {
        let net = fixtures::tree_network(10);
        assert_eq!(net.roads.len(), 15);
        assert_eq!(net.paths.len(), 10);
        let topo = net.validate().unwrap();
        let destinations = topo.downstream_junction.iter().filter(|d| d.is_none()).count();
        assert_eq!(destinations, 10);
        assert_eq!(topo.paths_on_road[topo.source].len(), 10);
    }

    #[test]
    fn two_incoming_roads_is_not_a_t_junction() {
        let mut net = fixtures::split_network(10, 1.0);
        net.roads.push(Road {
            id: "extra".into(),
            length: 1.0,
            n_cells: 10,
        });
        net.junctions[0].incoming.push("extra".into());
        let errs = net.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.contains("non-T junction")), "{errs:?}");
    }

    #[test]
    fn non_consecutive_path_is_rejected() {
        let mut net = fixtures::tree_network(10);
        net.paths[0].roads = vec!["S-N1".into(), "N21-D1".into()];
        let errs = net.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.contains("not consecutive")), "{errs:?}");
    }

    #[test]
    fn uncovered_road_and_second_source_are_reported() {
        let mut net = fixtures::split_network(10, 1.0);
        net.roads.push(Road {
            id: "island".into(),
            length: 1.0,
            n_cells: 4,
        });
        let errs = net.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.contains("single source")));
        assert!(errs.iter().any(|e| e.contains("not on any path")));
    }
}

//! Social network structures over which stories are transmitted.
//!
//! Construction is deterministic. Neighbor lists are kept sorted ascending so
//! that prompt assembly sees neighbor stories in a stable order.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("agent {agent} out of range for a network of {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },
    #[error("topology edges do not match a {kind} network of {n_agents} agents")]
    EdgeMismatch { kind: String, n_agents: usize },
}

/// Network family. Serialized as `{"kind": "caveman", "n_cliques": 2}` etc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    FullyConnected,
    Circle,
    Caveman { n_cliques: usize },
    Sequence,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::FullyConnected => "fully_connected",
            TopologyKind::Circle => "circle",
            TopologyKind::Caveman { .. } => "caveman",
            TopologyKind::Sequence => "sequence",
        }
    }

    /// Parses a network name as used on the command line and in query strings.
    /// `n_cliques` is only consulted for `caveman`.
    pub fn parse(name: &str, n_cliques: Option<usize>) -> Result<Self, TopologyError> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "fully_connected" | "fullyconnected" | "complete" => Ok(TopologyKind::FullyConnected),
            "circle" | "cycle" | "ring" => Ok(TopologyKind::Circle),
            "sequence" | "chain" => Ok(TopologyKind::Sequence),
            "caveman" => match n_cliques {
                Some(n_cliques) => Ok(TopologyKind::Caveman { n_cliques }),
                None => Err(TopologyError::InvalidPopulation(
                    "caveman network requires a number of cliques".into(),
                )),
            },
            other => Err(TopologyError::InvalidPopulation(format!(
                "unknown network kind `{other}` (expected fully_connected, circle, caveman or sequence)"
            ))),
        }
    }

    /// Checks the arity constraints of this kind for a population size.
    pub fn validate(&self, n_agents: usize) -> Result<(), TopologyError> {
        let fail = |msg: String| Err(TopologyError::InvalidPopulation(msg));
        match *self {
            TopologyKind::FullyConnected | TopologyKind::Sequence => {
                if n_agents < 1 {
                    return fail(format!("{} network needs at least 1 agent", self.name()));
                }
            }
            TopologyKind::Circle => {
                if n_agents < 3 {
                    return fail(format!("circle network needs at least 3 agents, got {n_agents}"));
                }
            }
            TopologyKind::Caveman { n_cliques } => {
                if n_cliques < 2 {
                    return fail(format!("caveman network needs at least 2 cliques, got {n_cliques}"));
                }
                if !n_agents.is_multiple_of(n_cliques) {
                    return fail(format!(
                        "caveman network: {n_agents} agents cannot be split evenly into {n_cliques} cliques"
                    ));
                }
                let size = n_agents / n_cliques;
                if size < 3 {
                    return fail(format!(
                        "caveman network: cliques must hold at least 3 agents, got {size}"
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Caveman { n_cliques } => write!(f, "caveman({n_cliques})"),
            other => f.write_str(other.name()),
        }
    }
}

/// How agents are scheduled within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Every agent writes once per generation; generations are separated by a barrier.
    Synchronous,
    /// One agent per step, each waiting for its predecessor.
    SequentialChain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_agents: usize,
    kind: TopologyKind,
    adjacency: Vec<Vec<usize>>,
    schedule: Schedule,
}

impl Topology {
    pub fn build(kind: TopologyKind, n_agents: usize) -> Result<Self, TopologyError> {
        kind.validate(n_agents)?;
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_agents];
        let link = |a: usize, b: usize, adj: &mut Vec<BTreeSet<usize>>| {
            adj[a].insert(b);
            adj[b].insert(a);
        };
        let schedule = match kind {
            TopologyKind::FullyConnected => {
                for i in 0..n_agents {
                    for j in i + 1..n_agents {
                        link(i, j, &mut adj);
                    }
                }
                Schedule::Synchronous
            }
            TopologyKind::Circle => {
                for i in 0..n_agents {
                    link(i, (i + 1) % n_agents, &mut adj);
                }
                Schedule::Synchronous
            }
            TopologyKind::Caveman { n_cliques } => {
                let size = n_agents / n_cliques;
                for k in 0..n_cliques {
                    let base = k * size;
                    for i in base..base + size {
                        for j in i + 1..base + size {
                            link(i, j, &mut adj);
                        }
                    }
                }
                // One rewired edge per clique closes the ring of cliques.
                for k in 0..n_cliques {
                    let base = k * size;
                    adj[base].remove(&(base + 1));
                    adj[base + 1].remove(&base);
                    let target = ((k + 1) % n_cliques) * size + 1;
                    link(base, target, &mut adj);
                }
                Schedule::Synchronous
            }
            TopologyKind::Sequence => {
                // Directed: agent i only hears from agent i - 1.
                for (i, neighbors) in adj.iter_mut().enumerate().skip(1) {
                    neighbors.insert(i - 1);
                }
                Schedule::SequentialChain
            }
        };
        Ok(Topology {
            n_agents,
            kind,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
            schedule,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Agents whose previous-generation stories `agent` receives, ascending.
    pub fn neighbors(&self, agent: usize) -> Result<&[usize], TopologyError> {
        self.adjacency
            .get(agent)
            .map(Vec::as_slice)
            .ok_or(TopologyError::AgentOutOfRange { agent, n_agents: self.n_agents })
    }

    /// Edge list. Undirected kinds list each edge once as `[i, j]` with
    /// `i < j`; a sequence lists `[i - 1, i]` in chain order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        match self.schedule {
            Schedule::SequentialChain => (1..self.n_agents).map(|i| [i - 1, i]).collect(),
            Schedule::Synchronous => self
                .adjacency
                .iter()
                .enumerate()
                .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| [i, j]))
                .collect(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Number of connected components, treating every edge as undirected.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n_agents];
        let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); self.n_agents];
        for [a, b] in self.edges() {
            undirected[a].push(b);
            undirected[b].push(a);
        }
        let mut components = 0;
        for start in 0..self.n_agents {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &undirected[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }
}

#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    kind: String,
    n_agents: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    n_cliques: Option<usize>,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n_cliques = match self.kind {
            TopologyKind::Caveman { n_cliques } => Some(n_cliques),
            _ => None,
        };
        TopologyRepr {
            kind: self.kind.name().to_string(),
            n_agents: self.n_agents,
            n_cliques,
            edges: self.edges(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = TopologyRepr::deserialize(deserializer)?;
        let kind = TopologyKind::parse(&repr.kind, repr.n_cliques).map_err(D::Error::custom)?;
        let topology = Topology::build(kind, repr.n_agents).map_err(D::Error::custom)?;
        if topology.edges() != repr.edges {
            return Err(D::Error::custom(TopologyError::EdgeMismatch {
                kind: kind.to_string(),
                n_agents: repr.n_agents,
            }));
        }
        Ok(topology)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn degrees(t: &Topology) -> Vec<usize> {
        t.adjacency().iter().map(Vec::len).collect()
    }

    #[test]
    fn complete_graph_of_ten() {
        let t = Topology::build(TopologyKind::FullyConnected, 10).unwrap();
        assert_eq!(t.edge_count(), 45);
        assert!(degrees(&t).iter().all(|&d| d == 9));
    }

    #[test]
    fn circle_of_ten() {
        let t = Topology::build(TopologyKind::Circle, 10).unwrap();
        assert_eq!(t.edge_count(), 10);
        assert!(degrees(&t).iter().all(|&d| d == 2));
    }

    #[test]
    fn caveman_two_cliques_of_five() {
        let t = Topology::build(TopologyKind::Caveman { n_cliques: 2 }, 10).unwrap();
        // Hand enumeration: clique {0..4} minus (0,1) plus (0,6); clique {5..9} minus (5,6) plus (5,1).
        assert_eq!(t.edge_count(), 20);
        assert_eq!(t.component_count(), 1);
        assert_eq!(t.neighbors(0).unwrap(), &[2, 3, 4, 6]);
        assert_eq!(t.neighbors(1).unwrap(), &[2, 3, 4, 5]);
        assert_eq!(t.neighbors(5).unwrap(), &[1, 7, 8, 9]);
        assert_eq!(t.neighbors(6).unwrap(), &[0, 7, 8, 9]);
    }

    #[test]
    fn sequence_is_a_chain() {
        let t = Topology::build(TopologyKind::Sequence, 3).unwrap();
        assert_eq!(t.adjacency(), &[vec![], vec![0], vec![1]]);
        assert_eq!(t.schedule(), Schedule::SequentialChain);
        let long = Topology::build(TopologyKind::Sequence, 50).unwrap();
        assert_eq!(long.neighbors(49).unwrap(), &[48]);
    }

    #[test]
    fn neighbor_lookups() {
        let t = Topology::build(TopologyKind::FullyConnected, 3).unwrap();
        assert_eq!(t.neighbors(1).unwrap(), &[0, 2]);
        let c = Topology::build(TopologyKind::Circle, 5).unwrap();
        assert_eq!(c.neighbors(0).unwrap(), &[1, 4]);
        assert_eq!(
            c.neighbors(5),
            Err(TopologyError::AgentOutOfRange { agent: 5, n_agents: 5 })
        );
    }

    #[test]
    fn population_errors() {
        let bad = [
            (TopologyKind::Caveman { n_cliques: 3 }, 10),
            (TopologyKind::Caveman { n_cliques: 1 }, 10),
            (TopologyKind::Caveman { n_cliques: 5 }, 10),
            (TopologyKind::Circle, 2),
            (TopologyKind::FullyConnected, 0),
            (TopologyKind::Sequence, 0),
        ];
        for (kind, n) in bad {
            assert!(
                matches!(Topology::build(kind, n), Err(TopologyError::InvalidPopulation(_))),
                "{kind} with {n} agents should be rejected"
            );
        }
        assert!(TopologyKind::parse("caveman", None).is_err());
        assert!(TopologyKind::parse("star", None).is_err());
    }

    #[test]
    fn json_shape() {
        let t = Topology::build(TopologyKind::Caveman { n_cliques: 2 }, 6).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["kind"], "caveman");
        assert_eq!(v["n_agents"], 6);
        assert_eq!(v["n_cliques"], 2);
        assert_eq!(v["edges"].as_array().unwrap().len(), 6);
        let back: Topology = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);

        let circle = serde_json::to_value(Topology::build(TopologyKind::Circle, 4).unwrap()).unwrap();
        assert!(circle.get("n_cliques").is_none());

        let tampered = serde_json::json!({"kind": "circle", "n_agents": 4, "edges": [[0, 1]]});
        assert!(serde_json::from_value::<Topology>(tampered).is_err());
    }

    #[test]
    fn kind_json_tags() {
        let k: TopologyKind = serde_json::from_str(r#"{"kind":"caveman","n_cliques":2}"#).unwrap();
        assert_eq!(k, TopologyKind::Caveman { n_cliques: 2 });
        assert_eq!(
            serde_json::to_string(&TopologyKind::FullyConnected).unwrap(),
            r#"{"kind":"fully_connected"}"#
        );
    }

    fn undirected_kinds() -> impl Strategy<Value = (TopologyKind, usize)> {
        prop_oneof![
            (3usize..=50).prop_map(|n| (TopologyKind::FullyConnected, n)),
            (3usize..=50).prop_map(|n| (TopologyKind::Circle, n)),
            (2usize..=8, 3usize..=7)
                .prop_map(|(c, m)| (TopologyKind::Caveman { n_cliques: c }, c * m)),
        ]
    }

    proptest! {
        #[test]
        fn undirected_kinds_are_symmetric_and_irreflexive((kind, n) in undirected_kinds()) {
            let t = Topology::build(kind, n).unwrap();
            for (i, ns) in t.adjacency().iter().enumerate() {
                prop_assert!(!ns.contains(&i));
                prop_assert!(ns.windows(2).all(|w| w[0] < w[1]));
                for &j in ns {
                    prop_assert!(t.adjacency()[j].contains(&i));
                }
            }
            prop_assert_eq!(t.component_count(), 1);
            prop_assert_eq!(Topology::build(kind, n).unwrap(), t);
        }

        #[test]
        fn caveman_edge_formula(c in 2usize..=8, m in 3usize..=8) {
            let t = Topology::build(TopologyKind::Caveman { n_cliques: c }, c * m).unwrap();
            prop_assert_eq!(t.edge_count(), c * (m * (m - 1) / 2 - 1) + c);
        }
    }
}

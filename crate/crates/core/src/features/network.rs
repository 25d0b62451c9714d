use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Directed follower graph. An edge `follower → followee` means the
/// follower sees the followee's posts. Nodes are kept in sorted id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    followers: Vec<Vec<usize>>,
    followees: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Network {
    /// Builds a network from explicit nodes plus edges. Edge endpoints must be
    /// among `nodes`; duplicate edges collapse and self-loops are rejected.
    pub fn new<N, E>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = String>,
        E: IntoIterator<Item = (String, String)>,
    {
        let ids: Vec<String> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if ids.is_empty() {
            return Err(Error::Input("network has no nodes".into()));
        }
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut pairs = BTreeSet::new();
        for (follower, followee) in edges {
            if follower == followee {
                return Err(Error::Input(format!("self-loop on node {follower}")));
            }
            let lookup = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("edge references unknown node {id}")))
            };
            pairs.insert((lookup(&follower)?, lookup(&followee)?));
        }
        let mut followers = vec![Vec::new(); ids.len()];
        let mut followees = vec![Vec::new(); ids.len()];
        for &(a, b) in &pairs {
            followers[b].push(a);
            followees[a].push(b);
        }
        for list in followers.iter_mut().chain(followees.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self {
            ids,
            index,
            followers,
            followees,
            edge_count: pairs.len(),
        })
    }

    /// Node set is the union of `isolated` and all edge endpoints.
    pub fn from_edges<E>(edges: E, isolated: impl IntoIterator<Item = String>) -> Result<Self>
    where
        E: IntoIterator<Item = (String, String)>,
    {
        let edges: Vec<(String, String)> = edges.into_iter().collect();
        let nodes: Vec<String> = edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .chain(isolated)
            .collect();
        Self::new(nodes, edges)
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Nodes following `idx`, sorted.
    pub fn followers(&self, idx: usize) -> &[usize] {
        &self.followers[idx]
    }

    /// Nodes `idx` follows, sorted.
    pub fn followees(&self, idx: usize) -> &[usize] {
        &self.followees[idx]
    }

    /// All edges as `(follower, followee)` index pairs, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.followees
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b)))
    }
}

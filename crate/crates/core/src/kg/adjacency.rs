use serde::{Deserialize, Serialize};

use super::{KgPair, KnowledgeGraph};

/// Aggregation edge `(neighbor, relation)` in dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub neighbor: usize,
    pub relation: usize,
}

/// Per-entity neighbor lists used by the attention layers.
///
/// For a graph with `|R|` relations, relation slot `r` is the forward
/// relation at dense position `r`, `r + |R|` its inverse, and `2|R|` the
/// self-loop relation. Lists are sorted by `(neighbor, relation)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    lists: Vec<Vec<Edge>>,
    num_relations: usize,
}

impl NeighborIndex {
    /// Index from explicit per-entity lists; lists are sorted on entry.
    pub fn from_lists(mut lists: Vec<Vec<Edge>>, num_relations: usize) -> Self {
        for l in &mut lists {
            l.sort_unstable();
        }
        Self {
            lists,
            num_relations,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.lists.len()
    }

    /// Number of relation slots (forward, inverse and self-loop).
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn edges(&self, entity: usize) -> &[Edge] {
        &self.lists[entity]
    }

    pub fn num_edges(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Edge])> {
        self.lists.iter().enumerate().map(|(i, l)| (i, l.as_slice()))
    }

    /// Places `other` after `self`: entity and relation indices of `other`
    /// are shifted past those of `self`.
    pub fn concat(&self, other: &NeighborIndex) -> NeighborIndex {
        let node_off = self.lists.len();
        let rel_off = self.num_relations;
        let mut lists = self.lists.clone();
        lists.extend(other.lists.iter().map(|l| {
            l.iter()
                .map(|e| Edge {
                    neighbor: e.neighbor + node_off,
                    relation: e.relation + rel_off,
                })
                .collect()
        }));
        NeighborIndex {
            lists,
            num_relations: self.num_relations + other.num_relations,
        }
    }
}

pub fn build_adjacency(kg: &KnowledgeGraph) -> NeighborIndex {
    let n_rel = kg.num_relations();
    let self_rel = 2 * n_rel;
    let mut lists: Vec<Vec<Edge>> = (0..kg.num_entities())
        .map(|i| {
            vec![Edge {
                neighbor: i,
                relation: self_rel,
            }]
        })
        .collect();
    for t in kg.triples() {
        // Ids were validated when the graph was built.
        let h = kg.entity_position(t.head).expect("validated head");
        let tl = kg.entity_position(t.tail).expect("validated tail");
        let r = kg.relation_position(t.relation).expect("validated relation");
        lists[h].push(Edge {
            neighbor: tl,
            relation: r,
        });
        lists[tl].push(Edge {
            neighbor: h,
            relation: r + n_rel,
        });
    }
    for l in &mut lists {
        l.sort_unstable();
    }
    NeighborIndex {
        lists,
        num_relations: 2 * n_rel + 1,
    }
}

/// Union index over both graphs, laid out in the pair's global entity order.
/// The graphs stay disconnected; they share only model parameters.
pub fn build_pair_adjacency(pair: &KgPair) -> NeighborIndex {
    build_adjacency(&pair.source).concat(&build_adjacency(&pair.target))
}

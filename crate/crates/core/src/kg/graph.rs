use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{KgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: u64,
    pub relation: u64,
    pub tail: u64,
}

/// One knowledge graph `(E, R, T)` with surface names.
///
/// Immutable once built; construction validates that every triple refers to
/// known ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entities: BTreeMap<u64, String>,
    relations: BTreeMap<u64, String>,
    triples: Vec<Triple>,
    entity_ids: Vec<u64>,
    relation_ids: Vec<u64>,
    entity_pos: HashMap<u64, usize>,
    relation_pos: HashMap<u64, usize>,
}

impl KnowledgeGraph {
    pub fn new(
        entities: BTreeMap<u64, String>,
        relations: BTreeMap<u64, String>,
        triples: Vec<Triple>,
    ) -> Result<Self> {
        for t in &triples {
            for id in [t.head, t.tail] {
                if !entities.contains_key(&id) {
                    return Err(KgError::Invalid(format!(
                        "triple ({}, {}, {}) references unknown entity {id}",
                        t.head, t.relation, t.tail
                    )));
                }
            }
            if !relations.contains_key(&t.relation) {
                return Err(KgError::Invalid(format!(
                    "triple ({}, {}, {}) references unknown relation {}",
                    t.head, t.relation, t.tail, t.relation
                )));
            }
        }
        let entity_ids: Vec<u64> = entities.keys().copied().collect();
        let relation_ids: Vec<u64> = relations.keys().copied().collect();
        let entity_pos = entity_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let relation_pos = relation_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(Self {
            entities,
            relations,
            triples,
            entity_ids,
            relation_ids,
            entity_pos,
            relation_pos,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_ids.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    /// Entity ids in ascending order; index in this slice is the dense position.
    pub fn entity_ids(&self) -> &[u64] {
        &self.entity_ids
    }

    pub fn relation_ids(&self) -> &[u64] {
        &self.relation_ids
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entities(&self) -> impl Iterator<Item = (u64, &str)> {
        self.entities.iter().map(|(&id, n)| (id, n.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (u64, &str)> {
        self.relations.iter().map(|(&id, n)| (id, n.as_str()))
    }

    pub fn contains_entity(&self, id: u64) -> bool {
        self.entities.contains_key(&id)
    }

    /// Full surface name as stored in the dataset (often a URI).
    pub fn entity_name(&self, id: u64) -> Option<&str> {
        self.entities.get(&id).map(String::as_str)
    }

    /// Human-readable name with any URI prefix removed.
    pub fn entity_display_name(&self, id: u64) -> Option<&str> {
        self.entity_name(id).map(display_name)
    }

    pub fn relation_name(&self, id: u64) -> Option<&str> {
        self.relations.get(&id).map(String::as_str)
    }

    pub fn entity_position(&self, id: u64) -> Option<usize> {
        self.entity_pos.get(&id).copied()
    }

    pub fn relation_position(&self, id: u64) -> Option<usize> {
        self.relation_pos.get(&id).copied()
    }
}

/// Strips a URI prefix: returns the text after the final `/` when the name
/// looks like a URI, otherwise the name unchanged.
pub fn display_name(name: &str) -> &str {
    if name.contains("://") {
        match name.trim_end_matches('/').rsplit_once('/') {
            Some((_, tail)) if !tail.is_empty() => tail,
            _ => name,
        }
    } else {
        name
    }
}

/// Source and target graphs. Ids are interpreted per side, so the two id
/// spaces may overlap; every API that takes an id also takes (or implies)
/// the [`Side`].
///
/// For the joint embedding the pair defines a global entity index: source
/// positions come first, followed by target positions offset by
/// `source.num_entities()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KgPair {
    pub source: KnowledgeGraph,
    pub target: KnowledgeGraph,
}

impl KgPair {
    pub fn new(source: KnowledgeGraph, target: KnowledgeGraph) -> Self {
        Self { source, target }
    }

    pub fn graph(&self, side: Side) -> &KnowledgeGraph {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    pub fn total_entities(&self) -> usize {
        self.source.num_entities() + self.target.num_entities()
    }

    pub fn global_index(&self, side: Side, id: u64) -> Option<usize> {
        let pos = self.graph(side).entity_position(id)?;
        Some(match side {
            Side::Source => pos,
            Side::Target => self.source.num_entities() + pos,
        })
    }

    /// Inverse of [`KgPair::global_index`].
    pub fn resolve_global(&self, index: usize) -> Option<(Side, u64)> {
        let n_src = self.source.num_entities();
        if index < n_src {
            Some((Side::Source, self.source.entity_ids()[index]))
        } else {
            self.target
                .entity_ids()
                .get(index - n_src)
                .map(|&id| (Side::Target, id))
        }
    }

    /// Global index range covering one side.
    pub fn side_range(&self, side: Side) -> std::ops::Range<usize> {
        let n_src = self.source.num_entities();
        match side {
            Side::Source => 0..n_src,
            Side::Target => n_src..n_src + self.target.num_entities(),
        }
    }
}

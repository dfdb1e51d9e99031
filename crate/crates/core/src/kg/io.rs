use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AlignmentSeedSet, KgError, KgPair, KnowledgeGraph, Result, Side, Triple};

/// File names of a dataset directory. The default matches the DBP15K layout.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub source_entities: &'static str,
    pub target_entities: &'static str,
    pub source_relations: &'static str,
    pub target_relations: &'static str,
    pub source_triples: &'static str,
    pub target_triples: &'static str,
    pub reference: &'static str,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            source_entities: "ent_ids_1",
            target_entities: "ent_ids_2",
            source_relations: "rel_ids_1",
            target_relations: "rel_ids_2",
            source_triples: "triples_1",
            target_triples: "triples_2",
            reference: "ref_ent_ids",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub pair: KgPair,
    pub reference: AlignmentSeedSet,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-blank lines with 1-based line numbers and trailing whitespace removed.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty())
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> KgError {
    KgError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn parse_id(path: &Path, line: usize, field: &str) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| malformed(path, line, format!("expected integer id, found {field:?}")))
}

fn parse_names(path: &Path, kind: &'static str) -> Result<BTreeMap<u64, String>> {
    let text = read(path)?;
    let mut out = BTreeMap::new();
    for (no, line) in lines(&text) {
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| malformed(path, no, "expected \"<id>\\t<name>\""))?;
        let id = parse_id(path, no, id)?;
        if out.insert(id, name.to_string()).is_some() {
            return Err(KgError::DuplicateId {
                path: path.to_path_buf(),
                line: no,
                kind,
                id,
            });
        }
    }
    Ok(out)
}

pub fn parse_kg_files(
    entity_file: impl AsRef<Path>,
    relation_file: impl AsRef<Path>,
    triple_file: impl AsRef<Path>,
) -> Result<KnowledgeGraph> {
    let entities = parse_names(entity_file.as_ref(), "entity")?;
    let relations = parse_names(relation_file.as_ref(), "relation")?;
    let path = triple_file.as_ref();
    let text = read(path)?;
    let mut triples = Vec::new();
    for (no, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(
                path,
                no,
                format!("expected 3 tab-separated ids, found {} fields", fields.len()),
            ));
        }
        let head = parse_id(path, no, fields[0])?;
        let relation = parse_id(path, no, fields[1])?;
        let tail = parse_id(path, no, fields[2])?;
        for (kind, id, known) in [
            ("entity", head, entities.contains_key(&head)),
            ("relation", relation, relations.contains_key(&relation)),
            ("entity", tail, entities.contains_key(&tail)),
        ] {
            if !known {
                return Err(KgError::DanglingId {
                    path: path.to_path_buf(),
                    line: no,
                    kind,
                    id,
                });
            }
        }
        triples.push(Triple {
            head,
            relation,
            tail,
        });
    }
    KnowledgeGraph::new(entities, relations, triples)
}

pub fn write_kg_files(
    kg: &KnowledgeGraph,
    entity_file: impl AsRef<Path>,
    relation_file: impl AsRef<Path>,
    triple_file: impl AsRef<Path>,
) -> Result<()> {
    let mut ents = String::new();
    for (id, name) in kg.entities() {
        let _ = writeln!(ents, "{id}\t{name}");
    }
    let mut rels = String::new();
    for (id, name) in kg.relations() {
        let _ = writeln!(rels, "{id}\t{name}");
    }
    let mut tris = String::new();
    for t in kg.triples() {
        let _ = writeln!(tris, "{}\t{}\t{}", t.head, t.relation, t.tail);
    }
    write(entity_file.as_ref(), &ents)?;
    write(relation_file.as_ref(), &rels)?;
    write(triple_file.as_ref(), &tris)
}

pub fn parse_seed_pairs(path: impl AsRef<Path>, pair: &KgPair) -> Result<AlignmentSeedSet> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (no, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(path, no, "expected \"<source-id>\\t<target-id>\""));
        }
        pairs.push((parse_id(path, no, fields[0])?, parse_id(path, no, fields[1])?));
    }
    AlignmentSeedSet::for_pair(pairs, pair, &path.display().to_string())
}

pub fn write_seed_pairs(seeds: &AlignmentSeedSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (s, t) in seeds.iter() {
        let _ = writeln!(out, "{s}\t{t}");
    }
    write(path.as_ref(), &out)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let layout = DatasetLayout::default();
    let p = |name: &str| -> PathBuf { dir.join(name) };
    let source = parse_kg_files(
        p(layout.source_entities),
        p(layout.source_relations),
        p(layout.source_triples),
    )?;
    let target = parse_kg_files(
        p(layout.target_entities),
        p(layout.target_relations),
        p(layout.target_triples),
    )?;
    let pair = KgPair::new(source, target);
    let reference = parse_seed_pairs(p(layout.reference), &pair)?;
    Ok(Dataset { pair, reference })
}

pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| KgError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let layout = DatasetLayout::default();
    for (side, e, r, t) in [
        (
            Side::Source,
            layout.source_entities,
            layout.source_relations,
            layout.source_triples,
        ),
        (
            Side::Target,
            layout.target_entities,
            layout.target_relations,
            layout.target_triples,
        ),
    ] {
        write_kg_files(dataset.pair.graph(side), dir.join(e), dir.join(r), dir.join(t))?;
    }
    write_seed_pairs(&dataset.reference, dir.join(layout.reference))
}

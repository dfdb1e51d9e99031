//! Name embeddings from averaged pretrained word vectors.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::kg::{display_name, KnowledgeGraph};
use crate::matrix::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum NameError {
    #[error("{path}:{line}: expected {expected} values, found {found}")]
    Dimension {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: duplicate token {token:?}")]
    DuplicateToken {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}:{line}: cannot parse {value:?} as a number")]
    BadNumber {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("word-vector store is empty")]
    EmptyStore,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Token → vector table; vectors are kept as `f32` to bound memory on
/// large pretrained files.
#[derive(Debug, Clone, Default)]
pub struct WordVectorStore {
    dim: Option<usize>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl WordVectorStore {
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        let d = self.dim?;
        self.index.get(token).map(|&i| &self.data[i * d..(i + 1) * d])
    }

    fn push(&mut self, token: String, values: Vec<f32>) {
        let i = self.index.len();
        self.index.insert(token, i);
        self.data.extend(values);
    }
}

/// Loads a space-separated word-vector file (`token v1 … vd` per line).
/// The first line fixes the dimension.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectorStore, NameError> {
    load_filtered(path.as_ref(), None)
}

/// Like [`load_word_vectors`] but keeps only tokens in `vocabulary`.
/// Lines for other tokens are still checked for a consistent dimension.
pub fn load_word_vectors_for(
    path: impl AsRef<Path>,
    vocabulary: &HashSet<String>,
) -> Result<WordVectorStore, NameError> {
    load_filtered(path.as_ref(), Some(vocabulary))
}

fn load_filtered(path: &Path, vocabulary: Option<&HashSet<String>>) -> Result<WordVectorStore, NameError> {
    let io_err = |source| NameError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut store = WordVectorStore::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let no = i + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let dim = *store.dim.get_or_insert(fields.len().saturating_sub(1));
        if fields.len() < dim + 1 || dim == 0 {
            return Err(NameError::Dimension {
                path: path.to_path_buf(),
                line: no,
                expected: dim,
                found: fields.len().saturating_sub(1),
            });
        }
        // Tokens that themselves contain spaces occur in some pretrained
        // files; the trailing `dim` fields are the vector.
        let split = fields.len() - dim;
        let token = fields[..split].join(" ");
        if let Some(v) = vocabulary {
            if !v.contains(&token) {
                continue;
            }
        }
        if store.index.contains_key(&token) {
            return Err(NameError::DuplicateToken {
                path: path.to_path_buf(),
                line: no,
                token,
            });
        }
        let values = fields[split..]
            .iter()
            .map(|f| {
                f.parse::<f32>().map_err(|_| NameError::BadNumber {
                    path: path.to_path_buf(),
                    line: no,
                    value: f.to_string(),
                })
            })
            .collect::<Result<Vec<f32>, _>>()?;
        store.push(token, values);
    }
    Ok(store)
}

/// Lowercases and splits on whitespace, `_`, `-`, `,`, `(` and `)`.
pub fn tokenize(name: &str) -> Vec<String> {
    name.to_lowercase()
        .split(|c: char| c.is_whitespace() || matches!(c, '_' | '-' | ',' | '(' | ')'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Mean of the in-vocabulary token vectors of `name`. Returns the vector and
/// whether every token was out of vocabulary (in which case it is all zeros).
pub fn name_embedding(store: &WordVectorStore, name: &str) -> Result<(Vec<f64>, bool), NameError> {
    let d = store.dim.ok_or(NameError::EmptyStore)?;
    let mut sum = vec![0.0f64; d];
    let mut hits = 0usize;
    for tok in tokenize(name) {
        if let Some(v) = store.get(&tok) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return Ok((sum, true));
    }
    let n = hits as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok((sum, false))
}

/// One row per entity (ascending id order), plus the all-OOV flags.
#[derive(Debug, Clone, PartialEq)]
pub struct NameEmbeddingMatrix {
    pub rows: Matrix,
    pub oov: Vec<bool>,
}

pub fn embed_graph_names(store: &WordVectorStore, kg: &KnowledgeGraph) -> Result<NameEmbeddingMatrix, NameError> {
    let d = store.dim.ok_or(NameError::EmptyStore)?;
    let mut rows = Matrix::zeros(kg.num_entities(), d);
    let mut oov = Vec::with_capacity(kg.num_entities());
    for (i, (_, name)) in kg.entities().enumerate() {
        let (v, flag) = name_embedding(store, display_name(name))?;
        rows.row_mut(i).copy_from_slice(&v);
        oov.push(flag);
    }
    Ok(NameEmbeddingMatrix { rows, oov })
}

/// Distinct tokens over all display names of the given graphs.
pub fn graph_vocabulary<'a>(graphs: impl IntoIterator<Item = &'a KnowledgeGraph>) -> HashSet<String> {
    graphs
        .into_iter()
        .flat_map(|g| g.entities().flat_map(|(_, n)| tokenize(display_name(n))))
        .collect()
}

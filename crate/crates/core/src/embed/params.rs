use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbedError, Result};
use crate::kg::{build_pair_adjacency, KgPair};
use crate::matrix::{norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y = σ(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub layers: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub augment_every: usize,
    pub rng_seed: u64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            layers: 2,
            margin: 3.0,
            learning_rate: 0.005,
            batch_size: 1024,
            epochs: 12,
            augment_every: 5,
            rng_seed: 0,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_ints = [
            ("dim", self.dim),
            ("layers", self.layers),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("augment_every", self.augment_every),
        ];
        for (name, v) in positive_ints {
            if v == 0 {
                return Err(EmbedError::Config(format!("{name} must be positive")));
            }
        }
        let positive_reals = [
            ("margin", self.margin),
            ("learning_rate", self.learning_rate),
            ("rms_epsilon", self.rms_epsilon),
        ];
        for (name, v) in positive_reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EmbedError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return Err(EmbedError::Config(format!(
                "rms_decay must lie in (0, 1), got {}",
                self.rms_decay
            )));
        }
        Ok(())
    }
}

/// Trainable parameters shared by both graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Initial entity states `h⁰`, one row per entity of the joint graph.
    pub entity_init: Matrix,
    /// Unit relation normals, one row per relation slot of the union index.
    pub relation_emb: Matrix,
    /// Attention vector `q` of each layer, one row per layer.
    pub attention: Matrix,
    pub activation: Activation,
}

impl ModelParams {
    pub fn dim(&self) -> usize {
        self.entity_init.cols()
    }

    pub fn layer_count(&self) -> usize {
        self.attention.rows()
    }

    pub fn output_dim(&self) -> usize {
        (self.layer_count() + 1) * self.dim()
    }

    pub fn normalize_relations(&mut self) {
        let rows = self.relation_emb.rows();
        for r in 0..rows {
            let row = self.relation_emb.row_mut(r);
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    /// Three consecutive `EMB1` matrices: entity states, relations, attention.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        self.entity_init.write_to(&mut w)?;
        self.relation_emb.write_to(&mut w)?;
        self.attention.write_to(&mut w)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let entity_init = Matrix::read_from(&mut r)?;
        let relation_emb = Matrix::read_from(&mut r)?;
        let attention = Matrix::read_from(&mut r)?;
        for m in [&relation_emb, &attention] {
            if m.cols() != entity_init.cols() {
                return Err(EmbedError::Dimension {
                    expected: entity_init.cols(),
                    found: m.cols(),
                });
            }
        }
        Ok(Self {
            entity_init,
            relation_emb,
            attention,
            activation: Activation::Tanh,
        })
    }
}

/// Uniform `[-√(6/d), √(6/d)]` draws for every block; relation rows are then
/// normalized.
pub fn init_parameters(pair: &KgPair, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    let index = build_pair_adjacency(pair);
    Ok(init_with_shapes(
        pair.total_entities(),
        index.num_relations(),
        config,
    ))
}

pub(crate) fn init_with_shapes(
    entities: usize,
    relations: usize,
    config: &TrainConfig,
) -> ModelParams {
    let d = config.dim;
    let bound = (6.0 / d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut draw = |rows: usize| {
        let data = (0..rows * d).map(|_| rng.gen_range(-bound..bound)).collect();
        Matrix::from_vec(rows, d, data)
    };
    let entity_init = draw(entities);
    let relation_emb = draw(relations);
    let attention = draw(config.layers);
    let mut params = ModelParams {
        entity_init,
        relation_emb,
        attention,
        activation: Activation::Tanh,
    };
    params.normalize_relations();
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_synthetic_pair;

    fn cfg(dim: usize) -> TrainConfig {
        TrainConfig {
            dim,
            rng_seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!((c.dim, c.layers, c.batch_size, c.epochs, c.augment_every), (300, 2, 1024, 12, 5));
        assert_eq!(c.margin, 3.0);
        assert_eq!(c.learning_rate, 0.005);
    }

    #[test]
    fn shapes_and_unit_relations() {
        let (pair, _) = generate_synthetic_pair(5, 3, 8, 1).unwrap();
        let p = init_parameters(&pair, &cfg(8)).unwrap();
        assert_eq!((p.entity_init.rows(), p.entity_init.cols()), (10, 8));
        assert_eq!(p.relation_emb.rows(), 2 * (2 * 3 + 1));
        assert_eq!(p.layer_count(), 2);
        for row in p.relation_emb.iter_rows() {
            assert!((norm(row) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn init_is_deterministic() {
        let (pair, _) = generate_synthetic_pair(5, 3, 8, 1).unwrap();
        assert_eq!(
            init_parameters(&pair, &cfg(8)).unwrap(),
            init_parameters(&pair, &cfg(8)).unwrap()
        );
    }

    #[test]
    fn invalid_config_rejected() {
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            margin: -1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let (pair, _) = generate_synthetic_pair(4, 2, 6, 3).unwrap();
        let p = init_parameters(&pair, &cfg(4)).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        assert_eq!(ModelParams::read_checkpoint(buf.as_slice()).unwrap(), p);
    }
}

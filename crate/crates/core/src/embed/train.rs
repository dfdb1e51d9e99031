use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{hinge, seed_indices, triplet_loss_with_grad, NegativePool};
use super::model::{backward, forward_with_cache};
use super::params::init_parameters;
use super::{augment_seeds, EmbedError, ModelParams, Result, TrainConfig};
use crate::kg::{build_pair_adjacency, AlignmentSeedSet, KgPair};
use crate::matrix::Matrix;

/// `cache ← ρ·cache + (1−ρ)·g²;  p ← p − lr·g / (√cache + ε)`
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    caches: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            caches: Vec::new(),
        }
    }

    /// Updates parameter block `slot` in place.
    pub fn step(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        if self.caches.len() <= slot {
            self.caches.resize(slot + 1, Vec::new());
        }
        let cache = &mut self.caches[slot];
        if cache.len() != params.len() {
            *cache = vec![0.0; params.len()];
        }
        for ((p, &g), c) in params.iter_mut().zip(grads).zip(cache.iter_mut()) {
            *c = self.decay * *c + (1.0 - self.decay) * g * g;
            *p -= self.learning_rate * g / (c.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sum of batch losses, each measured before its optimizer step.
    pub loss: f64,
    pub seeds: usize,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub embeddings: Matrix,
    pub params: ModelParams,
    /// Training seeds after augmentation.
    pub seeds: AlignmentSeedSet,
    pub pool: NegativePool,
    pub history: Vec<EpochStats>,
    /// Loss over the original training seeds at initialization.
    pub initial_loss: f64,
    /// Loss over the original training seeds after the last step.
    pub final_loss: f64,
}

/// Mini-batch RMSProp on the triplet loss.
///
/// Before each batch the pool entries of that batch are recomputed from the
/// current embeddings, which is the same as refreshing the whole pool after
/// every step but only touches the entries the next step reads. Seeds are
/// augmented with mutual nearest neighbors every `augment_every` epochs.
pub fn train(pair: &KgPair, train_seeds: &AlignmentSeedSet, config: &TrainConfig) -> Result<TrainOutcome> {
    if train_seeds.is_empty() {
        return Err(EmbedError::NoSeeds);
    }
    let mut params = init_parameters(pair, config)?;
    let index = build_pair_adjacency(pair);
    let original = seed_indices(train_seeds, pair)?;
    let mut seeds = train_seeds.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x5eed_ba7c);
    let mut opt = RmsProp::new(config.learning_rate, config.rms_decay, config.rms_epsilon);

    let mut cache = forward_with_cache(&params, &index)?;
    let mut pool = NegativePool::default();
    pool.refresh(&cache.output, pair, &original)?;
    let initial_loss = hinge(&cache.output, &original, &pool, config.margin, None)?;
    if !initial_loss.is_finite() {
        return Err(EmbedError::NonFinite {
            epoch: 0,
            step: 0,
            loss: initial_loss,
        });
    }

    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        let mut order = seed_indices(&seeds, pair)?;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0;
        for batch in order.chunks(config.batch_size) {
            step += 1;
            pool.refresh(&cache.output, pair, batch)?;
            let (loss, grad_out) = triplet_loss_with_grad(&cache.output, batch, &pool, config.margin)?;
            if !loss.is_finite() {
                return Err(EmbedError::NonFinite { epoch, step, loss });
            }
            epoch_loss += loss;
            epoch_steps += 1;
            let grads = backward(&params, &index, &cache, &grad_out);
            opt.step(0, params.entity_init.as_mut_slice(), grads.entity_init.as_slice());
            opt.step(1, params.relation_emb.as_mut_slice(), grads.relation_emb.as_slice());
            opt.step(2, params.attention.as_mut_slice(), grads.attention.as_slice());
            params.normalize_relations();
            cache = forward_with_cache(&params, &index)?;
        }
        if epoch % config.augment_every == 0 {
            seeds = augment_seeds(&cache.output, pair, &seeds);
        }
        history.push(EpochStats {
            epoch,
            loss: epoch_loss,
            seeds: seeds.len(),
            steps: epoch_steps,
        });
    }

    let all = seed_indices(&seeds, pair)?;
    let mut final_pool = NegativePool::default();
    final_pool.refresh(&cache.output, pair, &all)?;
    let final_loss = hinge(&cache.output, &original, &final_pool, config.margin, None)?;
    if !final_loss.is_finite() {
        return Err(EmbedError::NonFinite {
            epoch: config.epochs,
            step,
            loss: final_loss,
        });
    }
    Ok(TrainOutcome {
        embeddings: cache.output,
        params,
        seeds,
        pool: final_pool,
        history,
        initial_loss,
        final_loss,
    })
}

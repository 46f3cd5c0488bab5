use midistring_nn::layers::{
    sinusoidal_positions, FeedForward, Init, LayerNorm, Linear, MultiHeadAttention,
};
use midistring_nn::rng::{stream_rng, sub_seed};
use midistring_nn::{
    AdamConfig, AdamState, Checkpoint, ParamStore, RngState, Scalar, Tape, Tensor, Var,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ranking::CandidateScorer;
use super::report::config_hash;
use super::{adopt_params, par_chunks, ModelError, TrainConfig};
use crate::pianoroll::{PhraseRoll, PHRASE_STEPS, PITCHES};

pub const TRANSFORMER_KIND: &str = "melody-transformer";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub pitches: usize,
    pub steps: usize,
    pub dim: usize,
    pub heads: usize,
    pub ff: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            pitches: PITCHES,
            steps: PHRASE_STEPS,
            dim: 128,
            heads: 4,
            ff: 512,
            encoder_layers: 2,
            decoder_layers: 2,
        }
    }
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    attn: MultiHeadAttention,
    norm1: LayerNorm,
    ff: FeedForward,
    norm2: LayerNorm,
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    norm1: LayerNorm,
    cross_attn: MultiHeadAttention,
    norm2: LayerNorm,
    ff: FeedForward,
    norm3: LayerNorm,
}

/// Post-norm encoder–decoder over `[B, steps, pitches]` multi-hot rolls with
/// a per-pitch sigmoid output.
#[derive(Clone, Debug)]
pub struct MelodyTransformer {
    pub config: TransformerConfig,
    src_in: Linear,
    tgt_in: Linear,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    out: Linear,
}

impl MelodyTransformer {
    pub fn new<T: Scalar>(config: TransformerConfig, store: &mut ParamStore<T>, seed: u64) -> Self {
        let mut rng = stream_rng(sub_seed(seed, "transformer/init"), 0);
        let (d, h, ff) = (config.dim, config.heads, config.ff);
        let src_in = Linear::new(
            store,
            "src_in",
            config.pitches,
            d,
            Init::XavierUniform,
            &mut rng,
        );
        let tgt_in = Linear::new(
            store,
            "tgt_in",
            config.pitches,
            d,
            Init::XavierUniform,
            &mut rng,
        );
        let encoder = (0..config.encoder_layers)
            .map(|i| {
                let n = format!("enc{i}");
                EncoderLayer {
                    attn: MultiHeadAttention::new(store, &format!("{n}.attn"), d, h, &mut rng),
                    norm1: LayerNorm::new(store, &format!("{n}.norm1"), d),
                    ff: FeedForward::new(store, &format!("{n}.ff"), d, ff, &mut rng),
                    norm2: LayerNorm::new(store, &format!("{n}.norm2"), d),
                }
            })
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|i| {
                let n = format!("dec{i}");
                DecoderLayer {
                    self_attn: MultiHeadAttention::new(
                        store,
                        &format!("{n}.self_attn"),
                        d,
                        h,
                        &mut rng,
                    ),
                    norm1: LayerNorm::new(store, &format!("{n}.norm1"), d),
                    cross_attn: MultiHeadAttention::new(
                        store,
                        &format!("{n}.cross_attn"),
                        d,
                        h,
                        &mut rng,
                    ),
                    norm2: LayerNorm::new(store, &format!("{n}.norm2"), d),
                    ff: FeedForward::new(store, &format!("{n}.ff"), d, ff, &mut rng),
                    norm3: LayerNorm::new(store, &format!("{n}.norm3"), d),
                }
            })
            .collect();
        // Zero output weights start every probability at exactly 0.5.
        let out = Linear::new(store, "out", d, config.pitches, Init::Zeros, &mut rng);
        Self {
            config,
            src_in,
            tgt_in,
            encoder,
            decoder,
            out,
        }
    }

    fn embed<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        proj: &Linear,
        x: Var,
    ) -> midistring_nn::Result<Var> {
        let steps = tape.shape(x)[1];
        let e = proj.forward(tape, store, x)?;
        let pos = tape.input(sinusoidal_positions(steps, self.config.dim));
        tape.add(e, pos)
    }

    /// Probabilities `[B, T, pitches]` for source `[B, T, pitches]` and
    /// decoder input `[B, T, pitches]` (the target shifted right).
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        source: Var,
        decoder_input: Var,
    ) -> midistring_nn::Result<Var> {
        let mut mem = self.embed(tape, store, &self.src_in, source)?;
        for l in &self.encoder {
            let a = l.attn.forward(tape, store, mem, mem, false)?;
            let r = tape.add(mem, a)?;
            let x = l.norm1.forward(tape, store, r)?;
            let f = l.ff.forward(tape, store, x)?;
            let r = tape.add(x, f)?;
            mem = l.norm2.forward(tape, store, r)?;
        }
        let mut y = self.embed(tape, store, &self.tgt_in, decoder_input)?;
        for l in &self.decoder {
            let a = l.self_attn.forward(tape, store, y, y, true)?;
            let r = tape.add(y, a)?;
            let x = l.norm1.forward(tape, store, r)?;
            let c = l.cross_attn.forward(tape, store, x, mem, false)?;
            let r = tape.add(x, c)?;
            let x = l.norm2.forward(tape, store, r)?;
            let f = l.ff.forward(tape, store, x)?;
            let r = tape.add(x, f)?;
            y = l.norm3.forward(tape, store, r)?;
        }
        let logits = self.out.forward(tape, store, y)?;
        Ok(tape.sigmoid(logits))
    }

    /// Mean BCE of the teacher-forced prediction of `target`.
    pub fn loss<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        source: &[T],
        target: &[T],
        batch: usize,
    ) -> midistring_nn::Result<Var> {
        let shape = [batch, self.config.steps, self.config.pitches];
        let src = tape.input(Tensor::new(&shape, source.to_vec())?);
        let dec = tape.input(Tensor::new(
            &shape,
            shift_right(target, self.config.steps, self.config.pitches),
        )?);
        let probs = self.forward(tape, store, src, dec)?;
        tape.binary_cross_entropy(probs, target)
    }
}

/// Shifts each `[steps, pitches]` block of `rows` down one step, inserting a
/// zero row at step 0 and dropping the last step.
pub fn shift_right<T: Scalar>(rows: &[T], steps: usize, pitches: usize) -> Vec<T> {
    let block = steps * pitches;
    let mut out = vec![T::zero(); rows.len()];
    for (o, r) in out.chunks_mut(block).zip(rows.chunks(block)) {
        o[pitches..].copy_from_slice(&r[..block - pitches]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhrasePair {
    pub source: PhraseRoll,
    pub target: PhraseRoll,
}

#[derive(Serialize, Deserialize)]
struct TransformerMetadata {
    model: TransformerConfig,
    train: TrainConfig,
    steps: u64,
}

pub struct MelodyTrainer {
    pub model: MelodyTransformer,
    pub store: ParamStore<f32>,
    pub adam: AdamState<f32>,
    pub train: TrainConfig,
    pub steps: u64,
}

fn stack<'a>(rolls: impl Iterator<Item = &'a PhraseRoll>) -> Vec<f32> {
    rolls.flat_map(|r| r.to_f32()).collect()
}

impl MelodyTrainer {
    pub fn new(config: TransformerConfig, train: TrainConfig) -> Self {
        let mut store = ParamStore::new();
        let model = MelodyTransformer::new(config, &mut store, train.seed);
        let adam = AdamState::new(
            &store,
            AdamConfig {
                lr: train.lr,
                ..AdamConfig::default()
            },
        );
        Self {
            model,
            store,
            adam,
            train,
            steps: 0,
        }
    }

    /// Mean BCE over `pairs` without updating parameters.
    pub fn eval_loss(&self, pairs: &[&PhrasePair]) -> Result<f32, ModelError> {
        let mut tape = Tape::new();
        let src = stack(pairs.iter().map(|p| &p.source));
        let tgt = stack(pairs.iter().map(|p| &p.target));
        let l = self
            .model
            .loss(&mut tape, &self.store, &src, &tgt, pairs.len())?;
        Ok(tape.value(l).item())
    }

    pub fn step(&mut self, batch: &[&PhrasePair]) -> Result<f32, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::NoUsablePairs);
        }
        let mut tape = Tape::training(
            sub_seed(self.train.seed, "transformer/dropout"),
            self.steps << 16,
        );
        let src = stack(batch.iter().map(|p| &p.source));
        let tgt = stack(batch.iter().map(|p| &p.target));
        let loss = self
            .model
            .loss(&mut tape, &self.store, &src, &tgt, batch.len())?;
        tape.backward(loss)?;
        self.store.zero_grads();
        tape.accumulate_param_grads(&mut self.store);
        self.adam.step(&mut self.store)?;
        self.steps += 1;
        Ok(tape.value(loss).item())
    }

    pub fn fit(
        &mut self,
        pairs: &[PhrasePair],
        mut on_epoch: impl FnMut(usize, f32),
    ) -> Result<Vec<f32>, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::NoUsablePairs);
        }
        let mut losses = Vec::with_capacity(self.train.epochs);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for epoch in 0..self.train.epochs {
            order.sort_unstable();
            order.shuffle(&mut stream_rng(
                sub_seed(self.train.seed, "transformer/shuffle"),
                epoch as u64,
            ));
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(self.train.batch_size.max(1)) {
                let batch: Vec<&PhrasePair> = chunk.iter().map(|&i| &pairs[i]).collect();
                total += self.step(&batch)?;
                batches += 1;
            }
            let mean = total / batches as f32;
            on_epoch(epoch, mean);
            losses.push(mean);
        }
        Ok(losses)
    }

    fn metadata(&self) -> String {
        serde_json::to_string(&TransformerMetadata {
            model: self.model.config.clone(),
            train: self.train.clone(),
            steps: self.steps,
        })
        .expect("metadata serializes")
    }

    pub fn config_hash(&self) -> String {
        config_hash(&self.metadata())
    }

    pub fn to_checkpoint(&self) -> Checkpoint<f32> {
        Checkpoint {
            kind: TRANSFORMER_KIND.to_string(),
            metadata: self.metadata(),
            params: self.store.clone(),
            optimizer: Some(self.adam.clone()),
            rng: RngState {
                seed: self.train.seed,
                counter: self.steps,
            },
        }
    }

    pub fn from_checkpoint(ck: Checkpoint<f32>) -> Result<Self, ModelError> {
        if ck.kind != TRANSFORMER_KIND {
            return Err(ModelError::Checkpoint(format!(
                "expected a {TRANSFORMER_KIND} checkpoint, found {:?}",
                ck.kind
            )));
        }
        let meta: TransformerMetadata = serde_json::from_str(&ck.metadata)
            .map_err(|e| ModelError::Checkpoint(format!("metadata: {e}")))?;
        let mut built = ParamStore::new();
        let model = MelodyTransformer::new(meta.model, &mut built, meta.train.seed);
        let store = adopt_params(&built, ck.params)?;
        let adam = match ck.optimizer {
            Some(a) => a,
            None => AdamState::new(
                &store,
                AdamConfig {
                    lr: meta.train.lr,
                    ..AdamConfig::default()
                },
            ),
        };
        Ok(Self {
            model,
            store,
            adam,
            train: meta.train,
            steps: meta.steps,
        })
    }
}

/// Candidates per forward pass when scoring.
const SCORE_BATCH: usize = 25;

impl CandidateScorer for MelodyTrainer {
    fn probabilities(
        &self,
        source: &PhraseRoll,
        candidates: &[PhraseRoll],
    ) -> Result<Vec<Vec<f32>>, ModelError> {
        let src = source.to_f32();
        let (steps, pitches) = (self.model.config.steps, self.model.config.pitches);
        let mut out = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(SCORE_BATCH) {
            let b = chunk.len();
            let shape = [b, steps, pitches];
            let mut tape = Tape::new();
            let s = tape.input(Tensor::new(&shape, src.repeat(b))?);
            let d = tape.input(Tensor::new(
                &shape,
                shift_right(&stack(chunk.iter()), steps, pitches),
            )?);
            let p = self.model.forward(&mut tape, &self.store, s, d)?;
            out.extend(
                tape.value(p)
                    .data()
                    .chunks(steps * pitches)
                    .map(<[f32]>::to_vec),
            );
        }
        Ok(out)
    }
}

impl MelodyTrainer {
    /// Teacher-forced probabilities for many pairs, in input order.
    pub fn predict(&self, pairs: &[PhrasePair]) -> Result<Vec<Vec<f32>>, ModelError> {
        par_chunks(pairs, SCORE_BATCH, |chunk| {
            let mut tape = Tape::new();
            let shape = [
                chunk.len(),
                self.model.config.steps,
                self.model.config.pitches,
            ];
            let s = tape.input(Tensor::new(&shape, stack(chunk.iter().map(|p| &p.source)))?);
            let tgt = stack(chunk.iter().map(|p| &p.target));
            let d = tape.input(Tensor::new(&shape, shift_right(&tgt, shape[1], shape[2]))?);
            let p = self.model.forward(&mut tape, &self.store, s, d)?;
            Ok(tape
                .value(p)
                .data()
                .chunks(shape[1] * shape[2])
                .map(<[f32]>::to_vec)
                .collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_inserts_zero_row() {
        let rows: Vec<f64> = (1..=6).map(f64::from).collect();
        assert_eq!(shift_right(&rows, 3, 1), vec![0.0, 1.0, 2.0, 0.0, 4.0, 5.0]);
        assert_eq!(shift_right(&rows, 3, 2), vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn initial_probabilities_are_half() {
        let t = MelodyTrainer::new(
            TransformerConfig {
                dim: 16,
                heads: 2,
                ff: 32,
                steps: 8,
                pitches: 12,
                ..TransformerConfig::default()
            },
            TrainConfig::default(),
        );
        let mut tape = Tape::new();
        let src: Vec<f32> = (0..96).map(|i| (i % 5 == 0) as u8 as f32).collect();
        let l = t.model.loss(&mut tape, &t.store, &src, &src, 1).unwrap();
        assert!((tape.value(l).item() - std::f32::consts::LN_2).abs() < 1e-6);
    }
}

use midistring_nn::layers::{Conv2d, Init, Linear};
use midistring_nn::rng::{stream_rng, sub_seed};
use midistring_nn::{
    AdamConfig, AdamState, Checkpoint, ParamStore, RngState, Scalar, Tape, Tensor, Var,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::report::{config_hash, EvalReport};
use super::{adopt_params, par_chunks, ModelError, TrainConfig};
use crate::metrics::{per_class, weighted_f1};
use crate::music::{Task, Taxonomy, GENRE_COUNT, STYLE_COUNT};
use crate::pianoroll::{RollTensor, CHANNELS, PITCHES, STEPS};

pub const CNN_KIND: &str = "cnn-classifier";
const EVAL_BATCH: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub hidden: usize,
    pub genres: usize,
    pub styles: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            channels: CHANNELS,
            height: STEPS,
            width: PITCHES,
            conv1: 32,
            conv2: 64,
            hidden: 128,
            genres: GENRE_COUNT,
            styles: STYLE_COUNT,
            dropout: 0.5,
        }
    }
}

impl CnnConfig {
    /// Width of the flattened feature map after two 2×2 pools.
    pub fn flat_width(&self) -> usize {
        self.conv2 * (self.height / 4) * (self.width / 4)
    }
}

#[derive(Clone, Debug)]
pub struct CnnClassifier {
    pub config: CnnConfig,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub fc: Linear,
    pub genre_head: Linear,
    pub style_head: Linear,
}

/// Output of [`CnnClassifier::forward`]: `[B, genres]` and `[B, styles]`.
#[derive(Clone, Copy, Debug)]
pub struct Logits {
    pub genre: Var,
    pub style: Var,
}

impl CnnClassifier {
    pub fn new<T: Scalar>(config: CnnConfig, store: &mut ParamStore<T>, seed: u64) -> Self {
        let mut rng = stream_rng(sub_seed(seed, "cnn/init"), 0);
        let conv1 = Conv2d::new(store, "conv1", config.channels, config.conv1, &mut rng);
        let conv2 = Conv2d::new(store, "conv2", config.conv1, config.conv2, &mut rng);
        let fc = Linear::new(
            store,
            "fc",
            config.flat_width(),
            config.hidden,
            Init::KaimingUniform,
            &mut rng,
        );
        let genre_head = Linear::new(
            store,
            "genre_head",
            config.hidden,
            config.genres,
            Init::XavierUniform,
            &mut rng,
        );
        let style_head = Linear::new(
            store,
            "style_head",
            config.hidden,
            config.styles,
            Init::XavierUniform,
            &mut rng,
        );
        Self {
            config,
            conv1,
            conv2,
            fc,
            genre_head,
            style_head,
        }
    }

    /// `x: [B, C, H, W]`. Dropout follows the tape's mode.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> midistring_nn::Result<Logits> {
        let batch = tape.shape(x)[0];
        let h = self.conv1.forward(tape, store, x)?;
        let h = tape.relu(h);
        let h = tape.max_pool2d(h)?;
        let h = self.conv2.forward(tape, store, h)?;
        let h = tape.relu(h);
        let h = tape.max_pool2d(h)?;
        let h = tape.reshape(h, &[batch, self.config.flat_width()])?;
        let h = self.fc.forward(tape, store, h)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout);
        Ok(Logits {
            genre: self.genre_head.forward(tape, store, h)?,
            style: self.style_head.forward(tape, store, h)?,
        })
    }

    /// Sum of the two heads' mean cross-entropies.
    pub fn joint_loss<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
        genres: &[usize],
        styles: &[usize],
    ) -> midistring_nn::Result<Var> {
        let logits = self.forward(tape, store, x)?;
        let g = tape.softmax_cross_entropy(logits.genre, genres)?;
        let s = tape.softmax_cross_entropy(logits.style, styles)?;
        tape.add(g, s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRoll {
    pub roll: RollTensor,
    pub genre: usize,
    pub style: usize,
}

fn roll_batch<T: Scalar>(rolls: &[&RollTensor]) -> Tensor<T> {
    let mut data = Vec::with_capacity(rolls.len() * CHANNELS * STEPS * PITCHES);
    for r in rolls {
        data.extend(
            r.data()
                .iter()
                .map(|&c| if c != 0 { T::one() } else { T::zero() }),
        );
    }
    Tensor::new(&[rolls.len(), CHANNELS, STEPS, PITCHES], data).expect("roll batch shape")
}

#[derive(Serialize, Deserialize)]
struct CnnMetadata {
    model: CnnConfig,
    train: TrainConfig,
    steps: u64,
    genres: Vec<String>,
    styles: Vec<String>,
}

/// A classifier with its parameters and optimizer state.
pub struct CnnTrainer {
    pub model: CnnClassifier,
    pub store: ParamStore<f32>,
    pub adam: AdamState<f32>,
    pub train: TrainConfig,
    pub steps: u64,
    pub genres: Vec<String>,
    pub styles: Vec<String>,
}

impl CnnTrainer {
    pub fn new(config: CnnConfig, train: TrainConfig, taxonomy: &Taxonomy) -> Self {
        let mut store = ParamStore::new();
        let model = CnnClassifier::new(config, &mut store, train.seed);
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
            genres: taxonomy.genres.clone(),
            styles: taxonomy.styles.clone(),
        }
    }

    fn check_labels(&self, items: &[&LabeledRoll]) -> Result<(), ModelError> {
        for it in items {
            for (label, classes) in [
                (it.genre, self.model.config.genres),
                (it.style, self.model.config.styles),
            ] {
                if label >= classes {
                    return Err(ModelError::LabelOutOfRange { label, classes });
                }
            }
        }
        Ok(())
    }

    /// One Adam step on a batch; returns the batch loss.
    pub fn step(&mut self, batch: &[&LabeledRoll]) -> Result<f32, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        self.check_labels(batch)?;
        let rolls: Vec<&RollTensor> = batch.iter().map(|b| &b.roll).collect();
        let genres: Vec<usize> = batch.iter().map(|b| b.genre).collect();
        let styles: Vec<usize> = batch.iter().map(|b| b.style).collect();
        let mut tape = Tape::training(sub_seed(self.train.seed, "cnn/dropout"), self.steps << 16);
        let x = tape.input(roll_batch(&rolls));
        let loss = self
            .model
            .joint_loss(&mut tape, &self.store, x, &genres, &styles)?;
        tape.backward(loss)?;
        self.store.zero_grads();
        tape.accumulate_param_grads(&mut self.store);
        self.adam.step(&mut self.store)?;
        self.steps += 1;
        Ok(tape.value(loss).item())
    }

    /// Trains for the configured epochs, reshuffling every epoch. Returns the
    /// mean batch loss per epoch.
    pub fn fit(
        &mut self,
        data: &[LabeledRoll],
        mut on_epoch: impl FnMut(usize, f32),
    ) -> Result<Vec<f32>, ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        self.check_labels(&data.iter().collect::<Vec<_>>())?;
        let mut losses = Vec::with_capacity(self.train.epochs);
        let mut order: Vec<usize> = (0..data.len()).collect();
        for epoch in 0..self.train.epochs {
            order.sort_unstable();
            order.shuffle(&mut stream_rng(
                sub_seed(self.train.seed, "cnn/shuffle"),
                epoch as u64,
            ));
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(self.train.batch_size.max(1)) {
                let batch: Vec<&LabeledRoll> = chunk.iter().map(|&i| &data[i]).collect();
                total += self.step(&batch)?;
                batches += 1;
            }
            let mean = total / batches as f32;
            on_epoch(epoch, mean);
            losses.push(mean);
        }
        Ok(losses)
    }

    /// Eval-mode logits as `(genre, style)` rows per roll.
    pub fn logits(&self, rolls: &[&RollTensor]) -> Result<Vec<(Vec<f32>, Vec<f32>)>, ModelError> {
        par_chunks(rolls, EVAL_BATCH, |chunk| {
            let mut tape = Tape::new();
            let x = tape.input(roll_batch(chunk));
            let l = self.model.forward(&mut tape, &self.store, x)?;
            let (g, s) = (tape.value(l.genre).data(), tape.value(l.style).data());
            let (kg, ks) = (self.model.config.genres, self.model.config.styles);
            Ok((0..chunk.len())
                .map(|i| {
                    (
                        g[i * kg..(i + 1) * kg].to_vec(),
                        s[i * ks..(i + 1) * ks].to_vec(),
                    )
                })
                .collect())
        })
    }

    /// Argmax class per roll for `task`; ties go to the lower index.
    pub fn predict(&self, rolls: &[&RollTensor], task: Task) -> Result<Vec<usize>, ModelError> {
        Ok(self
            .logits(rolls)?
            .into_iter()
            .map(|(g, s)| argmax(if task == Task::Genre { &g } else { &s }))
            .collect())
    }

    fn metadata(&self) -> String {
        serde_json::to_string(&CnnMetadata {
            model: self.model.config.clone(),
            train: self.train.clone(),
            steps: self.steps,
            genres: self.genres.clone(),
            styles: self.styles.clone(),
        })
        .expect("metadata serializes")
    }

    pub fn labels(&self, task: Task) -> &[String] {
        match task {
            Task::Genre => &self.genres,
            Task::Style => &self.styles,
        }
    }

    pub fn config_hash(&self) -> String {
        config_hash(&self.metadata())
    }

    pub fn to_checkpoint(&self) -> Checkpoint<f32> {
        Checkpoint {
            kind: CNN_KIND.to_string(),
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
        if ck.kind != CNN_KIND {
            return Err(ModelError::Checkpoint(format!(
                "expected a {CNN_KIND} checkpoint, found {:?}",
                ck.kind
            )));
        }
        let meta: CnnMetadata = serde_json::from_str(&ck.metadata)
            .map_err(|e| ModelError::Checkpoint(format!("metadata: {e}")))?;
        let mut built = ParamStore::new();
        let model = CnnClassifier::new(meta.model, &mut built, meta.train.seed);
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
            genres: meta.genres,
            styles: meta.styles,
        })
    }
}

pub(crate) fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Weighted F1 and accuracy of the task head against `labels`.
pub fn evaluate_classifier(
    trainer: &CnnTrainer,
    rolls: &[&RollTensor],
    labels: &[usize],
    task: Task,
) -> Result<EvalReport, ModelError> {
    if rolls.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let names = trainer.labels(task);
    if let Some(&label) = labels.iter().find(|&&l| l >= names.len()) {
        return Err(ModelError::LabelOutOfRange {
            label,
            classes: names.len(),
        });
    }
    let pred = trainer.predict(rolls, task)?;
    let f1 = weighted_f1(labels, &pred, names.len())?;
    let accuracy =
        labels.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64;
    let mut report = EvalReport::new(
        task.name(),
        labels.len(),
        trainer.train.seed,
        trainer.config_hash(),
    );
    report.metrics.insert("weighted_f1".into(), f1);
    report.metrics.insert("accuracy".into(), accuracy);
    report.per_class = per_class(labels, &pred, names.len(), names)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dimensions() {
        let c = CnnConfig::default();
        assert_eq!(c.flat_width(), 65_536);
        let mut store = ParamStore::<f32>::new();
        let m = CnnClassifier::new(c, &mut store, 1);
        assert_eq!(store.get(m.fc.weight).shape(), &[65_536, 128]);
        assert_eq!(store.get(m.genre_head.weight).shape(), &[128, 13]);
        assert_eq!(store.get(m.style_head.weight).shape(), &[128, 25]);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }
}

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bank::{BankEntry, MemoryBank};
use super::checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use super::model::{EncoderParams, EncoderShape};
use super::optim::Adam;
use crate::data::{Dataset, PhysicsLabel, Split, WindowRecord};
use crate::error::{Error, Result};
use crate::loss::{loss_gradient, normalize_backward, LossBreakdown, LossConfig};
use crate::matrix::Matrix;
use crate::relations::{build_relations, shuffled_batches, stratified_batches, PhysicsGrouping, PoolItem, Quota, RelationOptions};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Masked motion loss, physics attraction, variance term, stratified
    /// batches.
    #[default]
    Regularized,
    /// Unmasked trajectory-contrastive loss only, plain shuffled batches.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub bank_capacity: usize,
    pub warmup_epochs: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub quota: Quota,
    pub variant: Variant,
    pub grouping: PhysicsGrouping,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-4,
            batch_size: 64,
            seed: 0,
            bank_capacity: 256,
            warmup_epochs: 10,
            hidden_dim: 64,
            embed_dim: 32,
            quota: Quota { head: 4, trunk: 8 },
            variant: Variant::Regularized,
            grouping: PhysicsGrouping::Exact,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.warmup_epochs > self.epochs {
            return Err(Error::Config(format!(
                "train.warmup_epochs ({}) exceeds train.epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("train.batch_size must be at least 2".into()));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Config("train.hidden_dim and train.embed_dim must be positive".into()));
        }
        if self.variant == Variant::Regularized && self.quota.head + self.quota.trunk > self.batch_size {
            return Err(Error::Config("train.quota exceeds train.batch_size".into()));
        }
        Ok(())
    }

    fn relation_options(&self) -> RelationOptions {
        RelationOptions {
            masking: self.variant == Variant::Regularized,
            grouping: self.grouping,
        }
    }

    /// Loss weights in effect during `epoch`.
    fn epoch_loss(&self, epoch: usize) -> LossConfig {
        match self.variant {
            Variant::Regularized => LossConfig {
                lambda_phys: effective_lambda_phys(self, epoch),
                ..self.loss.clone()
            },
            Variant::Vanilla => LossConfig { lambda_phys: 0.0, lambda_var: 0.0, ..self.loss.clone() },
        }
    }

    /// Validation uses the fully ramped objective so that epochs compare.
    fn validation_loss_config(&self) -> LossConfig {
        match self.variant {
            Variant::Regularized => self.loss.clone(),
            Variant::Vanilla => self.epoch_loss(0),
        }
    }
}

/// `lambda_phys * min(1, epoch / warmup_epochs)`; zero for the vanilla
/// control.
pub fn effective_lambda_phys(cfg: &TrainConfig, epoch: usize) -> f64 {
    if cfg.variant == Variant::Vanilla {
        return 0.0;
    }
    if cfg.warmup_epochs == 0 {
        return cfg.loss.lambda_phys;
    }
    cfg.loss.lambda_phys * (epoch as f64 / cfg.warmup_epochs as f64).min(1.0)
}

/// Features and relation metadata of one split.
#[derive(Debug, Clone)]
pub struct SplitRows {
    pub features: Matrix,
    pub traj: Vec<usize>,
    pub labels: Vec<PhysicsLabel>,
    /// Index of each row's window in the dataset.
    pub keys: Vec<usize>,
}

impl SplitRows {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn pool(&self, rows: &[usize]) -> Vec<PoolItem> {
        rows.iter()
            .map(|&r| PoolItem { key: self.keys[r], traj: self.traj[r], label: self.labels[r] })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainingData {
    pub train: SplitRows,
    pub val: SplitRows,
}

impl TrainingData {
    /// Train and validation rows of `ds`, with `labels` (one per dataset
    /// window) as the training-time physics labels.
    pub fn from_dataset(ds: &Dataset, labels: &[PhysicsLabel]) -> Result<Self> {
        if labels.len() != ds.windows.len() {
            return Err(Error::DimensionMismatch {
                what: "training labels".into(),
                expected: ds.windows.len(),
                got: labels.len(),
            });
        }
        let dim = ds.feature_dim().unwrap_or(0);
        let traj_index: HashMap<&str, usize> =
            ds.trajectories.iter().enumerate().map(|(i, t)| (t.traj_id.as_str(), i)).collect();
        let rows = |split: Split| -> Result<SplitRows> {
            let idx = ds.window_indices(split);
            let mut traj = Vec::with_capacity(idx.len());
            for &i in &idx {
                let w = &ds.windows[i];
                traj.push(*traj_index.get(w.traj_id.as_str()).ok_or_else(|| Error::DanglingTrajectory {
                    window_id: w.window_id.clone(),
                    traj_id: w.traj_id.clone(),
                })?);
            }
            Ok(SplitRows {
                features: Matrix::from_rows(dim, idx.iter().map(|&i| ds.windows[i].features.as_slice())),
                traj,
                labels: idx.iter().map(|&i| labels[i]).collect(),
                keys: idx,
            })
        };
        Ok(TrainingData { train: rows(Split::Train)?, val: rows(Split::Val)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_motion: f64,
    pub train_physics: f64,
    pub train_var: f64,
    pub train_total: f64,
    pub val_total: f64,
    pub effective_lambda_phys: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Minimum-validation-loss checkpoint among the epochs run by this call.
    pub best: Checkpoint,
    pub final_checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

struct State {
    params: EncoderParams,
    optimizer: Adam,
    bank: MemoryBank,
    best_val: f64,
    next_epoch: usize,
}

pub fn train(data: &TrainingData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let shape = EncoderShape {
        input_dim: data.train.features.cols(),
        hidden_dim: cfg.hidden_dim,
        embed_dim: cfg.embed_dim,
    };
    let params = EncoderParams::init(shape, &mut substream(cfg.seed, "init", 0));
    let optimizer = Adam::new(&params, cfg.learning_rate);
    let state = State {
        params,
        optimizer,
        bank: MemoryBank::new(cfg.bank_capacity),
        best_val: f64::INFINITY,
        next_epoch: 0,
    };
    run(data, cfg, state)
}

/// Continues training from `ck` (epochs `ck.epoch + 1 .. cfg.epochs`). Given
/// the same data and config the continued run is bit-identical to an
/// uninterrupted one.
pub fn resume(data: &TrainingData, cfg: &TrainConfig, ck: &Checkpoint) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ck.params.shape.input_dim != data.train.features.cols() {
        return Err(Error::DimensionMismatch {
            what: "checkpoint input dimension".into(),
            expected: ck.params.shape.input_dim,
            got: data.train.features.cols(),
        });
    }
    let state = State {
        params: ck.params.clone(),
        optimizer: ck.optimizer.clone(),
        bank: ck.bank.clone(),
        best_val: ck.best_val_loss,
        next_epoch: ck.epoch + 1,
    };
    run(data, cfg, state)
}

fn checkpoint(state: &State, epoch: usize, val: f64) -> Checkpoint {
    Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        epoch,
        val_loss: val,
        best_val_loss: state.best_val,
        params: state.params.clone(),
        optimizer: state.optimizer.clone(),
        bank: state.bank.clone(),
    }
}

fn run(data: &TrainingData, cfg: &TrainConfig, mut state: State) -> Result<TrainOutcome> {
    if data.train.len() < 2 || data.val.len() < 2 {
        return Err(Error::Config("training needs at least two train and two val windows".into()));
    }
    if state.next_epoch >= cfg.epochs {
        return Err(Error::Config(format!("nothing to train: start epoch {} >= epochs {}", state.next_epoch, cfg.epochs)));
    }
    let opts = cfg.relation_options();
    let val_cfg = cfg.validation_loss_config();
    let val_batches = shuffled_batches(data.val.len(), cfg.batch_size, &mut substream(cfg.seed, "val", 0))?;

    let mut history = Vec::new();
    let mut best = None;
    let mut last = None;

    for epoch in state.next_epoch..cfg.epochs {
        let mut rng = substream(cfg.seed, "batches", epoch as u64);
        let batches = match cfg.variant {
            Variant::Regularized => stratified_batches(&data.train.labels, cfg.batch_size, cfg.quota, &mut rng)?,
            Variant::Vanilla => shuffled_batches(data.train.len(), cfg.batch_size, &mut rng)?,
        };
        let loss_cfg = cfg.epoch_loss(epoch);
        let mut sum = LossBreakdown::default();
        let mut counted = 0usize;
        for batch in &batches {
            if let Some(b) = step(&mut state, &data.train, batch, &loss_cfg, opts)? {
                if !b.total.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                sum.motion += b.motion;
                sum.physics += b.physics;
                sum.variance += b.variance;
                sum.total += b.total;
                counted += 1;
            }
        }
        let val = validation_loss(&state.params, &data.val, &val_batches, &val_cfg, opts)?;
        if !val.is_finite() || counted == 0 {
            return Err(Error::Diverged { epoch });
        }
        let n = counted as f64;
        history.push(EpochRecord {
            epoch,
            train_motion: sum.motion / n,
            train_physics: sum.physics / n,
            train_var: sum.variance / n,
            train_total: sum.total / n,
            val_total: val,
            effective_lambda_phys: loss_cfg.lambda_phys,
        });
        let improved = val < state.best_val;
        if improved {
            state.best_val = val;
        }
        let ck = checkpoint(&state, epoch, val);
        if improved || best.is_none() {
            best = Some(ck.clone());
        }
        last = Some(ck);
    }
    Ok(TrainOutcome {
        best: best.expect("at least one epoch"),
        final_checkpoint: last.expect("at least one epoch"),
        history,
    })
}

/// One optimizer step. Returns `None` when every anchor of the batch lacks a
/// trajectory positive (no update is made).
fn step(
    state: &mut State,
    rows: &SplitRows,
    batch: &[usize],
    loss_cfg: &LossConfig,
    opts: RelationOptions,
) -> Result<Option<LossBreakdown>> {
    let x = rows.features.select_rows(batch);
    let fwd = state.params.forward(&x)?;

    let mut pool = rows.pool(batch);
    pool.extend(state.bank.pool_items());
    let z = fwd.z.vstack(&Matrix::from_rows(
        fwd.z.cols(),
        state.bank.entries().map(|e| e.embedding.as_slice()),
    ));
    let rels = build_relations(&pool, batch.len(), opts);

    let result = match loss_gradient(&rels, &z, &fwd.pre, loss_cfg) {
        Ok((b, g)) => {
            let mut d_pre = g.pre_projection;
            for r in 0..batch.len() {
                let chain = normalize_backward(fwd.pre.row(r), g.embeddings.row(r));
                for (d, c) in d_pre.row_mut(r).iter_mut().zip(chain) {
                    *d += c;
                }
            }
            let grad = state.params.backward(&x, &fwd, &d_pre);
            state.optimizer.update(&mut state.params, &grad);
            Some(b)
        }
        Err(Error::AllAnchorsSkipped { .. }) => None,
        Err(e) => return Err(e),
    };

    for (r, &row) in batch.iter().enumerate() {
        state.bank.push(BankEntry {
            key: rows.keys[row],
            traj: rows.traj[row],
            label: rows.labels[row],
            embedding: fwd.z.row(r).to_vec(),
        });
    }
    Ok(result)
}

fn validation_loss(
    params: &EncoderParams,
    rows: &SplitRows,
    batches: &[Vec<usize>],
    cfg: &LossConfig,
    opts: RelationOptions,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for batch in batches {
        if batch.len() < 2 {
            continue;
        }
        let fwd = params.forward(&rows.features.select_rows(batch))?;
        let rels = build_relations(&rows.pool(batch), batch.len(), opts);
        match crate::loss::composite_loss(&rels, &fwd.z, &fwd.pre, cfg) {
            Ok(b) => {
                total += b.total;
                n += 1;
            }
            Err(Error::AllAnchorsSkipped { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if n == 0 {
        return Err(Error::Undefined("no validation batch has a trajectory positive".into()));
    }
    Ok(total / n as f64)
}

/// Per-epoch loss history as CSV.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_motion,train_physics,train_var,train_total,val_total,effective_lambda_phys\n");
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch, r.train_motion, r.train_physics, r.train_var, r.train_total, r.val_total, r.effective_lambda_phys
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

/// Embeddings of a set of windows, row `i` for `window_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub window_ids: Vec<String>,
    /// Unit-norm embeddings.
    pub z: Matrix,
    /// Pre-normalization outputs.
    pub pre: Matrix,
}

/// Encodes windows with the given parameters. Uses nothing but the feature
/// vectors.
pub fn embed(params: &EncoderParams, windows: &[&WindowRecord]) -> Result<EmbeddingMatrix> {
    let dim = params.shape.input_dim;
    for w in windows {
        if w.features.len() != dim {
            return Err(Error::DimensionMismatch {
                what: format!("window {}", w.window_id),
                expected: dim,
                got: w.features.len(),
            });
        }
    }
    let x = Matrix::from_rows(dim, windows.iter().map(|w| w.features.as_slice()));
    let fwd = params.forward(&x)?;
    Ok(EmbeddingMatrix {
        window_ids: windows.iter().map(|w| w.window_id.clone()).collect(),
        z: fwd.z,
        pre: fwd.pre,
    })
}

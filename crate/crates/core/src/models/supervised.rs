use crate::dataset::SequenceSample;
use crate::nn::{bce_with_logit, sigmoid, Adam, Dense, Grads, NnError, ParamId, ParamStore, Tape};
use crate::seed::{rng_from, Rng};

use super::backbone::{Backbone, BackboneTrace, Pass};
use super::{shuffled_batches, ModelError, NetShape, TrainConfig};

/// Bi-LSTM stack followed by a single sigmoid unit.
#[derive(Clone, Debug)]
pub struct SupervisedNet {
    pub store: ParamStore,
    pub backbone: Backbone,
    pub head: Dense,
    shape: NetShape,
    adam: Adam,
}

#[derive(Clone, Debug)]
pub struct SupervisedTrace {
    backbone: BackboneTrace,
    rep: Vec<f64>,
}

impl SupervisedNet {
    pub fn new(shape: NetShape, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = rng_from(seed, &[0x696e_6974]);
        let mut store = ParamStore::new();
        let backbone = Backbone::new(&mut store, "backbone", shape, &mut rng);
        let head = Dense::new(&mut store, "head", backbone.rep_dim(), 1, &mut rng);
        let ids: Vec<ParamId> = store.ids().collect();
        let adam = Adam::new(cfg.adam(), &store, ids);
        SupervisedNet { store, backbone, head, shape, adam }
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.shape.input_len() {
            return Err(NnError::ShapeMismatch {
                context: "model input",
                expected: self.shape.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Logit of the stressed class. Training mode records the trace on `tape`.
    pub fn forward(&self, x: &[f64], mut pass: Pass<'_>, tape: Option<&mut Tape<SupervisedTrace>>) -> Result<f64, NnError> {
        self.check_input(x)?;
        let (rep, backbone) = self.backbone.forward(&self.store, x, &mut pass);
        let logit = self.head.forward_unchecked(&self.store, &rep)[0];
        if let Some(tape) = tape {
            tape.record(SupervisedTrace { backbone, rep });
        }
        Ok(logit)
    }

    /// Accumulates parameter gradients for `d_logit` and returns the input
    /// gradient.
    pub fn backward(&self, tape: &mut Tape<SupervisedTrace>, d_logit: f64, grads: &mut Grads) -> Result<Vec<f64>, NnError> {
        let trace = tape.take()?;
        let d_rep = self.head.backward(&self.store, grads, &trace.rep, &[d_logit]);
        Ok(self.backbone.backward(&self.store, grads, &trace.backbone, &d_rep))
    }

    /// Mean BCE over `batch` and the mean per-sample gradient.
    pub fn loss_and_grads(&self, batch: &[&SequenceSample], mut rng: Option<&mut Rng>) -> Result<(f64, Grads), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut grads = Grads::zeros_like(&self.store);
        let mut tape = Tape::new();
        let mut total = 0.0;
        for s in batch {
            let pass = match rng.as_deref_mut() {
                Some(r) => Pass::Train(r),
                None => Pass::Eval,
            };
            let z = self.forward(&s.inputs, pass, Some(&mut tape))?;
            let (loss, dz) = bce_with_logit(z, f64::from(s.label));
            total += loss;
            self.backward(&mut tape, dz, &mut grads)?;
        }
        grads.scale(1.0 / batch.len() as f64);
        Ok((total / batch.len() as f64, grads))
    }

    /// Stressed-class probabilities with dropout disabled.
    pub fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<f64>, NnError> {
        samples
            .iter()
            .map(|s| self.forward(&s.inputs, Pass::Eval, None).map(sigmoid))
            .collect()
    }

    pub fn apply_gradients(&mut self, grads: &Grads) {
        self.adam.step(&mut self.store, grads);
    }
}

/// Mini-batch Adam on BCE over the labeled samples of `train`. Returns the
/// trained net and the mean training loss of every epoch.
pub fn train_supervised(
    mut net: SupervisedNet,
    train: &[SequenceSample],
    cfg: &TrainConfig,
) -> Result<(SupervisedNet, Vec<f64>), ModelError> {
    cfg.validate()?;
    let labeled: Vec<&SequenceSample> = train.iter().filter(|s| s.labeled).collect();
    if labeled.is_empty() {
        return Err(ModelError::EmptyTrainSet);
    }
    let mut rng = rng_from(cfg.seed, &[0x7375_7076]);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for batch in shuffled_batches(labeled.len(), cfg.batch_size, &mut rng) {
            let samples: Vec<&SequenceSample> = batch.iter().map(|&i| labeled[i]).collect();
            let (loss, grads) = net.loss_and_grads(&samples, Some(&mut rng))?;
            net.apply_gradients(&grads);
            epoch_loss += loss * samples.len() as f64;
        }
        trace.push(epoch_loss / labeled.len() as f64);
    }
    Ok((net, trace))
}

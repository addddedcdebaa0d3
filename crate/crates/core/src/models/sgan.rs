//! Semi-supervised GAN: one recurrent backbone read by a two-class softmax
//! classifier head and a real/fake sigmoid discriminator head, plus a dense
//! generator producing whole input sequences.

use rand_distr::{Distribution, StandardNormal};

use crate::dataset::SequenceSample;
use crate::nn::{
    bce_with_logit, relu, relu_backward, sigmoid, softmax, softmax_ce_with_grad, Adam, Dense, Grads, NnError,
    ParamId, ParamStore, Tensor,
};
use crate::seed::{rng_from, Rng};

use super::backbone::{Backbone, Pass};
use super::{ModelError, NetShape, TrainConfig};

/// `latent → dense(ReLU) → dense(linear) → steps × features`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub hidden: Dense,
    pub output: Dense,
    pub latent_dim: usize,
}

pub(crate) struct GeneratorTrace {
    z: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl Generator {
    fn new(store: &mut ParamStore, shape: NetShape, cfg: &TrainConfig, rng: &mut Rng) -> Self {
        Generator {
            hidden: Dense::new(store, "generator.hidden", cfg.latent_dim, cfg.generator_hidden, rng),
            output: Dense::new(store, "generator.out", cfg.generator_hidden, shape.input_len(), rng),
            latent_dim: cfg.latent_dim,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = self.hidden.params();
        v.extend(self.output.params());
        v
    }

    pub(crate) fn forward(&self, p: &ParamStore, z: Vec<f64>) -> (Vec<f64>, GeneratorTrace) {
        let pre = self.hidden.forward_unchecked(p, &z);
        let act = relu(&pre);
        let x = self.output.forward_unchecked(p, &act);
        (x, GeneratorTrace { z, pre, act })
    }

    pub(crate) fn backward(&self, p: &ParamStore, g: &mut Grads, t: &GeneratorTrace, dx: &[f64]) {
        let d_act = self.output.backward(p, g, &t.act, dx);
        let d_pre = relu_backward(&t.pre, &d_act);
        self.hidden.backward(p, g, &t.z, &d_pre);
    }

    pub fn sample_latent(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.latent_dim).map(|_| StandardNormal.sample(rng)).collect()
    }
}

/// Losses of one [`SganNet::train_step`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SganLosses {
    pub c_loss: f64,
    pub d_loss_real: f64,
    pub d_loss_fake: f64,
    pub g_loss: f64,
}

/// Per-epoch means of [`SganLosses`].
pub type SganTrace = Vec<SganLosses>;

#[derive(Clone, Debug)]
pub struct SganNet {
    pub store: ParamStore,
    pub backbone: Backbone,
    pub class_head: Dense,
    pub disc_head: Dense,
    pub generator: Generator,
    shape: NetShape,
    adam_c: Adam,
    adam_d: Adam,
    adam_g: Adam,
}

impl SganNet {
    pub fn new(shape: NetShape, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = rng_from(seed, &[0x7367_616e]);
        let mut store = ParamStore::new();
        let backbone = Backbone::new(&mut store, "backbone", shape, &mut rng);
        let class_head = Dense::new(&mut store, "class_head", backbone.rep_dim(), 2, &mut rng);
        let disc_head = Dense::new(&mut store, "disc_head", backbone.rep_dim(), 1, &mut rng);
        let generator = Generator::new(&mut store, shape, cfg, &mut rng);
        let mut net = SganNet {
            adam_c: Adam::new(cfg.adam(), &store, vec![]),
            adam_d: Adam::new(cfg.adam(), &store, vec![]),
            adam_g: Adam::new(cfg.adam(), &store, vec![]),
            store,
            backbone,
            class_head,
            disc_head,
            generator,
            shape,
        };
        net.adam_c = Adam::new(cfg.adam(), &net.store, net.classifier_params());
        net.adam_d = Adam::new(cfg.adam(), &net.store, net.discriminator_params());
        net.adam_g = Adam::new(cfg.adam(), &net.store, net.generator.params());
        net
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    /// Backbone followed by the classifier head.
    pub fn classifier_params(&self) -> Vec<ParamId> {
        let mut v = self.backbone.params();
        v.extend(self.class_head.params());
        v
    }

    /// Backbone followed by the discriminator head.
    pub fn discriminator_params(&self) -> Vec<ParamId> {
        let mut v = self.backbone.params();
        v.extend(self.disc_head.params());
        v
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.shape.input_len() {
            return Err(NnError::ShapeMismatch { context: "model input", expected: self.shape.input_len(), got: x.len() });
        }
        Ok(())
    }

    /// Softmax over `[not stressed, stressed]` with dropout disabled.
    pub fn class_probs(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let (rep, _) = self.backbone.forward(&self.store, x, &mut Pass::Eval);
        Ok(softmax(&self.class_head.forward_unchecked(&self.store, &rep)))
    }

    /// Probability that `x` is real, with dropout disabled.
    pub fn discriminate(&self, x: &[f64]) -> Result<f64, NnError> {
        self.check_input(x)?;
        let (rep, _) = self.backbone.forward(&self.store, x, &mut Pass::Eval);
        Ok(sigmoid(self.disc_head.forward_unchecked(&self.store, &rep)[0]))
    }

    /// Stressed-class probability of the classifier head.
    pub fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<f64>, NnError> {
        samples.iter().map(|s| self.class_probs(&s.inputs).map(|p| p[1])).collect()
    }

    /// `batch × steps × features` generated inputs from standard-normal latents.
    pub fn generate_fake(&self, batch: usize, rng: &mut Rng) -> Tensor {
        let mut data = Vec::with_capacity(batch * self.shape.input_len());
        for _ in 0..batch {
            let z = self.generator.sample_latent(rng);
            data.extend(self.generator.forward(&self.store, z).0);
        }
        Tensor::new(vec![batch, self.shape.steps, self.shape.features], data).expect("generator output shape")
    }

    /// Classifier cross-entropy on labeled samples: mean loss and gradient.
    pub fn classifier_loss_and_grads(&self, batch: &[&SequenceSample], rng: &mut Rng) -> (f64, Grads) {
        let mut grads = Grads::zeros_like(&self.store);
        let mut total = 0.0;
        for s in batch {
            let (rep, trace) = self.backbone.forward(&self.store, &s.inputs, &mut Pass::Train(rng));
            let logits = self.class_head.forward_unchecked(&self.store, &rep);
            let (loss, d_logits) = softmax_ce_with_grad(&logits, s.label as usize);
            total += loss;
            let d_rep = self.class_head.backward(&self.store, &mut grads, &rep, &d_logits);
            self.backbone.backward(&self.store, &mut grads, &trace, &d_rep);
        }
        grads.scale(1.0 / batch.len() as f64);
        (total / batch.len() as f64, grads)
    }

    /// Discriminator BCE against a constant `target` over the given inputs.
    pub fn discriminator_loss_and_grads<'a>(
        &self,
        inputs: impl ExactSizeIterator<Item = &'a [f64]>,
        target: f64,
        rng: &mut Rng,
    ) -> (f64, Grads) {
        let n = inputs.len();
        let mut grads = Grads::zeros_like(&self.store);
        let mut total = 0.0;
        for x in inputs {
            let (rep, trace) = self.backbone.forward(&self.store, x, &mut Pass::Train(rng));
            let z = self.disc_head.forward_unchecked(&self.store, &rep)[0];
            let (loss, dz) = bce_with_logit(z, target);
            total += loss;
            let d_rep = self.disc_head.backward(&self.store, &mut grads, &rep, &[dz]);
            self.backbone.backward(&self.store, &mut grads, &trace, &d_rep);
        }
        grads.scale(1.0 / n as f64);
        (total / n as f64, grads)
    }

    /// Generator loss `BCE(D(G(z)), real)` for the given latents. Gradients
    /// flow through the discriminator into the generator; discriminator
    /// entries of the returned buffer are never applied by the generator
    /// update.
    pub fn generator_loss_and_grads(&self, latents: &[Vec<f64>], rng: &mut Rng) -> (f64, Grads) {
        let mut grads = Grads::zeros_like(&self.store);
        let mut total = 0.0;
        for z in latents {
            let (x, gen_trace) = self.generator.forward(&self.store, z.clone());
            let (rep, trace) = self.backbone.forward(&self.store, &x, &mut Pass::Train(rng));
            let logit = self.disc_head.forward_unchecked(&self.store, &rep)[0];
            let (loss, dz) = bce_with_logit(logit, 1.0);
            total += loss;
            let d_rep = self.disc_head.backward(&self.store, &mut grads, &rep, &[dz]);
            let dx = self.backbone.backward(&self.store, &mut grads, &trace, &d_rep);
            self.generator.backward(&self.store, &mut grads, &gen_trace, &dx);
        }
        grads.scale(1.0 / latents.len() as f64);
        (total / latents.len() as f64, grads)
    }

    /// Classifier update on `labeled`.
    pub fn classifier_step(&mut self, labeled: &[&SequenceSample], rng: &mut Rng) -> Result<f64, ModelError> {
        if labeled.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let (loss, grads) = self.classifier_loss_and_grads(labeled, rng);
        self.adam_c.step(&mut self.store, &grads);
        Ok(loss)
    }

    /// Three updates, in order: classifier on `labeled`; discriminator on
    /// `unlabeled` (real) together with as many generated inputs (fake), as
    /// one step on the mean of both losses; generator through the frozen
    /// discriminator.
    pub fn train_step(
        &mut self,
        labeled: &[&SequenceSample],
        unlabeled: &[&SequenceSample],
        rng: &mut Rng,
    ) -> Result<SganLosses, ModelError> {
        if labeled.is_empty() || unlabeled.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let c_loss = self.classifier_step(labeled, rng)?;

        let (d_loss_real, mut grads) =
            self.discriminator_loss_and_grads(unlabeled.iter().map(|s| s.inputs.as_slice()), 1.0, rng);
        let n = unlabeled.len();
        let fake = self.generate_fake(n, rng);
        let (d_loss_fake, g2) =
            self.discriminator_loss_and_grads(fake.data().chunks_exact(self.shape.input_len()), 0.0, rng);
        grads.add_assign(&g2);
        grads.scale(0.5);
        self.adam_d.step(&mut self.store, &grads);

        let latents: Vec<Vec<f64>> = (0..n).map(|_| self.generator.sample_latent(rng)).collect();
        let (g_loss, grads) = self.generator_loss_and_grads(&latents, rng);
        self.adam_g.step(&mut self.store, &grads);

        Ok(SganLosses { c_loss, d_loss_real, d_loss_fake, g_loss })
    }
}

/// Trains for `cfg.epochs` passes over the unlabeled stream (every training
/// sample, labels ignored), cycling through reshuffled labeled batches.
pub fn train_sgan(mut net: SganNet, train: &[SequenceSample], cfg: &TrainConfig) -> Result<(SganNet, SganTrace), ModelError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyTrainSet);
    }
    let labeled: Vec<&SequenceSample> = train.iter().filter(|s| s.labeled).collect();
    if labeled.is_empty() {
        return Err(ModelError::EmptyLabeledSet);
    }
    let mut rng = rng_from(cfg.seed, &[0x7367_7472]);
    let mut labeled_batches = super::shuffled_batches(labeled.len(), cfg.batch_size, &mut rng).into_iter();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut sum = SganLosses::default();
        let batches = super::shuffled_batches(train.len(), cfg.batch_size, &mut rng);
        let steps = batches.len() as f64;
        for batch in batches {
            let lab = match labeled_batches.next() {
                Some(b) => b,
                None => {
                    labeled_batches = super::shuffled_batches(labeled.len(), cfg.batch_size, &mut rng).into_iter();
                    labeled_batches.next().expect("labeled set is non-empty")
                }
            };
            let lab: Vec<&SequenceSample> = lab.iter().map(|&i| labeled[i]).collect();
            let unl: Vec<&SequenceSample> = batch.iter().map(|&i| &train[i]).collect();
            let l = net.train_step(&lab, &unl, &mut rng)?;
            sum.c_loss += l.c_loss;
            sum.d_loss_real += l.d_loss_real;
            sum.d_loss_fake += l.d_loss_fake;
            sum.g_loss += l.g_loss;
        }
        trace.push(SganLosses {
            c_loss: sum.c_loss / steps,
            d_loss_real: sum.d_loss_real / steps,
            d_loss_fake: sum.d_loss_fake / steps,
            g_loss: sum.g_loss / steps,
        });
    }
    Ok((net, trace))
}

//! Finite-difference verification of every hand-written backward pass.
//!
//! Each check builds a small randomly initialised component, reduces its
//! output to a scalar with a fixed random projection and compares the
//! analytic gradient of that scalar with central differences. Dropout masks
//! are held fixed by reseeding the mask RNG for every evaluation.

use rand::Rng as _;

use crate::dataset::SequenceSample;
use crate::models::{Backbone, NetShape, Pass, SganNet, SupervisedNet, TrainConfig};
use crate::nn::fd::{check_params, check_vector, FdReport};
use crate::nn::{
    bce_loss, bce_with_logit, dropout_backward, dropout_forward, sigmoid, softmax_ce_loss, softmax_ce_with_grad,
    BiLstm, Dense, Grads, LstmCell, Mode, ParamId, ParamStore,
};
use crate::seed::{rng_from, Rng};

/// Largest relative error accepted by [`GradCheck::passed`].
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub report: FdReport,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error <= GRAD_TOLERANCE
    }
}

fn uniform(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dense(seed: u64) -> FdReport {
    let mut rng = rng_from(seed, &[1]);
    let mut store = ParamStore::new();
    let layer = Dense::new(&mut store, "dense", 4, 3, &mut rng);
    let x = uniform(&mut rng, 4);
    let r = uniform(&mut rng, 3);
    let mut g = Grads::zeros_like(&store);
    let dx = layer.backward(&store, &mut g, &x, &r);
    let params = check_params(&mut store, &layer.params(), &g, |s| dot(&layer.forward_unchecked(s, &x), &r));
    let mut xv = x.clone();
    params.merge(check_vector(&mut xv, &dx, |x| dot(&layer.forward_unchecked(&store, x), &r)))
}

fn check_dropout(seed: u64, mode: Mode) -> FdReport {
    let mut rng = rng_from(seed, &[2]);
    let mut x = uniform(&mut rng, 16);
    let r = uniform(&mut rng, 16);
    let (_, mask) = dropout_forward(&x, 0.3, mode, &mut rng_from(seed, &[3]));
    let dx = dropout_backward(&mask, &r);
    check_vector(&mut x, &dx, |x| dot(&dropout_forward(x, 0.3, mode, &mut rng_from(seed, &[3])).0, &r))
}

fn check_sigmoid_bce(seed: u64) -> FdReport {
    let mut rng = rng_from(seed, &[4]);
    let mut report: Option<FdReport> = None;
    for y in [0.0, 1.0] {
        let mut z = vec![rng.random_range(-3.0..3.0)];
        let (_, dz) = bce_with_logit(z[0], y);
        let r = check_vector(&mut z, &[dz], |z| bce_loss(sigmoid(z[0]), y));
        report = Some(match report {
            Some(prev) => prev.merge(r),
            None => r,
        });
    }
    report.expect("two labels checked")
}

fn check_softmax_ce(seed: u64) -> FdReport {
    let mut rng = rng_from(seed, &[5]);
    let mut logits = uniform(&mut rng, 3);
    let (_, d) = softmax_ce_with_grad(&logits, 2);
    check_vector(&mut logits, &d, |z| softmax_ce_loss(z, 2))
}

fn check_lstm_cell(seed: u64) -> FdReport {
    let mut rng = rng_from(seed, &[6]);
    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "cell", 3, 2, &mut rng);
    let x = uniform(&mut rng, 3);
    let h0 = uniform(&mut rng, 2);
    let c0 = uniform(&mut rng, 2);
    let rh = uniform(&mut rng, 2);
    let rc = uniform(&mut rng, 2);
    let scalar = |s: &ParamStore, x: &[f64]| {
        let t = cell.step_traced(s, x.to_vec(), h0.clone(), c0.clone());
        dot(&t.h, &rh) + dot(&t.c, &rc)
    };
    let trace = cell.step_traced(&store, x.clone(), h0.clone(), c0.clone());
    let mut g = Grads::zeros_like(&store);
    let (dx, _, _) = cell.step_backward(&store, &mut g, &trace, &rh, &rc);
    let params = check_params(&mut store, &cell.params(), &g, |s| scalar(s, &x));
    let mut xv = x.clone();
    params.merge(check_vector(&mut xv, &dx, |x| scalar(&store, x)))
}

fn check_bilstm_stack(seed: u64) -> FdReport {
    let shape = PROBE_SHAPE;
    let mut rng = rng_from(seed, &[7]);
    let mut store = ParamStore::new();
    let bb = Backbone::new(&mut store, "stack", shape, &mut rng);
    let x = uniform(&mut rng, shape.input_len());
    let r = uniform(&mut rng, bb.rep_dim());
    let scalar = |s: &ParamStore, x: &[f64]| {
        let mut mask_rng = rng_from(seed, &[8]);
        dot(&bb.forward(s, x, &mut Pass::Train(&mut mask_rng)).0, &r)
    };
    let mut mask_rng = rng_from(seed, &[8]);
    let (_, trace) = bb.forward(&store, &x, &mut Pass::Train(&mut mask_rng));
    let mut g = Grads::zeros_like(&store);
    let dx = bb.backward(&store, &mut g, &trace, &r);
    let params = check_params(&mut store, &bb.params(), &g, |s| scalar(s, &x));
    let mut xv = x.clone();
    let single = {
        // A lone bidirectional layer, read at every step.
        let mut store = ParamStore::new();
        let layer = BiLstm::new(&mut store, "single", 3, 2, &mut rng);
        let r = uniform(&mut rng, 4 * 4);
        let (_, trace) = layer.forward_traced(&store, &x);
        let mut g = Grads::zeros_like(&store);
        let dx = layer.backward(&store, &mut g, &trace, &r);
        let p = check_params(&mut store, &layer.params(), &g, |s| dot(&layer.forward_traced(s, &x).0, &r));
        let mut xv = x.clone();
        p.merge(check_vector(&mut xv, &dx, |x| dot(&layer.forward_traced(&store, x).0, &r)))
    };
    params.merge(check_vector(&mut xv, &dx, |x| scalar(&store, x))).merge(single)
}

fn tiny_cfg() -> TrainConfig {
    TrainConfig { latent_dim: 4, generator_hidden: 6, ..TrainConfig::sgan() }
}

/// The probe geometry: 4 steps of 3 features, 2 hidden units per direction.
pub const PROBE_SHAPE: NetShape = NetShape { steps: 4, features: 3, hidden: 2, dropout: 0.2 };

fn tiny_samples(seed: u64, shape: NetShape) -> Vec<SequenceSample> {
    let mut rng = rng_from(seed, &[9]);
    (0..3u8)
        .map(|k| SequenceSample {
            inputs: uniform(&mut rng, shape.input_len()),
            label: k % 2,
            subject_id: "S0".to_string(),
            labeled: true,
            window_index: usize::from(k),
        })
        .collect()
}

/// Runs a check over the listed parameters of a model whose loss is a
/// function of its whole store.
fn check_model<M: Clone>(
    model: &M,
    store_of: impl Fn(&mut M) -> &mut ParamStore,
    ids: &[ParamId],
    loss_and_grads: impl Fn(&M) -> (f64, Grads),
) -> FdReport {
    let (_, g) = loss_and_grads(model);
    let mut work = model.clone();
    let mut store = store_of(&mut work).clone();
    check_params(&mut store, ids, &g, |s| {
        *store_of(&mut work) = s.clone();
        loss_and_grads(&work).0
    })
}

fn check_sgan_generator(seed: u64) -> FdReport {
    let net = SganNet::new(PROBE_SHAPE, &tiny_cfg(), seed);
    let mut rng = rng_from(seed, &[10]);
    let latents: Vec<Vec<f64>> = (0..2).map(|_| net.generator.sample_latent(&mut rng)).collect();
    check_model(&net, |n| &mut n.store, &net.generator.params(), |n| {
        n.generator_loss_and_grads(&latents, &mut rng_from(seed, &[11]))
    })
}

fn check_sgan_classifier(seed: u64) -> FdReport {
    let net = SganNet::new(PROBE_SHAPE, &tiny_cfg(), seed);
    let samples = tiny_samples(seed, PROBE_SHAPE);
    let refs: Vec<&SequenceSample> = samples.iter().collect();
    let c = check_model(&net, |n| &mut n.store, &net.classifier_params(), |n| {
        n.classifier_loss_and_grads(&refs, &mut rng_from(seed, &[12]))
    });
    let d = check_model(&net, |n| &mut n.store, &net.discriminator_params(), |n| {
        n.discriminator_loss_and_grads(refs.iter().map(|s| s.inputs.as_slice()), 1.0, &mut rng_from(seed, &[13]))
    });
    c.merge(d)
}

fn check_supervised(seed: u64) -> FdReport {
    let net = SupervisedNet::new(PROBE_SHAPE, &TrainConfig::supervised(), seed);
    let samples = tiny_samples(seed, PROBE_SHAPE);
    let refs: Vec<&SequenceSample> = samples.iter().collect();
    let ids: Vec<ParamId> = net.store.ids().collect();
    check_model(&net, |n| &mut n.store, &ids, |n| {
        n.loss_and_grads(&refs, Some(&mut rng_from(seed, &[14]))).expect("non-empty batch")
    })
}

/// Every check, in a fixed order.
pub fn run_all(seed: u64) -> Vec<GradCheck> {
    vec![
        GradCheck { name: "dense", report: check_dense(seed) },
        GradCheck { name: "dropout (eval)", report: check_dropout(seed, Mode::Eval) },
        GradCheck { name: "dropout (fixed mask)", report: check_dropout(seed, Mode::Train) },
        GradCheck { name: "sigmoid + bce", report: check_sigmoid_bce(seed) },
        GradCheck { name: "softmax + cross-entropy", report: check_softmax_ce(seed) },
        GradCheck { name: "lstm cell", report: check_lstm_cell(seed) },
        GradCheck { name: "bilstm stack", report: check_bilstm_stack(seed) },
        GradCheck { name: "sgan generator", report: check_sgan_generator(seed) },
        GradCheck { name: "sgan classifier + discriminator", report: check_sgan_classifier(seed) },
        GradCheck { name: "supervised net", report: check_supervised(seed) },
    ]
}

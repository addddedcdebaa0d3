use crate::nn::{dropout_backward, dropout_forward, BiLstm, BiLstmTrace, Grads, Mode, ParamId, ParamStore};
use crate::seed::Rng;

use super::NetShape;

/// Forward-pass mode; training mode carries the dropout RNG.
pub enum Pass<'a> {
    Train(&'a mut Rng),
    Eval,
}

impl Pass<'_> {
    pub(crate) fn dropout(&mut self, x: &[f64], p: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            Pass::Train(rng) => dropout_forward(x, p, Mode::Train, rng),
            Pass::Eval => (x.to_vec(), vec![1.0; x.len()]),
        }
    }
}

/// `BiLSTM(H, sequences) → dropout → BiLSTM(H, final step) → dropout`,
/// producing a `2H` representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    pub lower: BiLstm,
    pub upper: BiLstm,
    shape: NetShape,
}

#[derive(Clone, Debug)]
pub struct BackboneTrace {
    lower: BiLstmTrace,
    lower_mask: Vec<f64>,
    upper: BiLstmTrace,
    rep_mask: Vec<f64>,
}

impl Backbone {
    pub fn new(store: &mut ParamStore, name: &str, shape: NetShape, rng: &mut Rng) -> Self {
        let lower = BiLstm::new(store, &format!("{name}.bilstm1"), shape.features, shape.hidden, rng);
        let upper = BiLstm::new(store, &format!("{name}.bilstm2"), 2 * shape.hidden, shape.hidden, rng);
        Backbone { lower, upper, shape }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = self.lower.params();
        v.extend(self.upper.params());
        v
    }

    pub fn rep_dim(&self) -> usize {
        2 * self.shape.hidden
    }

    /// `x` is `steps × features`, row-major.
    pub fn forward(&self, p: &ParamStore, x: &[f64], pass: &mut Pass<'_>) -> (Vec<f64>, BackboneTrace) {
        let h = self.shape.hidden;
        let steps = x.len() / self.shape.features;
        let (seq1, lower) = self.lower.forward_traced(p, x);
        let (seq1, lower_mask) = pass.dropout(&seq1, self.shape.dropout);
        let (seq2, upper) = self.upper.forward_traced(p, &seq1);
        // Forward direction ends at the last step, backward direction at the first.
        let last = (steps - 1) * 2 * h;
        let mut rep = seq2[last..last + h].to_vec();
        rep.extend_from_slice(&seq2[h..2 * h]);
        let (rep, rep_mask) = pass.dropout(&rep, self.shape.dropout);
        (rep, BackboneTrace { lower, lower_mask, upper, rep_mask })
    }

    /// Returns the gradient with respect to the input sequence.
    pub fn backward(&self, p: &ParamStore, g: &mut Grads, trace: &BackboneTrace, d_rep: &[f64]) -> Vec<f64> {
        let h = self.shape.hidden;
        let steps = trace.lower_mask.len() / (2 * h);
        let d_rep = dropout_backward(&trace.rep_mask, d_rep);
        let mut d_seq2 = vec![0.0; steps * 2 * h];
        let last = (steps - 1) * 2 * h;
        d_seq2[last..last + h].copy_from_slice(&d_rep[..h]);
        d_seq2[h..2 * h].iter_mut().zip(&d_rep[h..]).for_each(|(a, b)| *a += b);
        let d_seq1 = self.upper.backward(p, g, &trace.upper, &d_seq2);
        let d_seq1 = dropout_backward(&trace.lower_mask, &d_seq1);
        self.lower.backward(p, g, &trace.lower, &d_seq1)
    }
}

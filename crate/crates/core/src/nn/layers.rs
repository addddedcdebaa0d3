//! Dense, dropout and LSTM layers with hand-written backward passes.
//!
//! Every layer is a set of [`ParamId`]s into a [`ParamStore`]. Forward passes
//! that feed a backward pass return a trace holding the activations the
//! backward pass needs; backward passes accumulate into a [`Grads`] buffer
//! and return the gradient with respect to the layer input.

use rand::Rng as _;

use super::params::{Grads, ParamId, ParamStore};
use super::NnError;
use crate::seed::Rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

pub fn relu_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter().zip(dy).map(|(p, d)| if *p > 0.0 { *d } else { 0.0 }).collect()
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `y = W x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let w = store.add_uniform(format!("{name}.w"), &[outputs, inputs], glorot_limit(inputs, outputs), rng);
        let b = store.add_const(format!("{name}.b"), &[outputs], 0.0);
        Dense { w, b, inputs, outputs }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.w, self.b]
    }

    pub fn forward(&self, p: &ParamStore, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.inputs {
            return Err(NnError::ShapeMismatch { context: "dense input", expected: self.inputs, got: x.len() });
        }
        Ok(self.forward_unchecked(p, x))
    }

    pub(crate) fn forward_unchecked(&self, p: &ParamStore, x: &[f64]) -> Vec<f64> {
        let w = p.get(self.w);
        let b = p.get(self.b);
        (0..self.outputs)
            .map(|o| b[o] + dot(&w[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    pub fn backward(&self, p: &ParamStore, g: &mut Grads, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let w = p.get(self.w);
        {
            let gw = g.get_mut(self.w);
            for o in 0..self.outputs {
                axpy(dy[o], x, &mut gw[o * self.inputs..(o + 1) * self.inputs]);
            }
        }
        g.get_mut(self.b).iter_mut().zip(dy).for_each(|(a, d)| *a += d);
        let mut dx = vec![0.0; self.inputs];
        for o in 0..self.outputs {
            axpy(dy[o], &w[o * self.inputs..(o + 1) * self.inputs], &mut dx);
        }
        dx
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and the per-entry multiplier
/// (0 or `1/(1-p)` in train mode, 1 in eval mode).
pub fn dropout_forward(x: &[f64], p: f64, mode: Mode, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    assert!((0.0..1.0).contains(&p), "dropout probability must lie in [0, 1)");
    if mode == Mode::Eval || p == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = x.iter().map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
    (x.iter().zip(&mask).map(|(v, m)| v * m).collect(), mask)
}

pub fn dropout_backward(mask: &[f64], dy: &[f64]) -> Vec<f64> {
    dy.iter().zip(mask).map(|(d, m)| d * m).collect()
}

/// Gate blocks of the stacked LSTM weight matrices, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

/// LSTM cell without peepholes.
///
/// `w` is `4H × in`, `u` is `4H × H`, `b` is `4H`, with gate blocks stacked in
/// [`Gate`] order:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

/// Activations of one cell step.
#[derive(Clone, Debug)]
pub struct StepTrace {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`, each `H` long.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    /// Glorot-uniform kernels, forget-gate bias 1, other biases 0.
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = store.add_uniform(format!("{name}.w"), &[4 * hidden, inputs], glorot_limit(inputs, 4 * hidden), rng);
        let u = store.add_uniform(format!("{name}.u"), &[4 * hidden, hidden], glorot_limit(hidden, 4 * hidden), rng);
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(1.0);
        let b = store.add(format!("{name}.b"), super::Tensor::new(vec![4 * hidden], bias).expect("bias shape"));
        LstmCell { w, u, b, inputs, hidden }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.w, self.u, self.b]
    }

    /// Rows of `W` belonging to `gate` (`H × in`).
    pub fn input_weights<'a>(&self, p: &'a ParamStore, gate: Gate) -> &'a [f64] {
        let k = gate as usize;
        &p.get(self.w)[k * self.hidden * self.inputs..(k + 1) * self.hidden * self.inputs]
    }

    pub fn recurrent_weights<'a>(&self, p: &'a ParamStore, gate: Gate) -> &'a [f64] {
        let k = gate as usize;
        &p.get(self.u)[k * self.hidden * self.hidden..(k + 1) * self.hidden * self.hidden]
    }

    pub fn bias<'a>(&self, p: &'a ParamStore, gate: Gate) -> &'a [f64] {
        let k = gate as usize;
        &p.get(self.b)[k * self.hidden..(k + 1) * self.hidden]
    }

    /// One checked step returning `(h_t, c_t)`.
    pub fn step(&self, p: &ParamStore, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        if x.len() != self.inputs {
            return Err(NnError::ShapeMismatch { context: "lstm input", expected: self.inputs, got: x.len() });
        }
        for (context, v) in [("lstm hidden state", h_prev), ("lstm cell state", c_prev)] {
            if v.len() != self.hidden {
                return Err(NnError::ShapeMismatch { context, expected: self.hidden, got: v.len() });
            }
        }
        let t = self.step_traced(p, x.to_vec(), h_prev.to_vec(), c_prev.to_vec());
        Ok((t.h, t.c))
    }

    pub(crate) fn step_traced(&self, p: &ParamStore, x: Vec<f64>, h_prev: Vec<f64>, c_prev: Vec<f64>) -> StepTrace {
        let hd = self.hidden;
        let w = p.get(self.w);
        let u = p.get(self.u);
        let b = p.get(self.b);
        let mut gates = b.to_vec();
        for (r, z) in gates.iter_mut().enumerate() {
            *z += dot(&w[r * self.inputs..(r + 1) * self.inputs], &x) + dot(&u[r * hd..(r + 1) * hd], &h_prev);
        }
        for (r, z) in gates.iter_mut().enumerate() {
            *z = if r / hd == Gate::Cell as usize { z.tanh() } else { sigmoid(*z) };
        }
        let (i, rest) = gates.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (g, o) = rest.split_at(hd);
        let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        StepTrace { x, h_prev, c_prev, gates, tanh_c, h, c }
    }

    /// Backward through one step given gradients on `h_t` and `c_t`; returns
    /// `(dx, dh_prev, dc_prev)`.
    pub(crate) fn step_backward(
        &self,
        p: &ParamStore,
        g: &mut Grads,
        t: &StepTrace,
        dh: &[f64],
        dc_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden;
        let (i, rest) = t.gates.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (gg, o) = rest.split_at(hd);
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let d_o = dh[k] * t.tanh_c[k];
            let dc = dc_next[k] + dh[k] * o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
            let d_i = dc * gg[k];
            let d_g = dc * i[k];
            let d_f = dc * t.c_prev[k];
            dc_prev[k] = dc * f[k];
            dz[k] = d_i * i[k] * (1.0 - i[k]);
            dz[hd + k] = d_f * f[k] * (1.0 - f[k]);
            dz[2 * hd + k] = d_g * (1.0 - gg[k] * gg[k]);
            dz[3 * hd + k] = d_o * o[k] * (1.0 - o[k]);
        }
        {
            let gw = g.get_mut(self.w);
            for (r, &d) in dz.iter().enumerate() {
                axpy(d, &t.x, &mut gw[r * self.inputs..(r + 1) * self.inputs]);
            }
        }
        {
            let gu = g.get_mut(self.u);
            for (r, &d) in dz.iter().enumerate() {
                axpy(d, &t.h_prev, &mut gu[r * hd..(r + 1) * hd]);
            }
        }
        g.get_mut(self.b).iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
        let w = p.get(self.w);
        let u = p.get(self.u);
        let mut dx = vec![0.0; self.inputs];
        let mut dh_prev = vec![0.0; hd];
        for (r, &d) in dz.iter().enumerate() {
            axpy(d, &w[r * self.inputs..(r + 1) * self.inputs], &mut dx);
            axpy(d, &u[r * hd..(r + 1) * hd], &mut dh_prev);
        }
        (dx, dh_prev, dc_prev)
    }

    /// Runs over `seq` (`T × in`, row-major) from zero state, in reverse time
    /// order when `reverse` is set. Traces are stored by original time index.
    pub(crate) fn run(&self, p: &ParamStore, seq: &[f64], reverse: bool) -> Vec<StepTrace> {
        let steps = seq.len() / self.inputs;
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut traces: Vec<Option<StepTrace>> = (0..steps).map(|_| None).collect();
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            let x = seq[t * self.inputs..(t + 1) * self.inputs].to_vec();
            let tr = self.step_traced(p, x, h, c);
            h = tr.h.clone();
            c = tr.c.clone();
            traces[t] = Some(tr);
        }
        traces.into_iter().map(|t| t.expect("every step visited")).collect()
    }

    /// Backpropagation through time. `d_out` is `T × H` (gradient on every
    /// emitted hidden state); returns `T × in`.
    pub(crate) fn run_backward(&self, p: &ParamStore, g: &mut Grads, traces: &[StepTrace], d_out: &[f64], reverse: bool) -> Vec<f64> {
        let steps = traces.len();
        let hd = self.hidden;
        let mut d_seq = vec![0.0; steps * self.inputs];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for k in (0..steps).rev() {
            let t = if reverse { steps - 1 - k } else { k };
            let dh: Vec<f64> = (0..hd).map(|j| d_out[t * hd + j] + dh_next[j]).collect();
            let (dx, dh_prev, dc_prev) = self.step_backward(p, g, &traces[t], &dh, &dc_next);
            d_seq[t * self.inputs..(t + 1) * self.inputs].copy_from_slice(&dx);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        d_seq
    }
}

/// Bidirectional LSTM; output row `t` is `[h_fwd[t], h_bwd[t]]` where the
/// backward cell reads the sequence from the end.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Clone, Debug)]
pub struct BiLstmTrace {
    fwd: Vec<StepTrace>,
    bwd: Vec<StepTrace>,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiLstm {
            fwd: LstmCell::new(store, &format!("{name}.fwd"), inputs, hidden, rng),
            bwd: LstmCell::new(store, &format!("{name}.bwd"), inputs, hidden, rng),
        }
    }

    pub fn from_cells(fwd: LstmCell, bwd: LstmCell) -> Result<Self, NnError> {
        if fwd.inputs != bwd.inputs || fwd.hidden != bwd.hidden {
            return Err(NnError::ShapeMismatch { context: "bilstm directions", expected: fwd.hidden, got: bwd.hidden });
        }
        Ok(BiLstm { fwd, bwd })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = self.fwd.params();
        v.extend(self.bwd.params());
        v
    }

    pub fn inputs(&self) -> usize {
        self.fwd.inputs
    }

    /// Width of an output row, `2H`.
    pub fn outputs(&self) -> usize {
        2 * self.fwd.hidden
    }

    /// Checked forward over a `T × in` sequence, returning `T × 2H`.
    pub fn forward(&self, p: &ParamStore, seq: &[f64]) -> Result<Vec<f64>, NnError> {
        if seq.is_empty() || !seq.len().is_multiple_of(self.inputs()) {
            return Err(NnError::ShapeMismatch { context: "bilstm sequence", expected: self.inputs(), got: seq.len() });
        }
        Ok(self.forward_traced(p, seq).0)
    }

    pub(crate) fn forward_traced(&self, p: &ParamStore, seq: &[f64]) -> (Vec<f64>, BiLstmTrace) {
        let fwd = self.fwd.run(p, seq, false);
        let bwd = self.bwd.run(p, seq, true);
        let out = fwd
            .iter()
            .zip(&bwd)
            .flat_map(|(a, b)| a.h.iter().chain(&b.h).copied())
            .collect();
        (out, BiLstmTrace { fwd, bwd })
    }

    pub(crate) fn backward(&self, p: &ParamStore, g: &mut Grads, trace: &BiLstmTrace, d_out: &[f64]) -> Vec<f64> {
        let hd = self.fwd.hidden;
        let steps = trace.fwd.len();
        let mut d_f = vec![0.0; steps * hd];
        let mut d_b = vec![0.0; steps * hd];
        for t in 0..steps {
            d_f[t * hd..(t + 1) * hd].copy_from_slice(&d_out[t * 2 * hd..t * 2 * hd + hd]);
            d_b[t * hd..(t + 1) * hd].copy_from_slice(&d_out[t * 2 * hd + hd..(t + 1) * 2 * hd]);
        }
        let mut d_seq = self.fwd.run_backward(p, g, &trace.fwd, &d_f, false);
        let d_seq_b = self.bwd.run_backward(p, g, &trace.bwd, &d_b, true);
        d_seq.iter_mut().zip(d_seq_b).for_each(|(a, b)| *a += b);
        d_seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn zero_cell(inputs: usize, hidden: usize) -> (ParamStore, LstmCell) {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", inputs, hidden, &mut rng_from(0, &[]));
        store.zero_all();
        (store, cell)
    }

    #[test]
    fn zero_cell_from_zero_state() {
        let (store, cell) = zero_cell(3, 2);
        let (h, c) = cell.step(&store, &[0.4, -1.0, 2.0], &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!((h, c), (vec![0.0; 2], vec![0.0; 2]));
    }

    #[test]
    fn zero_cell_halves_cell_state() {
        let (store, cell) = zero_cell(3, 2);
        let c_prev = [0.8, -3.0];
        let (h, c) = cell.step(&store, &[0.0; 3], &[0.0; 2], &c_prev).unwrap();
        for k in 0..2 {
            assert!((c[k] - 0.5 * c_prev[k]).abs() < 1e-15);
            assert!((h[k] - 0.5 * (0.5 * c_prev[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_shape_errors() {
        let (store, cell) = zero_cell(3, 2);
        assert!(matches!(cell.step(&store, &[0.0; 3], &[0.0; 3], &[0.0; 2]), Err(NnError::ShapeMismatch { .. })));
        assert!(matches!(cell.step(&store, &[0.0; 2], &[0.0; 2], &[0.0; 2]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 4, 3, &mut rng_from(1, &[]));
        assert_eq!(cell.bias(&store, Gate::Forget), &[1.0; 3]);
        assert_eq!(cell.bias(&store, Gate::Input), &[0.0; 3]);
        let limit = glorot_limit(4, 12);
        assert!(store.get(cell.w).iter().all(|v| v.abs() <= limit));
        assert_eq!(cell.input_weights(&store, Gate::Output).len(), 12);
        assert_eq!(cell.recurrent_weights(&store, Gate::Cell).len(), 9);
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut store = ParamStore::new();
        let mut rng = rng_from(2, &[]);
        let cell = LstmCell::new(&mut store, "c", 3, 4, &mut rng);
        let bi = BiLstm::from_cells(cell.clone(), cell).unwrap();
        let rows = [[0.1, -0.5, 0.9], [1.0, 0.2, -0.3], [0.7, 0.7, 0.0], [1.0, 0.2, -0.3], [0.1, -0.5, 0.9]];
        let seq: Vec<f64> = rows.iter().flatten().copied().collect();
        let out = bi.forward(&store, &seq).unwrap();
        let t_len = rows.len();
        for t in 0..t_len {
            let fwd = &out[t * 8..t * 8 + 4];
            let mirrored = t_len - 1 - t;
            let bwd = &out[mirrored * 8 + 4..mirrored * 8 + 8];
            assert_eq!(fwd, bwd);
        }
    }

    #[test]
    fn bilstm_single_step_is_two_cells() {
        let mut store = ParamStore::new();
        let mut rng = rng_from(3, &[]);
        let bi = BiLstm::new(&mut store, "b", 3, 2, &mut rng);
        let x = [0.3, -0.2, 0.5];
        let out = bi.forward(&store, &x).unwrap();
        let (hf, _) = bi.fwd.step(&store, &x, &[0.0; 2], &[0.0; 2]).unwrap();
        let (hb, _) = bi.bwd.step(&store, &x, &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(out, [hf, hb].concat());
    }

    #[test]
    fn bilstm_output_shape() {
        let mut store = ParamStore::new();
        let bi = BiLstm::new(&mut store, "b", 30, 10, &mut rng_from(4, &[]));
        let out = bi.forward(&store, &vec![0.1; 300]).unwrap();
        assert_eq!(out.len(), 10 * 20);
        assert!(bi.forward(&store, &[0.0; 31]).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = rng_from(5, &[]);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout_forward(&x, 0.2, Mode::Eval, &mut rng).0, x);
        assert_eq!(dropout_forward(&x, 0.0, Mode::Train, &mut rng).0, x);
        let (y, mask) = dropout_forward(&vec![1.0; 1000], 0.2, Mode::Train, &mut rng);
        assert!(mask.iter().all(|&m| m == 0.0 || m == 1.25));
        assert_eq!(y, mask);
    }

    #[test]
    fn dropout_expectation_is_identity() {
        // Each entry averages N Bernoulli draws scaled by 1/(1-p): variance
        // per draw is p/(1-p), so the standard error is sqrt(p/(1-p)/N).
        let (p, n, value) = (0.2, 10_000, 1.0);
        let mut rng = rng_from(6, &[]);
        let x = vec![value; 8];
        let mut acc = vec![0.0; 8];
        for _ in 0..n {
            let (y, _) = dropout_forward(&x, p, Mode::Train, &mut rng);
            acc.iter_mut().zip(y).for_each(|(a, v)| *a += v);
        }
        let se = (p / (1.0 - p) / n as f64).sqrt() * value;
        for a in acc {
            assert!((a / n as f64 - value).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn softmax_properties() {
        let s = softmax(&[0.0, 0.0, 0.0]);
        assert!(s.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let s = softmax(&[1000.0, -1000.0, 3.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_shape_check() {
        let mut store = ParamStore::new();
        let d = Dense::new(&mut store, "d", 3, 2, &mut rng_from(7, &[]));
        assert!(d.forward(&store, &[1.0, 2.0]).is_err());
        assert_eq!(d.forward(&store, &[1.0, 2.0, 3.0]).unwrap().len(), 2);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::gemm::{gemm, Scalar, View};
use super::shape::{Architecture, ShapeTrace, KERNEL};
use super::NetError;
use crate::synth::{derive_seed, GestureClass};

const TENSORS: usize = 12;

/// Classifier parameters, stored flat in the order of
/// [`Architecture::tensor_shapes`]. Weights are `[(tap, in_channel)][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: Architecture,
    dropout: f64,
    params: Vec<T>,
    offsets: [usize; TENSORS + 1],
}

/// Same layout as the parameters of the network that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub values: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Gesture { class: GestureClass, confidence: f64 },
    NoGesture { confidence: f64 },
}

impl Prediction {
    pub fn class(&self) -> Option<GestureClass> {
        match self {
            Prediction::Gesture { class, .. } => Some(*class),
            Prediction::NoGesture { .. } => None,
        }
    }

    pub fn confidence(&self) -> f64 {
        match self {
            Prediction::Gesture { confidence, .. } | Prediction::NoGesture { confidence } => *confidence,
        }
    }
}

/// Probabilities in f64 regardless of logit precision.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v.to_f64().unwrap_or(f64::NAN) - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Activations kept from the forward pass of one sample.
#[derive(Debug, Default)]
struct ConvCache<T> {
    /// Columns of the input that can be non-zero.
    active: usize,
    a1: Vec<T>,
    m2: Vec<T>,
    p1: Vec<T>,
    i1: Vec<u32>,
    m3: Vec<T>,
    p2: Vec<T>,
    i2: Vec<u32>,
    m4: Vec<T>,
    i3: Vec<u32>,
}

struct DenseCache<T> {
    flat: Vec<T>,
    hidden: Vec<T>,
    mask: Vec<T>,
    logits: Vec<T>,
}

/// Result of one pass over a batch.
pub(crate) struct BatchPass<T> {
    pub loss_sum: f64,
    pub correct: usize,
    pub grads: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// He-initialised weights, zero biases.
    pub fn new(arch: Architecture, dropout: f64, seed: u64) -> Result<Self, NetError> {
        let mut net = Self::zeros(arch, dropout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.tensor_shapes();
        for t in (0..TENSORS).step_by(2) {
            let fan_in = shapes[t].0;
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let (lo, hi) = (net.offsets[t], net.offsets[t + 1]);
            for v in &mut net.params[lo..hi] {
                *v = T::of(normal.sample(&mut rng));
            }
        }
        Ok(net)
    }

    pub fn zeros(arch: Architecture, dropout: f64) -> Result<Self, NetError> {
        Self::from_params(arch, dropout, vec![T::zero(); arch.param_count()])
    }

    pub fn from_params(arch: Architecture, dropout: f64, params: Vec<T>) -> Result<Self, NetError> {
        arch.validate()?;
        if !(0.0..1.0).contains(&dropout) {
            return Err(NetError::Architecture(format!("dropout {dropout} outside [0, 1)")));
        }
        if params.len() != arch.param_count() {
            return Err(NetError::Architecture(format!(
                "{} parameters given, architecture has {}",
                params.len(),
                arch.param_count()
            )));
        }
        let mut offsets = [0; TENSORS + 1];
        for (i, (r, c)) in arch.tensor_shapes().iter().enumerate() {
            offsets[i + 1] = offsets[i] + r * c;
        }
        Ok(Self { arch, dropout, params, offsets })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Parameter tensor `i` in storage order.
    pub fn tensor(&self, i: usize) -> &[T] {
        &self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Converts the parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            dropout: self.dropout,
            params: self.params.iter().map(|v| U::of(v.to_f64().unwrap_or(f64::NAN))).collect(),
            offsets: self.offsets,
        }
    }

    fn check_input(&self, x: &[T]) -> Result<(), NetError> {
        if x.len() != self.arch.input_len() {
            return Err(NetError::InputShape { expected: self.arch.input_len(), actual: x.len() });
        }
        Ok(())
    }

    /// Logits for one input. Dropout is applied only when `train_mode` is
    /// set; otherwise `rng` is not touched.
    pub fn forward<R: Rng>(&self, x: &[T], train_mode: bool, rng: &mut R) -> Result<Vec<T>, NetError> {
        self.check_input(x)?;
        let keep = if train_mode { 1.0 - self.dropout } else { 1.0 };
        let mut cache = ConvCache::default();
        let mut flat = vec![T::zero(); self.arch.trace().flat];
        self.conv_forward(x, &mut cache, &mut flat, keep, rng);
        let dense = self.dense_forward(flat, 1, keep, rng);
        Ok(dense.logits)
    }

    /// Like [`forward`](Self::forward) in eval mode, also returning the
    /// (time, channels) of every stage actually produced.
    pub fn forward_traced(&self, x: &[T]) -> Result<(Vec<T>, ShapeTrace), NetError> {
        self.check_input(x)?;
        let s = self.arch.trace();
        let mut rng = NoRng;
        let mut cache = ConvCache::default();
        let mut flat = vec![T::zero(); s.flat];
        self.conv_forward(x, &mut cache, &mut flat, 1.0, &mut rng);
        let c1 = self.arch.conv1;
        let trace = ShapeTrace {
            input: (x.len() / self.arch.features, self.arch.features),
            conv1a: (cache.a1.len() / c1, c1),
            conv1b: (cache.m2.len() / c1, c1),
            pool1: (cache.p1.len() / c1, c1),
            conv2: (cache.m3.len() / self.arch.conv2, self.arch.conv2),
            pool2: (cache.p2.len() / self.arch.conv2, self.arch.conv2),
            conv3: (cache.m4.len() / self.arch.conv3, self.arch.conv3),
            pool3: (cache.i3.len() / self.arch.conv3, self.arch.conv3),
            flat: flat.len(),
            dense: self.arch.dense,
            logits: 0,
        };
        let dense = self.dense_forward(flat, 1, 1.0, &mut rng);
        Ok((dense.logits.clone(), ShapeTrace { logits: dense.logits.len(), ..trace }))
    }

    /// Softmax of the eval-mode logits.
    pub fn probabilities(&self, x: &[T]) -> Result<Vec<f64>, NetError> {
        Ok(softmax(&self.forward(x, false, &mut NoRng)?))
    }

    /// Most likely class if its probability reaches `threshold`.
    pub fn predict(&self, x: &[T], threshold: f64) -> Result<Prediction, NetError> {
        let p = self.probabilities(x)?;
        let best = argmax(&p);
        Ok(match GestureClass::from_code(best) {
            Some(class) if p[best] >= threshold => Prediction::Gesture { class, confidence: p[best] },
            _ => Prediction::NoGesture { confidence: p[best] },
        })
    }

    /// Argmax class index in eval mode.
    pub fn classify(&self, x: &[T]) -> Result<usize, NetError> {
        Ok(argmax(&self.probabilities(x)?))
    }

    /// Mean softmax cross-entropy over the batch and its gradient. With
    /// `dropout_seed` set the pass runs in train mode, sample `i` drawing
    /// its masks from a stream derived from `(seed, i)`.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[T], usize)],
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Gradients<T>), NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptySplit("batch"));
        }
        let pass = self.batch_pass(batch, 0, dropout_seed)?;
        let scale = T::of(1.0 / batch.len() as f64);
        let values = pass.grads.into_iter().map(|g| g * scale).collect();
        Ok((pass.loss_sum / batch.len() as f64, Gradients { values }))
    }

    /// Summed loss and summed gradients; `first` is the batch position of
    /// `batch[0]` for dropout stream derivation.
    pub(crate) fn batch_pass(
        &self,
        batch: &[(&[T], usize)],
        first: usize,
        dropout_seed: Option<u64>,
    ) -> Result<BatchPass<T>, NetError> {
        let s = self.arch.trace();
        let n = self.arch.n_classes;
        for (x, label) in batch {
            self.check_input(x)?;
            if *label >= n {
                return Err(NetError::Config(format!("label {label} >= {n} classes")));
            }
        }
        let keep = if dropout_seed.is_some() { 1.0 - self.dropout } else { 1.0 };
        let b = batch.len();

        let mut caches = Vec::with_capacity(b);
        let mut flat = vec![T::zero(); b * s.flat];
        let mut rngs: Vec<ChaCha8Rng> = (0..b)
            .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(dropout_seed.unwrap_or(0), (first + i) as u64)))
            .collect();
        for (i, (x, _)) in batch.iter().enumerate() {
            let mut cache = ConvCache::default();
            self.conv_forward(x, &mut cache, &mut flat[i * s.flat..(i + 1) * s.flat], keep, &mut rngs[i]);
            caches.push(cache);
        }
        let dense = self.dense_forward_multi(flat, b, keep, &mut rngs);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut dlogits = vec![T::zero(); b * n];
        for (i, (_, label)) in batch.iter().enumerate() {
            let p = softmax(&dense.logits[i * n..(i + 1) * n]);
            loss_sum -= p[*label].max(f64::MIN_POSITIVE).ln();
            if argmax(&p) == *label {
                correct += 1;
            }
            for c in 0..n {
                let target = if c == *label { 1.0 } else { 0.0 };
                dlogits[i * n + c] = T::of(p[c] - target);
            }
        }
        if !loss_sum.is_finite() {
            return Err(NetError::Diverged { epoch: 0, batch: 0 });
        }

        let mut grads = vec![T::zero(); self.params.len()];
        let dflat = self.dense_backward(&dense, &dlogits, b, &mut grads);
        for (i, (x, _)) in batch.iter().enumerate() {
            self.conv_backward(x, &caches[i], &dflat[i * s.flat..(i + 1) * s.flat], &mut grads);
        }
        Ok(BatchPass { loss_sum, correct, grads })
    }

    fn conv_forward<R: Rng>(&self, x: &[T], cache: &mut ConvCache<T>, flat: &mut [T], keep: f64, rng: &mut R) {
        let a = &self.arch;
        let s = a.trace();
        let f = a.features;

        cache.active = x.chunks_exact(f).map(|row| row.iter().rposition(|v| *v != T::zero()).map_or(0, |p| p + 1)).max().unwrap_or(0);

        // conv1a, no activation before conv1b
        let (t1, c1) = s.conv1a;
        cache.a1 = bias_rows(self.tensor(1), t1);
        let w = self.tensor(0);
        for j in 0..KERNEL {
            let xa = View { data: &x[j * f..], rows: t1, cols: cache.active, rs: f, cs: 1 };
            let wb = View { data: &w[j * f * c1..], rows: cache.active, cols: c1, rs: c1, cs: 1 };
            gemm(xa, wb, T::one(), &mut cache.a1, c1);
        }

        let mut pre = conv(&cache.a1, t1, c1, self.tensor(2), self.tensor(3), c1);
        cache.m2 = relu_dropout_mask(&pre, keep, rng);
        (cache.p1, cache.i1) = masked_pool(&mut pre, &cache.m2, s.conv1b.0, c1);

        let mut pre = conv(&cache.p1, s.pool1.0, c1, self.tensor(4), self.tensor(5), a.conv2);
        cache.m3 = relu_dropout_mask(&pre, keep, rng);
        (cache.p2, cache.i2) = masked_pool(&mut pre, &cache.m3, s.conv2.0, a.conv2);

        let mut pre = conv(&cache.p2, s.pool2.0, a.conv2, self.tensor(6), self.tensor(7), a.conv3);
        cache.m4 = relu_dropout_mask(&pre, keep, rng);
        let (p3, i3) = masked_pool(&mut pre, &cache.m4, s.conv3.0, a.conv3);
        flat.copy_from_slice(&p3);
        cache.i3 = i3;
    }

    fn dense_forward<R: Rng>(&self, flat: Vec<T>, b: usize, keep: f64, rng: &mut R) -> DenseCache<T> {
        self.dense_forward_multi(flat, b, keep, std::slice::from_mut(rng))
    }

    /// Dense layers over `b` stacked inputs; row `i` draws dropout from
    /// `rngs[i]`.
    fn dense_forward_multi<R: Rng>(&self, flat: Vec<T>, b: usize, keep: f64, rngs: &mut [R]) -> DenseCache<T> {
        let a = &self.arch;
        let fl = flat.len() / b;
        let mut hidden = bias_rows(self.tensor(9), b);
        gemm(View::rows(&flat, b, fl), View::rows(self.tensor(8), fl, a.dense), T::one(), &mut hidden, a.dense);
        let mut mask = Vec::with_capacity(b * a.dense);
        for (i, row) in hidden.chunks_exact_mut(a.dense).enumerate() {
            let m = relu_dropout_mask(row, keep, &mut rngs[i]);
            for (h, m) in row.iter_mut().zip(&m) {
                *h = *h * *m;
            }
            mask.extend(m);
        }
        let mut logits = bias_rows(self.tensor(11), b);
        gemm(View::rows(&hidden, b, a.dense), View::rows(self.tensor(10), a.dense, a.n_classes), T::one(), &mut logits, a.n_classes);
        DenseCache { flat, hidden, mask, logits }
    }

    /// Accumulates dense-layer gradients and returns d loss / d flat.
    fn dense_backward(&self, cache: &DenseCache<T>, dlogits: &[T], b: usize, grads: &mut [T]) -> Vec<T> {
        let a = &self.arch;
        let fl = cache.flat.len() / b;
        let o = &self.offsets;

        gemm(
            View::rows(&cache.hidden, b, a.dense).t(),
            View::rows(dlogits, b, a.n_classes),
            T::one(),
            &mut grads[o[10]..o[11]],
            a.n_classes,
        );
        add_column_sums(&mut grads[o[11]..o[12]], dlogits, a.n_classes);

        let mut dh = vec![T::zero(); b * a.dense];
        gemm(View::rows(dlogits, b, a.n_classes), View::rows(self.tensor(10), a.dense, a.n_classes).t(), T::zero(), &mut dh, a.dense);
        for (d, m) in dh.iter_mut().zip(&cache.mask) {
            *d = *d * *m;
        }

        gemm(View::rows(&cache.flat, b, fl).t(), View::rows(&dh, b, a.dense), T::one(), &mut grads[o[8]..o[9]], a.dense);
        add_column_sums(&mut grads[o[9]..o[10]], &dh, a.dense);

        let mut dflat = vec![T::zero(); b * fl];
        gemm(View::rows(&dh, b, a.dense), View::rows(self.tensor(8), fl, a.dense).t(), T::zero(), &mut dflat, fl);
        dflat
    }

    fn conv_backward(&self, x: &[T], cache: &ConvCache<T>, dflat: &[T], grads: &mut [T]) {
        let a = &self.arch;
        let s = a.trace();
        let o = self.offsets;

        let d4 = unpool(dflat, &cache.i3, &cache.m4);
        let dp2 = conv_backward_layer(&cache.p2, s.pool2.0, a.conv2, self.tensor(6), &d4, a.conv3, grads, o[6], o[7]);

        let d3 = unpool(&dp2, &cache.i2, &cache.m3);
        let dp1 = conv_backward_layer(&cache.p1, s.pool1.0, a.conv1, self.tensor(4), &d3, a.conv2, grads, o[4], o[5]);

        let d2 = unpool(&dp1, &cache.i1, &cache.m2);
        let da1 = conv_backward_layer(&cache.a1, s.conv1a.0, a.conv1, self.tensor(2), &d2, a.conv1, grads, o[2], o[3]);

        // first layer: weight and bias gradients only, over the active columns
        let (t1, c1) = s.conv1a;
        let f = a.features;
        for j in 0..KERNEL {
            let xa = View { data: &x[j * f..], rows: t1, cols: cache.active, rs: f, cs: 1 };
            let start = o[0] + j * f * c1;
            gemm(xa.t(), View::rows(&da1, t1, c1), T::one(), &mut grads[start..start + cache.active * c1], c1);
        }
        add_column_sums(&mut grads[o[1]..o[2]], &da1, c1);
    }
}

/// Never called: passed where eval-mode code requires an `Rng`.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval mode draws no randomness")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("eval mode draws no randomness")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval mode draws no randomness")
    }
}

fn bias_rows<T: Scalar>(bias: &[T], rows: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(rows * bias.len());
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    out
}

fn add_column_sums<T: Scalar>(acc: &mut [T], m: &[T], cols: usize) {
    for row in m.chunks_exact(cols) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a = *a + *v;
        }
    }
}

/// Valid kernel-3 convolution of a (t_in × c_in) input into f channels.
fn conv<T: Scalar>(x: &[T], t_in: usize, c_in: usize, w: &[T], bias: &[T], f: usize) -> Vec<T> {
    let t_out = t_in - (KERNEL - 1);
    let mut out = bias_rows(bias, t_out);
    // rows t..t+3 of a row-major input are the contiguous patch of output t
    let patches = View { data: x, rows: t_out, cols: KERNEL * c_in, rs: c_in, cs: 1 };
    gemm(patches, View::rows(w, KERNEL * c_in, f), T::one(), &mut out, f);
    out
}

/// Adds weight and bias gradients of a conv layer at `w_off`/`b_off` and
/// returns the gradient with respect to its input.
#[allow(clippy::too_many_arguments)]
fn conv_backward_layer<T: Scalar>(
    x: &[T],
    t_in: usize,
    c_in: usize,
    w: &[T],
    dy: &[T],
    f: usize,
    grads: &mut [T],
    w_off: usize,
    b_off: usize,
) -> Vec<T> {
    let t_out = t_in - (KERNEL - 1);
    let patches = View { data: x, rows: t_out, cols: KERNEL * c_in, rs: c_in, cs: 1 };
    gemm(patches.t(), View::rows(dy, t_out, f), T::one(), &mut grads[w_off..w_off + KERNEL * c_in * f], f);
    add_column_sums(&mut grads[b_off..b_off + f], dy, f);

    let mut dx = vec![T::zero(); t_in * c_in];
    for j in 0..KERNEL {
        let wj = View { data: &w[j * c_in * f..], rows: c_in, cols: f, rs: f, cs: 1 };
        gemm(View::rows(dy, t_out, f), wj.t(), T::one(), &mut dx[j * c_in..], c_in);
    }
    dx
}

/// Per-element factor of ReLU followed by inverted dropout. In train mode
/// every element consumes one draw so the stream does not depend on values.
fn relu_dropout_mask<T: Scalar, R: Rng>(pre: &[T], keep: f64, rng: &mut R) -> Vec<T> {
    if keep >= 1.0 {
        return pre.iter().map(|v| if *v > T::zero() { T::one() } else { T::zero() }).collect();
    }
    let scale = T::of(1.0 / keep);
    pre.iter()
        .map(|v| {
            let kept = rng.random::<f64>() < keep;
            if kept && *v > T::zero() {
                scale
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Applies the mask in place, then max-pools pairs of time steps (floor).
/// Returns pooled values and the flat index of each winner (first on ties).
fn masked_pool<T: Scalar>(pre: &mut [T], mask: &[T], t: usize, c: usize) -> (Vec<T>, Vec<u32>) {
    for (v, m) in pre.iter_mut().zip(mask) {
        *v = *v * *m;
    }
    let tp = t / 2;
    let mut out = Vec::with_capacity(tp * c);
    let mut idx = Vec::with_capacity(tp * c);
    for i in 0..tp {
        for ch in 0..c {
            let (a, b) = ((2 * i) * c + ch, (2 * i + 1) * c + ch);
            let win = if pre[b] > pre[a] { b } else { a };
            out.push(pre[win]);
            idx.push(win as u32);
        }
    }
    (out, idx)
}

/// Routes pooled gradients back to the winning positions and through the mask.
fn unpool<T: Scalar>(dpooled: &[T], idx: &[u32], mask: &[T]) -> Vec<T> {
    let mut d = vec![T::zero(); mask.len()];
    for (g, i) in dpooled.iter().zip(idx) {
        d[*i as usize] = *g;
    }
    for (v, m) in d.iter_mut().zip(mask) {
        *v = *v * *m;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Architecture {
        Architecture { frames: 24, features: 10, conv1: 3, conv2: 4, conv3: 5, dense: 6, n_classes: 9 }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_logits() {
        let net = Network::<f64>::new(tiny(), 0.3, 1).unwrap();
        let logits = net.forward(&vec![0.0; 240], false, &mut NoRng).unwrap();
        assert!(logits.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_logits_loss_is_ln_classes() {
        let net = Network::<f64>::zeros(tiny(), 0.0).unwrap();
        let x = vec![0.5; 240];
        let (loss, _) = net.loss_and_grad(&[(&x, 3)], None).unwrap();
        assert!((loss - 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pool_ties_pick_first() {
        let mut pre = vec![1.0, 1.0, 2.0, 2.0, 0.5];
        let (p, i) = masked_pool(&mut pre, &[1.0; 5], 5, 1);
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(i, vec![0, 2]);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let net = Network::<f32>::zeros(tiny(), 0.0).unwrap();
        assert!(matches!(net.classify(&[0.0; 10]), Err(NetError::InputShape { expected: 240, actual: 10 })));
    }
}

//! Fixed-point quantized multilayer perceptron: inference, activation
//! recording, neuron pruning, the single-prune backdoor check, and
//! flattening to/from the aggregation vector.
//!
//! Everything is pure integer arithmetic — no floating point anywhere on
//! the check path — so the plain evaluation and the MPC circuit agree
//! bit-exactly. Values are fixed-point with [`FRACTION_BITS`] fraction bits
//! and no rescaling between layers: scales compound instead, which is
//! harmless because rectifier and argmax are scale-invariant. Biases are
//! stored at the accumulator scale of their own layer (layer `l` sees
//! inputs at scale `2^{f(l+1)}`, so its biases carry scale `2^{f(l+2)}`).
//!
//! Hidden neurons are indexed globally in layer order: neuron `j` of hidden
//! layer `l` has id `sum(dims[1..=l-1]) + j`.
//!
//! # File formats
//!
//! Model (`FSML` v1, all integers little-endian unless noted):
//! `magic "FSML"` ‖ `version 1` ‖ `ndims: u32 BE` ‖ `dims: u32 BE * ndims` ‖
//! `fraction_bits: u8` ‖ `offset: u32 BE` ‖ per layer (input to output):
//! row-major weights as `i32 LE` (`out*in` values) then biases as `i32 LE`
//! (`out` values).
//!
//! Dataset (`FSDS` v1): `magic "FSDS"` ‖ `version 1` ‖ `L: u32 BE` ‖
//! `dim: u32 BE` ‖ `classes: u32 BE` ‖ `L*dim` features as `i32 LE` ‖ `L`
//! labels as `u16 LE`.

use crate::error::{Error, Result};
use crate::wire::{self, Reader};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Fixed-point scale is 2^FRACTION_BITS.
pub const FRACTION_BITS: u32 = 8;

/// Largest weight magnitude a well-formed model may carry.
pub const MAX_ABS_WEIGHT: i64 = 1023;

/// Largest bias magnitude a well-formed model may carry.
pub const MAX_ABS_BIAS: i64 = (1 << 23) - 1;

/// Additive offset used when flattening signed parameters into the
/// non-negative aggregation vector.
pub const PARAM_OFFSET: i64 = 1 << 23;

/// Flattened parameters live in [0, PARAM_RANGE_BOUND).
pub const PARAM_RANGE_BOUND: u64 = 1 << 24;

/// Upper bound (exclusive) on dataset feature values.
pub const FEATURE_BOUND: i64 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// row-major: weights[o * in_dim + i]
    pub weights: Vec<i64>,
    pub biases: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMlp {
    /// layer widths, input first
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// row-major feature vectors
    pub features: Vec<Vec<i64>>,
    pub labels: Vec<usize>,
    pub input_dim: usize,
    pub classes: usize,
}

/// Post-rectifier activation totals per hidden neuron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationStats {
    pub sums: Vec<i64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DefenseParams {
    /// accuracy-drop threshold tau = tau_num / tau_den, in (0, 1)
    pub tau_num: u64,
    pub tau_den: u64,
    /// optional recorded baseline accuracy (correct, total)
    pub baseline_accuracy: Option<(u64, u64)>,
}

impl DefenseParams {
    pub fn new(tau_num: u64, tau_den: u64) -> Result<Self> {
        if tau_num == 0 || tau_den == 0 || tau_num >= tau_den {
            return Err(Error::Config("tau must lie strictly between 0 and 1".into()));
        }
        Ok(DefenseParams { tau_num, tau_den, baseline_accuracy: None })
    }

    /// Default threshold: 0.05 absolute accuracy drop.
    pub fn default_tau() -> Self {
        DefenseParams { tau_num: 1, tau_den: 20, baseline_accuracy: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Backdoored,
}

/// Everything the single-prune check observed, for audit logs and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackdoorReport {
    pub verdict: Verdict,
    pub pruned_neuron: usize,
    pub baseline: (u64, u64),
    pub pruned: (u64, u64),
}

impl QuantizedMlp {
    pub fn zeroed(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("need at least input and output dims".into()));
        }
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                in_dim: w[0],
                out_dim: w[1],
                weights: vec![0; w[0] * w[1]],
                biases: vec![0; w[1]],
            })
            .collect();
        Ok(QuantizedMlp { dims: dims.to_vec(), layers })
    }

    /// Random model within the well-formedness bounds; used by tests.
    pub fn random(dims: &[usize], rng: &mut ChaCha20Rng) -> Result<Self> {
        let mut m = Self::zeroed(dims)?;
        for layer in &mut m.layers {
            for w in &mut layer.weights {
                *w = rng.gen_range(-MAX_ABS_WEIGHT..=MAX_ABS_WEIGHT);
            }
            for b in &mut layer.biases {
                *b = rng.gen_range(-4096..=4096);
            }
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Total number of hidden neurons (prunable units).
    pub fn hidden_neurons(&self) -> usize {
        self.dims[1..self.dims.len() - 1].iter().sum()
    }

    /// Map a global hidden-neuron id to (layer index, neuron index).
    fn locate(&self, neuron: usize) -> Result<(usize, usize)> {
        let mut base = 0;
        for (l, &width) in self.dims[1..self.dims.len() - 1].iter().enumerate() {
            if neuron < base + width {
                return Ok((l, neuron - base));
            }
            base += width;
        }
        Err(Error::InvalidNeuron(neuron))
    }

    /// Check the weight/bias magnitude bounds the ZKP circuit relies on.
    pub fn within_bounds(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.abs() <= MAX_ABS_WEIGHT)
                && l.biases.iter().all(|b| b.abs() <= MAX_ABS_BIAS)
        })
    }

    /// Number of flattened parameters: sum of (in + 1) * out.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| (l.in_dim + 1) * l.out_dim).sum()
    }
}

/// Forward pass. Returns the argmax label (ties to the lowest index) and
/// the post-rectifier activations of every hidden neuron in global order.
pub fn infer(model: &QuantizedMlp, sample: &[i64]) -> Result<(usize, Vec<i64>)> {
    if sample.len() != model.input_dim() {
        return Err(Error::DimensionMismatch);
    }
    let mut activations = Vec::with_capacity(model.hidden_neurons());
    let mut cur: Vec<i64> = sample.to_vec();
    let last = model.layers.len() - 1;
    for (li, layer) in model.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.biases[o];
            for (w, x) in row.iter().zip(&cur) {
                acc += w * x;
            }
            if li < last {
                let act = acc.max(0);
                activations.push(act);
                next.push(act);
            } else {
                next.push(acc);
            }
        }
        cur = next;
    }
    let label = argmax(&cur);
    Ok((label, activations))
}

fn argmax(v: &[i64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Average post-rectifier activation of each hidden neuron over the
/// dataset, kept as exact sums plus the sample count.
pub fn record_activations(model: &QuantizedMlp, dataset: &Dataset) -> Result<ActivationStats> {
    if dataset.features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sums = vec![0i64; model.hidden_neurons()];
    for sample in &dataset.features {
        let (_, acts) = infer(model, sample)?;
        for (s, a) in sums.iter_mut().zip(&acts) {
            *s += a;
        }
    }
    Ok(ActivationStats { sums, count: dataset.features.len() })
}

impl ActivationStats {
    /// Fixed-point averages (extra FRACTION_BITS of precision, floored).
    pub fn averages_fp(&self) -> Vec<i64> {
        self.sums
            .iter()
            .map(|&s| (s << FRACTION_BITS) / self.count as i64)
            .collect()
    }

    /// Index of the minimum average activation; ties break to the lowest
    /// index. Comparing sums is exact since the denominator is shared.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.sums.iter().enumerate().skip(1) {
            if s < self.sums[best] {
                best = i;
            }
        }
        best
    }
}

/// Zero the incoming weights, bias, and outgoing weights of one hidden
/// neuron. Dimensions are unchanged; idempotent per neuron.
pub fn prune(model: &QuantizedMlp, neuron: usize) -> Result<QuantizedMlp> {
    let (layer, idx) = model.locate(neuron)?;
    let mut out = model.clone();
    {
        let l = &mut out.layers[layer];
        for w in &mut l.weights[idx * l.in_dim..(idx + 1) * l.in_dim] {
            *w = 0;
        }
        l.biases[idx] = 0;
    }
    {
        let l = &mut out.layers[layer + 1];
        for o in 0..l.out_dim {
            l.weights[o * l.in_dim + idx] = 0;
        }
    }
    Ok(out)
}

/// Fraction of samples classified correctly, as an exact (correct, total)
/// pair.
pub fn accuracy(model: &QuantizedMlp, dataset: &Dataset) -> Result<(u64, u64)> {
    if dataset.features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0u64;
    for (sample, &label) in dataset.features.iter().zip(&dataset.labels) {
        let (got, _) = infer(model, sample)?;
        if got == label {
            correct += 1;
        }
    }
    Ok((correct, dataset.features.len() as u64))
}

/// The single-prune backdoor check: prune the hidden neuron with minimum
/// average activation (ties to the lowest index) and flag the model as
/// backdoored iff the absolute accuracy drop exceeds tau.
///
/// A backdoored verdict implies the minimum-activation neuron was load
/// bearing; the converse direction is not claimed.
pub fn backdoor_check(
    model: &QuantizedMlp,
    dataset: &Dataset,
    params: &DefenseParams,
) -> Result<BackdoorReport> {
    let stats = record_activations(model, dataset)?;
    let target = stats.argmin();
    let baseline = accuracy(model, dataset)?;
    let pruned_model = prune(model, target)?;
    let pruned = accuracy(&pruned_model, dataset)?;
    // (baseline - pruned) / L > tau_num / tau_den, all integer
    let drop_num = baseline.0 as i64 - pruned.0 as i64;
    let backdoored =
        drop_num * params.tau_den as i64 > (params.tau_num * baseline.1) as i64;
    Ok(BackdoorReport {
        verdict: if backdoored { Verdict::Backdoored } else { Verdict::Clean },
        pruned_neuron: target,
        baseline,
        pruned,
    })
}

/// Flatten all parameters (weights row-major, then biases, layer by layer)
/// into the non-negative aggregation vector via the additive offset.
pub fn flatten(model: &QuantizedMlp) -> Result<Vec<u64>> {
    if !model.within_bounds() {
        return Err(Error::CircuitRange);
    }
    let mut out = Vec::with_capacity(model.param_count());
    for l in &model.layers {
        for &w in &l.weights {
            out.push((w + PARAM_OFFSET) as u64);
        }
        for &b in &l.biases {
            out.push((b + PARAM_OFFSET) as u64);
        }
    }
    Ok(out)
}

/// Inverse of [`flatten`].
pub fn inflate(x: &[u64], dims: &[usize]) -> Result<QuantizedMlp> {
    let mut model = QuantizedMlp::zeroed(dims)?;
    if x.len() != model.param_count() {
        return Err(Error::LengthMismatch { expected: model.param_count(), got: x.len() });
    }
    let mut it = x.iter();
    for l in &mut model.layers {
        for w in &mut l.weights {
            *w = decode_param(*it.next().unwrap())?;
        }
        for b in &mut l.biases {
            *b = decode_param(*it.next().unwrap())?;
        }
    }
    Ok(model)
}

fn decode_param(v: u64) -> Result<i64> {
    if v >= PARAM_RANGE_BOUND {
        return Err(Error::ElementOutOfRange { index: 0, bound: PARAM_RANGE_BOUND });
    }
    Ok(v as i64 - PARAM_OFFSET)
}

impl Dataset {
    pub fn new(features: Vec<Vec<i64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let input_dim = features[0].len();
        if features.iter().any(|f| f.len() != input_dim) {
            return Err(Error::DimensionMismatch);
        }
        if labels.len() != features.len() {
            return Err(Error::LengthMismatch { expected: features.len(), got: labels.len() });
        }
        if labels.iter().any(|&l| l >= classes) {
            return Err(Error::Config("label out of range".into()));
        }
        if features
            .iter()
            .any(|f| f.iter().any(|&v| !(0..FEATURE_BOUND).contains(&v)))
        {
            return Err(Error::Config("feature out of range".into()));
        }
        Ok(Dataset { features, labels, input_dim, classes })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"FSML";
const DATASET_MAGIC: &[u8; 4] = b"FSDS";

pub fn model_to_bytes(model: &QuantizedMlp) -> Vec<u8> {
    let mut buf = Vec::new();
    wire::put_magic(&mut buf, MODEL_MAGIC, 1);
    wire::put_u32(&mut buf, model.dims.len() as u32);
    for &d in &model.dims {
        wire::put_u32(&mut buf, d as u32);
    }
    wire::put_u8(&mut buf, FRACTION_BITS as u8);
    wire::put_u32(&mut buf, PARAM_OFFSET as u32);
    for l in &model.layers {
        for &w in &l.weights {
            wire::put_i32_le(&mut buf, w as i32);
        }
        for &b in &l.biases {
            wire::put_i32_le(&mut buf, b as i32);
        }
    }
    buf
}

pub fn model_from_bytes(data: &[u8]) -> Result<QuantizedMlp> {
    let mut r = Reader::new(data, "model file");
    r.expect_magic(MODEL_MAGIC, 1)?;
    let ndims = r.get_u32()? as usize;
    if !(2..=16).contains(&ndims) {
        return Err(Error::Format { what: "model file", detail: "implausible dims".into() });
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.get_u32()? as usize);
    }
    let f = r.get_u8()?;
    let offset = r.get_u32()?;
    if f as u32 != FRACTION_BITS || offset as i64 != PARAM_OFFSET {
        return Err(Error::Format {
            what: "model file",
            detail: format!("unsupported fixed-point layout f={f} offset={offset}"),
        });
    }
    let mut model = QuantizedMlp::zeroed(&dims)?;
    for l in &mut model.layers {
        for w in &mut l.weights {
            *w = r.get_i32_le()? as i64;
        }
        for b in &mut l.biases {
            *b = r.get_i32_le()? as i64;
        }
    }
    r.finish()?;
    Ok(model)
}

pub fn dataset_to_bytes(ds: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    wire::put_magic(&mut buf, DATASET_MAGIC, 1);
    wire::put_u32(&mut buf, ds.len() as u32);
    wire::put_u32(&mut buf, ds.input_dim as u32);
    wire::put_u32(&mut buf, ds.classes as u32);
    for f in &ds.features {
        for &v in f {
            wire::put_i32_le(&mut buf, v as i32);
        }
    }
    for &l in &ds.labels {
        buf.extend_from_slice(&(l as u16).to_le_bytes());
    }
    buf
}

pub fn dataset_from_bytes(data: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(data, "dataset file");
    r.expect_magic(DATASET_MAGIC, 1)?;
    let len = r.get_u32()? as usize;
    let dim = r.get_u32()? as usize;
    let classes = r.get_u32()? as usize;
    let mut features = Vec::with_capacity(len);
    for _ in 0..len {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            row.push(r.get_i32_le()? as i64);
        }
        features.push(row);
    }
    let mut labels = Vec::with_capacity(len);
    for _ in 0..len {
        let b = r.take(2)?;
        labels.push(u16::from_le_bytes(b.try_into().unwrap()) as usize);
    }
    r.finish()?;
    Dataset::new(features, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{derive_seed, rng_from_seed};

    fn test_rng(tag: u64) -> ChaCha20Rng {
        rng_from_seed(derive_seed(&[11u8; 32], "model-test", tag))
    }

    fn tiny_dataset() -> Dataset {
        Dataset::new(
            vec![vec![10, 0], vec![0, 10], vec![12, 1], vec![1, 12]],
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap()
    }

    /// 2-2-2 network that copies inputs and classifies by the larger one.
    fn identity_model() -> QuantizedMlp {
        let mut m = QuantizedMlp::zeroed(&[2, 2, 2]).unwrap();
        m.layers[0].weights = vec![256, 0, 0, 256];
        m.layers[1].weights = vec![256, 0, 0, 256];
        m
    }

    #[test]
    fn zero_model_ties_to_class_zero() {
        let m = QuantizedMlp::zeroed(&[4, 3, 2]).unwrap();
        let (label, acts) = infer(&m, &[1, 2, 3, 4]).unwrap();
        assert_eq!(label, 0);
        assert!(acts.iter().all(|&a| a == 0));
        assert_eq!(acts.len(), 3);
    }

    #[test]
    fn identity_network_tracks_hot_index() {
        let m = identity_model();
        assert_eq!(infer(&m, &[30, 3]).unwrap().0, 0);
        assert_eq!(infer(&m, &[3, 30]).unwrap().0, 1);
        assert_eq!(accuracy(&m, &tiny_dataset()).unwrap(), (4, 4));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = identity_model();
        assert!(matches!(infer(&m, &[1, 2, 3]), Err(Error::DimensionMismatch)));
    }

    #[test]
    fn rational_oracle_agrees_on_random_models() {
        // Rational (real-valued) evaluation with the fixed-point scaling
        // applied must produce the same labels as the integer path: every
        // comparison is scale-invariant.
        let mut rng = test_rng(1);
        let ds = tiny_dataset();
        let mut agree = 0;
        let total = 100;
        for _ in 0..total {
            let m = QuantizedMlp::random(&[2, 3, 2], &mut rng).unwrap();
            for s in &ds.features {
                let (int_label, _) = infer(&m, s).unwrap();
                let rat_label = rational_infer(&m, s);
                if int_label == rat_label {
                    agree += 1;
                }
            }
        }
        assert_eq!(agree, total * ds.len(), "labels must agree exactly");
    }

    /// Exact rational forward pass: interprets every parameter as
    /// value / 2^f and divides activations accordingly. Uses f64-free
    /// arithmetic over i128 numerators with power-of-two denominators.
    fn rational_infer(m: &QuantizedMlp, sample: &[i64]) -> usize {
        // value = num / 2^shift
        let mut cur: Vec<i128> = sample.iter().map(|&v| v as i128).collect();
        let last = m.layers.len() - 1;
        for (li, layer) in m.layers.iter().enumerate() {
            // shift grows by FRACTION_BITS per layer; comparisons within a
            // layer share the denominator so only numerators matter
            let mut next = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let mut acc: i128 = (layer.biases[o] as i128) << (FRACTION_BITS * li as u32);
                for (w, x) in layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim]
                    .iter()
                    .zip(&cur)
                {
                    acc += *w as i128 * x;
                }
                if li < last {
                    next.push(acc.max(0));
                } else {
                    next.push(acc);
                }
            }
            cur = next;
        }
        let mut best = 0;
        for i in 1..cur.len() {
            if cur[i] > cur[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn activations_average_and_argmin() {
        // hand-computed 2-neuron, 2-sample case
        let mut m = QuantizedMlp::zeroed(&[1, 2, 1]).unwrap();
        m.layers[0].weights = vec![2, 3];
        m.layers[0].biases = vec![0, -40];
        let ds = Dataset::new(vec![vec![10], vec![20]], vec![0, 0], 1).unwrap();
        let stats = record_activations(&m, &ds).unwrap();
        // neuron 0: 20, 40 -> sum 60; neuron 1: max(0,-10)=0, 20 -> sum 20
        assert_eq!(stats.sums, vec![60, 20]);
        assert_eq!(stats.count, 2);
        assert_eq!(stats.averages_fp(), vec![30 << FRACTION_BITS, 10 << FRACTION_BITS]);
        assert_eq!(stats.argmin(), 1);
    }

    #[test]
    fn single_sample_average_is_activation() {
        let m = identity_model();
        let ds = Dataset::new(vec![vec![7, 9]], vec![1], 2).unwrap();
        let stats = record_activations(&m, &ds).unwrap();
        let (_, acts) = infer(&m, &[7, 9]).unwrap();
        assert_eq!(stats.sums, acts);
        assert_eq!(stats.count, 1);
    }

    #[test]
    fn duplicated_dataset_keeps_averages() {
        let m = identity_model();
        let ds = tiny_dataset();
        let doubled = Dataset::new(
            [ds.features.clone(), ds.features.clone()].concat(),
            [ds.labels.clone(), ds.labels.clone()].concat(),
            2,
        )
        .unwrap();
        let a = record_activations(&m, &ds).unwrap();
        let b = record_activations(&m, &doubled).unwrap();
        assert_eq!(a.averages_fp(), b.averages_fp());
        assert_eq!(a.argmin(), b.argmin());
    }

    #[test]
    fn prune_zeroes_incoming_and_outgoing() {
        let mut m = identity_model();
        m.layers[0].biases = vec![5, 6];
        let pruned = prune(&m, 0).unwrap();
        assert_eq!(pruned.layers[0].weights, vec![0, 0, 0, 256]);
        assert_eq!(pruned.layers[0].biases, vec![0, 6]);
        assert_eq!(pruned.layers[1].weights, vec![0, 0, 0, 256]);
        // idempotent
        assert_eq!(prune(&pruned, 0).unwrap(), pruned);
        // invalid id
        assert!(matches!(prune(&m, 2), Err(Error::InvalidNeuron(2))));
    }

    #[test]
    fn pruning_dormant_neuron_keeps_labels() {
        let mut m = QuantizedMlp::zeroed(&[2, 3, 2]).unwrap();
        m.layers[0].weights = vec![256, 0, 0, 256, -10, -10];
        m.layers[0].biases = vec![0, 0, 0]; // neuron 2 never fires on our data
        m.layers[1].weights = vec![256, 0, 99, 0, 256, 99];
        let ds = tiny_dataset();
        let stats = record_activations(&m, &ds).unwrap();
        assert_eq!(stats.sums[2], 0);
        let pruned = prune(&m, 2).unwrap();
        for s in &ds.features {
            assert_eq!(infer(&m, s).unwrap().0, infer(&pruned, s).unwrap().0);
        }
    }

    #[test]
    fn pruning_all_hidden_neurons_gives_bias_classifier() {
        let mut m = identity_model();
        m.layers[1].biases = vec![3, 9];
        let mut pruned = m.clone();
        for n in 0..m.hidden_neurons() {
            pruned = prune(&pruned, n).unwrap();
        }
        for s in &tiny_dataset().features {
            assert_eq!(infer(&pruned, s).unwrap().0, 1); // argmax of biases
        }
    }

    #[test]
    fn accuracy_counts_matches() {
        let m = identity_model();
        let ds = tiny_dataset();
        assert_eq!(accuracy(&m, &ds).unwrap(), (4, 4));
        let flipped = Dataset::new(ds.features.clone(), vec![1, 0, 1, 0], 2).unwrap();
        // direct count oracle: the permuted labels invert every match
        assert_eq!(accuracy(&m, &flipped).unwrap(), (0, 4));
    }

    #[test]
    fn tau_one_is_rejected_and_boundary_clean() {
        assert!(DefenseParams::new(1, 1).is_err());
        assert!(DefenseParams::new(0, 5).is_err());
        // tau just under 1: a drop can never exceed it
        let params = DefenseParams::new(999, 1000).unwrap();
        let m = identity_model();
        let report = backdoor_check(&m, &tiny_dataset(), &params).unwrap();
        assert_eq!(report.verdict, Verdict::Clean);
    }

    #[test]
    fn backdoor_check_flags_loadbearing_min_neuron() {
        // Model whose least-active hidden neuron carries one class.
        let mut m = QuantizedMlp::zeroed(&[2, 2, 2]).unwrap();
        m.layers[0].weights = vec![256, 0, 0, 2]; // neuron 1 barely active
        m.layers[1].weights = vec![256, 0, 0, 256];
        let ds = tiny_dataset();
        assert_eq!(accuracy(&m, &ds).unwrap(), (4, 4));
        let params = DefenseParams::new(1, 20).unwrap();
        let report = backdoor_check(&m, &ds, &params).unwrap();
        assert_eq!(report.pruned_neuron, 1);
        assert_eq!(report.verdict, Verdict::Backdoored);
        assert!(report.pruned.0 < report.baseline.0);
    }

    #[test]
    fn flatten_inflate_roundtrip() {
        let mut rng = test_rng(2);
        let m = QuantizedMlp::random(&[5, 4, 3], &mut rng).unwrap();
        let x = flatten(&m).unwrap();
        assert_eq!(x.len(), m.param_count());
        assert_eq!(x.len(), (5 + 1) * 4 + (4 + 1) * 3);
        let back = inflate(&x, &[5, 4, 3]).unwrap();
        assert_eq!(back, m);

        let zero = QuantizedMlp::zeroed(&[2, 2]).unwrap();
        let flat = flatten(&zero).unwrap();
        assert!(flat.iter().all(|&v| v == PARAM_OFFSET as u64));
        assert!(matches!(
            inflate(&flat[..3], &[2, 2]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn model_file_roundtrip() {
        let mut rng = test_rng(3);
        let m = QuantizedMlp::random(&[6, 5, 4], &mut rng).unwrap();
        let bytes = model_to_bytes(&m);
        assert_eq!(model_from_bytes(&bytes).unwrap(), m);
        assert!(model_from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn dataset_file_roundtrip() {
        let ds = tiny_dataset();
        let bytes = dataset_to_bytes(&ds);
        assert_eq!(dataset_from_bytes(&bytes).unwrap(), ds);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![], vec![], 2).is_err());
        assert!(Dataset::new(vec![vec![1], vec![1, 2]], vec![0, 0], 1).is_err());
        assert!(Dataset::new(vec![vec![1]], vec![5], 2).is_err());
        assert!(Dataset::new(vec![vec![FEATURE_BOUND]], vec![0], 1).is_err());
    }
}

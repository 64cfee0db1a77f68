//! Constrained 3D-CNN architecture sampling.
//!
//! An architecture is a stack of 3x3x3 convolutions, each followed by a
//! 2x2x2/2 max pool except the last, then fully connected layers ending in
//! a single output neuron. Neuron counts are drawn from
//! [`NEURON_CHOICES`] and must never increase from one layer to the next.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ArchError;

pub const NEURON_CHOICES: [u32; 5] = [128, 64, 32, 16, 8];
pub const CONV_DEPTHS: RangeInclusive<usize> = 3..=6;
/// Dense layer counts, including the final single-neuron layer.
pub const DENSE_DEPTHS: RangeInclusive<usize> = 1..=6;
pub const KERNEL: [usize; 3] = [3, 3, 3];
pub const POOL: [usize; 3] = [2, 2, 2];
pub const LEARNING_RATES: [f64; 3] = [1e-4, 5e-4, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Detection,
    Regression,
}

impl Task {
    pub fn head_activation(self) -> Activation {
        match self {
            Task::Detection => Activation::Sigmoid,
            Task::Regression => Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Optimizer {
    RmsProp,
    Adam,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)+
                    other => Err(format!("unknown {} '{other}'", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

text_enum!(Task { Task::Detection => "detection", Task::Regression => "regression" });
text_enum!(Activation { Activation::Relu => "relu", Activation::Sigmoid => "sigmoid" });
text_enum!(Optimizer { Optimizer::RmsProp => "rmsprop", Optimizer::Adam => "adam" });

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub conv_neurons: Vec<u32>,
    /// Hidden dense layers; the single-neuron output layer is implicit.
    pub dense_neurons: Vec<u32>,
    pub task: Task,
    pub head_activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// (width, height, depth, channels)
    pub input_dims: [usize; 4],
}

impl ModelSpec {
    pub fn new(task: Task, conv: &[u32], dense: &[u32], input_dims: [usize; 4]) -> Self {
        Self {
            conv_neurons: conv.to_vec(),
            dense_neurons: dense.to_vec(),
            task,
            head_activation: task.head_activation(),
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            input_dims,
        }
    }

    /// Dense layers including the output neuron.
    pub fn dense_with_output(&self) -> Vec<u32> {
        let mut v = self.dense_neurons.clone();
        v.push(1);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Conv,
    Dense,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Conv => "conv",
            Section::Dense => "dense",
        })
    }
}

/// One broken constraint. Positions are 1-based layer numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ConvDepth(usize),
    DenseDepth(usize),
    NeuronCount { section: Section, position: usize, value: u32 },
    NotDescending { section: Section, position: usize },
    HeadActivation { task: Task, found: Activation },
    LearningRate(f64),
    InputDims([usize; 4]),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ConvDepth(n) => write!(f, "{n} conv layers, expected 3 to 6"),
            Violation::DenseDepth(n) => write!(f, "{n} dense layers (with output), expected 1 to 6"),
            Violation::NeuronCount { section, position, value } => {
                write!(f, "{section} layer {position} has {value} neurons, not one of 128/64/32/16/8")
            }
            Violation::NotDescending { section, position } => {
                write!(f, "{section} layer {position} has more neurons than layer {}", position - 1)
            }
            Violation::HeadActivation { task, found } => write!(f, "{task} head must not use {found}"),
            Violation::LearningRate(lr) => write!(f, "learning rate {lr} is not positive"),
            Violation::InputDims(d) => write!(f, "input dims {d:?} contain a zero"),
        }
    }
}

fn check_layers(section: Section, layers: &[u32], out: &mut Vec<Violation>) {
    for (i, &n) in layers.iter().enumerate() {
        if !NEURON_CHOICES.contains(&n) {
            out.push(Violation::NeuronCount { section, position: i + 1, value: n });
        }
    }
    for (i, w) in layers.windows(2).enumerate() {
        if w[1] > w[0] {
            out.push(Violation::NotDescending { section, position: i + 2 });
        }
    }
}

/// Every constraint `spec` breaks; empty when valid.
pub fn validate(spec: &ModelSpec) -> Vec<Violation> {
    let mut v = Vec::new();
    if !CONV_DEPTHS.contains(&spec.conv_neurons.len()) {
        v.push(Violation::ConvDepth(spec.conv_neurons.len()));
    }
    let dense_depth = spec.dense_neurons.len() + 1;
    if !DENSE_DEPTHS.contains(&dense_depth) {
        v.push(Violation::DenseDepth(dense_depth));
    }
    check_layers(Section::Conv, &spec.conv_neurons, &mut v);
    check_layers(Section::Dense, &spec.dense_neurons, &mut v);
    if spec.head_activation != spec.task.head_activation() {
        v.push(Violation::HeadActivation { task: spec.task, found: spec.head_activation });
    }
    if !(spec.learning_rate.is_finite() && spec.learning_rate > 0.0) {
        v.push(Violation::LearningRate(spec.learning_rate));
    }
    if spec.input_dims.contains(&0) {
        v.push(Violation::InputDims(spec.input_dims));
    }
    v
}

/// All non-increasing sequences of `len` counts drawn from `NEURON_CHOICES`.
fn descending_sequences(len: usize) -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, from: usize, len: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for k in from..NEURON_CHOICES.len() {
            prefix.push(NEURON_CHOICES[k]);
            extend(prefix, k, len, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(len), 0, len, &mut out);
    out
}

/// Enumeration of the valid layer configurations.
#[derive(Debug, Clone)]
pub struct ArchitectureSpace {
    pub conv: Vec<Vec<u32>>,
    /// Hidden dense stacks, possibly empty.
    pub dense: Vec<Vec<u32>>,
}

impl ArchitectureSpace {
    pub fn new() -> Self {
        let conv = CONV_DEPTHS.flat_map(descending_sequences).collect();
        let dense = DENSE_DEPTHS.flat_map(|d| descending_sequences(d - 1)).collect();
        Self { conv, dense }
    }

    /// Number of distinct (conv, dense) layer configurations.
    pub fn len(&self) -> usize {
        self.conv.len() * self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The configuration with flat index `i`, conv-major.
    pub fn get(&self, i: usize) -> (&[u32], &[u32]) {
        let (c, d) = (i / self.dense.len(), i % self.dense.len());
        (&self.conv[c], &self.dense[d])
    }
}

impl Default for ArchitectureSpace {
    fn default() -> Self {
        Self::new()
    }
}

/// Draws `batch_size` distinct architectures uniformly from the valid space.
/// Optimizer and learning rate are drawn uniformly alongside.
pub fn sample_batch(
    seed: u64,
    batch_size: usize,
    task: Task,
    input_dims: [usize; 4],
) -> Result<Vec<ModelSpec>, ArchError> {
    let space = ArchitectureSpace::new();
    if batch_size == 0 || batch_size > space.len() {
        return Err(ArchError::Sample { requested: batch_size, available: space.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, space.len(), batch_size);
    Ok(picks
        .into_iter()
        .map(|i| {
            let (conv, dense) = space.get(i);
            let mut spec = ModelSpec::new(task, conv, dense, input_dims);
            spec.optimizer = if rng.gen_bool(0.5) { Optimizer::RmsProp } else { Optimizer::Adam };
            spec.learning_rate = LEARNING_RATES[rng.gen_range(0..LEARNING_RATES.len())];
            spec
        })
        .collect())
}

/// Trainable parameters, assuming same-padded unit-stride convolutions and
/// unpadded pools that floor-divide every spatial axis.
pub fn param_count(spec: &ModelSpec) -> Result<u64, ArchError> {
    let [w, h, d, channels] = spec.input_dims.map(|v| v as u64);
    let mut spatial = [w, h, d];
    let taps: u64 = KERNEL.iter().product::<usize>() as u64;
    let mut c_in = channels;
    let mut total = 0u64;
    let n = spec.conv_neurons.len();
    for (i, &c_out) in spec.conv_neurons.iter().enumerate() {
        if spatial.contains(&0) {
            return Err(ArchError::Shape { layer: i + 1 });
        }
        total += (taps * c_in + 1) * c_out as u64;
        c_in = c_out as u64;
        if i + 1 < n {
            for (s, p) in spatial.iter_mut().zip(POOL) {
                *s /= p as u64;
            }
        }
    }
    let mut width = spatial.iter().product::<u64>() * c_in;
    for &units in spec.dense_with_output().iter() {
        total += (width + 1) * units as u64;
        width = units as u64;
    }
    Ok(total)
}

const KEYS: [&str; 10] = [
    "task",
    "input_dims",
    "conv",
    "dense",
    "kernel",
    "pool",
    "hidden_activation",
    "head_activation",
    "optimizer",
    "learning_rate",
];

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Line-oriented `key = value` document for external trainers. Refuses
/// invalid specs.
pub fn emit_spec(spec: &ModelSpec) -> Result<String, ArchError> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(ArchError::Invalid(violations));
    }
    let values = [
        spec.task.to_string(),
        join(&spec.input_dims),
        join(&spec.conv_neurons),
        join(&spec.dense_with_output()),
        join(&KERNEL),
        join(&POOL),
        Activation::Relu.to_string(),
        spec.head_activation.to_string(),
        spec.optimizer.to_string(),
        spec.learning_rate.to_string(),
    ];
    Ok(KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect())
}

/// Inverse of [`emit_spec`].
pub fn parse_spec(text: &str) -> Result<ModelSpec, ArchError> {
    let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| ArchError::SpecParse { line: i + 1, reason };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected 'key = value'".into()))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key '{key}'")));
        }
        if fields.insert(key, (i + 1, value.trim())).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    let get = |key: &str| {
        fields.get(key).copied().ok_or_else(|| ArchError::SpecParse {
            line: text.lines().count() + 1,
            reason: format!("missing key '{key}'"),
        })
    };
    fn parse_one<T: FromStr>(key: &str, (line, v): (usize, &str)) -> Result<T, ArchError> {
        v.parse().map_err(|_| ArchError::SpecParse { line, reason: format!("bad value for {key}: '{v}'") })
    }
    fn parse_list<T: FromStr>(key: &str, (line, v): (usize, &str)) -> Result<Vec<T>, ArchError> {
        v.split(',').map(|s| parse_one(key, (line, s.trim()))).collect()
    }

    let input: Vec<usize> = parse_list("input_dims", get("input_dims")?)?;
    let input_dims: [usize; 4] = input.try_into().map_err(|_| ArchError::SpecParse {
        line: get("input_dims").map(|f| f.0).unwrap_or(0),
        reason: "input_dims needs four values".into(),
    })?;
    let mut dense: Vec<u32> = parse_list("dense", get("dense")?)?;
    if dense.pop() != Some(1) {
        return Err(ArchError::SpecParse {
            line: get("dense")?.0,
            reason: "dense list must end with the single output neuron".into(),
        });
    }
    let kernel: Vec<usize> = parse_list("kernel", get("kernel")?)?;
    let pool: Vec<usize> = parse_list("pool", get("pool")?)?;
    if kernel != KERNEL || pool != POOL {
        return Err(ArchError::SpecParse {
            line: get("kernel")?.0,
            reason: "only 3x3x3 kernels and 2x2x2 pools are supported".into(),
        });
    }
    let hidden: Activation = parse_one("hidden_activation", get("hidden_activation")?)?;
    if hidden != Activation::Relu {
        return Err(ArchError::SpecParse {
            line: get("hidden_activation")?.0,
            reason: "hidden layers use relu".into(),
        });
    }
    let conv_neurons: Vec<u32> = parse_list("conv", get("conv")?)?;
    Ok(ModelSpec {
        conv_neurons,
        dense_neurons: dense,
        task: parse_one("task", get("task")?)?,
        head_activation: parse_one("head_activation", get("head_activation")?)?,
        optimizer: parse_one("optimizer", get("optimizer")?)?,
        learning_rate: parse_one("learning_rate", get("learning_rate")?)?,
        input_dims,
    })
}

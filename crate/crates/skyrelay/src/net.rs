//! Dense feed-forward Q-network: forward pass, mean-squared TD loss,
//! backpropagation, plain SGD, and a frozen target copy. Small enough
//! that flat `Vec<f64>` math beats pulling in a tensor library, and the
//! analytic gradients stay directly checkable against finite differences.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stored-network format marker.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// One dense layer; weights are output-major (`weights[o * input + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// A feed-forward Q-function approximator: rectified-linear hidden
/// layers, identity output, one scalar per joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpQNetwork {
    layers: Vec<Layer>,
    pub learning_rate: f64,
}

/// Per-layer parameter gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// One training example: state features, the taken action's head, and
/// the TD target for that head.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

impl MlpQNetwork {
    /// Builds a network with the given layer widths (input first, action
    /// heads last), weights drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
    pub fn new(sizes: &[usize], learning_rate: f64, seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs an input and an output layer".into(),
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (input, output) = (w[0], w[1]);
            let bound = 1.0 / (input as f64).sqrt();
            let weights = (0..input * output)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            let biases = (0..output).map(|_| rng.gen_range(-bound..=bound)).collect();
            layers.push(Layer {
                input,
                output,
                weights,
                biases,
            });
        }
        Ok(Self {
            layers,
            learning_rate,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    /// Q-values for every joint action.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features)?.pop().unwrap())
    }

    /// Forward pass returning every layer's post-activation output (the
    /// last entry is the Q-vector).
    fn forward_cached(&self, features: &[f64]) -> Result<Vec<Vec<f64>>> {
        if features.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                got: features.len(),
            });
        }
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut current = features;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.output];
            for (o, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.input..(o + 1) * layer.input];
                let mut acc = layer.biases[o];
                for (w, x) in row.iter().zip(current) {
                    acc += w * x;
                }
                *out = if idx < last { acc.max(0.0) } else { acc };
            }
            activations.push(next);
            current = activations.last().unwrap();
        }
        Ok(activations)
    }

    /// Mean-squared loss of the batch against the taken actions' heads,
    /// and the parameter gradients that go with it.
    pub fn gradients(&self, batch: &[TrainSample]) -> Result<(Gradients, f64)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty minibatch".into()));
        }
        let mut grads = Gradients {
            weights: self
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let last = self.layers.len() - 1;

        for sample in batch {
            if sample.action >= self.output_len() {
                return Err(Error::ShapeMismatch {
                    expected: self.output_len(),
                    got: sample.action,
                });
            }
            let activations = self.forward_cached(&sample.features)?;
            let q = activations[last][sample.action];
            let err = q - sample.target;
            loss += err * err * scale;

            // Output delta: gradient flows only through the taken head.
            let mut delta = vec![0.0; self.layers[last].output];
            delta[sample.action] = 2.0 * err * scale;

            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let inputs: &[f64] = if l == 0 {
                    &sample.features
                } else {
                    &activations[l - 1]
                };
                for o in 0..layer.output {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grads.biases[l][o] += d;
                    let row = &mut grads.weights[l][o * layer.input..(o + 1) * layer.input];
                    for (g, x) in row.iter_mut().zip(inputs) {
                        *g += d * x;
                    }
                }
                if l > 0 {
                    // Propagate through the rectifier of the layer below.
                    let mut prev = vec![0.0; layer.input];
                    for o in 0..layer.output {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * layer.input..(o + 1) * layer.input];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(&activations[l - 1]) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((grads, loss))
    }

    /// One SGD step over the minibatch; returns the pre-update loss.
    pub fn sgd_step(&mut self, batch: &[TrainSample]) -> Result<f64> {
        let (grads, loss) = self.gradients(batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite loss over a batch of {}",
                batch.len()
            )));
        }
        self.apply_gradients(&grads);
        Ok(loss)
    }

    /// Applies `theta <- theta - psi * grad`.
    pub fn apply_gradients(&mut self, grads: &Gradients) {
        let psi = self.learning_rate;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= psi * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grads.biases[l]) {
                *b -= psi * g;
            }
        }
    }

    pub fn parameters_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.biases.iter().all(|b| b.is_finite())
        })
    }

    /// Serializes to the flat versioned text format: a shape header
    /// followed by row-major weights then biases per layer.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "mlpq-text {NETWORK_FORMAT_VERSION}");
        let _ = writeln!(text, "learning_rate {}", self.learning_rate);
        let _ = writeln!(text, "layers {}", self.layers.len());
        for layer in &self.layers {
            let _ = writeln!(text, "shape {} {}", layer.input, layer.output);
        }
        for layer in &self.layers {
            for o in 0..layer.output {
                let row = &layer.weights[o * layer.input..(o + 1) * layer.input];
                let mut line = String::new();
                for (i, w) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    let _ = write!(line, "{w}");
                }
                let _ = writeln!(text, "{line}");
            }
            let mut line = String::new();
            for (i, b) in layer.biases.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{b}");
            }
            let _ = writeln!(text, "{line}");
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in input.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut cursor = tokens.into_iter();
        let mut expect = |what: &str| {
            cursor
                .next()
                .ok_or_else(|| Error::MalformedArtifact(format!("truncated network file at {what}")))
        };

        if expect("magic")? != "mlpq-text" {
            return Err(Error::MalformedArtifact("not a network file".into()));
        }
        let version: u32 = parse(&expect("version")?)?;
        if version != NETWORK_FORMAT_VERSION {
            return Err(Error::MalformedArtifact(format!(
                "unsupported network format version {version}"
            )));
        }
        if expect("learning_rate key")? != "learning_rate" {
            return Err(Error::MalformedArtifact("missing learning_rate".into()));
        }
        let learning_rate: f64 = parse(&expect("learning_rate")?)?;
        if expect("layers key")? != "layers" {
            return Err(Error::MalformedArtifact("missing layer count".into()));
        }
        let count: usize = parse(&expect("layer count")?)?;
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            if expect("shape key")? != "shape" {
                return Err(Error::MalformedArtifact("missing shape".into()));
            }
            let input: usize = parse(&expect("shape input")?)?;
            let output: usize = parse(&expect("shape output")?)?;
            shapes.push((input, output));
        }
        let mut layers = Vec::with_capacity(count);
        for (input, output) in shapes {
            let mut weights = Vec::with_capacity(input * output);
            for _ in 0..input * output {
                weights.push(parse(&expect("weight")?)?);
            }
            let mut biases = Vec::with_capacity(output);
            for _ in 0..output {
                biases.push(parse(&expect("bias")?)?);
            }
            layers.push(Layer {
                input,
                output,
                weights,
                biases,
            });
        }
        Ok(Self {
            layers,
            learning_rate,
        })
    }
}

fn parse<T: std::str::FromStr>(token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::MalformedArtifact(format!("bad token `{token}` in network file")))
}

/// The frozen copy used for TD targets; changes only on explicit sync.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetwork {
    net: MlpQNetwork,
}

impl TargetNetwork {
    pub fn from(net: &MlpQNetwork) -> Self {
        Self { net: net.clone() }
    }

    /// Copies the source parameters into the frozen network.
    pub fn sync_from(&mut self, net: &MlpQNetwork) -> Result<()> {
        if net.input_len() != self.net.input_len() || net.output_len() != self.net.output_len() {
            return Err(Error::ShapeMismatch {
                expected: self.net.output_len(),
                got: net.output_len(),
            });
        }
        self.net = net.clone();
        Ok(())
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(features)
    }

    pub fn as_network(&self) -> &MlpQNetwork {
        &self.net
    }
}

/// The training target for one transition: the reward alone on terminal
/// slots, otherwise reward plus the discounted best frozen Q-value of
/// the successor state.
pub fn td_target(
    reward: f64,
    next_features: &[f64],
    done: bool,
    target_net: &TargetNetwork,
    gamma: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount factor must be in [0,1], got {gamma}"
        )));
    }
    if done {
        return Ok(reward);
    }
    let q = target_net.forward(next_features)?;
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(reward + gamma * best)
}

/// A TD target whose bootstrap max ranges only over the successor
/// state's feasible actions, matching the environment's availability
/// filter. Falls back to the plain reward when nothing is feasible.
pub fn td_target_masked(
    reward: f64,
    next_features: &[f64],
    next_mask: &[bool],
    done: bool,
    target_net: &TargetNetwork,
    gamma: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount factor must be in [0,1], got {gamma}"
        )));
    }
    if done {
        return Ok(reward);
    }
    let q = target_net.forward(next_features)?;
    if q.len() != next_mask.len() {
        return Err(Error::ShapeMismatch {
            expected: next_mask.len(),
            got: q.len(),
        });
    }
    let best = q
        .iter()
        .zip(next_mask)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Ok(reward);
    }
    Ok(reward + gamma * best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_target_ignores_infeasible_heads() {
        let net = MlpQNetwork::new(&[2, 4], 1e-3, 99).unwrap();
        let target = TargetNetwork::from(&net);
        let x = [0.3, 0.6];
        let q = target.forward(&x).unwrap();
        let mask = [false, true, true, false];
        let best = q[1].max(q[2]);
        let y = td_target_masked(0.1, &x, &mask, false, &target, 0.7).unwrap();
        assert!((y - (0.1 + 0.7 * best)).abs() < 1e-15);
        // Unmasked op takes the global max.
        let global = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y_all = td_target(0.1, &x, false, &target, 0.7).unwrap();
        assert!((y_all - (0.1 + 0.7 * global)).abs() < 1e-15);
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let mut net = MlpQNetwork::new(&[3, 4, 2], 1e-3, 0).unwrap();
        for layer in &mut net.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        let out = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn output_length_matches_action_count() {
        let net = MlpQNetwork::new(&[10, 100, 100, 729], 1e-3, 1).unwrap();
        let out = net.forward(&vec![0.5; 10]).unwrap();
        assert_eq!(out.len(), 729);
        assert!(net.forward(&[0.5; 9]).is_err());
    }

    #[test]
    fn single_layer_reproduces_affine_map() {
        // One layer (the output layer) is a plain affine map.
        let mut net = MlpQNetwork::new(&[2, 2], 1e-3, 2).unwrap();
        net.layers[0].weights = vec![1.0, 2.0, 3.0, 4.0]; // rows [1,2], [3,4]
        net.layers[0].biases = vec![0.5, -0.5];
        let out = net.forward(&[10.0, 20.0]).unwrap();
        assert_eq!(out, vec![1.0 * 10.0 + 2.0 * 20.0 + 0.5, 3.0 * 10.0 + 4.0 * 20.0 - 0.5]);
    }

    #[test]
    fn forward_is_pure() {
        let net = MlpQNetwork::new(&[4, 8, 3], 1e-3, 3).unwrap();
        let x = [0.1, 0.9, -0.4, 0.7];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn td_target_cases() {
        let net = MlpQNetwork::new(&[2, 3], 1e-3, 4).unwrap();
        let target = TargetNetwork::from(&net);
        assert_eq!(td_target(1.0, &[0.0, 0.0], true, &target, 0.7).unwrap(), 1.0);
        assert_eq!(td_target(0.3, &[0.2, 0.4], false, &target, 0.0).unwrap(), 0.3);
        let q = target.forward(&[0.2, 0.4]).unwrap();
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = td_target(0.3, &[0.2, 0.4], false, &target, 0.7).unwrap();
        assert!((y - (0.3 + 0.7 * best)).abs() < 1e-15);
        assert!(td_target(0.0, &[0.0, 0.0], false, &target, 1.5).is_err());
    }

    #[test]
    fn matched_targets_give_zero_loss_and_gradient() {
        let net = MlpQNetwork::new(&[3, 5, 4], 1e-3, 5).unwrap();
        let features = vec![0.3, -0.2, 0.9];
        let q = net.forward(&features).unwrap();
        let batch: Vec<TrainSample> = (0..4)
            .map(|a| TrainSample {
                features: features.clone(),
                action: a,
                target: q[a],
            })
            .collect();
        let (grads, loss) = net.gradients(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.weights.iter().flatten().all(|&g| g == 0.0));
        assert!(grads.biases.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_net_matches_closed_form_gradient() {
        // Q = w*x + b, loss = (Q - y)^2, dL/dw = 2(Q - y)x, dL/db = 2(Q - y).
        let mut net = MlpQNetwork::new(&[1, 1], 0.1, 6).unwrap();
        net.layers[0].weights = vec![0.8];
        net.layers[0].biases = vec![0.1];
        let batch = [TrainSample {
            features: vec![2.0],
            action: 0,
            target: 3.0,
        }];
        let q = 0.8 * 2.0 + 0.1;
        let (grads, loss) = net.gradients(&batch).unwrap();
        assert!((loss - (q - 3.0f64) * (q - 3.0)).abs() < 1e-15);
        assert!((grads.weights[0][0] - 2.0 * (q - 3.0) * 2.0).abs() < 1e-12);
        assert!((grads.biases[0][0] - 2.0 * (q - 3.0)).abs() < 1e-12);
    }

    /// Central finite differences against the analytic gradients on a
    /// handful of randomly initialized small networks.
    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let max_err = finite_difference_max_rel_error(seed);
            assert!(max_err < 1e-4, "seed {seed}: max rel error {max_err}");
        }
    }

    pub(crate) fn finite_difference_max_rel_error(seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF00D);
        let net = MlpQNetwork::new(&[3, 6, 5, 4], 1e-3, seed).unwrap();
        let batch: Vec<TrainSample> = (0..5)
            .map(|_| TrainSample {
                features: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                action: rng.gen_range(0..4),
                target: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let (grads, _) = net.gradients(&batch).unwrap();

        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for l in 0..net.layers().len() {
            for (kind, len) in [(0, net.layers()[l].weights.len()), (1, net.layers()[l].biases.len())] {
                for idx in 0..len {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    {
                        let (p, m) = (&mut plus.layers[l], &mut minus.layers[l]);
                        if kind == 0 {
                            p.weights[idx] += h;
                            m.weights[idx] -= h;
                        } else {
                            p.biases[idx] += h;
                            m.biases[idx] -= h;
                        }
                    }
                    let (_, lp) = plus.gradients(&batch).unwrap();
                    let (_, lm) = minus.gradients(&batch).unwrap();
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic = if kind == 0 {
                        grads.weights[l][idx]
                    } else {
                        grads.biases[l][idx]
                    };
                    let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                    max_rel = max_rel.max((numeric - analytic).abs() / denom);
                }
            }
        }
        max_rel
    }

    #[test]
    fn full_batch_descent_decreases_loss_every_step() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
        let mut net = MlpQNetwork::new(&[4, 16, 3], 1e-3, 77).unwrap();
        let batch: Vec<TrainSample> = (0..24)
            .map(|_| TrainSample {
                features: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                action: rng.gen_range(0..3),
                target: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = net.sgd_step(&batch).unwrap();
            assert!(loss < last);
            last = loss;
        }
        assert!(net.parameters_finite());
    }

    #[test]
    fn target_sync_and_freeze_contract() {
        let mut net = MlpQNetwork::new(&[3, 8, 4], 1e-2, 8).unwrap();
        let mut target = TargetNetwork::from(&net);
        let probes: Vec<Vec<f64>> = (0..10)
            .map(|i| (0..3).map(|j| ((i * 3 + j) as f64).sin()).collect())
            .collect();
        for p in &probes {
            assert_eq!(net.forward(p).unwrap(), target.forward(p).unwrap());
        }
        let frozen: Vec<Vec<f64>> = probes.iter().map(|p| target.forward(p).unwrap()).collect();
        // Train the source; the frozen copy must not move.
        let batch = [TrainSample {
            features: vec![0.5, -0.5, 0.25],
            action: 1,
            target: 2.0,
        }];
        for _ in 0..50 {
            net.sgd_step(&batch).unwrap();
        }
        for (p, f) in probes.iter().zip(&frozen) {
            assert_eq!(&target.forward(p).unwrap(), f);
            assert_ne!(&net.forward(p).unwrap(), f);
        }
        target.sync_from(&net).unwrap();
        for p in &probes {
            assert_eq!(net.forward(p).unwrap(), target.forward(p).unwrap());
        }
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let net = MlpQNetwork::new(&[5, 7, 6], 3.5e-4, 9).unwrap();
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let loaded = MlpQNetwork::load(buf.as_slice()).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn malformed_network_file_rejected() {
        assert!(MlpQNetwork::load("garbage".as_bytes()).is_err());
        assert!(MlpQNetwork::load("mlpq-text 99\n".as_bytes()).is_err());
        let net = MlpQNetwork::new(&[2, 2], 1e-3, 10).unwrap();
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(MlpQNetwork::load(buf.as_slice()).is_err());
    }
}

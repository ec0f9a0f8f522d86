use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::layers::{
    avgpool2d_backward, avgpool2d_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, sigmoid_backward, sigmoid_forward, softmax, softmax_backward,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Side length of the square grayscale input.
pub const INPUT_SIZE: usize = 32;
pub const KERNEL_SIZE: usize = 5;
pub const CONV1_CHANNELS: usize = 6;
pub const CONV2_CHANNELS: usize = 16;
pub const FLAT_FEATURES: usize = CONV2_CHANNELS * 5 * 5;
pub const FC1_UNITS: usize = 120;
pub const FC2_UNITS: usize = 84;

/// A named trainable tensor and its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    fn set_grad(&mut self, grad: Tensor) -> Result<()> {
        if grad.shape() != self.value.shape() {
            return Err(Error::shape(format!(
                "gradient {:?} for {} with shape {:?}",
                grad.shape(),
                self.name,
                self.value.shape()
            )));
        }
        self.grad = grad;
        Ok(())
    }
}

/// The layers of the network in forward order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Conv1,
    Sigmoid1,
    Pool1,
    Conv2,
    Sigmoid2,
    Pool2,
    Flatten,
    Fc1,
    Sigmoid3,
    Fc2,
    Sigmoid4,
    FcOut,
    Softmax,
}

pub const LAYERS: [Layer; 13] = [
    Layer::Conv1,
    Layer::Sigmoid1,
    Layer::Pool1,
    Layer::Conv2,
    Layer::Sigmoid2,
    Layer::Pool2,
    Layer::Flatten,
    Layer::Fc1,
    Layer::Sigmoid3,
    Layer::Fc2,
    Layer::Sigmoid4,
    Layer::FcOut,
    Layer::Softmax,
];

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
    "fc_out.weight",
    "fc_out.bias",
];

/// Classic LeNet-5 with sigmoid activations and average pooling, sized for
/// `[N, 1, 32, 32]` inputs.
///
/// Equality compares the class count and parameter values only; gradients
/// are scratch space.
#[derive(Clone, Debug)]
pub struct LeNetModel {
    num_classes: usize,
    params: Vec<Param>,
    // Bumped on every parameter mutation; traces from older generations are stale.
    generation: u64,
}

impl PartialEq for LeNetModel {
    fn eq(&self, other: &Self) -> bool {
        self.num_classes == other.num_classes
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}

/// Per-layer outputs cached by [`LeNetModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    input: Tensor,
    outputs: Vec<Tensor>,
    generation: u64,
}

impl ForwardTrace {
    /// Output of every layer, in [`LAYERS`] order.
    pub fn outputs(&self) -> &[Tensor] {
        &self.outputs
    }

    pub fn output_of(&self, layer: Layer) -> &Tensor {
        let idx = LAYERS
            .iter()
            .position(|&l| l == layer)
            .expect("known layer");
        &self.outputs[idx]
    }

    pub fn probs(&self) -> &Tensor {
        self.output_of(Layer::Softmax)
    }

    pub fn logits(&self) -> &Tensor {
        self.output_of(Layer::FcOut)
    }

    fn layer_input(&self, idx: usize) -> &Tensor {
        if idx == 0 {
            &self.input
        } else {
            &self.outputs[idx - 1]
        }
    }
}

/// Upstream gradient handed to [`LeNetModel::backward`].
#[derive(Clone, Copy, Debug)]
pub enum Upstream<'a> {
    /// Gradient with respect to the pre-softmax logits (softmax fused into the loss).
    Logits(&'a Tensor),
    /// Gradient with respect to the softmax probabilities.
    Probs(&'a Tensor),
}

fn fans(shape: &[usize]) -> Option<(usize, usize)> {
    match *shape {
        [cout, cin, kh, kw] => Some((cin * kh * kw, cout * kh * kw)),
        [input, output] => Some((input, output)),
        _ => None,
    }
}

fn glorot(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let a = glorot_bound(shape);
    let dist = Uniform::new(-a, a).expect("finite positive bound");
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).expect("static parameter shape")
}

/// Glorot-uniform bound for a parameter shape, `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(shape: &[usize]) -> f64 {
    let Some((fan_in, fan_out)) = fans(shape) else {
        return 0.0;
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl LeNetModel {
    /// Glorot-uniform weights, zero biases, deterministic per seed.
    pub fn init(num_classes: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = Self::param_shapes(num_classes);
        let params = PARAM_NAMES
            .iter()
            .zip(&shapes)
            .map(|(name, shape)| {
                let value = if shape.len() == 1 {
                    Tensor::zeros(shape).expect("static parameter shape")
                } else {
                    glorot(shape, &mut rng)
                };
                Param::new(*name, value)
            })
            .collect();
        Ok(LeNetModel {
            num_classes,
            params,
            generation: 0,
        })
    }

    /// Expected shape of every parameter, in [`PARAM_NAMES`] order.
    pub fn param_shapes(num_classes: usize) -> Vec<Vec<usize>> {
        vec![
            vec![CONV1_CHANNELS, 1, KERNEL_SIZE, KERNEL_SIZE],
            vec![CONV1_CHANNELS],
            vec![CONV2_CHANNELS, CONV1_CHANNELS, KERNEL_SIZE, KERNEL_SIZE],
            vec![CONV2_CHANNELS],
            vec![FLAT_FEATURES, FC1_UNITS],
            vec![FC1_UNITS],
            vec![FC1_UNITS, FC2_UNITS],
            vec![FC2_UNITS],
            vec![FC2_UNITS, num_classes],
            vec![num_classes],
        ]
    }

    /// Rebuilds a model from named parameter values, checking names and shapes.
    pub fn from_params(num_classes: usize, values: Vec<(String, Tensor)>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        let shapes = Self::param_shapes(num_classes);
        if values.len() != PARAM_NAMES.len() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                PARAM_NAMES.len(),
                values.len()
            )));
        }
        let mut params = Vec::with_capacity(values.len());
        for (((name, value), expected_name), shape) in
            values.into_iter().zip(PARAM_NAMES).zip(&shapes)
        {
            if name != expected_name {
                return Err(Error::shape(format!(
                    "expected parameter {expected_name}, found {name}"
                )));
            }
            if value.shape() != &shape[..] {
                return Err(Error::shape(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    value.shape()
                )));
            }
            params.push(Param::new(name, value));
        }
        Ok(LeNetModel {
            num_classes,
            params,
            generation: 0,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    /// Mutable access to the parameters. Invalidates outstanding traces.
    pub fn params_mut(&mut self) -> &mut [Param] {
        self.generation += 1;
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    fn value(&self, idx: usize) -> &Tensor {
        &self.params[idx].value
    }

    /// Runs the network on a `[N, 1, 32, 32]` batch.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ForwardTrace)> {
        match *x.shape() {
            [n, 1, INPUT_SIZE, INPUT_SIZE] if n > 0 => {}
            _ => {
                return Err(Error::shape(format!(
                    "model input must be [N, 1, {INPUT_SIZE}, {INPUT_SIZE}], got {:?}",
                    x.shape()
                )))
            }
        }
        let batch = x.shape()[0];
        let mut outputs: Vec<Tensor> = Vec::with_capacity(LAYERS.len());
        for layer in LAYERS {
            let input = outputs.last().unwrap_or(x);
            let out = match layer {
                Layer::Conv1 => conv2d_forward(input, self.value(0), self.value(1))?,
                Layer::Conv2 => conv2d_forward(input, self.value(2), self.value(3))?,
                Layer::Sigmoid1 | Layer::Sigmoid2 | Layer::Sigmoid3 | Layer::Sigmoid4 => {
                    sigmoid_forward(input)
                }
                Layer::Pool1 | Layer::Pool2 => avgpool2d_forward(input)?,
                Layer::Flatten => input.reshape(&[batch, input.len() / batch])?,
                Layer::Fc1 => dense_forward(input, self.value(4), self.value(5))?,
                Layer::Fc2 => dense_forward(input, self.value(6), self.value(7))?,
                Layer::FcOut => dense_forward(input, self.value(8), self.value(9))?,
                Layer::Softmax => softmax(input)?,
            };
            outputs.push(out);
        }
        let probs = outputs.last().expect("non-empty layer list").clone();
        Ok((
            probs,
            ForwardTrace {
                input: x.clone(),
                outputs,
                generation: self.generation,
            },
        ))
    }

    /// Back-propagates through the trace, overwriting every `Param::grad`.
    pub fn backward(&mut self, trace: ForwardTrace, upstream: Upstream<'_>) -> Result<()> {
        if trace.generation != self.generation || trace.outputs.len() != LAYERS.len() {
            return Err(Error::InvalidState(
                "forward trace is stale: parameters changed since the forward pass".into(),
            ));
        }
        let probs = trace.probs();
        let mut grad = match upstream {
            Upstream::Logits(d) | Upstream::Probs(d) if d.shape() != probs.shape() => {
                return Err(Error::shape(format!(
                    "upstream gradient {:?}, expected {:?}",
                    d.shape(),
                    probs.shape()
                )))
            }
            Upstream::Logits(d) => d.clone(),
            Upstream::Probs(d) => softmax_backward(probs, d)?,
        };

        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        // Softmax is the last layer and has been handled above.
        for idx in (0..LAYERS.len() - 1).rev() {
            let input = trace.layer_input(idx);
            let output = &trace.outputs[idx];
            grad = match LAYERS[idx] {
                Layer::Conv1 | Layer::Conv2 => {
                    let p = if LAYERS[idx] == Layer::Conv1 { 0 } else { 2 };
                    let (dx, dk, db) = conv2d_backward(input, self.value(p), &grad)?;
                    grads[p] = Some(dk);
                    grads[p + 1] = Some(db);
                    dx
                }
                Layer::Fc1 | Layer::Fc2 | Layer::FcOut => {
                    let p = match LAYERS[idx] {
                        Layer::Fc1 => 4,
                        Layer::Fc2 => 6,
                        _ => 8,
                    };
                    let (dx, dw, db) = dense_backward(input, self.value(p), &grad)?;
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    dx
                }
                Layer::Sigmoid1 | Layer::Sigmoid2 | Layer::Sigmoid3 | Layer::Sigmoid4 => {
                    sigmoid_backward(output, &grad)?
                }
                Layer::Pool1 | Layer::Pool2 => avgpool2d_backward(input.shape(), &grad)?,
                Layer::Flatten => grad.into_reshape(input.shape())?,
                Layer::Softmax => unreachable!("softmax handled before the loop"),
            };
        }
        for (param, g) in self.params.iter_mut().zip(grads) {
            param.set_grad(g.expect("every parameter receives a gradient"))?;
        }
        Ok(())
    }

    /// `value -= learning_rate * grad` for every parameter.
    pub(crate) fn apply_gradients(&mut self, learning_rate: f64) {
        for p in self.params_mut() {
            for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                *v -= learning_rate * g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(batch: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(0.0, 1.0).unwrap();
        let data = (0..batch * 32 * 32)
            .map(|_| dist.sample(&mut rng))
            .collect();
        Tensor::new(&[batch, 1, 32, 32], data).unwrap()
    }

    #[test]
    fn shape_chain() {
        let m = LeNetModel::init(3, 1).unwrap();
        let (probs, trace) = m.forward(&input(2, 0)).unwrap();
        assert_eq!(probs.shape(), &[2, 3]);
        let shapes: Vec<&[usize]> = trace.outputs().iter().map(|t| t.shape()).collect();
        let expected: [&[usize]; 13] = [
            &[2, 6, 28, 28],
            &[2, 6, 28, 28],
            &[2, 6, 14, 14],
            &[2, 16, 10, 10],
            &[2, 16, 10, 10],
            &[2, 16, 5, 5],
            &[2, 400],
            &[2, 120],
            &[2, 120],
            &[2, 84],
            &[2, 84],
            &[2, 3],
            &[2, 3],
        ];
        assert_eq!(shapes, expected);
        for row in probs.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_wrong_input_shapes() {
        let m = LeNetModel::init(3, 1).unwrap();
        for shape in [
            vec![1, 1, 28, 28],
            vec![1, 3, 32, 32],
            vec![1, 32, 32],
            vec![1, 1, 33, 33],
            vec![1, 1, 32, 31],
        ] {
            let x = Tensor::zeros(&shape).unwrap();
            assert!(
                matches!(m.forward(&x), Err(Error::InvalidShape(_))),
                "{shape:?}"
            );
        }
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let m = LeNetModel::init(3, 5).unwrap();
        let one = input(1, 9);
        let both = Tensor::stack(&[
            &one.reshape(&[1, 32, 32]).unwrap(),
            &one.reshape(&[1, 32, 32]).unwrap(),
        ])
        .unwrap();
        let (p, _) = m.forward(&both).unwrap();
        assert_eq!(p.data()[..3], p.data()[3..]);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = LeNetModel::init(3, 11).unwrap();
        let b = LeNetModel::init(3, 11).unwrap();
        assert_eq!(a, b);
        let c = LeNetModel::init(3, 12).unwrap();
        assert_ne!(a.params()[0].value, c.params()[0].value);
        for p in a.params().iter().filter(|p| p.name().ends_with(".bias")) {
            assert!(p.value.data().iter().all(|&v| v == 0.0));
        }
        let bound = (6.0f64 / (25.0 + 150.0)).sqrt();
        assert_eq!(glorot_bound(&[6, 1, 5, 5]), bound);
        let k = &a.param("conv1.weight").unwrap().value;
        assert!(k.data().iter().all(|v| v.abs() < bound));
        assert!(LeNetModel::init(1, 0).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut m = LeNetModel::init(3, 2).unwrap();
        let (_, trace) = m.forward(&input(2, 3)).unwrap();
        m.backward(trace, Upstream::Logits(&Tensor::zeros(&[2, 3]).unwrap()))
            .unwrap();
        assert!(m.params().iter().all(|p| p.grad.max_abs() == 0.0));
    }

    #[test]
    fn backward_is_deterministic_and_overwrites() {
        let mut m = LeNetModel::init(3, 2).unwrap();
        let up = Tensor::new(&[1, 3], vec![0.3, -0.1, -0.2]).unwrap();
        let (_, trace) = m.forward(&input(1, 4)).unwrap();
        m.backward(trace.clone(), Upstream::Logits(&up)).unwrap();
        let first: Vec<Tensor> = m.params().iter().map(|p| p.grad.clone()).collect();
        m.backward(trace, Upstream::Logits(&up)).unwrap();
        let second: Vec<Tensor> = m.params().iter().map(|p| p.grad.clone()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut m = LeNetModel::init(3, 2).unwrap();
        let (_, trace) = m.forward(&input(1, 4)).unwrap();
        m.apply_gradients(0.1);
        let up = Tensor::zeros(&[1, 3]).unwrap();
        assert!(matches!(
            m.backward(trace, Upstream::Logits(&up)),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn wrong_upstream_shape_is_rejected() {
        let mut m = LeNetModel::init(3, 2).unwrap();
        let (_, trace) = m.forward(&input(1, 4)).unwrap();
        let up = Tensor::zeros(&[2, 3]).unwrap();
        assert!(matches!(
            m.backward(trace, Upstream::Probs(&up)),
            Err(Error::InvalidShape(_))
        ));
    }
}

//! Small fully connected networks with explicit, stable parameter layout.
//!
//! Parameter order is fixed: for each layer in sequence, the weight matrix
//! in row-major order, then the bias vector. Initialization draws weights
//! from the uniform Xavier/Glorot interval ±√(6 / (fan_in + fan_out)) in
//! that same order and zeroes every bias, so a given RNG stream always
//! produces bit-identical parameters.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

#[derive(Clone, Debug)]
pub struct Layer {
    /// fan_in × fan_out.
    pub weight: Tensor,
    /// 1 × fan_out.
    pub bias: Tensor,
}

#[derive(Clone, Debug)]
pub struct Perceptron {
    layers: Vec<Layer>,
    activations: Vec<Activation>,
    dims: Vec<usize>,
}

impl Perceptron {
    /// `dims` lists layer widths input-first (e.g. `[48, 32, 16]` is a
    /// two-layer network). Hidden layers use ReLU; the final layer uses
    /// `output_activation`.
    pub fn new(dims: &[usize], output_activation: Activation, rng: &mut ChaCha12Rng) -> Self {
        assert!(dims.len() >= 2, "perceptron needs at least one layer");
        assert!(dims.iter().all(|&d| d > 0), "layer widths must be positive");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut activations = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Tensor::new(
                fan_in,
                fan_out,
                (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect(),
            );
            layers.push(Layer {
                weight,
                bias: Tensor::zeros(1, fan_out),
            });
            activations.push(Activation::Relu);
        }
        *activations.last_mut().unwrap() = output_activation;
        Self {
            layers,
            activations,
            dims: dims.to_vec(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Appends every parameter in the canonical order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.data());
            out.extend_from_slice(layer.bias.data());
        }
    }

    /// Overwrites every parameter from `values` in the canonical order.
    /// Panics if the iterator runs short; callers validate lengths first.
    pub fn unflatten_from(&mut self, values: &mut impl Iterator<Item = f64>) {
        for layer in &mut self.layers {
            for v in layer.weight.data_mut() {
                *v = values.next().expect("parameter stream exhausted");
            }
            for v in layer.bias.data_mut() {
                *v = values.next().expect("parameter stream exhausted");
            }
        }
    }

    /// Registers the parameters as tape leaves for one differentiable pass.
    pub fn bind(&self, tape: &Tape) -> BoundPerceptron {
        BoundPerceptron {
            vars: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
            activations: self.activations.clone(),
        }
    }
}

/// A perceptron whose parameters live on a tape as leaf variables.
pub struct BoundPerceptron {
    vars: Vec<(Var, Var)>,
    activations: Vec<Activation>,
}

impl BoundPerceptron {
    pub fn forward(&self, tape: &Tape, x: Var) -> Var {
        let mut h = x;
        for ((w, b), act) in self.vars.iter().zip(&self.activations) {
            let lin = tape.add_bias(tape.matmul(h, *w), *b);
            h = match act {
                Activation::Identity => lin,
                Activation::Relu => tape.relu(lin),
                Activation::Sigmoid => tape.sigmoid(lin),
            };
        }
        h
    }

    /// Appends this network's gradient in the canonical parameter order.
    /// Parameters the loss never touched contribute zeros.
    pub fn gradient_into(&self, tape: &Tape, grads: &Gradients, out: &mut Vec<f64>) {
        for (w, b) in &self.vars {
            for var in [w, b] {
                match grads.get(*var) {
                    Some(g) => out.extend_from_slice(g.data()),
                    None => {
                        let (r, c) = tape.shape(*var);
                        out.extend(std::iter::repeat_n(0.0, r * c));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_difference, max_relative_error, DEFAULT_STEP};
    use crate::autodiff::testutil::RngExt;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn param_counts_for_reference_shapes() {
        let mut r = rng(0);
        assert_eq!(Perceptron::new(&[1, 32, 16], Activation::Identity, &mut r).param_count(), 592);
        assert_eq!(Perceptron::new(&[48, 32, 16], Activation::Sigmoid, &mut r).param_count(), 2096);
        assert_eq!(Perceptron::new(&[32, 32, 16], Activation::Identity, &mut r).param_count(), 1584);
        assert_eq!(Perceptron::new(&[32, 16, 1], Activation::Sigmoid, &mut r).param_count(), 545);
        assert_eq!(Perceptron::new(&[16, 32, 1], Activation::Sigmoid, &mut r).param_count(), 577);
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let p = Perceptron::new(&[8, 4], Activation::Identity, &mut rng(3));
        let bound = (6.0f64 / 12.0).sqrt();
        for &w in p.layers()[0].weight.data() {
            assert!(w.abs() < bound, "weight {w} outside Xavier bound {bound}");
        }
        assert!(p.layers()[0].bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_is_deterministic_per_stream() {
        let a = Perceptron::new(&[5, 7, 2], Activation::Relu, &mut rng(9));
        let b = Perceptron::new(&[5, 7, 2], Activation::Relu, &mut rng(9));
        let c = Perceptron::new(&[5, 7, 2], Activation::Relu, &mut rng(10));
        let flat = |p: &Perceptron| {
            let mut v = Vec::new();
            p.flatten_into(&mut v);
            v
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn flatten_roundtrip_is_bit_exact() {
        let p = Perceptron::new(&[3, 6, 2], Activation::Sigmoid, &mut rng(4));
        let mut flat = Vec::new();
        p.flatten_into(&mut flat);
        assert_eq!(flat.len(), p.param_count());

        let mut q = Perceptron::new(&[3, 6, 2], Activation::Sigmoid, &mut rng(999));
        q.unflatten_from(&mut flat.iter().copied());
        let mut flat_q = Vec::new();
        q.flatten_into(&mut flat_q);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&flat), bits(&flat_q));
    }

    #[test]
    fn sigmoid_output_stays_in_unit_interval() {
        let p = Perceptron::new(&[4, 8, 1], Activation::Sigmoid, &mut rng(6));
        let tape = Tape::new();
        let mut r = rng(7);
        let x = tape.leaf(r.tensor(10, 4, 3.0));
        let y = p.bind(&tape).forward(&tape, x);
        let out = tape.value(y);
        assert_eq!(out.shape(), (10, 1));
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn parameter_gradients_match_central_differences() {
        let p = Perceptron::new(&[3, 5, 2], Activation::Sigmoid, &mut rng(12));
        let mut r = rng(13);
        let input = r.tensor(4, 3, 1.0);

        let run = |params: &[f64]| -> (f64, Vec<f64>) {
            let mut net = p.clone();
            net.unflatten_from(&mut params.iter().copied());
            let tape = Tape::new();
            let x = tape.leaf(input.clone());
            let bound = net.bind(&tape);
            let y = bound.forward(&tape, x);
            let loss = tape.sum_all(y);
            let grads = tape.backward(loss);
            let mut g = Vec::new();
            bound.gradient_into(&tape, &grads, &mut g);
            (tape.value(loss).item(), g)
        };

        let mut flat = Vec::new();
        p.flatten_into(&mut flat);
        let (_, analytic) = run(&flat);
        let mut eval = |params: &[f64]| run(params).0;
        let numeric = central_difference(&mut eval, &flat, DEFAULT_STEP);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "max relative error {err:.3e}");
    }

    #[test]
    fn unused_network_reports_zero_gradient() {
        let p = Perceptron::new(&[2, 3, 1], Activation::Identity, &mut rng(20));
        let tape = Tape::new();
        let bound = p.bind(&tape);
        let x = tape.leaf(Tensor::scalar(2.0));
        let loss = tape.mul(x, x);
        let grads = tape.backward(loss);
        let mut g = Vec::new();
        bound.gradient_into(&tape, &grads, &mut g);
        assert_eq!(g.len(), p.param_count());
        assert!(g.iter().all(|&v| v == 0.0));
    }
}

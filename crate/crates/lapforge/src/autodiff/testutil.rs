//! Shared helpers for gradient tests inside this crate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::gradcheck::{central_difference, max_relative_error, DEFAULT_STEP};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

pub trait RngExt {
    /// Tensor with entries uniform in (−scale, scale).
    fn tensor(&mut self, rows: usize, cols: usize, scale: f64) -> Tensor;
}

impl<R: Rng> RngExt for R {
    fn tensor(&mut self, rows: usize, cols: usize, scale: f64) -> Tensor {
        let data = (0..rows * cols).map(|_| self.gen_range(-scale..scale)).collect();
        Tensor::new(rows, cols, data)
    }
}

/// Builds a scalar loss from a single random input and checks the tape's
/// gradient for that input against central differences.
pub fn check_unary_op(seed: u64, rows: usize, cols: usize, build: impl Fn(&Tape, Var) -> Var) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let input = rng.tensor(rows, cols, 1.0);

    let tape = Tape::new();
    let x = tape.leaf(input.clone());
    let loss = build(&tape, x);
    let grads = tape.backward(loss);
    let analytic = grads
        .get(x)
        .expect("input should receive a gradient")
        .data()
        .to_vec();

    let mut eval = |flat: &[f64]| {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(rows, cols, flat.to_vec()));
        let loss = build(&tape, x);
        tape.value(loss).item()
    };
    let numeric = central_difference(&mut eval, input.data(), DEFAULT_STEP);

    let err = max_relative_error(&analytic, &numeric);
    assert!(
        err < 1e-4,
        "gradient mismatch (seed {seed}, {rows}x{cols}): max relative error {err:.3e}"
    );
}

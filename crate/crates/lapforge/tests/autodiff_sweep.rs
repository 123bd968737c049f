//! Gradient sweep: every tape primitive, chained into two composite
//! pipelines that mirror how the network composes them (dense MLP-style
//! mixing plus the gather/segment/scatter message-passing path), checked
//! against finite differences on 100 seeded random problems.

use std::rc::Rc;

use lapforge::autodiff::gradcheck::{verify_gradient, FdVerify};
use lapforge::autodiff::{Tape, Tensor};
use lapforge::stream::derive_rng;
use rand::Rng;

fn tensor(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Builds the composite loss from explicit leaf values and returns its value
/// together with the analytic gradient for every leaf, concatenated in leaf
/// order. Shapes ride along in `dims` so finite differences can replay the
/// same function from a flat parameter vector.
struct Sweep {
    dims: [(usize, usize); 6],
    gather: Rc<Vec<usize>>,
    segments: Rc<Vec<usize>>,
    segment_count: usize,
    positions: Rc<Vec<usize>>,
    square: usize,
    constant: Rc<Tensor>,
}

impl Sweep {
    fn random(seed: u64) -> (Self, Vec<f64>) {
        let mut rng = derive_rng(seed, &["test", "autodiff-sweep"]);
        let r = rng.gen_range(2..=4usize);
        let k = rng.gen_range(2..=4usize);
        let c = rng.gen_range(2..=3usize);
        let square = rng.gen_range(2..=4usize);
        let m = rng.gen_range(1..=square * square);

        // Gather with repeats so the backward accumulation path is live.
        let gather: Vec<usize> = (0..4).map(|_| rng.gen_range(0..r)).collect();
        let segments: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();

        // Distinct scatter cells inside the square.
        let mut cells: Vec<usize> = (0..square * square).collect();
        for i in (1..cells.len()).rev() {
            cells.swap(i, rng.gen_range(0..=i));
        }
        cells.truncate(m);

        let dims = [(r, k), (k, c), (r, c), (r, 1), (1, c), (m, 1)];
        let mut leaves = Vec::new();
        for &(rows, cols) in &dims {
            leaves.extend(tensor(&mut rng, rows, cols, -1.2, 1.2).data().to_vec());
        }
        let constant = Rc::new(tensor(&mut rng, r, c, 0.2, 1.5));
        let sweep = Self {
            dims,
            gather: Rc::new(gather),
            segments: Rc::new(segments),
            segment_count: 2,
            positions: Rc::new(cells),
            square,
            constant,
        };
        (sweep, leaves)
    }

    /// Value and flat analytic gradient at `flat`.
    fn run(&self, flat: &[f64]) -> (f64, Vec<f64>) {
        let tape = Tape::new();
        let mut vars = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for &(rows, cols) in &self.dims {
            let len = rows * cols;
            vars.push(tape.leaf(Tensor::new(rows, cols, flat[offset..offset + len].to_vec())));
            offset += len;
        }
        let [a, b, v, w, bias, u] = [vars[0], vars[1], vars[2], vars[3], vars[4], vars[5]];

        // Dense mixing path: every elementwise/broadcast/activation op.
        let x = tape.matmul(a, b);
        let x = tape.add_bias(x, bias);
        let x = tape.relu(x);
        let x = tape.mul(x, v);
        let x = tape.sub(x, v);
        let x = tape.row_scale(x, w);
        let x = tape.scale(x, 0.7);
        let x = tape.add_const(x, 0.3);
        let x = tape.mul_const(x, self.constant.clone());
        let probs = tape.sigmoid(x);
        let logs = tape.log_clamped(probs, 1e-12);
        let smooth = tape.softplus(logs);
        let wide = tape.concat_cols(&[probs, smooth]);

        // Reductions and structural ops.
        let stats = tape.concat_cols(&[tape.col_max(wide), tape.col_min(wide), tape.col_mean(wide)]);
        let repeated = tape.repeat_rows(stats, 3);
        let gathered = tape.gather_rows(wide, self.gather.clone());
        let pooled = tape.segment_mean_rows(gathered, self.segments.clone(), self.segment_count);
        let flipped = tape.transpose(wide);

        // Scatter path from an independent leaf.
        let scattered = tape.scatter_to_square(tape.sigmoid(u), self.positions.clone(), self.square);

        let pieces = [
            tape.sum_all(repeated),
            tape.sum_all(pooled),
            tape.sum_all(flipped),
            tape.sum_all(tape.row_sums(wide)),
            tape.sum_all(tape.row_norms(wide)),
            tape.norm_all(wide),
            tape.sum_all(tape.row_sums(scattered)),
            tape.norm_all(scattered),
        ];
        let loss = pieces.into_iter().reduce(|acc, p| tape.add(acc, p)).unwrap();

        let value = tape.value(loss).item();
        let grads = tape.backward(loss);
        let mut flat_grad = Vec::with_capacity(flat.len());
        for &var in &vars {
            match grads.get(var) {
                Some(g) => flat_grad.extend(g.data().iter().copied()),
                None => {
                    let (rows, cols) = tape.shape(var);
                    flat_grad.extend(std::iter::repeat_n(0.0, rows * cols));
                }
            }
        }
        (value, flat_grad)
    }
}

#[test]
fn composite_gradients_match_finite_differences_on_100_seeds() {
    let verify = FdVerify::default();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (sweep, flat) = Sweep::random(seed);
        let (_, analytic) = sweep.run(&flat);
        let mut eval = |x: &[f64]| sweep.run(x).0;
        match verify_gradient(&mut eval, &flat, &analytic, &verify) {
            Ok(rel) => worst = worst.max(rel),
            Err(why) => panic!("seed {seed}: {why}"),
        }
    }
    assert!(worst < 1e-4, "worst resolved relative error {worst:.3e}");
}

#[test]
fn composite_forward_and_backward_are_deterministic() {
    for seed in [3u64, 71, 98] {
        let (sweep, flat) = Sweep::random(seed);
        let (v1, g1) = sweep.run(&flat);
        let (v2, g2) = sweep.run(&flat);
        assert_eq!(v1.to_bits(), v2.to_bits(), "seed {seed}: forward value drifted");
        let same = g1.iter().zip(&g2).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "seed {seed}: gradient bits drifted");
    }
}

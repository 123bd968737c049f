//! Learnable assignment network.
//!
//! A cost matrix becomes a pruned bipartite graph whose edges carry the raw
//! costs. An encoder lifts each edge scalar into a latent vector; a shared
//! convolution module then runs a fixed number of iterations, each of which
//! (1) recomputes channel-attention vectors from the current node and edge
//! attributes, (2) updates every edge from its two endpoints, and (3)
//! updates every node from the mean of its incident-edge messages, weighted
//! per neighbor by a learned scalar gate. A sigmoid decoder finally turns
//! each edge attribute into a matching label in (0, 1), scattered back into
//! a square score matrix.
//!
//! Within one iteration the edge update completes before the node update;
//! node updates are synchronous (every node reads pre-update node
//! attributes, but the freshly updated edge attributes). Convolution
//! weights are shared across all iterations.

use std::rc::Rc;

use crate::assignment::{CostMatrix, ScoreMatrix};
use crate::autodiff::{Activation, BoundPerceptron, Gradients, Perceptron, Tape, Tensor, Var};
use crate::error::{LapError, Result};
use crate::graph::{build_graph, BipartiteGraph, EdgeLabelVector};
use crate::stream::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Width of node and edge attribute vectors.
    pub latent_dim: usize,
    /// Number of convolution iterations.
    pub conv_iterations: usize,
    /// Per-agent edge retention count when building the graph.
    pub prune_width: usize,
    /// Hidden width of every perceptron.
    pub hidden_width: usize,
    /// Replace both channel-attention vectors with ones.
    pub ablate_channel_attention: bool,
    /// Replace every neighbor gate ω with one.
    pub ablate_aggregation_weights: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            conv_iterations: 5,
            prune_width: 8,
            hidden_width: 32,
            ablate_channel_attention: false,
            ablate_aggregation_weights: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("conv_iterations", self.conv_iterations),
            ("prune_width", self.prune_width),
            ("hidden_width", self.hidden_width),
        ] {
            if v == 0 {
                return Err(LapError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Names and order of the model's perceptrons. This order fixes the layout
/// of the flat parameter vector used by the optimizer and checkpoints.
pub const PERCEPTRON_NAMES: [&str; 8] = [
    "encoder", "kappa_v", "kappa_e", "rho_e", "rho1_v", "rho2_v", "tau", "decoder",
];

#[derive(Clone, Debug)]
pub struct ModelParameters {
    config: ModelConfig,
    /// Edge scalar → latent embedding.
    pub encoder: Perceptron,
    /// Node channel attention: [max, min, mean] stats → gate vector.
    pub kappa_v: Perceptron,
    /// Edge channel attention.
    pub kappa_e: Perceptron,
    /// Edge update from [agent attrs, job attrs, edge attrs].
    pub rho_e: Perceptron,
    /// Per-neighbor message from [edge attrs, gated neighbor attrs].
    pub rho1_v: Perceptron,
    /// Node update from [aggregated message, own attrs].
    pub rho2_v: Perceptron,
    /// Neighbor gate ω from [center attrs, neighbor attrs].
    pub tau: Perceptron,
    /// Edge attrs → matching label.
    pub decoder: Perceptron,
}

impl ModelParameters {
    /// Fresh parameters with fan-balanced uniform weights and zero biases,
    /// drawn from per-network streams derived from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let h = config.hidden_width;
        let net = |dims: &[usize], out: Activation, name: &str| {
            Perceptron::new(dims, out, &mut derive_rng(seed, &["init", name]))
        };
        Ok(Self {
            config: *config,
            encoder: net(&[1, h, d], Activation::Identity, "encoder"),
            kappa_v: net(&[3 * d, h, d], Activation::Sigmoid, "kappa_v"),
            kappa_e: net(&[3 * d, h, d], Activation::Sigmoid, "kappa_e"),
            rho_e: net(&[3 * d, h, d], Activation::Identity, "rho_e"),
            rho1_v: net(&[2 * d, h, d], Activation::Identity, "rho1_v"),
            rho2_v: net(&[2 * d, h, d], Activation::Identity, "rho2_v"),
            tau: net(&[2 * d, d, 1], Activation::Sigmoid, "tau"),
            // The decoder emits logits; the forward pass applies the sigmoid
            // explicitly so losses can work in logit space.
            decoder: net(&[d, h, 1], Activation::Identity, "decoder"),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn nets(&self) -> [&Perceptron; 8] {
        [
            &self.encoder, &self.kappa_v, &self.kappa_e, &self.rho_e,
            &self.rho1_v, &self.rho2_v, &self.tau, &self.decoder,
        ]
    }

    /// Networks paired with their canonical names, in flat-vector order.
    pub fn named_nets(&self) -> [(&'static str, &Perceptron); 8] {
        let nets = self.nets();
        std::array::from_fn(|i| (PERCEPTRON_NAMES[i], nets[i]))
    }

    fn nets_mut(&mut self) -> [&mut Perceptron; 8] {
        [
            &mut self.encoder, &mut self.kappa_v, &mut self.kappa_e, &mut self.rho_e,
            &mut self.rho1_v, &mut self.rho2_v, &mut self.tau, &mut self.decoder,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.nets().iter().map(|n| n.param_count()).sum()
    }

    /// All parameters as one vector, networks in [`PERCEPTRON_NAMES`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for net in self.nets() {
            net.flatten_into(&mut out);
        }
        out
    }

    /// Overwrites all parameters from a flat vector.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(LapError::Format(format!(
                "parameter vector holds {} values, model expects {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut it = flat.iter().copied();
        for net in self.nets_mut() {
            net.unflatten_from(&mut it);
        }
        Ok(())
    }

    /// Rebuilds parameters of `config`'s shape from a flat vector.
    pub fn from_flat(config: &ModelConfig, flat: &[f64]) -> Result<Self> {
        let mut p = Self::init(config, 0)?;
        p.set_flat(flat)?;
        Ok(p)
    }
}

/// The model's perceptrons registered on a tape for one differentiable pass.
pub struct BoundModel {
    pub encoder: BoundPerceptron,
    pub kappa_v: BoundPerceptron,
    pub kappa_e: BoundPerceptron,
    pub rho_e: BoundPerceptron,
    pub rho1_v: BoundPerceptron,
    pub rho2_v: BoundPerceptron,
    pub tau: BoundPerceptron,
    pub decoder: BoundPerceptron,
}

impl BoundModel {
    fn bind(params: &ModelParameters, tape: &Tape) -> Self {
        Self {
            encoder: params.encoder.bind(tape),
            kappa_v: params.kappa_v.bind(tape),
            kappa_e: params.kappa_e.bind(tape),
            rho_e: params.rho_e.bind(tape),
            rho1_v: params.rho1_v.bind(tape),
            rho2_v: params.rho2_v.bind(tape),
            tau: params.tau.bind(tape),
            decoder: params.decoder.bind(tape),
        }
    }

    /// Flat gradient aligned with [`ModelParameters::to_flat`]. Networks the
    /// loss never touched (e.g. the gate under ablation) contribute zeros.
    pub fn gradient_into(&self, tape: &Tape, grads: &Gradients, out: &mut Vec<f64>) {
        for net in [
            &self.encoder, &self.kappa_v, &self.kappa_e, &self.rho_e,
            &self.rho1_v, &self.rho2_v, &self.tau, &self.decoder,
        ] {
            net.gradient_into(tape, grads, out);
        }
    }
}

/// A forward pass recorded on a tape, ready for loss construction and
/// backpropagation.
pub struct TapedForward {
    /// Raw edge costs, (edge_count × 1); the only input leaf.
    pub costs: Var,
    /// Pre-sigmoid edge scores, (edge_count × 1); the classification loss
    /// consumes these directly so saturation cannot zero its gradient.
    pub logits: Var,
    /// Decoded edge labels sigmoid(logits), (edge_count × 1), each in (0, 1).
    pub labels: Var,
    /// Labels scattered into an n×n matrix; pruned cells are exactly zero.
    pub score: Var,
    /// Node and edge attributes after every iteration (for inspection).
    pub states: Vec<(Var, Var)>,
    pub bound: BoundModel,
}

/// Records the full forward pass for `graph` on `tape`.
pub fn forward_on_tape(tape: &Tape, graph: &BipartiteGraph, params: &ModelParameters) -> TapedForward {
    let cfg = params.config();
    let n = graph.size();
    let m = graph.edge_count();
    let node_count = graph.node_count();
    let bound = BoundModel::bind(params, tape);

    // Index plumbing shared by every iteration. Node ids: agents 0..n,
    // jobs n..2n. Directed message rows: agent-centered block (edge order)
    // then job-centered block (edge order).
    let agent_ids: Rc<Vec<usize>> = Rc::new(graph.edges().iter().map(|e| e.agent).collect());
    let job_node_ids: Rc<Vec<usize>> = Rc::new(graph.edges().iter().map(|e| n + e.job).collect());
    let edge_twice: Rc<Vec<usize>> = Rc::new((0..m).chain(0..m).collect());
    let center_ids: Rc<Vec<usize>> =
        Rc::new(agent_ids.iter().chain(job_node_ids.iter()).copied().collect());
    let neighbor_ids: Rc<Vec<usize>> =
        Rc::new(job_node_ids.iter().chain(agent_ids.iter()).copied().collect());
    let segments = center_ids.clone();
    let scatter_positions: Rc<Vec<usize>> =
        Rc::new(graph.edges().iter().map(|e| e.agent * n + e.job).collect());

    let costs = tape.leaf(Tensor::new(
        m,
        1,
        graph.edges().iter().map(|e| e.cost).collect(),
    ));

    // Encode: edge scalars → latent attributes; node attributes start zero.
    let mut edge_attrs = bound.encoder.forward(tape, costs);
    let mut node_attrs = tape.leaf(Tensor::zeros(node_count, cfg.latent_dim));

    let stats = |x: Var| {
        let hi = tape.col_max(x);
        let lo = tape.col_min(x);
        let mean = tape.col_mean(x);
        tape.concat_cols(&[hi, lo, mean])
    };

    let mut states = Vec::with_capacity(cfg.conv_iterations);
    for _ in 0..cfg.conv_iterations {
        // Channel attention from the current state; multiplying by an
        // all-ones gate is the identity, so ablation skips the products.
        let (gated_nodes, gate_edges): (Var, Box<dyn Fn(Var) -> Var>) =
            if cfg.ablate_channel_attention {
                (node_attrs, Box::new(|e: Var| e))
            } else {
                let c_v = bound.kappa_v.forward(tape, stats(node_attrs));
                let c_e = bound.kappa_e.forward(tape, stats(edge_attrs));
                let gated = tape.mul(node_attrs, tape.repeat_rows(c_v, node_count));
                let c_e_rows = tape.repeat_rows(c_e, m);
                (gated, Box::new(move |e: Var| tape.mul(e, c_e_rows)))
            };

        // Edge update: [agent attrs, job attrs, edge attrs], gated.
        let agent_rows = tape.gather_rows(gated_nodes, agent_ids.clone());
        let job_rows = tape.gather_rows(gated_nodes, job_node_ids.clone());
        let gated_old_edges = gate_edges(edge_attrs);
        let edge_in = tape.concat_cols(&[agent_rows, job_rows, gated_old_edges]);
        edge_attrs = bound.rho_e.forward(tape, edge_in);

        // Node update: every edge sends one message toward each endpoint,
        // carrying the updated edge attrs and the gated pre-update attrs of
        // the opposite endpoint, weighted by ω(center, neighbor).
        let msg_edges = {
            let gated_new = gate_edges(edge_attrs);
            tape.gather_rows(gated_new, edge_twice.clone())
        };
        let neighbor_rows = tape.gather_rows(gated_nodes, neighbor_ids.clone());
        let weighted_neighbors = if cfg.ablate_aggregation_weights {
            neighbor_rows
        } else {
            let center_raw = tape.gather_rows(node_attrs, center_ids.clone());
            let neighbor_raw = tape.gather_rows(node_attrs, neighbor_ids.clone());
            let omega_in = tape.concat_cols(&[center_raw, neighbor_raw]);
            let omega = bound.tau.forward(tape, omega_in);
            tape.row_scale(neighbor_rows, omega)
        };
        let msg_in = tape.concat_cols(&[msg_edges, weighted_neighbors]);
        let messages = bound.rho1_v.forward(tape, msg_in);
        let pooled = tape.segment_mean_rows(messages, segments.clone(), node_count);
        let node_in = tape.concat_cols(&[pooled, node_attrs]);
        node_attrs = bound.rho2_v.forward(tape, node_in);

        states.push((node_attrs, edge_attrs));
    }

    let logits = bound.decoder.forward(tape, edge_attrs);
    let labels = tape.sigmoid(logits);
    let score = tape.scatter_to_square(labels, scatter_positions, n);

    TapedForward {
        costs,
        logits,
        labels,
        score,
        states,
        bound,
    }
}

/// Inference result for one cost matrix.
pub struct Prediction {
    pub graph: BipartiteGraph,
    pub labels: EdgeLabelVector,
    pub score: ScoreMatrix,
}

/// Builds the pruned graph for `c` and runs one forward pass.
pub fn predict(c: &CostMatrix, params: &ModelParameters) -> Result<Prediction> {
    let graph = build_graph(c, params.config().prune_width)?;
    let tape = Tape::new();
    let fwd = forward_on_tape(&tape, &graph, params);
    let labels = EdgeLabelVector {
        values: tape.value(fwd.labels).data().to_vec(),
    };
    let score = graph.labels_to_score_matrix(&labels)?;
    Ok(Prediction { graph, labels, score })
}

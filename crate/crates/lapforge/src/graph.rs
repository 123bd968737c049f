//! Pruned bipartite assignment graph: per-agent lowest-cost edge retention,
//! the edge-index bijection, and mapping edge labels back to score matrices.

use std::collections::HashMap;

use crate::assignment::{AssignmentMatrix, CostMatrix, ScoreMatrix};
use crate::error::{LapError, Result};

/// One retained edge between `agent` and `job`, carrying its raw cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub agent: usize,
    pub job: usize,
    pub cost: f64,
}

/// Bipartite graph over n agent nodes and n job nodes with per-agent top-t
/// pruning. Edge order is agent-major, ascending cost within an agent, job
/// index on cost ties; that order defines the edge-index bijection.
#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    n: usize,
    t_effective: usize,
    edges: Vec<Edge>,
    agent_adjacency: Vec<Vec<usize>>,
    job_adjacency: Vec<Vec<usize>>,
    index_of: HashMap<(usize, usize), usize>,
}

/// Per-edge labels in edge order, each in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLabelVector {
    pub values: Vec<f64>,
}

impl EdgeLabelVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Retains, per agent, the `min(t, n)` lowest-cost edges of its row; ties
/// break toward the smaller job index. Node attributes start zeroed and are
/// owned by the model, not the graph.
pub fn build_graph(c: &CostMatrix, t: usize) -> Result<BipartiteGraph> {
    if t == 0 {
        return Err(LapError::Config("prune width t must be at least 1".into()));
    }
    let n = c.size();
    let t_effective = t.min(n);
    let mut edges = Vec::with_capacity(n * t_effective);
    let mut agent_adjacency = vec![Vec::with_capacity(t_effective); n];
    let mut job_adjacency = vec![Vec::new(); n];
    let mut index_of = HashMap::with_capacity(n * t_effective);
    let mut jobs: Vec<usize> = (0..n).collect();
    for (agent, adjacency) in agent_adjacency.iter_mut().enumerate() {
        let row = c.row(agent);
        jobs.sort_unstable_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for &job in &jobs[..t_effective] {
            let id = edges.len();
            edges.push(Edge { agent, job, cost: row[job] });
            adjacency.push(id);
            job_adjacency[job].push(id);
            index_of.insert((agent, job), id);
        }
        jobs.sort_unstable();
    }
    Ok(BipartiteGraph { n, t_effective, edges, agent_adjacency, job_adjacency, index_of })
}

impl BipartiteGraph {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn t_effective(&self) -> usize {
        self.t_effective
    }

    pub fn node_count(&self) -> usize {
        2 * self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn agent_adjacency(&self, agent: usize) -> &[usize] {
        &self.agent_adjacency[agent]
    }

    pub fn job_adjacency(&self, job: usize) -> &[usize] {
        &self.job_adjacency[job]
    }

    /// Position of edge (agent, job) in edge order, if it survived pruning.
    pub fn edge_index(&self, agent: usize, job: usize) -> Option<usize> {
        self.index_of.get(&(agent, job)).copied()
    }

    /// Scatters per-edge labels into a dense n×n score matrix; positions
    /// without a retained edge are exactly 0.
    pub fn labels_to_score_matrix(&self, y: &EdgeLabelVector) -> Result<ScoreMatrix> {
        if y.len() != self.edges.len() {
            return Err(LapError::SizeMismatch { left: y.len(), right: self.edges.len() });
        }
        let mut values = vec![0.0; self.n * self.n];
        for (edge, &label) in self.edges.iter().zip(&y.values) {
            values[edge.agent * self.n + edge.job] = label;
        }
        ScoreMatrix::new(self.n, values)
    }

    /// Binary per-edge labels from the optimal assignment, plus the fraction
    /// of the n ground-truth pairs that survived pruning.
    pub fn ground_truth_labels(&self, xgt: &AssignmentMatrix) -> Result<(EdgeLabelVector, f64)> {
        if xgt.size() != self.n {
            return Err(LapError::SizeMismatch { left: xgt.size(), right: self.n });
        }
        let values: Vec<f64> = self
            .edges
            .iter()
            .map(|e| if xgt.job_of(e.agent) == e.job { 1.0 } else { 0.0 })
            .collect();
        let kept: f64 = values.iter().sum();
        Ok((EdgeLabelVector { values }, kept / self.n as f64))
    }
}

//! Thread-level decoding.
//!
//! Given per-comment Good/Bad probabilities and per-pair same-label
//! probabilities, four decoders produce a Good/Bad assignment for the whole
//! thread:
//!
//! * [`local_decode`] — per-comment argmax (ties prefer Good).
//! * [`graph_cut_decode`] — exact minimizer of the partition cost
//!   `lambda * [sum_{i in G} s_iB + sum_{i in B} s_iG]
//!    + (1 - lambda) * sum_{i in G, j in B} s_ij`
//!   via a minimum s-t cut computed with highest-label push-relabel.
//! * [`ilp_decode`] — exact minimizer of the -log-cost objective with one
//!   label variable per comment and one Same/Different variable per pair
//!   (pair variables are implied by the labels through the XOR consistency
//!   constraint), solved by depth-first branch-and-bound.
//! * [`brute_force_cut_decode`] / [`brute_force_ilp_decode`] — exhaustive
//!   2^n oracles for both objectives, used for testing.
//!
//! All probabilities entering a decoder are clamped into
//! `[epsilon, 1 - epsilon]` first, so -log costs stay finite.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

/// Absolute tolerance for residual-capacity comparisons in the max-flow
/// search.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid thread scores: {0}")]
    InvalidScores(String),
    #[error("brute-force oracle limited to n <= {limit}, got {n}")]
    OracleLimit { n: usize, limit: usize },
    #[error("branch-and-bound node budget of {budget} exceeded")]
    NodeBudgetExceeded { budget: usize },
    #[error("scores record invalid at line {line}: {message}")]
    ScoresFormat { line: usize, message: String },
}

/// Local and pairwise probabilities for one thread: `(s_iG, s_iB)` per
/// comment and `P(same label)` per pair `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreadScores {
    local: Vec<(f64, f64)>,
    /// Upper-triangle, row-major: pair (i, j) with i < j lives at
    /// `i*n - i*(i+1)/2 + (j - i - 1)`.
    pairwise: Vec<f64>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl ThreadScores {
    /// `local` carries `(s_iG, s_iB)` per comment (each pair must sum to 1
    /// within 1e-9); `pairwise` the upper triangle of same-label
    /// probabilities in row-major order.
    pub fn new(local: Vec<(f64, f64)>, pairwise: Vec<f64>) -> Result<Self, InferenceError> {
        let n = local.len();
        if pairwise.len() != n * n.saturating_sub(1) / 2 {
            return Err(InferenceError::InvalidScores(format!(
                "expected {} pairwise scores for {} comments, got {}",
                n * n.saturating_sub(1) / 2,
                n,
                pairwise.len()
            )));
        }
        for (i, &(g, b)) in local.iter().enumerate() {
            if !(g.is_finite() && b.is_finite() && (0.0..=1.0).contains(&g) && (0.0..=1.0).contains(&b))
            {
                return Err(InferenceError::InvalidScores(format!(
                    "local scores for comment {i} out of range: ({g}, {b})"
                )));
            }
            if (g + b - 1.0).abs() > 1e-9 {
                return Err(InferenceError::InvalidScores(format!(
                    "local scores for comment {i} do not sum to 1: ({g}, {b})"
                )));
            }
        }
        for (p, &s) in pairwise.iter().enumerate() {
            if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
                return Err(InferenceError::InvalidScores(format!(
                    "pairwise score {p} out of range: {s}"
                )));
            }
        }
        Ok(ThreadScores { local, pairwise })
    }

    pub fn n(&self) -> usize {
        self.local.len()
    }

    pub fn s_good(&self, i: usize) -> f64 {
        self.local[i].0
    }

    pub fn s_bad(&self, i: usize) -> f64 {
        self.local[i].1
    }

    /// Same-label probability for an unordered pair.
    pub fn s_pair(&self, i: usize, j: usize) -> f64 {
        assert_ne!(i, j, "pair requires two distinct comments");
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairwise[pair_index(self.n(), i, j)]
    }

    /// All probabilities clamped into `[eps, 1 - eps]`. Local pairs keep
    /// summing to 1 because the two sides are clamped symmetrically.
    pub fn floored(&self, eps: f64) -> ThreadScores {
        let clamp = |p: f64| p.clamp(eps, 1.0 - eps);
        ThreadScores {
            local: self
                .local
                .iter()
                .map(|&(g, b)| (clamp(g), clamp(b)))
                .collect(),
            pairwise: self.pairwise.iter().map(|&s| clamp(s)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    PreferGood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Mixing weight: 1 trusts only the local scores, 0 only the pairwise
    /// scores.
    pub lambda: f64,
    pub tie_break: TieBreak,
    /// Probability floor applied before computing costs.
    pub epsilon: f64,
    /// Abort branch-and-bound after this many search nodes rather than
    /// return an approximate answer.
    pub node_budget: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            lambda: 1.0,
            tie_break: TieBreak::PreferGood,
            epsilon: 1e-6,
            node_budget: 10_000_000,
        }
    }
}

impl InferenceConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        InferenceConfig {
            lambda,
            ..InferenceConfig::default()
        }
    }

    fn assert_valid(&self) {
        assert!(
            (0.0..=1.0).contains(&self.lambda),
            "lambda must be in [0, 1], got {}",
            self.lambda
        );
        assert!(
            self.epsilon >= 0.0 && self.epsilon < 0.5,
            "epsilon must be in [0, 0.5), got {}",
            self.epsilon
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Local,
    Cut,
    Ilp,
    BruteCut,
    BruteIlp,
}

/// One Good/Bad label per comment plus the decoder's objective value
/// (partition cost for local/cut, -log cost for ILP).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    pub labels: Vec<Label>,
    pub objective_value: f64,
    pub decoder: DecoderKind,
}

/// The partition cost C(P): misclassification mass of the labeling plus the
/// pairwise mass cut by it, mixed by lambda. Scores are epsilon-floored
/// first.
pub fn partition_cost(labels: &[Label], scores: &ThreadScores, cfg: &InferenceConfig) -> f64 {
    cfg.assert_valid();
    assert_eq!(labels.len(), scores.n(), "label/score length mismatch");
    let s = scores.floored(cfg.epsilon);
    let n = s.n();
    let mut local = 0.0;
    for i in 0..n {
        local += match labels[i] {
            Label::Good => s.s_bad(i),
            _ => s.s_good(i),
        };
    }
    let mut cross = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if labels[i] != labels[j] {
                cross += s.s_pair(i, j);
            }
        }
    }
    cfg.lambda * local + (1.0 - cfg.lambda) * cross
}

/// The ILP objective C(A) over -log costs: each comment pays
/// `-log s(label)`, each pair pays `-log s_ij` when labeled the same and
/// `-log(1 - s_ij)` otherwise, mixed by lambda. Scores are epsilon-floored
/// first.
pub fn ilp_cost(labels: &[Label], scores: &ThreadScores, cfg: &InferenceConfig) -> f64 {
    cfg.assert_valid();
    assert_eq!(labels.len(), scores.n(), "label/score length mismatch");
    let s = scores.floored(cfg.epsilon);
    let n = s.n();
    let mut local = 0.0;
    for i in 0..n {
        local += match labels[i] {
            Label::Good => -s.s_good(i).ln(),
            _ => -s.s_bad(i).ln(),
        };
    }
    let mut pairs = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            pairs += if labels[i] == labels[j] {
                -s.s_pair(i, j).ln()
            } else {
                -(1.0 - s.s_pair(i, j)).ln()
            };
        }
    }
    cfg.lambda * local + (1.0 - cfg.lambda) * pairs
}

/// Per-comment argmax; ties go to Good. The objective is the partition cost
/// at lambda = 1.
pub fn local_decode(scores: &ThreadScores, cfg: &InferenceConfig) -> LabelAssignment {
    cfg.assert_valid();
    let labels: Vec<Label> = (0..scores.n())
        .map(|i| {
            if scores.s_good(i) >= scores.s_bad(i) {
                Label::Good
            } else {
                Label::Bad
            }
        })
        .collect();
    let local_cfg = InferenceConfig {
        lambda: 1.0,
        ..*cfg
    };
    let objective_value = partition_cost(&labels, scores, &local_cfg);
    LabelAssignment {
        labels,
        objective_value,
        decoder: DecoderKind::Local,
    }
}

// ---------------------------------------------------------------------------
// Max-flow / min-cut
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct FlowEdge {
    to: usize,
    /// Index of the reverse edge in `adj[to]`.
    rev: usize,
    cap: f64,
}

/// A capacitated s-t network. Undirected edges are stored as two opposite
/// directed arcs of equal capacity that act as each other's reverse.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    adj: Vec<Vec<FlowEdge>>,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        assert!(source < node_count && sink < node_count && source != sink);
        FlowNetwork {
            source,
            sink,
            adj: vec![Vec::new(); node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Directed arc with a zero-capacity reverse arc.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        assert!(cap >= 0.0 && cap.is_finite(), "capacity must be >= 0");
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(FlowEdge {
            to,
            rev: rev_from,
            cap,
        });
        self.adj[to].push(FlowEdge {
            to: from,
            rev: rev_to,
            cap: 0.0,
        });
    }

    /// Undirected edge: opposite arcs of equal capacity.
    pub fn add_undirected_edge(&mut self, a: usize, b: usize, cap: f64) {
        assert!(cap >= 0.0 && cap.is_finite(), "capacity must be >= 0");
        let rev_a = self.adj[b].len();
        let rev_b = self.adj[a].len();
        self.adj[a].push(FlowEdge { to: b, rev: rev_a, cap });
        self.adj[b].push(FlowEdge { to: a, rev: rev_b, cap });
    }

    /// The graph encoding of the partition cost: node 0 is the source, nodes
    /// `1..=n` the comments, node `n + 1` the sink. Arc capacities are
    /// `lambda * s_iG` from the source, `lambda * s_iB` to the sink, and
    /// `(1 - lambda) * s_ij` between comments, all on epsilon-floored
    /// scores. Comments on the source side of a minimum cut are Good.
    pub fn from_thread_scores(scores: &ThreadScores, cfg: &InferenceConfig) -> Self {
        cfg.assert_valid();
        let s = scores.floored(cfg.epsilon);
        let n = s.n();
        let mut net = FlowNetwork::new(n + 2, 0, n + 1);
        for i in 0..n {
            net.add_edge(0, i + 1, cfg.lambda * s.s_good(i));
            net.add_edge(i + 1, n + 1, cfg.lambda * s.s_bad(i));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                net.add_undirected_edge(i + 1, j + 1, (1.0 - cfg.lambda) * s.s_pair(i, j));
            }
        }
        net
    }

    /// Total original capacity of arcs crossing from `side` to its
    /// complement.
    pub fn cut_capacity(&self, side: &BTreeSet<usize>) -> f64 {
        let mut total = 0.0;
        for (u, edges) in self.adj.iter().enumerate() {
            if !side.contains(&u) {
                continue;
            }
            for e in edges {
                if !side.contains(&e.to) {
                    total += e.cap;
                }
            }
        }
        total
    }
}

/// Maximum s-t flow via highest-label push-relabel with the gap heuristic.
/// Returns the flow value and the set of nodes reachable from the source in
/// the residual network (the source side of a minimum cut).
pub fn max_flow(net: &FlowNetwork) -> (f64, BTreeSet<usize>) {
    let n = net.node_count();
    let (source, sink) = (net.source, net.sink);
    let mut residual = net.adj.clone();
    let mut excess = vec![0.0f64; n];
    let mut height = vec![0usize; n];
    let mut count = vec![0usize; 2 * n + 1];
    height[source] = n;
    count[0] = n - 1;
    count[n] += 1;

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 2 * n + 1];
    let mut highest = 0usize;

    // Saturate every arc out of the source.
    for idx in 0..residual[source].len() {
        let FlowEdge { to, rev, cap } = residual[source][idx];
        if cap > RESIDUAL_EPS {
            residual[source][idx].cap = 0.0;
            residual[to][rev].cap += cap;
            excess[to] += cap;
            excess[source] -= cap;
            if to != sink && to != source {
                buckets[height[to]].push(to);
            }
        }
    }

    loop {
        // Highest active node; bucket entries may be stale.
        let u = loop {
            match buckets[highest].pop() {
                Some(u) => {
                    if u != source && u != sink && excess[u] > RESIDUAL_EPS && height[u] == highest
                    {
                        break Some(u);
                    }
                }
                None => {
                    if highest == 0 {
                        break None;
                    }
                    highest -= 1;
                }
            }
        };
        let Some(u) = u else { break };

        // Push along admissible arcs.
        for idx in 0..residual[u].len() {
            if excess[u] <= RESIDUAL_EPS {
                break;
            }
            let FlowEdge { to, rev, cap } = residual[u][idx];
            if cap > RESIDUAL_EPS && height[u] == height[to] + 1 {
                let delta = excess[u].min(cap);
                residual[u][idx].cap -= delta;
                residual[to][rev].cap += delta;
                excess[u] -= delta;
                let was_inactive = excess[to] <= RESIDUAL_EPS;
                excess[to] += delta;
                if was_inactive && to != source && to != sink {
                    buckets[height[to]].push(to);
                    highest = highest.max(height[to]);
                }
            }
        }

        if excess[u] > RESIDUAL_EPS {
            // Relabel to one above the lowest reachable neighbor.
            let old = height[u];
            let min_neighbor = residual[u]
                .iter()
                .filter(|e| e.cap > RESIDUAL_EPS)
                .map(|e| height[e.to])
                .min();
            let Some(min_neighbor) = min_neighbor else {
                // No residual arc at all; excess is stuck (cannot happen
                // with reverse arcs, but keep the node inactive).
                continue;
            };
            count[old] -= 1;
            height[u] = min_neighbor + 1;
            count[height[u]] += 1;
            if count[old] == 0 && old < n {
                // Gap heuristic: heights in (old, n) can no longer reach the
                // sink; lift them past the source to drain back.
                for v in 0..n {
                    if v != source && height[v] > old && height[v] < n {
                        count[height[v]] -= 1;
                        height[v] = n + 1;
                        count[n + 1] += 1;
                        if excess[v] > RESIDUAL_EPS && v != sink {
                            buckets[n + 1].push(v);
                        }
                    }
                }
                highest = highest.max(n + 1);
            }
            buckets[height[u]].push(u);
            highest = highest.max(height[u]);
        }
    }

    let flow = excess[sink];

    // Source side = residual reachability from the source.
    let mut side = BTreeSet::new();
    side.insert(source);
    let mut stack = vec![source];
    while let Some(u) = stack.pop() {
        for e in &residual[u] {
            if e.cap > RESIDUAL_EPS && side.insert(e.to) {
                stack.push(e.to);
            }
        }
    }
    (flow, side)
}

/// Exact minimizer of the partition cost via minimum cut. Comments on the
/// source side are labeled Good; the reported objective is the partition
/// cost of the labeling (equal to the cut capacity within 1e-6).
pub fn graph_cut_decode(scores: &ThreadScores, cfg: &InferenceConfig) -> LabelAssignment {
    cfg.assert_valid();
    let net = FlowNetwork::from_thread_scores(scores, cfg);
    let (flow, side) = max_flow(&net);
    let labels: Vec<Label> = (0..scores.n())
        .map(|i| {
            if side.contains(&(i + 1)) {
                Label::Good
            } else {
                Label::Bad
            }
        })
        .collect();
    let objective_value = partition_cost(&labels, scores, cfg);
    debug_assert!(
        (objective_value - flow).abs() < 1e-6,
        "cut capacity {flow} != partition cost {objective_value}"
    );
    LabelAssignment {
        labels,
        objective_value,
        decoder: DecoderKind::Cut,
    }
}

// ---------------------------------------------------------------------------
// ILP via branch-and-bound
// ---------------------------------------------------------------------------

struct IlpSearch<'a> {
    lambda: f64,
    /// (c_iG, c_iB) in expansion order.
    local_costs: &'a [(f64, f64)],
    /// (c_ijS, c_ijD) indexed by original pair index.
    pair_costs: &'a [(f64, f64)],
    /// expansion order -> original comment index
    order: &'a [usize],
    n: usize,
    /// Labels by original comment index (expansion prefix is meaningful).
    assignment: Vec<Label>,
    /// lambda * min local cost summed over suffixes of the expansion order.
    suffix_local_min: Vec<f64>,
    best_cost: f64,
    best_labels: Option<Vec<Label>>,
    nodes: usize,
    budget: usize,
}

impl IlpSearch<'_> {
    fn pair_cost(&self, a: usize, b: usize, same: bool) -> f64 {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let (cs, cd) = self.pair_costs[pair_index(self.n, i, j)];
        if same {
            cs
        } else {
            cd
        }
    }

    fn pair_min(&self, a: usize, b: usize) -> f64 {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let (cs, cd) = self.pair_costs[pair_index(self.n, i, j)];
        cs.min(cd)
    }

    /// `remaining_pairs` lower-bounds the pair cost over every pair with at
    /// least one undecided endpoint.
    fn search(&mut self, depth: usize, acc: f64, remaining_pairs: f64) -> Result<(), ()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(());
        }
        if depth == self.n {
            if acc < self.best_cost {
                self.best_cost = acc;
                self.best_labels = Some(self.assignment.clone());
            }
            return Ok(());
        }
        let bound = acc + self.suffix_local_min[depth] + remaining_pairs;
        if bound >= self.best_cost - 1e-12 {
            return Ok(());
        }
        let comment = self.order[depth];
        let (cg, cb) = self.local_costs[depth];

        // Pairs (comment, earlier) become fully decided at this depth; they
        // leave the remaining-pair bound and their exact cost is accrued.
        let mut decided_pair_min = 0.0;
        for d in 0..depth {
            decided_pair_min += (1.0 - self.lambda) * self.pair_min(self.order[d], comment);
        }
        let next_remaining = remaining_pairs - decided_pair_min;

        let first = if cg <= cb { Label::Good } else { Label::Bad };
        let second = if first == Label::Good {
            Label::Bad
        } else {
            Label::Good
        };
        for label in [first, second] {
            let local = self.lambda * if label == Label::Good { cg } else { cb };
            let mut pair_cost = 0.0;
            for d in 0..depth {
                let other = self.order[d];
                pair_cost += (1.0 - self.lambda)
                    * self.pair_cost(other, comment, self.assignment[other] == label);
            }
            self.assignment[comment] = label;
            self.search(depth + 1, acc + local + pair_cost, next_remaining)?;
        }
        Ok(())
    }
}

/// Exact minimizer of the ILP objective by depth-first branch-and-bound over
/// comment labels (pair variables are implied by XOR consistency). Comments
/// are expanded in descending `|c_iG - c_iB|` order; the admissible bound
/// adds the cheaper side of every undecided comment and pair. Exceeding the
/// node budget is an error, never an approximate answer.
pub fn ilp_decode(
    scores: &ThreadScores,
    cfg: &InferenceConfig,
) -> Result<LabelAssignment, InferenceError> {
    cfg.assert_valid();
    let s = scores.floored(cfg.epsilon);
    let n = s.n();
    if n == 0 {
        return Ok(LabelAssignment {
            labels: Vec::new(),
            objective_value: 0.0,
            decoder: DecoderKind::Ilp,
        });
    }

    let raw_local: Vec<(f64, f64)> = (0..n)
        .map(|i| (-s.s_good(i).ln(), -s.s_bad(i).ln()))
        .collect();
    let mut pair_costs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = s.s_pair(i, j);
            pair_costs.push((-p.ln(), -(1.0 - p).ln()));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let da = (raw_local[a].0 - raw_local[a].1).abs();
        let db = (raw_local[b].0 - raw_local[b].1).abs();
        db.partial_cmp(&da).expect("finite costs").then(a.cmp(&b))
    });
    let ordered_local: Vec<(f64, f64)> = order.iter().map(|&i| raw_local[i]).collect();

    let mut suffix_local_min = vec![0.0; n + 1];
    for d in (0..n).rev() {
        let (cg, cb) = ordered_local[d];
        suffix_local_min[d] = suffix_local_min[d + 1] + cfg.lambda * cg.min(cb);
    }
    let all_pairs_min: f64 = pair_costs
        .iter()
        .map(|&(cs, cd)| (1.0 - cfg.lambda) * cs.min(cd))
        .sum();

    let mut search = IlpSearch {
        lambda: cfg.lambda,
        local_costs: &ordered_local,
        pair_costs: &pair_costs,
        order: &order,
        n,
        assignment: vec![Label::Good; n],
        suffix_local_min,
        best_cost: f64::INFINITY,
        best_labels: None,
        nodes: 0,
        budget: cfg.node_budget,
    };
    search
        .search(0, 0.0, all_pairs_min)
        .map_err(|()| InferenceError::NodeBudgetExceeded {
            budget: cfg.node_budget,
        })?;

    let labels = search.best_labels.expect("search visited a leaf");
    let objective_value = ilp_cost(&labels, scores, cfg);
    Ok(LabelAssignment {
        labels,
        objective_value,
        decoder: DecoderKind::Ilp,
    })
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

const ORACLE_LIMIT: usize = 20;

fn brute_force<F>(
    n: usize,
    decoder: DecoderKind,
    mut cost: F,
) -> Result<LabelAssignment, InferenceError>
where
    F: FnMut(&[Label]) -> f64,
{
    if n > ORACLE_LIMIT {
        return Err(InferenceError::OracleLimit {
            n,
            limit: ORACLE_LIMIT,
        });
    }
    let mut best_cost = f64::INFINITY;
    let mut best_labels = vec![Label::Good; n];
    let mut labels = vec![Label::Good; n];
    // Masks enumerate labelings in lexicographic order with Good < Bad when
    // comment 0 occupies the most significant bit, so the first strict
    // improvement is the lexicographically smallest optimum.
    for mask in 0u64..(1u64 << n) {
        for (i, label) in labels.iter_mut().enumerate() {
            *label = if mask >> (n - 1 - i) & 1 == 0 {
                Label::Good
            } else {
                Label::Bad
            };
        }
        let c = cost(&labels);
        if c < best_cost {
            best_cost = c;
            best_labels.copy_from_slice(&labels);
        }
    }
    if n == 0 {
        best_cost = 0.0;
    }
    Ok(LabelAssignment {
        labels: best_labels,
        objective_value: best_cost,
        decoder,
    })
}

/// Exhaustive minimizer of the partition cost; ties break to the
/// lexicographically smallest labeling with Good < Bad. Limited to n <= 20.
pub fn brute_force_cut_decode(
    scores: &ThreadScores,
    cfg: &InferenceConfig,
) -> Result<LabelAssignment, InferenceError> {
    cfg.assert_valid();
    brute_force(scores.n(), DecoderKind::BruteCut, |labels| {
        partition_cost(labels, scores, cfg)
    })
}

/// Exhaustive minimizer of the ILP objective; same tie handling and limit as
/// [`brute_force_cut_decode`].
pub fn brute_force_ilp_decode(
    scores: &ThreadScores,
    cfg: &InferenceConfig,
) -> Result<LabelAssignment, InferenceError> {
    cfg.assert_valid();
    brute_force(scores.n(), DecoderKind::BruteIlp, |labels| {
        ilp_cost(labels, scores, cfg)
    })
}

// ---------------------------------------------------------------------------
// Scores interchange format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScoresRecord {
    question_id: String,
    local: Vec<(f64, f64)>,
    pairwise: std::collections::BTreeMap<String, f64>,
}

/// One JSONL line in the scores interchange format:
/// `{"question_id", "local": [[s_G, s_B], ...], "pairwise": {"i,j": s_ij}}`
/// with 0-based pair keys indexing into `local`.
pub fn scores_to_jsonl_line(question_id: &str, scores: &ThreadScores) -> String {
    let n = scores.n();
    let mut pairwise = std::collections::BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairwise.insert(format!("{i},{j}"), scores.s_pair(i, j));
        }
    }
    let record = ScoresRecord {
        question_id: question_id.to_string(),
        local: (0..n).map(|i| (scores.s_good(i), scores.s_bad(i))).collect(),
        pairwise,
    };
    serde_json::to_string(&record).expect("scores record serializes")
}

/// Parse the scores interchange format; every pair `i < j` must be present.
pub fn scores_from_jsonl(text: &str) -> Result<Vec<(String, ThreadScores)>, InferenceError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoresRecord =
            serde_json::from_str(line).map_err(|e| InferenceError::ScoresFormat {
                line: line_no,
                message: e.to_string(),
            })?;
        let n = record.local.len();
        let mut pairwise = vec![f64::NAN; n * n.saturating_sub(1) / 2];
        for (key, value) in &record.pairwise {
            let parsed = key.split_once(',').and_then(|(a, b)| {
                Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?))
            });
            let Some((i, j)) = parsed else {
                return Err(InferenceError::ScoresFormat {
                    line: line_no,
                    message: format!("bad pair key {key:?}"),
                });
            };
            if i >= j || j >= n {
                return Err(InferenceError::ScoresFormat {
                    line: line_no,
                    message: format!("pair key {key:?} out of range for {n} comments"),
                });
            }
            pairwise[pair_index(n, i, j)] = *value;
        }
        if pairwise.iter().any(|v| v.is_nan()) {
            return Err(InferenceError::ScoresFormat {
                line: line_no,
                message: "missing pairwise entries".to_string(),
            });
        }
        let scores = ThreadScores::new(record.local, pairwise).map_err(|e| {
            InferenceError::ScoresFormat {
                line: line_no,
                message: e.to_string(),
            }
        })?;
        out.push((record.question_id, scores));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> ThreadScores {
        let local: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let g: f64 = rng.random_range(0.01..0.99);
                (g, 1.0 - g)
            })
            .collect();
        let pairwise: Vec<f64> = (0..n * n.saturating_sub(1) / 2)
            .map(|_| rng.random_range(0.01..0.99))
            .collect();
        ThreadScores::new(local, pairwise).unwrap()
    }

    fn scores_2(s1g: f64, s2g: f64, s12: f64) -> ThreadScores {
        ThreadScores::new(vec![(s1g, 1.0 - s1g), (s2g, 1.0 - s2g)], vec![s12]).unwrap()
    }

    #[test]
    fn local_decode_examples() {
        let scores = ThreadScores::new(
            vec![(0.9, 0.1), (0.2, 0.8), (0.6, 0.4)],
            vec![0.5, 0.5, 0.5],
        )
        .unwrap();
        let out = local_decode(&scores, &InferenceConfig::default());
        assert_eq!(out.labels, vec![Label::Good, Label::Bad, Label::Good]);
        let tie = ThreadScores::new(vec![(0.5, 0.5)], vec![]).unwrap();
        assert_eq!(
            local_decode(&tie, &InferenceConfig::default()).labels,
            vec![Label::Good]
        );
    }

    #[test]
    fn partition_cost_hand_example() {
        // n=2, labels [Good, Bad], lambda 0.5, s_1B=0.2, s_2G=0.3, s_12=0.4
        let scores = scores_2(0.8, 0.3, 0.4);
        let cfg = InferenceConfig::with_lambda(0.5);
        let cost = partition_cost(&[Label::Good, Label::Bad], &scores, &cfg);
        assert!((cost - 0.45).abs() < 1e-9, "cost = {cost}");
    }

    #[test]
    fn partition_cost_degenerate_lambdas() {
        let scores = scores_2(0.8, 0.3, 0.4);
        let at_one = partition_cost(&[Label::Good, Label::Good], &scores, &InferenceConfig::with_lambda(1.0));
        assert!((at_one - (0.2 + 0.7)).abs() < 1e-6);
        let at_zero = partition_cost(&[Label::Bad, Label::Bad], &scores, &InferenceConfig::with_lambda(0.0));
        assert!(at_zero.abs() < 1e-12);
    }

    #[test]
    fn cut_decode_prefers_cohesion() {
        // Strong pair pull drags the weak comment to Good: keeping both
        // together costs 0.5*(0.1 + 0.55) = 0.325, while splitting pays the
        // 0.9 pair mass on top of the local terms.
        let scores = scores_2(0.9, 0.45, 0.9);
        let cfg = InferenceConfig::with_lambda(0.5);
        let out = graph_cut_decode(&scores, &cfg);
        assert_eq!(out.labels, vec![Label::Good, Label::Good]);
        assert!((out.objective_value - 0.325).abs() < 1e-9);
        let oracle = brute_force_cut_decode(&scores, &cfg).unwrap();
        assert_eq!(oracle.labels, out.labels);
    }

    #[test]
    fn single_comment_flow_hand_trace() {
        let mut net = FlowNetwork::new(3, 0, 2);
        net.add_edge(0, 1, 0.3);
        net.add_edge(1, 2, 0.7);
        let (flow, side) = max_flow(&net);
        assert!((flow - 0.3).abs() < 1e-12);
        assert_eq!(side.into_iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn zero_capacity_network() {
        let mut net = FlowNetwork::new(4, 0, 3);
        net.add_edge(0, 1, 0.0);
        net.add_edge(1, 3, 0.0);
        net.add_undirected_edge(1, 2, 0.0);
        let (flow, side) = max_flow(&net);
        assert_eq!(flow, 0.0);
        assert_eq!(side.into_iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn flow_equals_cut_capacity_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let scores = random_scores(&mut rng, n);
            let cfg = InferenceConfig::with_lambda(rng.random_range(0.0..=1.0));
            let net = FlowNetwork::from_thread_scores(&scores, &cfg);
            let (flow, side) = max_flow(&net);
            let cut = net.cut_capacity(&side);
            assert!(
                (flow - cut).abs() < 1e-9,
                "flow {flow} != cut {cut} (n={n}, lambda={})",
                cfg.lambda
            );
        }
    }

    #[test]
    fn cut_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=10);
            let scores = random_scores(&mut rng, n);
            let cfg = InferenceConfig::with_lambda(rng.random_range(0.0..=1.0));
            let cut = graph_cut_decode(&scores, &cfg);
            let oracle = brute_force_cut_decode(&scores, &cfg).unwrap();
            assert!(
                (cut.objective_value - oracle.objective_value).abs() < 1e-9,
                "cut {} != oracle {} (n={n}, lambda={})",
                cut.objective_value,
                oracle.objective_value,
                cfg.lambda
            );
        }
    }

    #[test]
    fn ilp_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = rng.random_range(1..=10);
            let scores = random_scores(&mut rng, n);
            let cfg = InferenceConfig::with_lambda(rng.random_range(0.0..=1.0));
            let ilp = ilp_decode(&scores, &cfg).unwrap();
            let oracle = brute_force_ilp_decode(&scores, &cfg).unwrap();
            assert!(
                (ilp.objective_value - oracle.objective_value).abs() < 1e-9,
                "ilp {} != oracle {} (n={n}, lambda={})",
                ilp.objective_value,
                oracle.objective_value,
                cfg.lambda
            );
        }
    }

    #[test]
    fn lambda_one_reduces_every_decoder_to_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = InferenceConfig::with_lambda(1.0);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let scores = random_scores(&mut rng, n);
            let local = local_decode(&scores, &cfg);
            let cut = graph_cut_decode(&scores, &cfg);
            let ilp = ilp_decode(&scores, &cfg).unwrap();
            assert_eq!(local.labels, cut.labels);
            assert_eq!(local.labels, ilp.labels);
        }
    }

    #[test]
    fn ilp_two_comment_example() {
        // Uninformative pairwise score: both pair sides cost the same, so
        // the local argmax wins.
        let scores = scores_2(0.8, 0.6, 0.5);
        let out = ilp_decode(&scores, &InferenceConfig::with_lambda(0.5)).unwrap();
        assert_eq!(out.labels, vec![Label::Good, Label::Good]);
    }

    #[test]
    fn lambda_zero_cut_goes_single_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.random_range(2..=8);
            let scores = random_scores(&mut rng, n);
            let out = graph_cut_decode(&scores, &InferenceConfig::with_lambda(0.0));
            let first = out.labels[0];
            assert!(out.labels.iter().all(|&l| l == first));
            assert!(out.objective_value.abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_ties_break_lexicographically() {
        // Uniform scores make every labeling cost the same under the cut
        // objective; all-Good is the lexicographically smallest.
        let scores =
            ThreadScores::new(vec![(0.5, 0.5), (0.5, 0.5)], vec![0.5]).unwrap();
        let out = brute_force_cut_decode(&scores, &InferenceConfig::with_lambda(1.0)).unwrap();
        assert_eq!(out.labels, vec![Label::Good, Label::Good]);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scores = random_scores(&mut rng, 21);
        assert!(matches!(
            brute_force_cut_decode(&scores, &InferenceConfig::default()),
            Err(InferenceError::OracleLimit { n: 21, limit: 20 })
        ));
    }

    #[test]
    fn node_budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scores = random_scores(&mut rng, 12);
        let cfg = InferenceConfig {
            lambda: 0.5,
            node_budget: 3,
            ..InferenceConfig::default()
        };
        assert!(matches!(
            ilp_decode(&scores, &cfg),
            Err(InferenceError::NodeBudgetExceeded { budget: 3 })
        ));
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let n = rng.random_range(2..=8);
            let scores = random_scores(&mut rng, n);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted = ThreadScores::new(
                perm.iter().map(|&p| (scores.s_good(p), scores.s_bad(p))).collect(),
                {
                    let mut pw = Vec::new();
                    for i in 0..n {
                        for j in (i + 1)..n {
                            pw.push(scores.s_pair(perm[i], perm[j]));
                        }
                    }
                    pw
                },
            )
            .unwrap();
            let cfg = InferenceConfig::with_lambda(0.4);
            let base = ilp_decode(&scores, &cfg).unwrap();
            let moved = ilp_decode(&permuted, &cfg).unwrap();
            // Costs agree; with non-degenerate random scores the optimum is
            // unique, so labels map through the permutation.
            assert!((base.objective_value - moved.objective_value).abs() < 1e-9);
            for (i, &p) in perm.iter().enumerate() {
                assert_eq!(moved.labels[i], base.labels[p]);
            }
        }
    }

    #[test]
    fn objective_values_are_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let n = rng.random_range(1..=8);
            let scores = random_scores(&mut rng, n);
            let cfg = InferenceConfig::with_lambda(rng.random_range(0.0..=1.0));
            let cut = graph_cut_decode(&scores, &cfg);
            assert!(
                (cut.objective_value - partition_cost(&cut.labels, &scores, &cfg)).abs() < 1e-9
            );
            let ilp = ilp_decode(&scores, &cfg).unwrap();
            assert!((ilp.objective_value - ilp_cost(&ilp.labels, &scores, &cfg)).abs() < 1e-9);
            let local = local_decode(&scores, &cfg);
            let lambda_one = InferenceConfig { lambda: 1.0, ..cfg };
            assert!(
                (local.objective_value - partition_cost(&local.labels, &scores, &lambda_one))
                    .abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn scores_validation() {
        assert!(ThreadScores::new(vec![(0.5, 0.6)], vec![]).is_err());
        assert!(ThreadScores::new(vec![(0.5, 0.5)], vec![0.5]).is_err());
        assert!(ThreadScores::new(vec![(1.2, -0.2)], vec![]).is_err());
        let s = ThreadScores::new(vec![(1.0, 0.0), (0.5, 0.5)], vec![0.0]).unwrap();
        let f = s.floored(1e-6);
        assert_eq!(f.s_good(0), 1.0 - 1e-6);
        assert_eq!(f.s_bad(0), 1e-6);
        assert_eq!(f.s_pair(0, 1), 1e-6);
    }

    #[test]
    fn scores_jsonl_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let scores = random_scores(&mut rng, 4);
        let line = scores_to_jsonl_line("Q7", &scores);
        let parsed = scores_from_jsonl(&line).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].0, "Q7");
        assert_eq!(parsed[0].1, scores);
        // Missing pair entries are rejected.
        let broken = line.replace("\"0,1\":", "\"oops\":");
        assert!(scores_from_jsonl(&broken).is_err());
    }
}

//! Message-passing inference: sum-product, min-sum, max-product and their
//! k-best variants, all driven by one schedule-consuming engine.

use crate::error::SolveError;
use crate::graph::{FactorGraph, FactorId, VarId};
use crate::kernel::{self, Semiring};
use crate::schedule::{Direction, EdgeId, EdgeIndex, Schedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Maximum number of schedule passes.
    pub iterations: usize,
    /// Stop once a pass changes no message by more than this (L∞).
    pub epsilon: f64,
    /// Keep only the `k` best entries of each incoming message in factor updates.
    pub k: Option<usize>,
    /// Factor-to-variable damping `λ`: `new = (1-λ)·computed + λ·old`.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            iterations: 100,
            epsilon: 1e-9,
            k: None,
            damping: 0.0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self, graph: &FactorGraph) -> Result<(), SolveError> {
        if self.iterations == 0 {
            return Err(SolveError::InvalidOption("iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(SolveError::InvalidOption("epsilon must be finite and > 0".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(SolveError::InvalidOption("damping must be in [0, 1)".into()));
        }
        if let Some(k) = self.k {
            let max = graph
                .var_ids()
                .filter(|&v| !graph.factors_of(v).is_empty())
                .map(|v| graph.variable(v).size())
                .min()
                .unwrap_or(usize::MAX);
            if k == 0 || k > max {
                return Err(SolveError::KOutOfRange { k, max });
            }
        }
        Ok(())
    }
}

/// Per-edge message vectors stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl Messages {
    pub fn uniform(graph: &FactorGraph, edges: &EdgeIndex, semiring: Semiring) -> Self {
        let mut offsets = Vec::with_capacity(edges.len() + 1);
        let mut data = Vec::new();
        for e in edges.edges() {
            offsets.push(data.len());
            let d = graph.variable(e.var).size();
            data.extend(std::iter::repeat(semiring.uniform(d)).take(d));
        }
        offsets.push(data.len());
        Self { offsets, data }
    }

    pub fn get(&self, e: EdgeId) -> &[f64] {
        &self.data[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn get_mut(&mut self, e: EdgeId) -> &mut [f64] {
        &mut self.data[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn offset(&self, e: EdgeId) -> usize {
        self.offsets[e]
    }

    pub fn edge_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Both message directions for every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub to_factor: Messages,
    pub to_variable: Messages,
}

impl MessageState {
    pub fn uniform(graph: &FactorGraph, edges: &EdgeIndex, semiring: Semiring) -> Self {
        let m = Messages::uniform(graph, edges, semiring);
        Self {
            to_factor: m.clone(),
            to_variable: m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub passes: usize,
    pub converged: bool,
    /// L∞ message change of each pass.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution {
    pub semiring: Semiring,
    /// Normalized marginals (max-marginals for min-sum / max-product).
    pub beliefs: Vec<Vec<f64>>,
    /// Min-sum belief costs, minimum exactly zero.
    pub costs: Option<Vec<Vec<f64>>>,
    /// Best value index per variable for min-sum and max-product (lowest
    /// index on ties).
    pub assignment: Option<Vec<usize>>,
    pub stats: RunStats,
}

/// Owns the message state of one solve over a borrowed graph.
pub struct BpEngine<'g> {
    graph: &'g FactorGraph,
    edges: EdgeIndex,
    semiring: Semiring,
    options: SolveOptions,
    inputs: Vec<Vec<f64>>,
    state: MessageState,
    scratch: Vec<f64>,
    truncated: Vec<Vec<f64>>,
}

impl<'g> BpEngine<'g> {
    pub fn new(graph: &'g FactorGraph, semiring: Semiring, options: SolveOptions) -> Result<Self, SolveError> {
        let edges = EdgeIndex::new(graph);
        let state = MessageState::uniform(graph, &edges, semiring);
        Self::assemble(graph, edges, semiring, options, state)
    }

    /// Engine resuming from a previous message state (same topology).
    pub fn with_state(
        graph: &'g FactorGraph,
        semiring: Semiring,
        options: SolveOptions,
        state: MessageState,
    ) -> Result<Self, SolveError> {
        let edges = EdgeIndex::new(graph);
        assert_eq!(state.to_factor.edge_count(), edges.len(), "message state topology mismatch");
        Self::assemble(graph, edges, semiring, options, state)
    }

    fn assemble(
        graph: &'g FactorGraph,
        edges: EdgeIndex,
        semiring: Semiring,
        options: SolveOptions,
        state: MessageState,
    ) -> Result<Self, SolveError> {
        options.validate(graph)?;
        let inputs = encode_inputs(graph, semiring);
        Ok(Self {
            graph,
            edges,
            semiring,
            options,
            inputs,
            state,
            scratch: Vec::new(),
            truncated: Vec::new(),
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        self.graph
    }

    pub fn edges(&self) -> &EdgeIndex {
        &self.edges
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    pub fn state(&self) -> &MessageState {
        &self.state
    }

    pub fn into_state(self) -> MessageState {
        self.state
    }

    /// Resets all messages to uniform.
    pub fn reset(&mut self) {
        self.state = MessageState::uniform(self.graph, &self.edges, self.semiring);
    }

    /// Recomputes the message along edge `e` toward its factor. Returns the
    /// L∞ change.
    pub fn update_var_to_factor(&mut self, e: EdgeId) -> Result<f64, SolveError> {
        let edge = self.edges.edge(e);
        let d = self.graph.variable(edge.var).size();
        self.scratch.resize(d, 0.0);
        let incoming: Vec<&[f64]> = self
            .edges
            .var_edges(edge.var)
            .iter()
            .filter(|&&o| o != e)
            .map(|&o| self.state.to_variable.get(o))
            .collect();
        kernel::variable_product(self.semiring, &self.inputs[edge.var.0], &incoming, &mut self.scratch);
        if kernel::normalize_message(self.semiring, &mut self.scratch).is_err() {
            return Err(self.contradiction(edge.var));
        }
        Ok(store(self.state.to_factor.get_mut(e), &self.scratch))
    }

    /// Recomputes the message along edge `e` toward its variable. Returns the
    /// L∞ change.
    pub fn update_factor_to_var(&mut self, e: EdgeId) -> Result<f64, SolveError> {
        let edge = self.edges.edge(e);
        let factor = self.graph.factor(edge.factor).expect("live factor");
        let table = self.graph.table(factor.table());
        let d = self.graph.variable(edge.var).size();
        let base = e - edge.position;
        let degree = factor.degree();

        if let Some(k) = self.options.k {
            self.truncated.resize(degree, Vec::new());
            for p in 0..degree {
                let src = self.state.to_factor.get(base + p);
                let buf = &mut self.truncated[p];
                buf.clear();
                buf.extend_from_slice(src);
                if p != edge.position {
                    kernel::truncate_k_best(self.semiring, buf, k);
                }
            }
        }
        let incoming: Vec<&[f64]> = if self.options.k.is_some() {
            self.truncated.iter().map(|v| v.as_slice()).collect()
        } else {
            (0..degree).map(|p| self.state.to_factor.get(base + p)).collect()
        };

        self.scratch.clear();
        self.scratch.resize(d, self.semiring.zero());
        kernel::factor_accumulate(
            table,
            self.semiring,
            edge.position,
            &incoming,
            table.entry_range(),
            &mut self.scratch,
        );
        if kernel::normalize_message(self.semiring, &mut self.scratch).is_err() {
            return Err(SolveError::Contradiction {
                variable: edge.var,
                edges: factor.vars().iter().map(|&v| (edge.factor, v)).collect(),
            });
        }
        let lambda = self.options.damping;
        if lambda > 0.0 {
            let old = self.state.to_variable.get(e);
            for (new, &prev) in self.scratch.iter_mut().zip(old) {
                if *new < kernel::SATURATED_COST && prev < kernel::SATURATED_COST {
                    *new = (1.0 - lambda) * *new + lambda * prev;
                }
            }
        }
        Ok(store(self.state.to_variable.get_mut(e), &self.scratch))
    }

    /// Applies resolved steps in order; returns the largest change.
    pub fn apply(&mut self, steps: &[(EdgeId, Direction)]) -> Result<f64, SolveError> {
        let mut delta: f64 = 0.0;
        for &(e, dir) in steps {
            let change = match dir {
                Direction::ToFactor => self.update_var_to_factor(e)?,
                Direction::ToVariable => self.update_factor_to_var(e)?,
            };
            delta = delta.max(change);
        }
        Ok(delta)
    }

    /// Runs passes until convergence or the iteration cap. Non-repeating
    /// schedules run exactly once.
    pub fn run(&mut self, schedule: &Schedule) -> Result<RunStats, SolveError> {
        let steps = schedule.resolve(&self.edges)?;
        let cap = if schedule.repeats() { self.options.iterations } else { 1 };
        let mut deltas = Vec::new();
        let mut converged = !schedule.repeats();
        for _ in 0..cap {
            let delta = self.apply(&steps)?;
            deltas.push(delta);
            if delta < self.options.epsilon {
                converged = true;
                break;
            }
        }
        Ok(RunStats {
            passes: deltas.len(),
            converged,
            deltas,
        })
    }

    /// Runs exactly `passes` applications of the schedule.
    pub fn run_passes(&mut self, schedule: &Schedule, passes: usize) -> Result<Vec<f64>, SolveError> {
        let steps = schedule.resolve(&self.edges)?;
        (0..passes).map(|_| self.apply(&steps)).collect()
    }

    /// Unnormalized-then-normalized belief of `var` in semiring encoding.
    pub fn raw_belief(&self, var: VarId) -> Result<Vec<f64>, SolveError> {
        let incoming: Vec<&[f64]> = self
            .edges
            .var_edges(var)
            .iter()
            .map(|&e| self.state.to_variable.get(e))
            .collect();
        belief_from_messages(self.semiring, &self.inputs[var.0], &incoming)
            .map_err(|_| self.contradiction(var))
    }

    pub fn solution(&self, stats: RunStats) -> Result<BpSolution, SolveError> {
        let mut beliefs = Vec::with_capacity(self.graph.variable_count());
        let mut costs = Vec::new();
        let mut assignment = Vec::new();
        for v in self.graph.var_ids() {
            let raw = self.raw_belief(v)?;
            assignment.push(kernel::best_index(self.semiring, &raw));
            match self.semiring {
                Semiring::MinSum => {
                    beliefs.push(kernel::costs_to_probabilities(&raw));
                    costs.push(raw);
                }
                _ => beliefs.push(raw),
            }
        }
        Ok(BpSolution {
            semiring: self.semiring,
            beliefs,
            costs: (self.semiring == Semiring::MinSum).then_some(costs),
            assignment: (self.semiring != Semiring::SumProduct).then_some(assignment),
            stats,
        })
    }

    fn contradiction(&self, var: VarId) -> SolveError {
        SolveError::Contradiction {
            variable: var,
            edges: self
                .edges
                .var_edges(var)
                .iter()
                .map(|&e| (self.edges.edge(e).factor, var))
                .collect(),
        }
    }
}

/// Input weights of every variable in the semiring's encoding.
pub fn encode_inputs(graph: &FactorGraph, semiring: Semiring) -> Vec<Vec<f64>> {
    graph
        .variables()
        .iter()
        .map(|v| v.input().iter().map(|&w| semiring.encode(w)).collect())
        .collect()
}

/// Normalized product of an encoded input with all incoming messages.
pub fn belief_from_messages(
    semiring: Semiring,
    input: &[f64],
    incoming: &[&[f64]],
) -> Result<Vec<f64>, kernel::NoSupport> {
    let mut out = vec![0.0; input.len()];
    kernel::variable_product(semiring, input, incoming, &mut out);
    kernel::normalize_message(semiring, &mut out)?;
    Ok(out)
}

fn store(dst: &mut [f64], src: &[f64]) -> f64 {
    let mut delta: f64 = 0.0;
    for (d, &s) in dst.iter_mut().zip(src) {
        delta = delta.max((*d - s).abs());
        *d = s;
    }
    delta
}

/// Runs `schedule` to convergence (or the iteration cap) and returns beliefs.
pub fn solve(
    graph: &FactorGraph,
    schedule: &Schedule,
    options: &SolveOptions,
    semiring: Semiring,
) -> Result<BpSolution, SolveError> {
    let mut engine = BpEngine::new(graph, semiring, *options)?;
    let stats = engine.run(schedule)?;
    engine.solution(stats)
}

/// [`solve`] with k-best message truncation; `options.k` must be set.
pub fn solve_kbest(
    graph: &FactorGraph,
    schedule: &Schedule,
    options: &SolveOptions,
    semiring: Semiring,
) -> Result<BpSolution, SolveError> {
    if options.k.is_none() {
        return Err(SolveError::InvalidOption("k-best solve needs k".into()));
    }
    solve(graph, schedule, options, semiring)
}

/// Factor id and variable id pairs of `var`'s edges, for diagnostics.
pub fn edges_of(graph: &FactorGraph, var: VarId) -> Vec<(FactorId, VarId)> {
    graph.factors_of(var).iter().map(|&f| (f, var)).collect()
}

//! Rolled-up line graphs: a template repeated along one data stream inside a
//! fixed-size window.
//!
//! The window holds `B` template instances over `B + span` stream slots,
//! where `span` is the largest slice offset. Advancing retires slot 0: the
//! messages instance 0 sends into the surviving slots are frozen into those
//! slots' input multipliers, every slot shifts down by one, and a new data
//! row enters at the back. Variable and factor counts never change.
//!
//! When the data source runs dry, unfilled slots get uniform inputs and the
//! instances touching them are left out of the solve, so a window that covers
//! the whole stream reproduces the unrolled graph.

use std::collections::VecDeque;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;

use crate::bp::{BpEngine, BpSolution, MessageState, SolveOptions};
use crate::domain::DiscreteDomain;
use crate::error::StreamError;
use crate::graph::{FactorGraph, FactorId, VarId};
use crate::kernel::{self, Semiring};
use crate::schedule::{Direction, EdgeId, Schedule};

/// Row-per-step input weights.
pub trait DataSource: Send {
    /// Next row, or `None` once the source is exhausted.
    fn next_row(&mut self) -> Option<Vec<f64>>;
}

/// In-memory rows.
#[derive(Debug, Clone)]
pub struct ArraySource {
    rows: VecDeque<Vec<f64>>,
}

impl ArraySource {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows: rows.into() }
    }

    /// `row` repeated `n` times.
    pub fn repeat(row: &[f64], n: usize) -> Self {
        Self::new(vec![row.to_vec(); n])
    }
}

impl DataSource for ArraySource {
    fn next_row(&mut self) -> Option<Vec<f64>> {
        self.rows.pop_front()
    }
}

/// Consumer end of a bounded queue; the producer blocks when it is full.
/// Dropping every sender ends the stream.
pub struct ChannelSource {
    rx: Receiver<Vec<f64>>,
}

impl ChannelSource {
    pub fn bounded(capacity: usize) -> (SyncSender<Vec<f64>>, ChannelSource) {
        let (tx, rx) = sync_channel(capacity);
        (tx, ChannelSource { rx })
    }
}

impl DataSource for ChannelSource {
    fn next_row(&mut self) -> Option<Vec<f64>> {
        self.rx.recv().ok()
    }
}

#[derive(Debug, Clone)]
struct Slot {
    data: Option<Vec<f64>>,
    multiplier: Vec<f64>,
}

/// A streaming window over one stream variable.
pub struct StreamingGraph {
    template: Arc<FactorGraph>,
    template_name: String,
    domain: DiscreteDomain,
    offsets: Vec<usize>,
    buffer: usize,
    source: Box<dyn DataSource>,
    lookahead: Option<Vec<f64>>,
    source_done: bool,

    window: FactorGraph,
    slot_vars: Vec<VarId>,
    slots: VecDeque<Slot>,
    /// Stream index of slot 0.
    position: usize,

    semiring: Semiring,
    options: SolveOptions,
    state: Option<MessageState>,
    last: Option<BpSolution>,
    initialized: bool,
}

impl StreamingGraph {
    /// Repeats `template` with its boundary bound to the stream slices at
    /// `offsets` (one per boundary variable, relative to the instance start).
    pub fn new(
        template_name: &str,
        template: Arc<FactorGraph>,
        domain: DiscreteDomain,
        offsets: &[usize],
        source: Box<dyn DataSource>,
    ) -> Result<Self, StreamError> {
        if offsets.len() != template.boundary().len() {
            return Err(StreamError::SliceMismatch {
                boundary: template.boundary().len(),
                slices: offsets.len(),
            });
        }
        let min = offsets.iter().copied().min().unwrap_or(0);
        let offsets: Vec<usize> = offsets.iter().map(|o| o - min).collect();
        let mut s = Self {
            template,
            template_name: template_name.to_string(),
            domain,
            offsets,
            buffer: 1,
            source,
            lookahead: None,
            source_done: false,
            window: FactorGraph::new(),
            slot_vars: Vec::new(),
            slots: VecDeque::new(),
            position: 0,
            semiring: Semiring::SumProduct,
            options: SolveOptions::default(),
            state: None,
            last: None,
            initialized: false,
        };
        s.build_window()?;
        Ok(s)
    }

    /// Number of template instances held in the window. Takes effect
    /// immediately and discards any solved state.
    pub fn set_buffer_size(&mut self, buffer: usize) -> Result<(), StreamError> {
        if buffer == 0 {
            return Err(StreamError::ZeroBuffer);
        }
        self.buffer = buffer;
        self.build_window()
    }

    pub fn buffer_size(&self) -> usize {
        self.buffer
    }

    pub fn set_solver(&mut self, semiring: Semiring, options: SolveOptions) {
        self.semiring = semiring;
        self.options = options;
    }

    /// Slots in the window: buffer size plus the template's slice span.
    pub fn window_len(&self) -> usize {
        self.buffer + self.offsets.iter().copied().max().unwrap_or(0)
    }

    pub fn window(&self) -> &FactorGraph {
        &self.window
    }

    pub fn slot_vars(&self) -> &[VarId] {
        &self.slot_vars
    }

    /// Stream index held by slot 0.
    pub fn position(&self) -> usize {
        self.position
    }

    fn build_window(&mut self) -> Result<(), StreamError> {
        let mut g = FactorGraph::new();
        let len = self.window_len();
        let mut vars = Vec::with_capacity(len);
        for i in 0..len {
            vars.push(g.add_named_variable(&format!("slot[{i}]"), &self.domain)?);
        }
        for i in 0..self.buffer {
            let bound: Vec<VarId> = self.offsets.iter().map(|&o| vars[i + o]).collect();
            g.add_nested_graph(&self.template_name, &self.template, &bound)?;
        }
        self.window = g;
        self.slot_vars = vars;
        self.state = None;
        self.last = None;
        self.initialized = false;
        Ok(())
    }

    fn pull(&mut self) -> Result<Option<Vec<f64>>, StreamError> {
        let row = match self.lookahead.take() {
            Some(r) => Some(r),
            None if self.source_done => None,
            None => self.source.next_row(),
        };
        if row.is_none() {
            self.source_done = true;
        }
        if let Some(r) = &row {
            let expected = self.domain.size();
            if r.len() != expected {
                return Err(StreamError::RowLength {
                    row: self.position + self.slots.len(),
                    expected,
                    got: r.len(),
                });
            }
        }
        Ok(row)
    }

    fn source_has_more(&mut self) -> bool {
        if self.lookahead.is_none() && !self.source_done {
            self.lookahead = self.source.next_row();
            self.source_done = self.lookahead.is_none();
        }
        self.lookahead.is_some()
    }

    /// Fills the window from the data source and resets all messages.
    pub fn initialize(&mut self) -> Result<(), StreamError> {
        self.slots.clear();
        let d = self.domain.size();
        for _ in 0..self.window_len() {
            let data = self.pull()?;
            self.slots.push_back(Slot { data, multiplier: vec![1.0; d] });
        }
        self.state = None;
        self.last = None;
        self.initialized = true;
        self.sync_inputs()
    }

    fn sync_inputs(&mut self) -> Result<(), StreamError> {
        let d = self.domain.size();
        for (slot, &var) in self.slots.iter().zip(&self.slot_vars) {
            let mut input = slot.data.clone().unwrap_or_else(|| vec![1.0; d]);
            for (x, m) in input.iter_mut().zip(&slot.multiplier) {
                *x *= m;
            }
            self.window.set_input(var, &input)?;
        }
        Ok(())
    }

    /// Instances whose slots all hold data.
    fn active_factors(&self) -> Vec<bool> {
        let mut active = vec![false; self.window.factor_id_bound()];
        for (i, inst) in self.window.nested().iter().enumerate() {
            let live = self.offsets.iter().all(|&o| self.slots[i + o].data.is_some());
            for f in &inst.factors {
                active[f.0] = live;
            }
        }
        active
    }

    fn schedule(&self) -> Result<Schedule, StreamError> {
        let full = Schedule::default_for(&self.window).map_err(crate::error::SolveError::from)?;
        let active = self.active_factors();
        if active.iter().all(|&a| a) {
            return Ok(full);
        }
        let steps = full.steps().iter().filter(|s| active[s.factor.0]).copied().collect();
        Ok(Schedule::filtered(&full, steps))
    }

    /// Runs BP on the window. `reinitialize` resets messages to uniform;
    /// otherwise the previous window's messages seed the run.
    pub fn solve(&mut self, reinitialize: bool) -> Result<&BpSolution, StreamError> {
        if !self.initialized {
            self.initialize()?;
        }
        let schedule = self.schedule()?;
        let mut engine = match (reinitialize, self.state.take()) {
            (false, Some(state)) => BpEngine::with_state(&self.window, self.semiring, self.options, state)?,
            _ => BpEngine::new(&self.window, self.semiring, self.options)?,
        };
        let stats = engine.run(&schedule)?;
        let solution = engine.solution(stats)?;
        self.state = Some(engine.into_state());
        Ok(self.last.insert(solution))
    }

    /// True while some stream row remains that has not yet reached slot 0.
    pub fn has_next(&mut self) -> bool {
        self.slots.iter().skip(1).any(|s| s.data.is_some()) || self.source_has_more()
    }

    /// Retires slot 0 and shifts the window by one stream step.
    pub fn advance(&mut self) -> Result<(), StreamError> {
        if !self.has_next() {
            return Err(StreamError::Exhausted);
        }
        let state = self.state.take().ok_or(StreamError::NotSolved)?;
        if self.last.take().is_none() {
            return Err(StreamError::NotSolved);
        }
        let frozen = self.retire(state)?;
        let shifted = self.shift_messages(frozen.1);
        self.slots.pop_front();
        for (slot, msg) in self.slots.iter_mut().zip(frozen.0) {
            if let Some(m) = msg {
                for (x, v) in slot.multiplier.iter_mut().zip(m) {
                    *x *= v;
                }
                let total: f64 = slot.multiplier.iter().sum();
                slot.multiplier.iter_mut().for_each(|x| *x /= total);
            }
        }
        let data = self.pull()?;
        self.slots.push_back(Slot { data, multiplier: vec![1.0; self.domain.size()] });
        self.position += 1;
        self.state = Some(shifted);
        self.sync_inputs()
    }

    /// Refreshes instance 0's messages from the final state and returns, per
    /// surviving slot (indexed after the shift), the linear-domain product of
    /// instance 0's messages into it.
    fn retire(&self, state: MessageState) -> Result<(Vec<Option<Vec<f64>>>, MessageState), StreamError> {
        let inst0: Vec<FactorId> = self.window.nested()[0].factors.clone();
        if !self.active_factors()[inst0[0].0] {
            return Ok((vec![None; self.slots.len() - 1], state));
        }
        let mut engine = BpEngine::with_state(&self.window, self.semiring, self.options, state)?;
        let schedule = Schedule::default_for(&self.window).map_err(crate::error::SolveError::from)?;
        let steps = schedule.resolve(engine.edges()).map_err(crate::error::SolveError::from)?;
        let block: Vec<(EdgeId, Direction)> = steps
            .into_iter()
            .filter(|&(e, _)| inst0.contains(&engine.edges().edge(e).factor))
            .collect();
        engine.apply(&block)?;

        let mut out = vec![None; self.slots.len() - 1];
        for (k, &var) in self.slot_vars.iter().enumerate().skip(1) {
            let mut acc: Option<Vec<f64>> = None;
            for &e in engine.edges().var_edges(var) {
                if !inst0.contains(&engine.edges().edge(e).factor) {
                    continue;
                }
                let msg = engine.state().to_variable.get(e);
                let lin: Vec<f64> = match self.semiring {
                    Semiring::MinSum => msg
                        .iter()
                        .map(|&c| if c >= kernel::SATURATED_COST { 0.0 } else { (-c).exp() })
                        .collect(),
                    _ => msg.to_vec(),
                };
                acc = Some(match acc {
                    None => lin,
                    Some(a) => a.iter().zip(&lin).map(|(x, y)| x * y).collect(),
                });
            }
            out[k - 1] = acc;
        }
        Ok((out, engine.into_state()))
    }

    /// Moves every instance's messages down by one instance; the new last
    /// instance starts uniform.
    fn shift_messages(&self, mut state: MessageState) -> MessageState {
        let fresh = MessageState::uniform(
            &self.window,
            &crate::schedule::EdgeIndex::new(&self.window),
            self.semiring,
        );
        let instances = self.window.nested();
        if instances.len() > 1 {
            let block = fresh.to_factor.offset(edge_start(&self.window, &instances[1].factors));
            for m in [&mut state.to_factor, &mut state.to_variable] {
                let data = m.data_mut();
                data.copy_within(block.., 0);
            }
        }
        let last_start = instances
            .last()
            .map(|inst| fresh.to_factor.offset(edge_start(&self.window, &inst.factors)))
            .unwrap_or(0);
        state.to_factor.data_mut()[last_start..].copy_from_slice(&fresh.to_factor.data()[last_start..]);
        state.to_variable.data_mut()[last_start..].copy_from_slice(&fresh.to_variable.data()[last_start..]);
        state
    }

    /// Beliefs of the most recent solve, one per window slot.
    pub fn window_beliefs(&self) -> Option<Vec<Vec<f64>>> {
        self.last
            .as_ref()
            .map(|s| self.slot_vars.iter().map(|v| s.beliefs[v.0].clone()).collect())
    }

    /// Belief of the oldest slot after the most recent solve.
    pub fn first_var_belief(&self) -> Option<&[f64]> {
        self.last.as_ref().map(|s| s.beliefs[self.slot_vars[0].0].as_slice())
    }

    /// Input multiplier frozen into slot `k` by earlier retirements.
    pub fn boundary_message(&self, k: usize) -> &[f64] {
        &self.slots[k].multiplier
    }

    pub fn last_solution(&self) -> Option<&BpSolution> {
        self.last.as_ref()
    }
}

/// Edge id of the first edge of the lowest-numbered factor in `factors`.
fn edge_start(graph: &FactorGraph, factors: &[FactorId]) -> EdgeId {
    let first = factors.iter().min().expect("instance has factors");
    graph
        .factors()
        .take_while(|(id, _)| id < first)
        .map(|(_, f)| f.degree())
        .sum()
}

//! Behavioral simulator with a cycle model.
//!
//! Arithmetic goes through the same kernel routines as the software engine,
//! in the same order, so beliefs come out bit-identical. Cycle costs:
//! TIP one cycle per table-entry term, NRM one cycle per domain value, and
//! every transfer `ceil(bits / bits_per_cycle)`.

use fgraph::bp::{belief_from_messages, encode_inputs, BpSolution, MessageState, RunStats};
use fgraph::kernel::{self, Semiring};
use fgraph::schedule::EdgeIndex;
use fgraph::{FactorGraph, FactorId, SolveError, VarId};
use serde::Serialize;

use crate::alloc::{CacheStats, TableCache};
use crate::compile::{entry_bytes, VALUE_BYTES};
use crate::isa::{Instruction, MsgSource, MsgTarget, Opcode, Program, TIP_BELIEF, TIP_FIRST, TIP_VARIABLE};
use crate::limits::AccelLimits;
use crate::AccelError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpcodeStat {
    pub count: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    /// Indexed like [`Opcode::ALL`].
    pub opcodes: [OpcodeStat; 6],
    /// TIP cycles spent on factor tables and on variable-side products.
    pub tip_factor_cycles: u64,
    pub tip_variable_cycles: u64,
    /// Cycles of each factor's updates (both directions on its edges),
    /// indexed by factor id.
    pub factor_cycles: Vec<u64>,
    /// Belief readout, not attributed to any factor.
    pub readout_cycles: u64,
    pub io_cycles: u64,
    pub compute_cycles: u64,
    pub total_cycles: u64,
    pub passes: usize,
    pub cache_capacity: usize,
    pub cache: CacheStats,
}

impl CycleReport {
    pub fn opcode(&self, op: Opcode) -> OpcodeStat {
        self.opcodes[op as usize - 1]
    }

    /// Compute cycles per I/O cycle (infinite when there is no I/O).
    pub fn compute_to_io(&self) -> f64 {
        self.compute_cycles as f64 / self.io_cycles as f64
    }

    /// Virtual wall time in seconds.
    pub fn seconds(&self, limits: &AccelLimits) -> f64 {
        self.total_cycles as f64 / limits.clock_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub solution: BpSolution,
    pub report: CycleReport,
}

struct Machine<'g> {
    graph: &'g FactorGraph,
    edges: EdgeIndex,
    limits: AccelLimits,
    semiring: Semiring,
    inputs: Vec<Vec<f64>>,
    msgs: MessageState,
    /// Operand buffer; each slot remembers the generation it was loaded in.
    operands: Vec<(Vec<f64>, u64)>,
    generation: u64,
    acc: Vec<f64>,
    /// (flags, id) of the value being accumulated.
    acc_target: Option<(u32, u32)>,
    cache: TableCache,
    fresh: Vec<bool>,
    beliefs: Vec<Option<Vec<f64>>>,
    pass_delta: f64,
    report: CycleReport,
    pending: u64,
    index: usize,
}

impl<'g> Machine<'g> {
    fn malformed(&self, reason: impl Into<String>) -> AccelError {
        AccelError::Malformed { index: self.index, reason: reason.into() }
    }

    fn edge(&self, e: u32) -> Result<fgraph::schedule::Edge, AccelError> {
        let e = e as usize;
        if e >= self.edges.len() {
            return Err(self.malformed(format!("edge {e} out of range")));
        }
        Ok(self.edges.edge(e))
    }

    fn var(&self, v: u32) -> Result<VarId, AccelError> {
        if (v as usize) < self.graph.variable_count() {
            Ok(VarId(v as usize))
        } else {
            Err(self.malformed(format!("variable {v} out of range")))
        }
    }

    fn check_len(&self, len: u16, d: usize) -> Result<usize, AccelError> {
        if usize::from(len) != d {
            return Err(self.malformed(format!("length {len} but domain size {d}")));
        }
        Ok(d)
    }

    fn contradiction_at_var(&self, var: VarId) -> SolveError {
        SolveError::Contradiction {
            variable: var,
            edges: self.edges.var_edges(var).iter().map(|&e| (self.edges.edge(e).factor, var)).collect(),
        }
    }

    fn charge(&mut self, op: Opcode, cycles: u64) {
        let s = &mut self.report.opcodes[op as usize - 1];
        s.count += 1;
        s.cycles += cycles;
        if op != Opcode::Hio {
            self.pending += cycles;
        }
    }

    fn operand(&self, slot: usize, d: usize) -> Result<&[f64], AccelError> {
        match self.operands.get(slot) {
            Some((v, g)) if *g == self.generation && v.len() == d => Ok(v),
            _ => Err(self.malformed(format!("operand slot {slot} not loaded for this update"))),
        }
    }

    fn step(&mut self, ins: &Instruction) -> Result<(), AccelError> {
        match ins.op {
            Opcode::Hio => {
                let c = self.limits.io_cycles(ins.b as usize);
                self.charge(Opcode::Hio, c);
            }
            Opcode::Ldt => {
                let tid = ins.a as usize;
                let Some(table) = self.graph.tables().get(tid) else {
                    return Err(self.malformed(format!("table {tid} out of range")));
                };
                let (start, end) = (ins.b as usize, ins.c as usize);
                if start >= end || end > table.entry_count() {
                    return Err(self.malformed(format!("entry range {start}..{end} invalid for table {tid}")));
                }
                let bytes = (end - start) * entry_bytes(table);
                let slot = self.cache.load((ins.a, ins.b, ins.c), bytes)?;
                if slot != ins.len {
                    return Err(self.malformed(format!("LDT targets slot {} but the allocator chose {slot}", ins.len)));
                }
                if self.fresh.len() <= usize::from(slot) {
                    self.fresh.resize(usize::from(slot) + 1, false);
                }
                self.fresh[usize::from(slot)] = true;
                let c = self.limits.io_cycles(bytes);
                self.charge(Opcode::Ldt, c);
            }
            Opcode::Ldm => {
                let slot = ins.c as usize;
                let data: Vec<f64> = match ins.b {
                    b if b == MsgSource::Input as u32 => {
                        let v = self.var(ins.a)?;
                        self.check_len(ins.len, self.graph.variable(v).size())?;
                        self.inputs[v.0].clone()
                    }
                    b if b == MsgSource::ToFactor as u32 || b == MsgSource::ToVariable as u32 => {
                        let edge = self.edge(ins.a)?;
                        self.check_len(ins.len, self.graph.variable(edge.var).size())?;
                        let m = if b == MsgSource::ToFactor as u32 { &self.msgs.to_factor } else { &self.msgs.to_variable };
                        m.get(ins.a as usize).to_vec()
                    }
                    other => return Err(self.malformed(format!("unknown message source {other}"))),
                };
                if self.operands.len() <= slot {
                    self.operands.resize(slot + 1, (Vec::new(), u64::MAX));
                }
                let bytes = data.len() * VALUE_BYTES;
                self.operands[slot] = (data, self.generation);
                let c = self.limits.io_cycles(bytes);
                self.charge(Opcode::Ldm, c);
            }
            Opcode::Tip => self.tip(ins)?,
            Opcode::Nrm => {
                if self.acc_target.map(|(_, id)| id) != Some(ins.a) || usize::from(ins.len) != self.acc.len() {
                    return Err(self.malformed("NRM does not match the accumulated value"));
                }
                if kernel::normalize_message(self.semiring, &mut self.acc).is_err() {
                    let (flags, id) = self.acc_target.expect("checked");
                    return Err(AccelError::Solve(self.no_support(flags, id)));
                }
                self.charge(Opcode::Nrm, u64::from(ins.len));
            }
            Opcode::Stm => self.store(ins)?,
        }
        Ok(())
    }

    fn no_support(&self, flags: u32, id: u32) -> SolveError {
        if flags & TIP_BELIEF != 0 {
            return self.contradiction_at_var(VarId(id as usize));
        }
        let edge = self.edges.edge(id as usize);
        if flags & TIP_VARIABLE != 0 {
            return self.contradiction_at_var(edge.var);
        }
        let factor = self.graph.factor(edge.factor).expect("live factor");
        SolveError::Contradiction {
            variable: edge.var,
            edges: factor.vars().iter().map(|&v| (edge.factor, v)).collect(),
        }
    }

    fn tip(&mut self, ins: &Instruction) -> Result<(), AccelError> {
        let flags = ins.c;
        let mode = flags & (TIP_VARIABLE | TIP_BELIEF);
        if flags & TIP_FIRST != 0 {
            self.acc_target = Some((mode, ins.a));
        } else if self.acc_target != Some((mode, ins.a)) {
            return Err(self.malformed("TIP continues a different accumulation"));
        }
        if flags & TIP_VARIABLE != 0 {
            if flags & TIP_FIRST == 0 {
                return Err(self.malformed("variable TIP must start an accumulation"));
            }
            let var = if flags & TIP_BELIEF != 0 { self.var(ins.a)? } else { self.edge(ins.a)?.var };
            let d = self.check_len(ins.len, self.graph.variable(var).size())?;
            let count = ins.b as usize;
            if count == 0 {
                return Err(self.malformed("variable TIP needs the input operand"));
            }
            let input = self.operand(0, d)?;
            let incoming = (1..count).map(|s| self.operand(s, d)).collect::<Result<Vec<_>, _>>()?;
            let mut out = vec![0.0; d];
            kernel::variable_product(self.semiring, input, &incoming, &mut out);
            self.acc = out;
            let c = (d * count) as u64;
            self.report.tip_variable_cycles += c;
            self.charge(Opcode::Tip, c);
            return Ok(());
        }
        if flags & TIP_BELIEF != 0 {
            return Err(self.malformed("belief TIP must be a variable product"));
        }
        let edge = self.edge(ins.a)?;
        let factor = self.graph.factor(edge.factor).expect("live factor");
        let table = self.graph.table(factor.table());
        let d = self.check_len(ins.len, self.graph.variable(edge.var).size())?;
        let slot = u16::try_from(ins.b).map_err(|_| self.malformed("block slot out of range"))?;
        let Some((tid, start, end)) = self.cache.resident(slot) else {
            return Err(self.malformed(format!("TIP references slot {slot}, which is not resident")));
        };
        if tid as usize != factor.table().0 {
            return Err(self.malformed(format!("slot {slot} holds table {tid}, factor uses {}", factor.table().0)));
        }
        let fresh = self.fresh.get_mut(usize::from(slot)).expect("loaded slot");
        if *fresh {
            *fresh = false;
        } else {
            self.cache.touch(slot);
        }
        let mut acc = if flags & TIP_FIRST != 0 {
            vec![self.semiring.zero(); d]
        } else {
            std::mem::take(&mut self.acc)
        };
        let mut incoming = Vec::with_capacity(factor.degree());
        for (p, &v) in factor.vars().iter().enumerate() {
            if p == edge.position {
                // ignored by the kernel
                incoming.push(&[][..]);
            } else {
                incoming.push(self.operand(p, self.graph.variable(v).size())?);
            }
        }
        kernel::factor_accumulate(table, self.semiring, edge.position, &incoming, start as usize..end as usize, &mut acc);
        self.acc = acc;
        let c = ((end - start) as usize * table.degree()) as u64;
        self.report.tip_factor_cycles += c;
        self.charge(Opcode::Tip, c);
        Ok(())
    }

    fn store(&mut self, ins: &Instruction) -> Result<(), AccelError> {
        let Some((flags, id)) = self.acc_target else {
            return Err(self.malformed("STM without an accumulated value"));
        };
        let expected = if flags & TIP_BELIEF != 0 {
            MsgTarget::Belief
        } else if flags & TIP_VARIABLE != 0 {
            MsgTarget::ToFactor
        } else {
            MsgTarget::ToVariable
        };
        if id != ins.a || ins.b != expected as u32 || usize::from(ins.len) != self.acc.len() {
            return Err(self.malformed("STM does not match the accumulated value"));
        }
        let value = std::mem::take(&mut self.acc);
        let c = self.limits.io_cycles(value.len() * VALUE_BYTES);
        self.charge(Opcode::Stm, c);
        let cycles = std::mem::take(&mut self.pending);
        match expected {
            MsgTarget::Belief => {
                self.report.readout_cycles += cycles;
                self.beliefs[id as usize] = Some(value);
            }
            target => {
                let FactorId(f) = self.edges.edge(id as usize).factor;
                self.report.factor_cycles[f] += cycles;
                let m = if target == MsgTarget::ToFactor { &mut self.msgs.to_factor } else { &mut self.msgs.to_variable };
                let dst = m.get_mut(id as usize);
                let mut delta: f64 = 0.0;
                for (d, &s) in dst.iter_mut().zip(&value) {
                    delta = delta.max((*d - s).abs());
                    *d = s;
                }
                self.pass_delta = self.pass_delta.max(delta);
            }
        }
        self.acc_target = None;
        self.generation += 1;
        Ok(())
    }

    fn run(&mut self, block: &[Instruction], offset: usize) -> Result<(), AccelError> {
        for (i, ins) in block.iter().enumerate() {
            self.index = offset + i;
            self.step(ins)?;
        }
        Ok(())
    }
}

/// Executes `program` against `graph` (the graph it was compiled from).
pub fn simulate(program: &Program, graph: &FactorGraph, limits: &AccelLimits) -> Result<Simulation, AccelError> {
    limits.check()?;
    let edges = EdgeIndex::new(graph);
    let semiring = program.semiring;
    let msgs = MessageState::uniform(graph, &edges, semiring);
    let mut m = Machine {
        graph,
        limits: *limits,
        semiring,
        inputs: encode_inputs(graph, semiring),
        msgs,
        operands: Vec::new(),
        generation: 0,
        acc: Vec::new(),
        acc_target: None,
        cache: TableCache::new(limits.table_cache_bytes),
        fresh: Vec::new(),
        beliefs: vec![None; graph.variable_count()],
        pass_delta: 0.0,
        report: CycleReport {
            opcodes: [OpcodeStat::default(); 6],
            tip_factor_cycles: 0,
            tip_variable_cycles: 0,
            factor_cycles: vec![0; graph.factor_id_bound()],
            readout_cycles: 0,
            io_cycles: 0,
            compute_cycles: 0,
            total_cycles: 0,
            passes: 0,
            cache_capacity: limits.table_cache_bytes,
            cache: CacheStats::default(),
        },
        pending: 0,
        index: 0,
        edges,
    };

    m.run(&program.prologue, 0)?;
    let cap = if program.repeats { program.iterations as usize } else { 1 };
    let mut deltas = Vec::new();
    let mut converged = !program.repeats;
    for _ in 0..cap {
        m.cache.flush();
        m.pass_delta = 0.0;
        m.run(&program.body, program.prologue.len())?;
        deltas.push(m.pass_delta);
        if m.pass_delta < program.epsilon {
            converged = true;
            break;
        }
    }
    m.run(&program.epilogue, program.prologue.len() + program.body.len())?;
    if m.acc_target.is_some() {
        return Err(m.malformed("program ends inside an update"));
    }

    // an empty program leaves the initial messages on the host
    if program.is_empty() {
        for v in graph.var_ids() {
            let incoming: Vec<&[f64]> = m.edges.var_edges(v).iter().map(|&e| m.msgs.to_variable.get(e)).collect();
            let b = belief_from_messages(semiring, &m.inputs[v.0], &incoming)
                .map_err(|_| AccelError::Solve(m.contradiction_at_var(v)))?;
            m.beliefs[v.0] = Some(b);
        }
    }

    let mut beliefs = Vec::with_capacity(graph.variable_count());
    let mut costs = Vec::new();
    let mut assignment = Vec::new();
    for (v, raw) in m.beliefs.iter().enumerate() {
        let Some(raw) = raw else {
            return Err(AccelError::Malformed { index: m.index, reason: format!("no belief read out for variable {v}") });
        };
        assignment.push(kernel::best_index(semiring, raw));
        if semiring == Semiring::MinSum {
            beliefs.push(kernel::costs_to_probabilities(raw));
            costs.push(raw.clone());
        } else {
            beliefs.push(raw.clone());
        }
    }

    let mut report = m.report;
    report.passes = deltas.len();
    report.cache = m.cache.stats();
    for op in Opcode::ALL {
        let c = report.opcode(op).cycles;
        if op.is_io() {
            report.io_cycles += c;
        } else {
            report.compute_cycles += c;
        }
    }
    report.total_cycles = report.io_cycles + report.compute_cycles;
    let solution = BpSolution {
        semiring,
        beliefs,
        costs: (semiring == Semiring::MinSum).then_some(costs),
        assignment: (semiring != Semiring::SumProduct).then_some(assignment),
        stats: RunStats { passes: deltas.len(), converged, deltas },
    };
    Ok(Simulation { solution, report })
}

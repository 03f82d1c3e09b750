//! Lowering of (graph, schedule) to an accelerator program.

use fgraph::bp::SolveOptions;
use fgraph::schedule::EdgeIndex;
use fgraph::{Direction, FactorGraph, FactorTable, Schedule, Semiring, StorageKind, TableId};

use crate::alloc::TableCache;
use crate::constraints::check_constraints;
use crate::isa::{
    Instruction, MsgSource, MsgTarget, Opcode, Program, HIO_BELIEFS, HIO_INPUTS, HIO_TABLES, TIP_BELIEF, TIP_FIRST,
    TIP_VARIABLE,
};
use crate::limits::AccelLimits;
use crate::AccelError;

/// Bytes charged per stored value (tables and messages). The simulator
/// computes in f64; the cost model assumes 32-bit words on the device.
pub const VALUE_BYTES: usize = 4;

/// Cache bytes per stored entry: a weight, plus a 32-bit flat offset for
/// sparse tables.
pub fn entry_bytes(table: &FactorTable) -> usize {
    match table.kind() {
        StorageKind::Dense => VALUE_BYTES,
        StorageKind::Sparse => 2 * VALUE_BYTES,
    }
}

/// Entry ranges a table is streamed in: whole if it fits the cache,
/// otherwise in cache-sized chunks.
pub fn table_chunks(table: &FactorTable, cache_bytes: usize) -> Result<Vec<(usize, usize)>, AccelError> {
    let per = cache_bytes / entry_bytes(table);
    if per == 0 {
        return Err(AccelError::BlockTooLarge { bytes: entry_bytes(table), capacity: cache_bytes });
    }
    let n = table.entry_count();
    Ok((0..n).step_by(per).map(|s| (s, (s + per).min(n))).collect())
}

fn id32(x: usize, what: &str) -> Result<u32, AccelError> {
    u32::try_from(x).map_err(|_| AccelError::Unsupported(format!("{what} {x} does not fit a 32-bit operand")))
}

fn len16(d: usize) -> Result<u16, AccelError> {
    u16::try_from(d).map_err(|_| AccelError::Unsupported(format!("domain size {d} does not fit a 16-bit operand")))
}

struct Emitter<'a> {
    graph: &'a FactorGraph,
    edges: &'a EdgeIndex,
    limits: &'a AccelLimits,
    cache: TableCache,
    out: Vec<Instruction>,
}

impl Emitter<'_> {
    fn push(&mut self, op: Opcode, a: u32, b: u32, c: u32, len: u16) {
        self.out.push(Instruction::new(op, a, b, c, len));
    }

    fn domain(&self, var: fgraph::VarId) -> Result<u16, AccelError> {
        len16(self.graph.variable(var).size())
    }

    /// Running product of a variable's input and the listed incoming
    /// factor-to-variable messages.
    fn variable_product(&mut self, var: fgraph::VarId, incoming: &[usize], target: u32, flags: u32) -> Result<(), AccelError> {
        let d = self.domain(var)?;
        self.push(Opcode::Ldm, id32(var.0, "variable")?, MsgSource::Input as u32, 0, d);
        for (slot, &o) in incoming.iter().enumerate() {
            self.push(Opcode::Ldm, id32(o, "edge")?, MsgSource::ToVariable as u32, id32(slot + 1, "slot")?, d);
        }
        let count = id32(incoming.len() + 1, "operand count")?;
        self.push(Opcode::Tip, target, count, flags | TIP_FIRST | TIP_VARIABLE, d);
        Ok(())
    }

    fn to_factor(&mut self, e: usize) -> Result<(), AccelError> {
        let var = self.edges.edge(e).var;
        let others: Vec<usize> = self.edges.var_edges(var).iter().copied().filter(|&o| o != e).collect();
        let ea = id32(e, "edge")?;
        self.variable_product(var, &others, ea, 0)?;
        let d = self.domain(var)?;
        self.push(Opcode::Nrm, ea, 0, 0, d);
        self.push(Opcode::Stm, ea, MsgTarget::ToFactor as u32, 0, d);
        Ok(())
    }

    fn to_variable(&mut self, e: usize) -> Result<(), AccelError> {
        let edge = self.edges.edge(e);
        let factor = self.graph.factor(edge.factor).expect("live factor");
        let base = e - edge.position;
        for (p, &v) in factor.vars().iter().enumerate() {
            if p != edge.position {
                let d = self.domain(v)?;
                self.push(Opcode::Ldm, id32(base + p, "edge")?, MsgSource::ToFactor as u32, id32(p, "slot")?, d);
            }
        }
        let TableId(tid) = factor.table();
        let table = self.graph.table(factor.table());
        let bytes_per = entry_bytes(table);
        let ea = id32(e, "edge")?;
        let d = self.domain(edge.var)?;
        for (i, (start, end)) in table_chunks(table, self.limits.table_cache_bytes)?.into_iter().enumerate() {
            let key = (id32(tid, "table")?, id32(start, "entry")?, id32(end, "entry")?);
            let slot = match self.cache.lookup(key) {
                Some(s) => s,
                None => {
                    let s = self.cache.load(key, (end - start) * bytes_per)?;
                    self.push(Opcode::Ldt, key.0, key.1, key.2, s);
                    s
                }
            };
            let flags = if i == 0 { TIP_FIRST } else { 0 };
            self.push(Opcode::Tip, ea, u32::from(slot), flags, d);
        }
        self.push(Opcode::Nrm, ea, 0, 0, d);
        self.push(Opcode::Stm, ea, MsgTarget::ToVariable as u32, 0, d);
        Ok(())
    }
}

/// Compiles one solve of `graph` under `schedule`. K-best truncation and
/// damping have no hardware counterpart and are rejected. An empty schedule
/// compiles to an empty program.
pub fn compile(
    graph: &FactorGraph,
    schedule: &Schedule,
    limits: &AccelLimits,
    semiring: Semiring,
    options: &SolveOptions,
) -> Result<Program, AccelError> {
    limits.check()?;
    check_constraints(graph, limits).map_err(AccelError::Constraints)?;
    options.validate(graph)?;
    if options.k.is_some() {
        return Err(AccelError::Unsupported("k-best message truncation".into()));
    }
    if options.damping != 0.0 {
        return Err(AccelError::Unsupported("damping".into()));
    }
    let edges = EdgeIndex::new(graph);
    let steps = schedule.resolve(&edges)?;
    check_message_budget(graph, limits)?;

    let mut program = Program {
        semiring,
        repeats: schedule.repeats(),
        iterations: id32(options.iterations, "iteration count")?,
        epsilon: options.epsilon,
        prologue: Vec::new(),
        body: Vec::new(),
        epilogue: Vec::new(),
    };
    if steps.is_empty() {
        return Ok(program);
    }

    let input_bytes: usize = graph.variables().iter().map(|v| v.size() * VALUE_BYTES).sum();
    let mut used = vec![false; graph.tables().len()];
    for (_, f) in graph.factors() {
        used[f.table().0] = true;
    }
    let table_bytes: usize = graph
        .tables()
        .iter()
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|(t, _)| t.entry_count() * entry_bytes(t))
        .sum();
    program.prologue = vec![
        Instruction::new(Opcode::Hio, 0, id32(input_bytes, "transfer size")?, HIO_INPUTS, 0),
        Instruction::new(Opcode::Hio, 0, id32(table_bytes, "transfer size")?, HIO_TABLES, 0),
    ];

    let mut em = Emitter { graph, edges: &edges, limits, cache: TableCache::new(limits.table_cache_bytes), out: Vec::new() };
    for &(e, dir) in &steps {
        match dir {
            Direction::ToFactor => em.to_factor(e)?,
            Direction::ToVariable => em.to_variable(e)?,
        }
    }
    program.body = std::mem::take(&mut em.out);

    for v in graph.var_ids() {
        let incoming = edges.var_edges(v).to_vec();
        let va = id32(v.0, "variable")?;
        em.variable_product(v, &incoming, va, TIP_BELIEF)?;
        let d = em.domain(v)?;
        em.push(Opcode::Nrm, va, 1, 0, d);
        em.push(Opcode::Stm, va, MsgTarget::Belief as u32, 0, d);
    }
    em.push(Opcode::Hio, 1, id32(input_bytes, "transfer size")?, HIO_BELIEFS, 0);
    program.epilogue = em.out;
    Ok(program)
}

/// A factor update holds all incoming messages in the operand buffer; a
/// variable update streams its operands through a two-message window.
fn check_message_budget(graph: &FactorGraph, limits: &AccelLimits) -> Result<(), AccelError> {
    for (fid, f) in graph.factors() {
        let bytes: usize = f.vars().iter().map(|&v| graph.variable(v).size() * VALUE_BYTES).sum();
        if bytes > limits.message_buffer_bytes {
            return Err(AccelError::MessageBudget { factor: fid.0, bytes, limit: limits.message_buffer_bytes });
        }
    }
    Ok(())
}

//! Solver-independent discrete factor graphs.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::domain::DiscreteDomain;
use crate::error::ModelError;
use crate::table::FactorTable;
use crate::vararray::VarArray;

/// Templates may nest other templates, but not beyond this depth.
pub const MAX_NESTING_DEPTH: usize = 64;

/// Default cap on the dense cell count of a joined factor table.
pub const DEFAULT_JOIN_CAP: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TableId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    name: String,
    domain: Arc<DiscreteDomain>,
    input: Vec<f64>,
}

impl Variable {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Arc<DiscreteDomain> {
        &self.domain
    }

    pub fn size(&self) -> usize {
        self.domain.size()
    }

    /// Unnormalized prior weights.
    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

#[derive(Debug, Clone)]
pub struct Factor {
    table: TableId,
    vars: Vec<VarId>,
    directed_to: Option<Vec<usize>>,
}

impl Factor {
    pub fn table(&self) -> TableId {
        self.table
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn degree(&self) -> usize {
        self.vars.len()
    }

    /// Positions (into `vars`) the table is conditioned toward, if directed.
    pub fn directed_to(&self) -> Option<&[usize]> {
        self.directed_to.as_deref()
    }

    pub fn position_of(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }
}

/// A template instantiated inside a parent graph.
#[derive(Debug, Clone)]
pub struct NestedInstance {
    pub name: String,
    pub template_name: String,
    pub template: Arc<FactorGraph>,
    /// Parent variables aliased to the template boundary, in boundary order.
    pub bindings: Vec<VarId>,
    /// Variables created for the template's internal variables.
    pub variables: Vec<VarId>,
    /// Factors created for this instance, including those of nested children.
    pub factors: Vec<FactorId>,
}

/// Where the weights of a new factor come from.
pub enum FactorSpec<'a> {
    Table(FactorTable),
    Function(&'a dyn Fn(&[f64]) -> f64),
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    names: HashMap<String, VarId>,
    factors: Vec<Option<Factor>>,
    var_factors: Vec<Vec<FactorId>>,
    tables: Vec<Arc<FactorTable>>,
    table_index: HashMap<u64, Vec<TableId>>,
    boundary: Vec<VarId>,
    nested: Vec<NestedInstance>,
    depth: usize,
    join_cap: usize,
}

impl Default for FactorGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl FactorGraph {
    pub fn new() -> Self {
        Self {
            variables: Vec::new(),
            names: HashMap::new(),
            factors: Vec::new(),
            var_factors: Vec::new(),
            tables: Vec::new(),
            table_index: HashMap::new(),
            boundary: Vec::new(),
            nested: Vec::new(),
            depth: 0,
            join_cap: DEFAULT_JOIN_CAP,
        }
    }

    // ---- variables ----

    /// Adds one variable with a uniform input and an automatic name.
    pub fn add_variable(&mut self, domain: &DiscreteDomain) -> VarId {
        let id = VarId(self.variables.len());
        let name = format!("#{}", id.0);
        self.push_variable(name, Arc::new(domain.clone()))
    }

    pub fn add_named_variable(
        &mut self,
        name: &str,
        domain: &DiscreteDomain,
    ) -> Result<VarId, ModelError> {
        if self.names.contains_key(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        Ok(self.push_variable(name.to_string(), Arc::new(domain.clone())))
    }

    /// Adds a row-major array of variables with the given shape.
    pub fn add_variables(
        &mut self,
        domain: &DiscreteDomain,
        shape: &[usize],
    ) -> Result<VarArray, ModelError> {
        let count: usize = shape.iter().product();
        if shape.is_empty() || count == 0 {
            return Err(ModelError::ZeroSizeShape(shape.to_vec()));
        }
        let domain = Arc::new(domain.clone());
        let ids = (0..count)
            .map(|_| {
                let name = format!("#{}", self.variables.len());
                self.push_variable(name, domain.clone())
            })
            .collect();
        Ok(VarArray::new(shape.to_vec(), ids))
    }

    fn push_variable(&mut self, mut name: String, domain: Arc<DiscreteDomain>) -> VarId {
        let id = VarId(self.variables.len());
        while self.names.contains_key(&name) {
            name.push('\'');
        }
        let d = domain.size();
        self.names.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            domain,
            input: vec![1.0; d],
        });
        self.var_factors.push(Vec::new());
        id
    }

    pub fn set_input(&mut self, var: VarId, input: &[f64]) -> Result<(), ModelError> {
        let v = self
            .variables
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable(var))?;
        if input.len() != v.size() {
            return Err(ModelError::InputLength {
                var,
                expected: v.size(),
                got: input.len(),
            });
        }
        if input.iter().any(|&w| !w.is_finite() || w < 0.0) || !input.iter().any(|&w| w > 0.0) {
            return Err(ModelError::InvalidInput(var));
        }
        v.input = input.to_vec();
        Ok(())
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    pub fn find_variable(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    /// Live factors attached to `var`, ascending by id.
    pub fn factors_of(&self, var: VarId) -> &[FactorId] {
        &self.var_factors[var.0]
    }

    pub fn contains_var(&self, var: VarId) -> bool {
        var.0 < self.variables.len()
    }

    // ---- tables ----

    /// Interns `table`, returning the id of a structurally identical table
    /// when one already exists.
    pub fn intern_table(&mut self, table: FactorTable) -> TableId {
        let hash = table.structural_hash();
        if let Some(ids) = self.table_index.get(&hash) {
            for &id in ids {
                if *self.tables[id.0] == table {
                    return id;
                }
            }
        }
        let id = TableId(self.tables.len());
        self.tables.push(Arc::new(table));
        self.table_index.entry(hash).or_default().push(id);
        id
    }

    pub fn table(&self, id: TableId) -> &Arc<FactorTable> {
        &self.tables[id.0]
    }

    pub fn tables(&self) -> &[Arc<FactorTable>] {
        &self.tables
    }

    // ---- factors ----

    /// Adds a factor backed by an existing (interned) table.
    pub fn add_factor_with_table(
        &mut self,
        table: TableId,
        vars: &[VarId],
    ) -> Result<FactorId, ModelError> {
        self.check_factor_vars(self.tables[table.0].dims(), vars)?;
        let id = FactorId(self.factors.len());
        for &v in vars {
            self.var_factors[v.0].push(id);
        }
        self.factors.push(Some(Factor {
            table,
            vars: vars.to_vec(),
            directed_to: None,
        }));
        Ok(id)
    }

    pub fn add_factor(&mut self, table: FactorTable, vars: &[VarId]) -> Result<FactorId, ModelError> {
        self.check_factor_vars(table.dims(), vars)?;
        let id = self.intern_table(table);
        self.add_factor_with_table(id, vars)
    }

    /// Dense factor materialized by evaluating `f` on every joint
    /// configuration of domain values.
    pub fn add_factor_dense(
        &mut self,
        f: impl Fn(&[f64]) -> f64,
        vars: &[VarId],
    ) -> Result<FactorId, ModelError> {
        self.check_vars_exist(vars)?;
        let domains: Vec<&DiscreteDomain> =
            vars.iter().map(|v| self.variables[v.0].domain.as_ref()).collect();
        let table = FactorTable::from_fn(&domains, f)?;
        self.add_factor(table, vars)
    }

    /// Sparse factor from zero-based index tuples.
    pub fn add_factor_sparse(
        &mut self,
        indices: &[Vec<usize>],
        weights: &[f64],
        vars: &[VarId],
    ) -> Result<FactorId, ModelError> {
        self.check_vars_exist(vars)?;
        let dims = vars.iter().map(|v| self.variables[v.0].size()).collect();
        let table = FactorTable::sparse(dims, indices, weights)?;
        self.add_factor(table, vars)
    }

    /// One factor per element of the broadcast batch shape of `args`. All
    /// factors with equal domain signatures share one table.
    pub fn add_factor_vectorized(
        &mut self,
        spec: FactorSpec<'_>,
        args: &[VarArray],
    ) -> Result<Vec<FactorId>, ModelError> {
        let batch = VarArray::broadcast_shape(args)?;
        let count: usize = batch.iter().product();
        let (shared, func) = match spec {
            FactorSpec::Table(t) => (Some(t), None),
            FactorSpec::Function(f) => (None, Some(f)),
        };
        let mut shared_id = None;
        let mut by_domains: Vec<(Vec<Arc<DiscreteDomain>>, TableId)> = Vec::new();
        let mut out = Vec::with_capacity(count);
        for flat in 0..count {
            let vars: Vec<VarId> = args.iter().map(|a| a.broadcast_get(&batch, flat)).collect();
            self.check_vars_exist(&vars)?;
            let table = match (func, &shared) {
                (_, Some(t)) => {
                    self.check_factor_vars(t.dims(), &vars)?;
                    *shared_id.get_or_insert_with(|| self.intern_table(t.clone()))
                }
                (Some(f), None) => {
                    let sig: Vec<Arc<DiscreteDomain>> =
                        vars.iter().map(|v| self.variables[v.0].domain.clone()).collect();
                    match by_domains.iter().find(|(s, _)| *s == sig) {
                        Some(&(_, t)) => t,
                        None => {
                            let domains: Vec<&DiscreteDomain> = sig.iter().map(|d| d.as_ref()).collect();
                            let t = self.intern_table(FactorTable::from_fn(&domains, f)?);
                            by_domains.push((sig, t));
                            t
                        }
                    }
                }
                (None, None) => unreachable!(),
            };
            out.push(self.add_factor_with_table(table, &vars)?);
        }
        Ok(out)
    }

    /// Marks `factor` as a conditional distribution over `targets`; accepted
    /// only when the table sums to one over the target positions for every
    /// configuration of the others.
    pub fn set_directed_to(&mut self, factor: FactorId, targets: &[VarId]) -> Result<(), ModelError> {
        let f = self.factor(factor).ok_or(ModelError::UnknownFactor(factor))?;
        let mut positions = Vec::with_capacity(targets.len());
        for &t in targets {
            let p = f
                .position_of(t)
                .ok_or(ModelError::DirectedNotConnected { factor, var: t })?;
            positions.push(p);
        }
        if !self.tables[f.table.0].is_conditional_over(&positions, 1e-9) {
            return Err(ModelError::NotDirected { factor });
        }
        self.factors[factor.0].as_mut().unwrap().directed_to = Some(positions);
        Ok(())
    }

    pub fn factor(&self, id: FactorId) -> Option<&Factor> {
        self.factors.get(id.0).and_then(|f| f.as_ref())
    }

    /// Live factors, ascending by id.
    pub fn factors(&self) -> impl Iterator<Item = (FactorId, &Factor)> {
        self.factors
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (FactorId(i), f)))
    }

    pub fn factor_count(&self) -> usize {
        self.factors.iter().filter(|f| f.is_some()).count()
    }

    /// Upper bound (exclusive) on factor ids ever issued.
    pub fn factor_id_bound(&self) -> usize {
        self.factors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.factors().map(|(_, f)| f.degree()).sum()
    }

    pub fn factor_table(&self, id: FactorId) -> &Arc<FactorTable> {
        let f = self.factor(id).expect("live factor");
        &self.tables[f.table.0]
    }

    fn check_vars_exist(&self, vars: &[VarId]) -> Result<(), ModelError> {
        if vars.is_empty() {
            return Err(ModelError::EmptyFactor);
        }
        for (i, &v) in vars.iter().enumerate() {
            if !self.contains_var(v) {
                return Err(ModelError::UnknownVariable(v));
            }
            if vars[..i].contains(&v) {
                return Err(ModelError::RepeatedVariable(v));
            }
        }
        Ok(())
    }

    fn check_factor_vars(&self, dims: &[usize], vars: &[VarId]) -> Result<(), ModelError> {
        self.check_vars_exist(vars)?;
        if dims.len() != vars.len() {
            return Err(ModelError::DimensionCount {
                expected: vars.len(),
                got: dims.len(),
            });
        }
        for (position, (&d, v)) in dims.iter().zip(vars).enumerate() {
            let domain = self.variables[v.0].size();
            if d != domain {
                return Err(ModelError::DimensionMismatch { position, table: d, domain });
            }
        }
        Ok(())
    }

    // ---- nesting ----

    /// Declares the ordered boundary of this graph when used as a template.
    pub fn set_boundary(&mut self, vars: &[VarId]) -> Result<(), ModelError> {
        for (i, &v) in vars.iter().enumerate() {
            if !self.contains_var(v) {
                return Err(ModelError::UnknownVariable(v));
            }
            if vars[..i].contains(&v) {
                return Err(ModelError::RepeatedVariable(v));
            }
        }
        self.boundary = vars.to_vec();
        Ok(())
    }

    pub fn boundary(&self) -> &[VarId] {
        &self.boundary
    }

    /// Depth of nested templates below this graph (0 when nothing is nested).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nested(&self) -> &[NestedInstance] {
        &self.nested
    }

    /// Instantiates `template` inside this graph. Boundary variables alias
    /// `bound`; every other template variable is created fresh, with the
    /// template's input copied.
    pub fn add_nested_graph(
        &mut self,
        template_name: &str,
        template: &Arc<FactorGraph>,
        bound: &[VarId],
    ) -> Result<usize, ModelError> {
        if bound.len() != template.boundary.len() {
            return Err(ModelError::BoundaryArity {
                expected: template.boundary.len(),
                got: bound.len(),
            });
        }
        for (position, (&t, &b)) in template.boundary.iter().zip(bound).enumerate() {
            if !self.contains_var(b) {
                return Err(ModelError::UnknownVariable(b));
            }
            let expected = template.variables[t.0].size();
            let got = self.variables[b.0].size();
            if expected != got {
                return Err(ModelError::BoundaryDomain { position, expected, got });
            }
        }
        let depth = template.depth + 1;
        if depth > MAX_NESTING_DEPTH {
            return Err(ModelError::NestingTooDeep(depth));
        }

        let index = self.nested.len();
        let instance_name = format!("{template_name}[{index}]");
        let mut map = vec![VarId(usize::MAX); template.variables.len()];
        for (&t, &b) in template.boundary.iter().zip(bound) {
            map[t.0] = b;
        }
        let mut created = Vec::new();
        for (i, v) in template.variables.iter().enumerate() {
            if map[i].0 != usize::MAX {
                continue;
            }
            let name = format!("{instance_name}/{}", v.name);
            let id = self.push_variable(name, v.domain.clone());
            self.variables[id.0].input = v.input.clone();
            map[i] = id;
            created.push(id);
        }
        let mut factors = Vec::new();
        for (_, f) in template.factors() {
            let table = self.intern_table((*template.tables[f.table.0]).clone());
            let vars: Vec<VarId> = f.vars.iter().map(|v| map[v.0]).collect();
            let id = self.add_factor_with_table(table, &vars)?;
            self.factors[id.0].as_mut().unwrap().directed_to = f.directed_to.clone();
            factors.push(id);
        }
        self.nested.push(NestedInstance {
            name: instance_name,
            template_name: template_name.to_string(),
            template: template.clone(),
            bindings: bound.to_vec(),
            variables: created,
            factors,
        });
        self.depth = self.depth.max(depth);
        Ok(index)
    }

    /// Equivalent graph with the nesting structure forgotten.
    pub fn flatten(&self) -> FactorGraph {
        let mut g = self.clone();
        g.nested.clear();
        g.depth = 0;
        g
    }

    // ---- cluster factors ----

    pub fn set_join_cap(&mut self, cells: usize) {
        self.join_cap = cells;
    }

    /// Replaces `factors` by a single factor over the union of their
    /// variables whose table is the product of the constituents.
    pub fn join_factors(&mut self, factors: &[FactorId]) -> Result<FactorId, ModelError> {
        if factors.is_empty() {
            return Err(ModelError::EmptyJoin);
        }
        let mut vars: Vec<VarId> = Vec::new();
        for (i, &f) in factors.iter().enumerate() {
            if factors[..i].contains(&f) {
                return Err(ModelError::DuplicateJoin(f));
            }
            let factor = self.factor(f).ok_or(ModelError::UnknownFactor(f))?;
            for &v in &factor.vars {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        let dims: Vec<usize> = vars.iter().map(|v| self.variables[v.0].size()).collect();
        let cells = dims.iter().map(|&d| d as u128).product::<u128>();
        if cells > self.join_cap as u128 {
            return Err(ModelError::JoinTooLarge { cells, cap: self.join_cap });
        }
        let cells = cells as usize;
        let parts: Vec<(Arc<FactorTable>, Vec<usize>)> = factors
            .iter()
            .map(|&f| {
                let factor = self.factor(f).unwrap();
                let pos = factor
                    .vars
                    .iter()
                    .map(|v| vars.iter().position(|u| u == v).unwrap())
                    .collect();
                (self.tables[factor.table.0].clone(), pos)
            })
            .collect();

        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dims.len()];
        let mut sub = Vec::new();
        for flat in 0..cells {
            for p in 0..dims.len() {
                idx[p] = (flat / strides[p]) % dims[p];
            }
            let mut w = 1.0;
            for (table, pos) in &parts {
                sub.clear();
                sub.extend(pos.iter().map(|&p| idx[p]));
                w *= table.weight_at(&sub);
                if w == 0.0 {
                    break;
                }
            }
            if w > 0.0 {
                offsets.push(flat);
                weights.push(w);
            }
        }
        if weights.is_empty() {
            return Err(ModelError::AllZeroTable);
        }
        let table = FactorTable::sparse_from_flat(dims, offsets, weights);

        for &f in factors {
            self.remove_factor(f);
        }
        let id = self.add_factor(table, &vars)?;
        Ok(id)
    }

    fn remove_factor(&mut self, id: FactorId) {
        if let Some(f) = self.factors[id.0].take() {
            for v in f.vars {
                self.var_factors[v.0].retain(|&x| x != id);
            }
        }
        for inst in &mut self.nested {
            inst.factors.retain(|&x| x != id);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor(x: &[f64]) -> f64 {
        if (x.iter().sum::<f64>() as u64) % 2 == 0 { 1.0 } else { 0.0 }
    }

    #[test]
    fn add_variables_shapes() {
        let mut g = FactorGraph::new();
        let bits = g.add_variables(&DiscreteDomain::bit(), &[4, 1]).unwrap();
        assert_eq!(bits.len(), 4);
        assert!(bits.iter().all(|v| g.variable(v).input() == [1.0, 1.0]));
        let grid = g.add_variables(&DiscreteDomain::range(1, 75).unwrap(), &[100, 100]).unwrap();
        assert_eq!(grid.len(), 10_000);
        assert_eq!(g.variable_count(), 10_004);
        assert!(matches!(
            g.add_variables(&DiscreteDomain::bit(), &[3, 0]),
            Err(ModelError::ZeroSizeShape(_))
        ));
    }

    #[test]
    fn inputs_validated() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        assert!(g.set_input(a, &[0.0, 0.0]).is_err());
        assert!(g.set_input(a, &[1.0]).is_err());
        assert!(g.set_input(a, &[-1.0, 2.0]).is_err());
        g.set_input(a, &[0.0, 2.0]).unwrap();
    }

    #[test]
    fn factor_checks() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        let b = g.add_variable(&DiscreteDomain::range(1, 3).unwrap());
        assert_eq!(g.add_factor_dense(|_| 1.0, &[a, a]), Err(ModelError::RepeatedVariable(a)));
        let t = FactorTable::dense(vec![2, 2], vec![1.0; 4]).unwrap();
        assert!(matches!(g.add_factor(t, &[a, b]), Err(ModelError::DimensionMismatch { .. })));
        assert!(matches!(
            g.add_factor_dense(|x| x[0] - 2.0, &[b]),
            Err(ModelError::InvalidWeight { .. })
        ));
        assert_eq!(g.add_factor_dense(|_| 0.0, &[a]), Err(ModelError::AllZeroTable));
    }

    #[test]
    fn tables_are_deduplicated() {
        let mut g = FactorGraph::new();
        let v = g.add_variables(&DiscreteDomain::bit(), &[3]).unwrap();
        let f1 = g.add_factor_dense(xor, &[v.at(0), v.at(1)]).unwrap();
        let f2 = g.add_factor_dense(xor, &[v.at(1), v.at(2)]).unwrap();
        assert_eq!(g.factor(f1).unwrap().table(), g.factor(f2).unwrap().table());
        assert_eq!(g.tables().len(), 1);
    }

    #[test]
    fn directed_to_validation() {
        let mut g = FactorGraph::new();
        let a = g.add_variable(&DiscreteDomain::bit());
        let b = g.add_variable(&DiscreteDomain::bit());
        let raw = FactorTable::dense(vec![2, 2], vec![1.0, 1.0, 1.0, 3.0]).unwrap();
        let f = g.add_factor(raw.clone(), &[a, b]).unwrap();
        assert_eq!(g.set_directed_to(f, &[b]), Err(ModelError::NotDirected { factor: f }));
        let n = g.add_factor(raw.normalize(1).unwrap(), &[a, b]).unwrap();
        g.set_directed_to(n, &[b]).unwrap();
        assert_eq!(g.factor(n).unwrap().directed_to(), Some(&[1usize][..]));
        assert!(g.set_directed_to(n, &[a]).is_err());
    }

    #[test]
    fn nested_instances_alias_boundary() {
        let mut t = FactorGraph::new();
        let b = t.add_variables(&DiscreteDomain::bit(), &[4]).unwrap();
        let c = t.add_variable(&DiscreteDomain::bit());
        t.add_factor_dense(xor, &[b.at(0), b.at(1), c]).unwrap();
        t.add_factor_dense(xor, &[b.at(2), b.at(3), c]).unwrap();
        t.set_boundary(b.ids()).unwrap();
        let t = Arc::new(t);

        let mut g = FactorGraph::new();
        let a = g.add_variables(&DiscreteDomain::bit(), &[6]).unwrap();
        g.add_nested_graph("xor4", &t, &[a.at(0), a.at(1), a.at(3), a.at(4)]).unwrap();
        g.add_nested_graph("xor4", &t, &[a.at(1), a.at(2), a.at(3), a.at(5)]).unwrap();
        assert_eq!(g.variable_count(), 8);
        assert_eq!(g.factor_count(), 4);
        assert_eq!(g.depth(), 1);
        assert_eq!(g.nested()[1].variables.len(), 1);
        assert_eq!(g.factors_of(a.at(1)).len(), 2);

        assert!(matches!(
            g.add_nested_graph("xor4", &t, &[a.at(0)]),
            Err(ModelError::BoundaryArity { expected: 4, got: 1 })
        ));
        let flat = g.flatten();
        assert!(flat.nested().is_empty());
        assert_eq!(flat.factor_count(), 4);
    }

    #[test]
    fn nesting_depth_capped() {
        let mut t = FactorGraph::new();
        let v = t.add_variable(&DiscreteDomain::bit());
        t.set_boundary(&[v]).unwrap();
        let mut tmpl = Arc::new(t);
        for _ in 0..MAX_NESTING_DEPTH {
            let mut g = FactorGraph::new();
            let v = g.add_variable(&DiscreteDomain::bit());
            g.add_nested_graph("t", &tmpl, &[v]).unwrap();
            g.set_boundary(&[v]).unwrap();
            tmpl = Arc::new(g);
        }
        assert_eq!(tmpl.depth(), MAX_NESTING_DEPTH);
        let mut g = FactorGraph::new();
        let v = g.add_variable(&DiscreteDomain::bit());
        assert_eq!(
            g.add_nested_graph("t", &tmpl, &[v]),
            Err(ModelError::NestingTooDeep(MAX_NESTING_DEPTH + 1))
        );
    }

    #[test]
    fn join_rejects_duplicates_and_caps() {
        let mut g = FactorGraph::new();
        let v = g.add_variables(&DiscreteDomain::bit(), &[3]).unwrap();
        let f = g.add_factor_dense(xor, &[v.at(0), v.at(1)]).unwrap();
        assert_eq!(g.join_factors(&[f, f]), Err(ModelError::DuplicateJoin(f)));
        let h = g.add_factor_dense(xor, &[v.at(1), v.at(2)]).unwrap();
        g.set_join_cap(4);
        assert!(matches!(g.join_factors(&[f, h]), Err(ModelError::JoinTooLarge { cells: 8, .. })));
        g.set_join_cap(DEFAULT_JOIN_CAP);
        let j = g.join_factors(&[f, h]).unwrap();
        assert_eq!(g.factor_count(), 1);
        assert_eq!(g.factor(j).unwrap().vars(), &[v.at(0), v.at(1), v.at(2)]);
        assert_eq!(g.factors_of(v.at(1)), &[j]);
    }
}

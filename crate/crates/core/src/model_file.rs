//! JSON model files (format 1).
//!
//! ```json
//! {
//!   "format": 1,
//!   "domains": {"bit": [0, 1]},
//!   "variables": [{"id": "a", "domain": "bit", "input": [0.5, 0.5]}],
//!   "tables": [{"id": "eq", "dims": [2, 2], "storage": "sparse",
//!               "entries": [[0, 0, 1.0], [1, 1, 1.0]]}],
//!   "factors": [{"table": "eq", "variables": ["a", "b"]}],
//!   "templates": {"pair": {"boundary": ["x", "y"], "variables": [...], "factors": [...]}},
//!   "nested": [{"template": "pair", "bindings": ["a", "b"]}],
//!   "streams": [{"name": "s", "template": "pair", "domain": "bit", "slices": [0, 1],
//!                "buffer_size": 2, "data": [[1, 0], [1, 0]]}]
//! }
//! ```
//!
//! Variable ids may be strings or integers; either way they become the
//! variable name. Dense tables may give `weights` (row-major) instead of
//! `entries`; cells not listed in `entries` are zero. Tables are global and
//! shared by templates. `data_file` names a text file with one row per step,
//! resolved against the model file's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::DiscreteDomain;
use crate::error::{FormatError, ModelError, StreamError};
use crate::graph::{FactorGraph, VarId, MAX_NESTING_DEPTH};
use crate::streaming::{ArraySource, StreamingGraph};
use crate::table::{FactorTable, StorageKind};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
enum Ref {
    Name(String),
    Index(u64),
}

impl Ref {
    fn key(&self) -> String {
        match self {
            Ref::Name(s) => s.clone(),
            Ref::Index(i) => i.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format: u64,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    domains: IndexMap<String, Vec<f64>>,
    #[serde(default)]
    variables: Vec<VarDoc>,
    #[serde(default)]
    tables: Vec<TableDoc>,
    #[serde(default)]
    factors: Vec<FactorDoc>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    templates: IndexMap<String, TemplateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nested: Vec<NestedDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    streams: Vec<StreamDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarDoc {
    id: Ref,
    domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum StorageDoc {
    #[default]
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    id: Ref,
    dims: Vec<usize>,
    #[serde(default)]
    storage: StorageDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    table: Ref,
    variables: Vec<Ref>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    directed_to: Option<Vec<Ref>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    boundary: Vec<Ref>,
    #[serde(default)]
    variables: Vec<VarDoc>,
    #[serde(default)]
    factors: Vec<FactorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nested: Vec<NestedDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NestedDoc {
    template: String,
    bindings: Vec<Ref>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamDoc {
    name: String,
    template: String,
    domain: String,
    slices: Vec<usize>,
    buffer_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_file: Option<String>,
}

/// A stream declared in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub name: String,
    pub template: String,
    pub domain: DiscreteDomain,
    pub slices: Vec<usize>,
    pub buffer_size: usize,
    pub data: Vec<Vec<f64>>,
}

/// Parsed model: the top-level graph, named templates, and streams.
#[derive(Debug, Clone)]
pub struct Model {
    pub graph: FactorGraph,
    pub templates: IndexMap<String, Arc<FactorGraph>>,
    pub streams: Vec<StreamSpec>,
}

impl Model {
    pub fn from_graph(graph: FactorGraph) -> Self {
        Self {
            graph,
            templates: IndexMap::new(),
            streams: Vec::new(),
        }
    }

    /// Builds the streaming window for `streams[index]`.
    pub fn stream(&self, index: usize) -> Result<StreamingGraph, StreamError> {
        let spec = &self.streams[index];
        let template = self.templates[&spec.template].clone();
        let mut s = StreamingGraph::new(
            &spec.template,
            template,
            spec.domain.clone(),
            &spec.slices,
            Box::new(ArraySource::new(spec.data.clone())),
        )?;
        s.set_buffer_size(spec.buffer_size)?;
        Ok(s)
    }

    pub fn to_json(&self) -> Value {
        to_json_with(&self.graph, &self.templates, &self.streams)
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }
}

/// Parses model text. `base_dir` resolves relative `data_file` paths.
pub fn parse_model(text: &str, base_dir: Option<&Path>) -> Result<Model, FormatError> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    match value.get("format").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(FormatError::Version(v)),
        None => return Err(FormatError::Invalid("missing or non-integer `format` field".into())),
    }
    let doc: Doc = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
    Builder::new(&doc, base_dir)?.build(&doc)
}

pub fn read_model(path: &Path) -> Result<Model, FormatError> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text, path.parent())
}

fn parse_error(text: &str, e: &serde_json::Error) -> FormatError {
    let (line, column) = (e.line(), e.column());
    let offset = if line == 0 {
        0
    } else {
        text.split_inclusive('\n').take(line - 1).map(str::len).sum::<usize>() + column.saturating_sub(1)
    };
    FormatError::Parse {
        line,
        column,
        offset: offset.min(text.len()),
        message: e.to_string(),
    }
}

struct Builder {
    domains: HashMap<String, Arc<DiscreteDomain>>,
    tables: IndexMap<String, FactorTable>,
    base_dir: Option<PathBuf>,
}

impl Builder {
    fn new(doc: &Doc, base_dir: Option<&Path>) -> Result<Self, FormatError> {
        let mut domains = HashMap::new();
        domains.insert("bit".to_string(), Arc::new(DiscreteDomain::bit()));
        for (name, values) in &doc.domains {
            domains.insert(name.clone(), Arc::new(DiscreteDomain::new(values.clone())?));
        }
        let mut tables = IndexMap::new();
        for t in &doc.tables {
            let key = t.id.key();
            let table = build_table(t).map_err(|message| FormatError::Table { table: key.clone(), message })?;
            if tables.insert(key.clone(), table).is_some() {
                return Err(FormatError::Duplicate { kind: "table", name: key });
            }
        }
        Ok(Self {
            domains,
            tables,
            base_dir: base_dir.map(Path::to_path_buf),
        })
    }

    fn domain(&self, name: &str) -> Result<&Arc<DiscreteDomain>, FormatError> {
        self.domains.get(name).ok_or_else(|| FormatError::UnknownRef {
            kind: "domain",
            name: name.to_string(),
        })
    }

    fn build(&self, doc: &Doc) -> Result<Model, FormatError> {
        let mut templates: IndexMap<String, Arc<FactorGraph>> = IndexMap::new();
        for name in doc.templates.keys() {
            self.template(name, &doc.templates, &mut templates, &mut Vec::new())?;
        }
        let mut graph = FactorGraph::new();
        for t in self.tables.values() {
            graph.intern_table(t.clone());
        }
        self.populate(&mut graph, &doc.variables, &doc.factors, &doc.nested, &templates)?;
        let streams = doc
            .streams
            .iter()
            .map(|s| self.stream(s, &templates))
            .collect::<Result<_, _>>()?;
        Ok(Model { graph, templates, streams })
    }

    fn template(
        &self,
        name: &str,
        docs: &IndexMap<String, TemplateDoc>,
        done: &mut IndexMap<String, Arc<FactorGraph>>,
        visiting: &mut Vec<String>,
    ) -> Result<Arc<FactorGraph>, FormatError> {
        if let Some(t) = done.get(name) {
            return Ok(t.clone());
        }
        if visiting.iter().any(|v| v == name) {
            return Err(ModelError::NestingCycle(name.to_string()).into());
        }
        if visiting.len() >= MAX_NESTING_DEPTH {
            return Err(ModelError::NestingTooDeep(visiting.len() + 1).into());
        }
        let doc = docs.get(name).ok_or_else(|| FormatError::UnknownRef {
            kind: "template",
            name: name.to_string(),
        })?;
        visiting.push(name.to_string());
        for n in &doc.nested {
            self.template(&n.template, docs, done, visiting)?;
        }
        visiting.pop();
        let mut g = FactorGraph::new();
        let names = self.populate(&mut g, &doc.variables, &doc.factors, &doc.nested, done)?;
        let boundary = doc
            .boundary
            .iter()
            .map(|r| lookup(&names, r))
            .collect::<Result<Vec<_>, _>>()?;
        g.set_boundary(&boundary)?;
        let t = Arc::new(g);
        done.insert(name.to_string(), t.clone());
        Ok(t)
    }

    fn populate(
        &self,
        g: &mut FactorGraph,
        variables: &[VarDoc],
        factors: &[FactorDoc],
        nested: &[NestedDoc],
        templates: &IndexMap<String, Arc<FactorGraph>>,
    ) -> Result<HashMap<String, VarId>, FormatError> {
        let mut names = HashMap::new();
        for v in variables {
            let key = v.id.key();
            if names.contains_key(&key) {
                return Err(FormatError::Duplicate { kind: "variable", name: key });
            }
            let id = g.add_named_variable(&key, self.domain(&v.domain)?)?;
            if let Some(input) = &v.input {
                g.set_input(id, input)?;
            }
            names.insert(key, id);
        }
        for f in factors {
            let key = f.table.key();
            let table = self
                .tables
                .get(&key)
                .ok_or(FormatError::UnknownRef { kind: "table", name: key })?;
            let vars = f.variables.iter().map(|r| lookup(&names, r)).collect::<Result<Vec<_>, _>>()?;
            let id = g.add_factor(table.clone(), &vars)?;
            if let Some(targets) = &f.directed_to {
                let targets = targets.iter().map(|r| lookup(&names, r)).collect::<Result<Vec<_>, _>>()?;
                g.set_directed_to(id, &targets)?;
            }
        }
        for n in nested {
            let t = templates.get(&n.template).ok_or_else(|| FormatError::UnknownRef {
                kind: "template",
                name: n.template.clone(),
            })?;
            let bound = n.bindings.iter().map(|r| lookup(&names, r)).collect::<Result<Vec<_>, _>>()?;
            g.add_nested_graph(&n.template, t, &bound)?;
        }
        Ok(names)
    }

    fn stream(
        &self,
        s: &StreamDoc,
        templates: &IndexMap<String, Arc<FactorGraph>>,
    ) -> Result<StreamSpec, FormatError> {
        let err = |message: String| FormatError::Stream { stream: s.name.clone(), message };
        if !templates.contains_key(&s.template) {
            return Err(FormatError::UnknownRef { kind: "template", name: s.template.clone() });
        }
        let domain = (**self.domain(&s.domain)?).clone();
        if s.buffer_size == 0 {
            return Err(err("buffer_size must be at least 1".into()));
        }
        if s.slices.len() != templates[&s.template].boundary().len() {
            return Err(err(format!(
                "{} slices for a template boundary of {}",
                s.slices.len(),
                templates[&s.template].boundary().len()
            )));
        }
        let data = match (&s.data, &s.data_file) {
            (Some(d), None) => d.clone(),
            (None, Some(file)) => {
                let path = match &self.base_dir {
                    Some(dir) => dir.join(file),
                    None => PathBuf::from(file),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
                parse_rows(&text).map_err(err)?
            }
            _ => return Err(err("exactly one of `data` and `data_file` is required".into())),
        };
        for (i, row) in data.iter().enumerate() {
            if row.len() != domain.size() {
                return Err(err(format!("row {i} has {} values, domain size is {}", row.len(), domain.size())));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) || row.iter().all(|&w| w == 0.0) {
                return Err(err(format!("row {i} is not a valid nonnegative weight vector")));
            }
        }
        Ok(StreamSpec {
            name: s.name.clone(),
            template: s.template.clone(),
            domain,
            slices: s.slices.clone(),
            buffer_size: s.buffer_size,
            data,
        })
    }
}

/// One row per nonblank line; values separated by whitespace or commas.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| format!("line {}: `{t}`: {e}", n + 1)))
                .collect()
        })
        .collect()
}

fn lookup(names: &HashMap<String, VarId>, r: &Ref) -> Result<VarId, FormatError> {
    let key = r.key();
    names
        .get(&key)
        .copied()
        .ok_or(FormatError::UnknownRef { kind: "variable", name: key })
}

fn build_table(t: &TableDoc) -> Result<FactorTable, String> {
    let degree = t.dims.len();
    let cells: usize = t.dims.iter().product();
    match (&t.entries, &t.weights) {
        (None, Some(w)) => {
            if t.storage == StorageDoc::Sparse {
                return Err("`weights` requires dense storage".into());
            }
            FactorTable::dense(t.dims.clone(), w.clone()).map_err(|e| e.to_string())
        }
        (Some(entries), None) => {
            let mut indices = Vec::with_capacity(entries.len());
            let mut weights = Vec::with_capacity(entries.len());
            for (k, e) in entries.iter().enumerate() {
                if e.len() != degree + 1 {
                    return Err(format!("entry {k} has {} values, expected {}", e.len(), degree + 1));
                }
                let idx = e[..degree]
                    .iter()
                    .map(|&x| {
                        if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
                            Ok(x as usize)
                        } else {
                            Err(format!("entry {k} has non-integer index {x}"))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                indices.push(idx);
                weights.push(e[degree]);
            }
            let sparse = FactorTable::sparse(t.dims.clone(), &indices, &weights).map_err(|e| e.to_string())?;
            match t.storage {
                StorageDoc::Sparse => Ok(sparse),
                StorageDoc::Dense => {
                    if cells == 0 {
                        return Err("table has no cells".into());
                    }
                    Ok(sparse.to_dense())
                }
            }
        }
        _ => Err("exactly one of `entries` and `weights` is required".into()),
    }
}

// ---- serialization ----

/// Serializes a bare graph.
pub fn graph_to_json(graph: &FactorGraph) -> Value {
    to_json_with(graph, &IndexMap::new(), &[])
}

struct Writer {
    domains: IndexMap<String, Vec<f64>>,
    tables: Vec<(Arc<FactorTable>, String)>,
    templates: IndexMap<String, TemplateDoc>,
}

impl Writer {
    fn domain_name(&mut self, d: &DiscreteDomain) -> String {
        if let Some((name, _)) = self.domains.iter().find(|(_, v)| v.as_slice() == d.values()) {
            return name.clone();
        }
        let name = if *d == DiscreteDomain::bit() {
            "bit".to_string()
        } else {
            format!("d{}", self.domains.len())
        };
        self.domains.insert(name.clone(), d.values().to_vec());
        name
    }

    fn table_name(&mut self, t: &Arc<FactorTable>) -> String {
        if let Some((_, name)) = self.tables.iter().find(|(u, _)| Arc::ptr_eq(u, t) || **u == **t) {
            return name.clone();
        }
        let name = format!("t{}", self.tables.len());
        self.tables.push((t.clone(), name.clone()));
        name
    }

    /// Variables, factors and nested instances of `g`, keeping templates when
    /// `g` is laid out the way the parser would rebuild it.
    fn body(&mut self, g: &FactorGraph, keep_nesting: bool) -> (Vec<VarDoc>, Vec<FactorDoc>, Vec<NestedDoc>) {
        let nesting = keep_nesting && canonical_layout(g);
        let (own_vars, own_factors) = if nesting {
            own_parts(g)
        } else {
            (g.var_ids().collect(), g.factors().map(|(id, _)| id).collect())
        };
        let name = |v: VarId| Ref::Name(g.variable(v).name().to_string());
        let vars = own_vars
            .iter()
            .map(|&v| {
                let var = g.variable(v);
                VarDoc {
                    id: name(v),
                    domain: self.domain_name(var.domain()),
                    input: Some(var.input().to_vec()),
                }
            })
            .collect();
        let factors = own_factors
            .iter()
            .map(|&f| {
                let factor = g.factor(f).expect("live factor");
                let table = g.table(factor.table()).clone();
                FactorDoc {
                    table: Ref::Name(self.table_name(&table)),
                    variables: factor.vars().iter().map(|&v| name(v)).collect(),
                    directed_to: factor
                        .directed_to()
                        .map(|ps| ps.iter().map(|&p| name(factor.vars()[p])).collect()),
                }
            })
            .collect();
        let mut nested = Vec::new();
        if nesting {
            for inst in g.nested() {
                self.template(&inst.template_name, &inst.template);
                nested.push(NestedDoc {
                    template: inst.template_name.clone(),
                    bindings: inst.bindings.iter().map(|&v| name(v)).collect(),
                });
            }
        }
        (vars, factors, nested)
    }

    fn template(&mut self, name: &str, t: &FactorGraph) {
        if self.templates.contains_key(name) {
            return;
        }
        let (variables, factors, nested) = self.body(t, true);
        let boundary = t
            .boundary()
            .iter()
            .map(|&v| Ref::Name(t.variable(v).name().to_string()))
            .collect();
        self.templates.insert(name.to_string(), TemplateDoc { boundary, variables, factors, nested });
    }
}

/// Variables and factors that belong to `g` itself rather than to a nested
/// instance.
fn own_parts(g: &FactorGraph) -> (Vec<VarId>, Vec<crate::graph::FactorId>) {
    let mut inst_vars = vec![false; g.variable_count()];
    let mut inst_factors = vec![false; g.factor_id_bound()];
    for inst in g.nested() {
        inst.variables.iter().for_each(|v| inst_vars[v.0] = true);
        inst.factors.iter().for_each(|f| inst_factors[f.0] = true);
    }
    (
        g.var_ids().filter(|v| !inst_vars[v.0]).collect(),
        g.factors().map(|(id, _)| id).filter(|f| !inst_factors[f.0]).collect(),
    )
}

/// True when reparsing the nested form reproduces every variable and factor
/// id: own variables and factors first, then each instance's in order, with
/// no removed factors, and template names consistent.
fn canonical_layout(g: &FactorGraph) -> bool {
    if g.factor_id_bound() != g.factor_count() {
        return false;
    }
    let (own_vars, own_factors) = own_parts(g);
    let mut next_var = own_vars.len();
    let mut next_factor = own_factors.len();
    if own_vars.iter().enumerate().any(|(i, v)| v.0 != i) || own_factors.iter().enumerate().any(|(i, f)| f.0 != i) {
        return false;
    }
    let mut seen: HashMap<&str, &Arc<FactorGraph>> = HashMap::new();
    for inst in g.nested() {
        if let Some(prev) = seen.insert(&inst.template_name, &inst.template) {
            if !Arc::ptr_eq(prev, &inst.template) {
                return false;
            }
        }
        if !canonical_layout(&inst.template) {
            return false;
        }
        for v in &inst.variables {
            if v.0 != next_var {
                return false;
            }
            next_var += 1;
        }
        for f in &inst.factors {
            if f.0 != next_factor {
                return false;
            }
            next_factor += 1;
        }
    }
    true
}

fn to_json_with(graph: &FactorGraph, templates: &IndexMap<String, Arc<FactorGraph>>, streams: &[StreamSpec]) -> Value {
    let mut w = Writer {
        domains: IndexMap::new(),
        tables: Vec::new(),
        templates: IndexMap::new(),
    };
    for t in graph.tables() {
        w.table_name(t);
    }
    let (variables, factors, nested) = w.body(graph, true);
    for (name, t) in templates {
        w.template(name, t);
    }
    let streams = streams
        .iter()
        .map(|s| StreamDoc {
            name: s.name.clone(),
            template: s.template.clone(),
            domain: w.domain_name(&s.domain),
            slices: s.slices.clone(),
            buffer_size: s.buffer_size,
            data: Some(s.data.clone()),
            data_file: None,
        })
        .collect();
    let tables = w
        .tables
        .iter()
        .map(|(t, name)| match t.kind() {
            StorageKind::Dense => TableDoc {
                id: Ref::Name(name.clone()),
                dims: t.dims().to_vec(),
                storage: StorageDoc::Dense,
                entries: None,
                weights: Some(t.weights().to_vec()),
            },
            StorageKind::Sparse => TableDoc {
                id: Ref::Name(name.clone()),
                dims: t.dims().to_vec(),
                storage: StorageDoc::Sparse,
                entries: Some(
                    t.entries()
                        .map(|(flat, wgt)| {
                            let mut e: Vec<f64> = t.decode(flat).into_iter().map(|i| i as f64).collect();
                            e.push(wgt);
                            e
                        })
                        .collect(),
                ),
                weights: None,
            },
        })
        .collect();
    let doc = Doc {
        format: FORMAT_VERSION,
        domains: w.domains,
        variables,
        tables,
        factors,
        templates: w.templates,
        nested,
        streams,
    };
    serde_json::to_value(doc).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    const NESTED: &str = r#"{
      "format": 1,
      "variables": [{"id": "a", "domain": "bit"}, {"id": "b", "domain": "bit"}, {"id": "c", "domain": "bit"}],
      "tables": [{"id": "xor3", "dims": [2, 2, 2], "storage": "sparse",
                  "entries": [[0,0,0,1],[0,1,1,1],[1,0,1,1],[1,1,0,1]]}],
      "templates": {"x": {"boundary": ["p", "q"],
                          "variables": [{"id": "p", "domain": "bit"}, {"id": "q", "domain": "bit"},
                                        {"id": "h", "domain": "bit", "input": [0.7, 0.3]}],
                          "factors": [{"table": "xor3", "variables": ["p", "q", "h"]}]}},
      "nested": [{"template": "x", "bindings": ["a", "b"]}, {"template": "x", "bindings": ["b", "c"]}]
    }"#;

    #[test]
    fn nested_model_builds() {
        let m = parse_model(NESTED, None).unwrap();
        assert_eq!(m.graph.variable_count(), 5);
        assert_eq!(m.graph.factor_count(), 2);
        assert_eq!(m.graph.tables().len(), 1);
        assert!(m.graph.find_variable("x[1]/h").is_some());
    }

    #[test]
    fn round_trip_is_stable() {
        let m = parse_model(NESTED, None).unwrap();
        let text = m.to_string_pretty();
        let again = parse_model(&text, None).unwrap();
        assert_eq!(again.to_string_pretty(), text);
        assert_eq!(again.graph.nested().len(), 2);
    }

    #[test]
    fn syntax_error_reports_offset() {
        let text = "{\n  \"format\": 1,\n  \"variables\": [,]\n}";
        match parse_model(text, None) {
            Err(FormatError::Parse { line, offset, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(&text[offset..offset + 1], ",");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_refs() {
        assert!(matches!(parse_model(r#"{"format": 2}"#, None), Err(FormatError::Version(2))));
        assert!(matches!(parse_model(r#"{"variables": []}"#, None), Err(FormatError::Invalid(_))));
        let bad = r#"{"format": 1, "variables": [{"id": 0, "domain": "trit"}]}"#;
        assert!(matches!(parse_model(bad, None), Err(FormatError::UnknownRef { kind: "domain", .. })));
        let cyc = r#"{"format": 1, "templates": {"a": {"boundary": [], "nested": [{"template": "a", "bindings": []}]}}}"#;
        assert!(matches!(parse_model(cyc, None), Err(FormatError::Model(ModelError::NestingCycle(_)))));
    }

    #[test]
    fn dense_entries_fill_zeros() {
        let text = r#"{"format": 1, "tables": [{"id": 0, "dims": [2], "entries": [[1, 2.5]]}]}"#;
        let m = parse_model(text, None).unwrap();
        assert_eq!(m.graph.tables()[0].weights(), &[0.0, 2.5]);
    }

    #[test]
    fn rows() {
        assert_eq!(parse_rows("1 0\n# c\n0.5,0.5\n\n").unwrap(), vec![vec![1.0, 0.0], vec![0.5, 0.5]]);
        assert!(parse_rows("1 x").is_err());
    }
}

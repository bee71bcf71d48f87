//! Undirected binary networks with exogenous node attributes.
//!
//! A [`Network`] stores the edge set twice: a hash set of canonical
//! `(min,max)` pairs for O(1) membership queries, and per-node adjacency
//! lists for O(degree) neighbor iteration. Both views are kept consistent
//! by [`Network::toggle`] / [`Network::set_edge`]. Nodes are dense integers
//! `0..n`; string identifiers from input files are mapped at ingestion.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`. No self-loops, no multi-edges.
#[derive(Clone, Debug)]
pub struct Network {
    n: usize,
    edges: HashSet<(u32, u32)>,
    adj: Vec<Vec<u32>>,
}

impl Network {
    /// Empty network on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Network {
            n,
            edges: HashSet::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Build from an edge iterator; rejects self-loops, out-of-range nodes,
    /// and ignores duplicate mentions of the same dyad.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut net = Network::empty(n);
        for (i, j) in edges {
            net.set_edge(i, j, true)?;
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of ties currently present.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of potential ties: n(n-1)/2.
    pub fn dyad_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    /// Ties per potential tie. Errors on n < 2 where the ratio is undefined.
    pub fn density(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::DegenerateNetwork { n: self.n });
        }
        Ok(self.edge_count() as f64 / self.dyad_count() as f64)
    }

    /// Average number of ties per node (0 for the empty node set).
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.n as f64
    }

    fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::InvalidDyad { i, j, n: self.n });
        }
        Ok(())
    }

    fn key(i: usize, j: usize) -> (u32, u32) {
        if i < j {
            (i as u32, j as u32)
        } else {
            (j as u32, i as u32)
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&Self::key(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    /// Flip the state of dyad `{i,j}`; returns the new state.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_dyad(i, j)?;
        let present = self.has_edge(i, j);
        self.write_edge(i, j, !present);
        Ok(!present)
    }

    /// Force dyad `{i,j}` to `present`; returns true if the state changed.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) -> Result<bool> {
        self.check_dyad(i, j)?;
        if self.has_edge(i, j) == present {
            return Ok(false);
        }
        self.write_edge(i, j, present);
        Ok(true)
    }

    fn write_edge(&mut self, i: usize, j: usize, present: bool) {
        let key = Self::key(i, j);
        if present {
            self.edges.insert(key);
            self.adj[i].push(j as u32);
            self.adj[j].push(i as u32);
        } else {
            self.edges.remove(&key);
            let pi = self.adj[i].iter().position(|&x| x == j as u32).unwrap();
            self.adj[i].swap_remove(pi);
            let pj = self.adj[j].iter().position(|&x| x == i as u32).unwrap();
            self.adj[j].swap_remove(pj);
        }
    }

    /// Edges in a deterministic order (via adjacency lists, so independent of
    /// the hash set's iteration order). Not sorted.
    pub fn iter_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.adj[i]
                .iter()
                .filter(move |&&j| (j as usize) > i)
                .map(move |&j| (i, j as usize))
        })
    }

    /// Canonically sorted edge list.
    pub fn edges_sorted(&self) -> Vec<(u32, u32)> {
        let mut v: Vec<(u32, u32)> = self.edges.iter().copied().collect();
        v.sort_unstable();
        v
    }

    /// Read a CSV edge list with header `i,j` (zero-based node indices).
    /// The node count must be supplied since isolates carry no rows.
    pub fn read_edge_list_csv<P: AsRef<Path>>(path: P, n: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = csv::Reader::from_reader(BufReader::new(file));
        let mut net = Network::empty(n);
        for record in reader.records() {
            let record = record?;
            let i: usize = parse_field(record.get(0), "i")?;
            let j: usize = parse_field(record.get(1), "j")?;
            net.set_edge(i, j, true)?;
        }
        Ok(net)
    }

    /// Write the canonical `i,j` CSV edge list.
    pub fn write_edge_list_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j")?;
        for (i, j) in self.edges_sorted() {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }
}

/// Declaration of one node attribute, shared by model files and survey
/// schemas. Categorical levels are dense codes `0..K` in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttrDecl {
    Categorical { name: String, levels: Vec<String> },
    Numeric { name: String },
}

impl AttrDecl {
    pub fn name(&self) -> &str {
        match self {
            AttrDecl::Categorical { name, .. } => name,
            AttrDecl::Numeric { name } => name,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CatColumn {
    pub name: String,
    pub labels: Vec<String>,
    pub codes: Vec<u16>,
}

#[derive(Clone, Debug)]
pub struct NumColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-node exogenous covariates: categorical codes plus real values.
#[derive(Clone, Debug, Default)]
pub struct AttributeTable {
    n: usize,
    cats: Vec<CatColumn>,
    nums: Vec<NumColumn>,
}

impl AttributeTable {
    pub fn new(n: usize) -> Self {
        AttributeTable {
            n,
            cats: Vec::new(),
            nums: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_categorical(
        &mut self,
        name: &str,
        labels: Vec<String>,
        codes: Vec<u16>,
    ) -> Result<()> {
        if codes.len() != self.n {
            return Err(Error::ModelMismatch(format!(
                "column {name} has {} entries, expected {}",
                codes.len(),
                self.n
            )));
        }
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= labels.len()) {
            return Err(Error::ModelMismatch(format!(
                "column {name}: code {bad} outside 0..{}",
                labels.len()
            )));
        }
        self.cats.push(CatColumn {
            name: name.to_string(),
            labels,
            codes,
        });
        Ok(())
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::ModelMismatch(format!(
                "column {name} has {} entries, expected {}",
                values.len(),
                self.n
            )));
        }
        self.nums.push(NumColumn {
            name: name.to_string(),
            values,
        });
        Ok(())
    }

    pub fn cat(&self, name: &str) -> Option<&CatColumn> {
        self.cats.iter().find(|c| c.name == name)
    }

    pub fn num(&self, name: &str) -> Option<&NumColumn> {
        self.nums.iter().find(|c| c.name == name)
    }

    pub fn cat_columns(&self) -> &[CatColumn] {
        &self.cats
    }

    pub fn num_columns(&self) -> &[NumColumn] {
        &self.nums
    }

    /// Code of `label` within categorical column `attr`.
    pub fn level_code(&self, attr: &str, label: &str) -> Result<u16> {
        let col = self
            .cat(attr)
            .ok_or_else(|| Error::ModelMismatch(format!("no categorical column {attr}")))?;
        col.labels
            .iter()
            .position(|l| l == label)
            .map(|p| p as u16)
            .ok_or_else(|| Error::ModelMismatch(format!("no level {label} in column {attr}")))
    }

    /// Read a `node,<col>,...` CSV. Column types come from `decls`; rows may
    /// appear in any order but must cover every node exactly once.
    pub fn read_csv<P: AsRef<Path>>(path: P, n: usize, decls: &[AttrDecl]) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = csv::Reader::from_reader(BufReader::new(file));
        let headers = reader.headers()?.clone();
        let col_index = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("attribute file missing column {name}")))
        };
        let node_col = col_index("node")?;
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); decls.len()];
        let mut seen = vec![false; n];
        let decl_cols: Vec<usize> = decls
            .iter()
            .map(|d| col_index(d.name()))
            .collect::<Result<_>>()?;
        let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let node: usize = parse_field(record.get(node_col), "node")?;
            if node >= n {
                return Err(Error::Parse(format!("node {node} out of range 0..{n}")));
            }
            if seen[node] {
                return Err(Error::Parse(format!("duplicate row for node {node}")));
            }
            seen[node] = true;
            let vals: Vec<String> = decl_cols
                .iter()
                .map(|&c| record.get(c).unwrap_or("").to_string())
                .collect();
            rows.push((node, vals));
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Parse(format!("no attribute row for node {missing}")));
        }
        rows.sort_unstable_by_key(|(node, _)| *node);
        for (_, vals) in &rows {
            for (k, v) in vals.iter().enumerate() {
                raw[k].push(v.clone());
            }
        }
        let mut table = AttributeTable::new(n);
        for (decl, column) in decls.iter().zip(raw) {
            match decl {
                AttrDecl::Categorical { name, levels } => {
                    let codes = column
                        .iter()
                        .map(|v| {
                            levels
                                .iter()
                                .position(|l| l == v)
                                .map(|p| p as u16)
                                .ok_or_else(|| {
                                    Error::Parse(format!("unknown level {v:?} for column {name}"))
                                })
                        })
                        .collect::<Result<Vec<u16>>>()?;
                    table.add_categorical(name, levels.clone(), codes)?;
                }
                AttrDecl::Numeric { name } => {
                    let values = column
                        .iter()
                        .map(|v| {
                            v.parse::<f64>().map_err(|_| {
                                Error::Parse(format!("bad numeric value {v:?} in column {name}"))
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    table.add_numeric(name, values)?;
                }
            }
        }
        Ok(table)
    }

    /// Write the `node,<col>,...` CSV with columns in declaration order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["node".to_string()];
        header.extend(self.cats.iter().map(|c| c.name.clone()));
        header.extend(self.nums.iter().map(|c| c.name.clone()));
        writeln!(w, "{}", header.join(","))?;
        for node in 0..self.n {
            let mut row = vec![node.to_string()];
            for c in &self.cats {
                row.push(c.labels[c.codes[node] as usize].clone());
            }
            for c in &self.nums {
                row.push(format_num(c.values[node]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// The attribute declarations this table satisfies.
    pub fn decls(&self) -> Vec<AttrDecl> {
        let mut decls: Vec<AttrDecl> = self
            .cats
            .iter()
            .map(|c| AttrDecl::Categorical {
                name: c.name.clone(),
                levels: c.labels.clone(),
            })
            .collect();
        decls.extend(self.nums.iter().map(|c| AttrDecl::Numeric {
            name: c.name.clone(),
        }));
        decls
    }
}

fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing field {name}")))?
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("bad value for field {name}")))
}

/// Parse an edge-list CSV from any reader (used by tests and the CLI).
pub fn read_edge_list<R: BufRead>(reader: R, n: usize) -> Result<Network> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut net = Network::empty(n);
    for record in csv_reader.records() {
        let record = record?;
        let i: usize = parse_field(record.get(0), "i")?;
        let j: usize = parse_field(record.get(1), "j")?;
        net.set_edge(i, j, true)?;
    }
    Ok(net)
}

//! Mastery datasets, performance-record transformation and contingency counts.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discrete variable (knowledge component) with states `0..cardinality`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        let name = name.into();
        if cardinality < 2 {
            return Err(Error::Schema(format!(
                "variable {name} has cardinality {cardinality}, need at least 2"
            )));
        }
        Ok(Variable { name, cardinality })
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            cardinality: 2,
        }
    }
}

/// Which generator and seed produced a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
}

/// One snapshot row of discrete mastery states per student.
///
/// Rows are stored flat, row-major, `variables.len()` cells per row.
#[derive(Debug, Clone, PartialEq)]
pub struct MasteryDataset {
    variables: Vec<Variable>,
    cells: Vec<usize>,
    provenance: Option<Provenance>,
}

impl MasteryDataset {
    /// Builds a dataset, validating unique names, `N ≥ 1`, and every cell against its cardinality.
    pub fn new(variables: Vec<Variable>, rows: Vec<Vec<usize>>) -> Result<Self> {
        let width = variables.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Parse {
                    row: r + 1,
                    column: String::new(),
                    message: format!("expected {width} cells, found {}", row.len()),
                });
            }
            cells.extend_from_slice(row);
        }
        Self::from_cells(variables, cells)
    }

    pub(crate) fn from_cells(variables: Vec<Variable>, cells: Vec<usize>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("dataset has no variables".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &variables {
            if v.cardinality < 2 {
                return Err(Error::Schema(format!(
                    "variable {} has cardinality {}, need at least 2",
                    v.name, v.cardinality
                )));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name {}", v.name)));
            }
        }
        let width = variables.len();
        if cells.is_empty() {
            return Err(Error::EmptyDataset("N ≥ 1 violated".into()));
        }
        debug_assert_eq!(cells.len() % width, 0);
        for (i, &value) in cells.iter().enumerate() {
            let var = &variables[i % width];
            if value >= var.cardinality {
                return Err(Error::Parse {
                    row: i / width + 1,
                    column: var.name.clone(),
                    message: format!(
                        "state {value} out of range for cardinality {}",
                        var.cardinality
                    ),
                });
            }
        }
        Ok(MasteryDataset {
            variables,
            cells,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Number of records `N`.
    pub fn n_rows(&self) -> usize {
        self.cells.len() / self.variables.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let w = self.variables.len();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.variables.len())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// A dataset over the same variables made of the given row indices (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> MasteryDataset {
        let mut cells = Vec::with_capacity(indices.len() * self.n_vars());
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        MasteryDataset {
            variables: self.variables.clone(),
            cells,
            provenance: None,
        }
    }

    /// Copy of the dataset with one column replaced.
    pub fn with_column(&self, var: usize, values: &[usize]) -> Result<MasteryDataset> {
        if values.len() != self.n_rows() {
            return Err(Error::Argument(format!(
                "column has {} values for {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        let mut cells = self.cells.clone();
        let w = self.n_vars();
        for (r, &v) in values.iter().enumerate() {
            cells[r * w + var] = v;
        }
        MasteryDataset::from_cells(self.variables.clone(), cells)
    }

    pub fn column(&self, var: usize) -> Vec<usize> {
        self.rows().map(|r| r[var]).collect()
    }

    /// Writes the dataset as CSV with a header row of variable names.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Optional explicit cardinalities, keyed by variable name.
pub type Schema = BTreeMap<String, usize>;

/// Reads a mastery CSV from disk. See [`read_mastery_csv`].
pub fn load_mastery_csv(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<MasteryDataset> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    read_mastery_csv(file, schema)
}

/// Parses a header-plus-integer-cells CSV.
///
/// Cardinalities come from `schema` when given, otherwise `max observed + 1`, clamped to ≥ 2.
pub fn read_mastery_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<MasteryDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut seen = std::collections::HashSet::new();
    for n in &names {
        if n.is_empty() {
            return Err(Error::Schema("empty column name in header".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Schema(format!("duplicate header name {n}")));
        }
    }
    let width = names.len();
    let mut cells = Vec::new();
    let mut max_seen = vec![0usize; width];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {width} cells, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: names[c].clone(),
                    message: "missing cell".into(),
                });
            }
            let v: usize = cell.parse().map_err(|_| Error::Parse {
                row,
                column: names[c].clone(),
                message: format!("{cell:?} is not a non-negative integer"),
            })?;
            max_seen[c] = max_seen[c].max(v);
            cells.push(v);
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyDataset("N ≥ 1 violated".into()));
    }
    let mut variables = Vec::with_capacity(width);
    for (c, name) in names.into_iter().enumerate() {
        let cardinality = match schema.and_then(|s| s.get(&name)) {
            Some(&k) => k,
            None => (max_seen[c] + 1).max(2),
        };
        variables.push(Variable { name, cardinality });
    }
    if let Some(s) = schema {
        if let Some(extra) = s.keys().find(|k| !variables.iter().any(|v| &v.name == *k)) {
            return Err(Error::Schema(format!("schema names unknown column {extra}")));
        }
    }
    MasteryDataset::from_cells(variables, cells)
}

/// A raw assessment score for one student on one knowledge component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub student_id: String,
    pub component_name: String,
    pub score: f64,
}

/// Result of [`transform_performance`]: the binary mastery dataset and the students dropped
/// for missing at least one component.
#[derive(Debug, Clone)]
pub struct TransformOutcome {
    pub dataset: MasteryDataset,
    pub students: Vec<String>,
    pub dropped: Vec<String>,
}

/// Thresholds per-(student, component) mean scores into binary mastery.
///
/// Students and components are ordered by name, so the result does not depend on record order.
pub fn transform_performance(records: &[PerformanceRecord], threshold: f64) -> Result<TransformOutcome> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} not in (0, 1)")));
    }
    let mut sums: BTreeMap<&str, BTreeMap<&str, (f64, u32)>> = BTreeMap::new();
    let mut components = std::collections::BTreeSet::new();
    for rec in records {
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(Error::Argument(format!(
                "score {} for ({}, {}) outside [0, 1]",
                rec.score, rec.student_id, rec.component_name
            )));
        }
        components.insert(rec.component_name.as_str());
        let e = sums
            .entry(rec.student_id.as_str())
            .or_default()
            .entry(rec.component_name.as_str())
            .or_insert((0.0, 0));
        e.0 += rec.score;
        e.1 += 1;
    }
    let variables: Vec<Variable> = components.iter().map(|c| Variable::binary(*c)).collect();
    let mut cells = Vec::new();
    let mut students = Vec::new();
    let mut dropped = Vec::new();
    for (student, per_kc) in &sums {
        if per_kc.len() < components.len() {
            dropped.push(student.to_string());
            continue;
        }
        students.push(student.to_string());
        for c in &components {
            let (sum, count) = per_kc[c];
            cells.push(usize::from(sum / f64::from(count) >= threshold));
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyDataset(
            "no student has records for every component".into(),
        ));
    }
    Ok(TransformOutcome {
        dataset: MasteryDataset::from_cells(variables, cells)?,
        students,
        dropped,
    })
}

/// Reads `student_id,component_name,score` rows.
pub fn read_performance_csv<R: Read>(reader: R) -> Result<Vec<PerformanceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Encodes a parent state tuple as a mixed-radix index, first parent most significant.
pub fn config_index(states: &[usize], cards: &[usize]) -> usize {
    states
        .iter()
        .zip(cards)
        .fold(0, |acc, (&s, &r)| acc * r + s)
}

/// Inverse of [`config_index`].
pub fn decode_config(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut states = vec![0; cards.len()];
    for (slot, &r) in states.iter_mut().zip(cards).rev() {
        *slot = index % r;
        index /= r;
    }
    states
}

/// Counts `N_ijk` for one child and an ordered parent list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub child: usize,
    pub parents: Vec<usize>,
    pub child_card: usize,
    pub parent_cards: Vec<usize>,
    counts: Vec<u64>,
}

impl ContingencyTable {
    /// Number of parent configurations `q_i` (1 when parentless).
    pub fn n_configs(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn count(&self, config: usize, state: usize) -> u64 {
        self.counts[config * self.child_card + state]
    }

    /// Counts for parent configuration `config`, one per child state.
    pub fn config_row(&self, config: usize) -> &[u64] {
        &self.counts[config * self.child_card..(config + 1) * self.child_card]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.counts.chunks_exact(self.child_card)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Tallies how often each (parent configuration, child state) pair occurs.
pub fn contingency(data: &MasteryDataset, child: usize, parents: &[usize]) -> Result<ContingencyTable> {
    let n = data.n_vars();
    if child >= n || parents.iter().any(|&p| p >= n) {
        return Err(Error::Argument("variable index out of range".into()));
    }
    if parents.contains(&child) {
        return Err(Error::Argument(format!(
            "child {} listed among its parents",
            data.variables()[child].name
        )));
    }
    let vars = data.variables();
    let child_card = vars[child].cardinality;
    let parent_cards: Vec<usize> = parents.iter().map(|&p| vars[p].cardinality).collect();
    let q: usize = parent_cards.iter().product();
    let mut counts = vec![0u64; q * child_card];
    for row in data.rows() {
        let j = parents
            .iter()
            .zip(&parent_cards)
            .fold(0, |acc, (&p, &r)| acc * r + row[p]);
        counts[j * child_card + row[child]] += 1;
    }
    Ok(ContingencyTable {
        child,
        parents: parents.to_vec(),
        child_card,
        parent_cards,
        counts,
    })
}

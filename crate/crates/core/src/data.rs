//! Categorical datasets: CSV ingestion, cross-validation folds, dense joint
//! tables and exact sampling from them.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, which is specified
//! independently of platform and word size, so folds and samples are
//! bit-reproducible everywhere.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radix::{self, Radix};

/// Build the generator used for every seeded operation in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` complete observations of `d` categorical variables, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    values: Vec<u32>,
    n: usize,
    cardinalities: Vec<usize>,
    variable_names: Vec<String>,
    /// Category labels per column, when the column was string-encoded.
    levels: Vec<Option<Vec<String>>>,
}

impl Dataset {
    /// Build from row-major codes. Every code in column `j` must be below
    /// `cardinalities[j]`, and every cardinality must be at least 2.
    pub fn new(values: Vec<u32>, cardinalities: Vec<usize>) -> Result<Self> {
        let d = cardinalities.len();
        if d == 0 {
            return Err(Error::invalid("dataset needs at least one variable"));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of {d} columns",
                values.len()
            )));
        }
        let n = values.len() / d;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        for (j, &r) in cardinalities.iter().enumerate() {
            if r < 2 {
                return Err(Error::invalid(format!(
                    "variable {} has cardinality {r}; at least 2 is required",
                    j + 1
                )));
            }
        }
        for (row, chunk) in values.chunks(d).enumerate() {
            for (j, &v) in chunk.iter().enumerate() {
                if v as usize >= cardinalities[j] {
                    return Err(Error::OutOfRange {
                        row: row + 1,
                        column: j + 1,
                        code: v,
                        cardinality: cardinalities[j] as u32,
                    });
                }
            }
        }
        let variable_names = (1..=d).map(|j| format!("X{j}")).collect();
        Ok(Self {
            values,
            n,
            cardinalities,
            variable_names,
            levels: vec![None; d],
        })
    }

    /// Build from rows, inferring each cardinality as `max(1 + max code, 2)`.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let mut cards = vec![2usize; d];
        let mut values = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "row {} has {} entries, expected {d}",
                    r + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                cards[j] = cards[j].max(v as usize + 1);
            }
            values.extend_from_slice(row);
        }
        Self::new(values, cards)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} variables",
                names.len(),
                self.d()
            )));
        }
        self.variable_names = names;
        Ok(self)
    }

    /// Replace the cardinalities, which may only grow.
    pub fn with_cardinalities(mut self, cards: Vec<usize>) -> Result<Self> {
        if cards.len() != self.d() {
            return Err(Error::ShapeMismatch(format!(
                "{} cardinalities for {} variables",
                cards.len(),
                self.d()
            )));
        }
        for (j, (&new, &old)) in cards.iter().zip(&self.cardinalities).enumerate() {
            if new < old {
                let row = self.column(j).position(|v| v as usize >= new).unwrap_or(0);
                return Err(Error::OutOfRange {
                    row: row + 1,
                    column: j + 1,
                    code: self.get(row, j),
                    cardinality: new as u32,
                });
            }
        }
        self.cardinalities = cards;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Category labels of column `j` in code order, if it was string-encoded.
    pub fn levels(&self, j: usize) -> Option<&[String]> {
        self.levels[j].as_deref()
    }

    pub fn get(&self, row: usize, j: usize) -> u32 {
        self.values[row * self.d() + j]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let d = self.d();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.values.chunks(self.d())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u32> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Subset of rows, in the given order, keeping names and cardinalities.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut values = Vec::with_capacity(rows.len() * self.d());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Ok(Self {
            values,
            n: rows.len(),
            cardinalities: self.cardinalities.clone(),
            variable_names: self.variable_names.clone(),
            levels: self.levels.clone(),
        })
    }

    /// Counts of every joint configuration, flattened row-major.
    pub fn joint_counts(&self, cap: usize) -> Result<Vec<u64>> {
        let radix = Radix::new(&self.cardinalities, cap)?;
        let mut counts = vec![0u64; radix.len()];
        for row in self.rows() {
            counts[radix.index(row)] += 1;
        }
        Ok(counts)
    }

    /// Write as CSV with a header of variable names and integer codes.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.variable_names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optional sidecar fixing variable names and cardinalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<SchemaVariable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaVariable {
    pub name: String,
    pub cardinality: usize,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Ok(serde_json::from_reader(file)?)
    }
}

/// Load a categorical CSV file.
///
/// A column whose tokens are all non-negative integers keeps them as codes.
/// Any other column is treated as category labels and encoded in order of
/// first appearance. Tokens that look numeric but are not non-negative
/// integers (`-1`, `0.5`) and empty tokens are rejected.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, schema: Option<&Schema>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, has_header, schema).map_err(|e| match e {
        Error::InvalidArgument(message) => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parse CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, has_header: bool, schema: Option<&Schema>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header: Option<Vec<String>> = if has_header {
        match records.next() {
            Some(rec) => Some(rec?.iter().map(str::to_string).collect()),
            None => return Err(Error::invalid("file is empty")),
        }
    } else {
        None
    };

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let line = i + 1 + usize::from(has_header);
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::invalid(format!(
                    "line {line} has {} fields, expected {w}",
                    rec.len()
                )))
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    let d = width.unwrap_or(0);
    if raw.is_empty() || d == 0 {
        return Err(Error::invalid("file contains no data rows"));
    }
    let first_data_line = 1 + usize::from(has_header);

    if let Some(s) = schema {
        if s.variables.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "schema declares {} variables but the file has {d} columns",
                s.variables.len()
            )));
        }
    }

    let n = raw.len();
    let mut values = vec![0u32; n * d];
    let mut cards = vec![2usize; d];
    let mut levels: Vec<Option<Vec<String>>> = vec![None; d];

    for j in 0..d {
        let numeric = raw.iter().all(|r| r[j].parse::<u32>().is_ok());
        if numeric {
            for (i, r) in raw.iter().enumerate() {
                let v: u32 = r[j].parse().expect("checked above");
                values[i * d + j] = v;
                cards[j] = cards[j].max(v as usize + 1);
            }
        } else {
            if let Some(i) = raw.iter().position(|r| is_malformed(&r[j])) {
                return Err(Error::Parse {
                    row: i + first_data_line,
                    column: j + 1,
                    token: raw[i][j].clone(),
                });
            }
            let mut codes: HashMap<&str, u32> = HashMap::new();
            let mut order: Vec<String> = Vec::new();
            for (i, r) in raw.iter().enumerate() {
                let tok = r[j].as_str();
                let next = codes.len() as u32;
                let code = *codes.entry(tok).or_insert_with(|| {
                    order.push(tok.to_string());
                    next
                });
                values[i * d + j] = code;
            }
            cards[j] = order.len().max(2);
            levels[j] = Some(order);
        }
        if let Some(s) = schema {
            let declared = s.variables[j].cardinality;
            if declared < 2 {
                return Err(Error::invalid(format!(
                    "schema cardinality of column {} must be at least 2",
                    j + 1
                )));
            }
            if let Some(i) = (0..n).find(|&i| values[i * d + j] as usize >= declared) {
                return Err(Error::OutOfRange {
                    row: i + first_data_line,
                    column: j + 1,
                    code: values[i * d + j],
                    cardinality: declared as u32,
                });
            }
            cards[j] = declared;
        }
    }

    let names = match (schema, header) {
        (Some(s), _) => s.variables.iter().map(|v| v.name.clone()).collect(),
        (None, Some(h)) => h,
        (None, None) => (1..=d).map(|j| format!("X{j}")).collect(),
    };

    let mut ds = Dataset::new(values, cards)?.with_names(names)?;
    ds.levels = levels;
    Ok(ds)
}

/// Empty, or numeric without being a non-negative integer.
fn is_malformed(tok: &str) -> bool {
    tok.is_empty() || (tok.parse::<f64>().is_ok() && tok.parse::<u32>().is_err())
}

/// Assignment of `n` observations to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_assignment: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.fold_assignment.len()
    }

    /// Row indices of fold `f`, ascending.
    pub fn test_rows(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_assignment[i] == f).collect()
    }

    /// Row indices outside fold `f`, ascending.
    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_assignment[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffle `0..n` with the seeded generator and deal the permutation
/// round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count {k} must be at least 2")));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds the number of observations {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut fold_assignment = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold_assignment[row] = pos % k;
    }
    Ok(FoldPlan {
        fold_assignment,
        k,
        seed,
    })
}

/// Dense probability table over a joint outcome space, row-major with the
/// first variable most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    cardinalities: Vec<usize>,
    probabilities: Vec<f64>,
}

impl JointTable {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(cardinalities: Vec<usize>, probabilities: Vec<f64>, cap: usize) -> Result<Self> {
        let cells = radix::cells(&cardinalities);
        if cells > cap as u128 {
            return Err(Error::Capacity { cells, cap });
        }
        let t = Self {
            cardinalities,
            probabilities,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let cells = radix::cells(&self.cardinalities);
        if cells != self.probabilities.len() as u128 {
            return Err(Error::ShapeMismatch(format!(
                "table has {} cells but cardinalities imply {cells}",
                self.probabilities.len()
            )));
        }
        if let Some(p) = self.probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::invalid(format!("table entry {p} is not a probability")));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!("table sums to {total}, not 1")));
        }
        Ok(())
    }

    /// Uniform table.
    pub fn uniform(cardinalities: Vec<usize>, cap: usize) -> Result<Self> {
        let radix = Radix::new(&cardinalities, cap)?;
        let p = 1.0 / radix.len() as f64;
        Ok(Self {
            cardinalities,
            probabilities: vec![p; radix.len()],
        })
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn prob(&self, config: &[u32]) -> f64 {
        let radix = Radix::new(&self.cardinalities, usize::MAX).expect("validated shape");
        self.probabilities[radix.index(config)]
    }

    /// Total variation distance, `½ Σ |p − q|`.
    pub fn total_variation(&self, other: &JointTable) -> Result<f64> {
        if self.cardinalities != other.cardinalities {
            return Err(Error::ShapeMismatch(format!(
                "cardinalities {:?} vs {:?}",
                self.cardinalities, other.cardinalities
            )));
        }
        Ok(0.5
            * self
                .probabilities
                .iter()
                .zip(&other.probabilities)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Draw `n` rows from `table` by inverse CDF over the flattened table.
pub fn sample_joint(table: &JointTable, n: usize, seed: u64, cap: usize) -> Result<Dataset> {
    let radix = Radix::new(&table.cardinalities, cap)?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut cdf = Vec::with_capacity(table.len());
    let mut acc = 0.0;
    for &p in &table.probabilities {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = table
        .probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .ok_or_else(|| Error::invalid("table has no positive cell"))?;

    let mut rng = rng_from_seed(seed);
    let d = table.cardinalities.len();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        // first cell whose cumulative mass exceeds u; zero cells never win
        let cell = cdf.partition_point(|&c| c <= u).min(last_positive);
        values.extend(radix.decode(cell));
    }
    Dataset::new(values, table.cardinalities.clone())
}

/// Relative frequency of every joint configuration.
pub fn empirical_joint(dataset: &Dataset, cap: usize) -> Result<JointTable> {
    let counts = dataset.joint_counts(cap)?;
    let n = dataset.n() as f64;
    Ok(JointTable {
        cardinalities: dataset.cardinalities().to_vec(),
        probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

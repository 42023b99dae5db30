//! Tabular datasets: CSV ingestion with a JSON schema, synthetic
//! generators, and seeded train/test splits.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{median, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category codes; categorical columns only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Raw label value mapped to 1; label column only. When absent the
    /// lexicographically larger of the two raw labels is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
            positive: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            positive: None,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Label,
            categories: Vec::new(),
            positive: None,
        }
    }

    pub fn with_positive(mut self, value: impl Into<String>) -> Self {
        self.positive = Some(value.into());
        self
    }

    fn encoded_width(&self) -> usize {
        match self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => self.categories.len(),
            ColumnKind::Label => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaFile {
    Wrapped { columns: Vec<ColumnSpec> },
    Bare(Vec<ColumnSpec>),
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    /// Reads a schema from JSON, either `{"columns": [...]}` or a bare array.
    pub fn from_json(text: &str) -> Result<Self> {
        let columns = match serde_json::from_str::<SchemaFile>(text)? {
            SchemaFile::Wrapped { columns } | SchemaFile::Bare(columns) => columns,
        };
        Self::new(columns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::InvalidSchema(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        let mut names = BTreeSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column name {:?}",
                    col.name
                )));
            }
            match col.kind {
                ColumnKind::Categorical => {
                    if col.categories.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "categorical column {:?} has no categories",
                            col.name
                        )));
                    }
                    let distinct: BTreeSet<_> = col.categories.iter().collect();
                    if distinct.len() != col.categories.len() {
                        return Err(Error::InvalidSchema(format!(
                            "categorical column {:?} lists a category twice",
                            col.name
                        )));
                    }
                }
                _ if !col.categories.is_empty() => {
                    return Err(Error::InvalidSchema(format!(
                        "column {:?} is not categorical but lists categories",
                        col.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Label)
            .expect("validated schema has a label column")
    }

    /// Names of the encoded feature columns, one-hot columns as `name=code`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match col.kind {
                ColumnKind::Numeric => names.push(col.name.clone()),
                ColumnKind::Categorical => names.extend(
                    col.categories
                        .iter()
                        .map(|cat| format!("{}={}", col.name, cat)),
                ),
                ColumnKind::Label => {}
            }
        }
        names
    }

    pub fn encoded_dim(&self) -> usize {
        self.columns.iter().map(ColumnSpec::encoded_width).sum()
    }

    /// All-numeric schema `x0..x{d-1}` plus label `y`.
    pub fn numeric(d: usize) -> Self {
        let mut columns: Vec<_> = (0..d)
            .map(|j| ColumnSpec::numeric(format!("x{j}")))
            .collect();
        columns.push(ColumnSpec::label("y"));
        Self { columns }
    }
}

/// Encoded feature matrix (row-major) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    n: usize,
    d: usize,
    schema: Schema,
}

impl Dataset {
    /// Builds a dataset from a row-major matrix. `schema` must encode to `d`
    /// columns.
    pub fn new(features: Vec<f64>, labels: Vec<u8>, d: usize, schema: Schema) -> Result<Self> {
        let n = labels.len();
        if features.len() != n * d {
            return Err(Error::InvalidDimension {
                expected: n * d,
                got: features.len(),
            });
        }
        if schema.encoded_dim() != d {
            return Err(Error::InvalidDimension {
                expected: d,
                got: schema.encoded_dim(),
            });
        }
        if let Some(&bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value {bad}"
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            n,
            d,
            schema,
        })
    }

    /// Numeric dataset from rows, with the default `x0..` schema.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::InvalidDimension {
                expected: d,
                got: bad.len(),
            });
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(features, labels, d, Schema::numeric(d))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.d + j]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero width
        (0..self.n).map(move |i| self.row(i))
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::LengthMismatch {
                left: self.n,
                right: labels.len(),
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    /// Rows selected by index, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            labels,
            n: indices.len(),
            d: self.d,
            schema: self.schema.clone(),
        }
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.n as f64
    }

    /// Recovers the raw category codes of a categorical column from its
    /// one-hot block.
    pub fn categorical_codes(&self, column: &str) -> Result<Vec<String>> {
        let mut offset = 0;
        for col in &self.schema.columns {
            if col.name == column {
                if col.kind != ColumnKind::Categorical {
                    return Err(Error::InvalidParameter(format!(
                        "column {column:?} is not categorical"
                    )));
                }
                let k = col.categories.len();
                return Ok((0..self.n)
                    .map(|i| {
                        let block = &self.row(i)[offset..offset + k];
                        let hot = block.iter().position(|&v| v == 1.0).unwrap_or(0);
                        col.categories[hot].clone()
                    })
                    .collect());
            }
            offset += col.encoded_width();
        }
        Err(Error::SchemaMismatch(format!("no column named {column:?}")))
    }
}

/// Reads a CSV file, one-hot encoding categoricals and median-imputing
/// unparseable numeric cells.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != schema.columns.len() {
        return Err(Error::SchemaMismatch(format!(
            "header has {} columns, schema has {}",
            headers.len(),
            schema.columns.len()
        )));
    }
    let positions: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut source = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        match positions.get(col.name.as_str()) {
            Some(&i) => source.push(i),
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "column {:?} missing from header",
                    col.name
                )))
            }
        }
    }

    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let n = records.len();
    let d = schema.encoded_dim();
    let mut features = vec![0.0; n * d];
    let mut raw_labels = Vec::with_capacity(n);

    let mut offset = 0;
    for (col, &src) in schema.columns.iter().zip(&source) {
        match col.kind {
            ColumnKind::Numeric => {
                let parsed: Vec<Option<f64>> = records
                    .iter()
                    .map(|r| r[src].parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect();
                let present: Vec<f64> = parsed.iter().flatten().copied().collect();
                if present.is_empty() && n > 0 {
                    return Err(Error::NoNumericValues(col.name.clone()));
                }
                let fill = median(&present);
                for (i, v) in parsed.into_iter().enumerate() {
                    features[i * d + offset] = v.unwrap_or(fill);
                }
            }
            ColumnKind::Categorical => {
                let index: HashMap<&str, usize> = col
                    .categories
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (c.as_str(), k))
                    .collect();
                for (i, r) in records.iter().enumerate() {
                    let value = &r[src];
                    let k = *index.get(value).ok_or_else(|| Error::UnknownCategory {
                        column: col.name.clone(),
                        value: value.to_string(),
                    })?;
                    features[i * d + offset + k] = 1.0;
                }
            }
            ColumnKind::Label => {
                raw_labels.extend(records.iter().map(|r| r[src].to_string()));
            }
        }
        offset += col.encoded_width();
    }

    let labels = encode_labels(&raw_labels, schema.label_column().positive.as_deref())?;
    Dataset::new(features, labels, d, schema.clone())
}

fn encode_labels(raw: &[String], positive: Option<&str>) -> Result<Vec<u8>> {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let too_many = || Error::NonBinaryLabel(distinct.iter().map(|s| s.to_string()).collect());
    let positive = match positive {
        Some(p) => {
            if distinct.len() > 2 || (distinct.len() == 2 && !distinct.contains(p)) {
                return Err(too_many());
            }
            p
        }
        None => {
            if distinct.len() != 2 {
                return Err(too_many());
            }
            // lexicographically smaller label is the negative class
            *distinct.iter().next_back().unwrap()
        }
    };
    Ok(raw.iter().map(|v| u8::from(v == positive)).collect())
}

/// Standard-normal features with labels drawn from a logistic model.
/// Returns the dataset together with the true probabilities.
pub fn make_synthetic(
    n: usize,
    d: usize,
    weights: &[f64],
    intercept: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be at least 1".into()));
    }
    if weights.len() != d {
        return Err(Error::InvalidDimension {
            expected: d,
            got: weights.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        features.extend((0..d).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        let z: f64 = features[start..]
            .iter()
            .zip(weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + intercept;
        let p = sigmoid(z);
        labels.push(u8::from(rng::bernoulli(&mut rng, p)));
        p_star.push(p);
    }
    Ok((
        Dataset::new(features, labels, d, Schema::numeric(d))?,
        p_star,
    ))
}

/// Two-feature dataset with two stable, well-separated pure clusters and a
/// central unstable region.
///
/// `stable_fraction` of the rows sit in the clusters (half negative around
/// `x0 = -6`, half positive around `x0 = +6`); the rest are uniform on
/// `x0 ∈ [-1, 1]` with positive-class probability `unstable_p`. The second
/// feature is pure noise.
pub fn make_stable_unstable(
    n: usize,
    stable_fraction: f64,
    unstable_p: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n < 4 {
        return Err(Error::InvalidParameter("need at least 4 rows".into()));
    }
    if !(0.0..=1.0).contains(&stable_fraction) {
        return Err(Error::InvalidParameter(format!(
            "stable_fraction {stable_fraction} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&unstable_p) {
        return Err(Error::InvalidProbability(unstable_p));
    }
    let mut rng = rng::seeded(seed);
    let n_stable = ((n as f64) * stable_fraction).round() as usize;
    let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    for i in 0..n {
        let noise: f64 = StandardNormal.sample(&mut rng);
        let (x0, p) = if i < n_stable {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            if i % 2 == 0 {
                (-6.0 + 0.5 * jitter, 0.0)
            } else {
                (6.0 + 0.5 * jitter, 1.0)
            }
        } else {
            (uniform.sample(&mut rng), unstable_p)
        };
        features.push(x0);
        features.push(noise);
        labels.push(u8::from(rng::bernoulli(&mut rng, p)));
        p_star.push(p);
    }
    // interleave the regions so that splits see all of them
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let ds = Dataset::new(features, labels, 2, Schema::numeric(2))?.subset(&order);
    let p_star = order.iter().map(|&i| p_star[i]).collect();
    Ok((ds, p_star))
}

/// Index sets of a seeded train/test split: the first
/// `ceil(n * (1 - test_fraction))` rows of a uniform permutation go to train.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    // guard against 10 * 0.7 = 7.000000000000001
    let n_train = ((n as f64) * (1.0 - test_fraction) - 1e-9).ceil().max(0.0) as usize;
    let n_train = n_train.min(n);
    if n_train < 2 || n_train == n {
        return Err(Error::DegenerateSplit {
            train: n_train,
            test: n - n_train,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let test = perm.split_off(n_train);
    Ok((perm, test))
}

pub fn train_test_split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::DegenerateSplit { train: 0, test: 0 });
    }
    let (train, test) = split_indices(dataset.n(), test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

//! Tabular data, synthetic structural equation models and splitting.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Column-named numeric matrix with a designated target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    column_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target_index: usize,
}

impl DataTable {
    pub fn new(column_names: Vec<String>, columns: Vec<Vec<f64>>, target_index: usize) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::Data(format!(
                "{} names for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        if target_index >= columns.len() {
            return Err(Error::Data(format!(
                "target index {target_index} out of range for {} columns",
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate column name '{name}'")));
            }
        }
        let rows = columns[0].len();
        for (name, col) in column_names.iter().zip(&columns) {
            if col.len() != rows {
                return Err(Error::Data(format!(
                    "column '{name}' has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value in column '{name}' at row {}", r + 1)));
            }
        }
        Ok(Self {
            column_names,
            columns,
            target_index,
        })
    }

    pub fn row_count(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_name(&self) -> &str {
        &self.column_names[self.target_index]
    }

    pub fn target(&self) -> &[f64] {
        &self.columns[self.target_index]
    }

    /// Column indices of the features, in column order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&c| c != self.target_index).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_indices()
            .into_iter()
            .map(|c| self.column_names[c].clone())
            .collect()
    }

    /// Feature values of one row, in feature order.
    pub fn feature_row(&self, row: usize) -> Vec<f64> {
        self.feature_indices().into_iter().map(|c| self.columns[c][row]).collect()
    }

    /// Row-major design matrix of the features.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let features = self.feature_indices();
        DMatrix::from_fn(self.row_count(), features.len(), |r, c| self.columns[features[c]][r])
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        DataTable {
            column_names: self.column_names.clone(),
            columns,
            target_index: self.target_index,
        }
    }

    /// Keeps the named features (in the given order) plus the target.
    pub fn select_features(&self, names: &[String]) -> Result<DataTable> {
        let mut column_names = Vec::with_capacity(names.len() + 1);
        let mut columns = Vec::with_capacity(names.len() + 1);
        for name in names {
            let idx = self
                .column_index(name)
                .filter(|&i| i != self.target_index)
                .ok_or_else(|| Error::Data(format!("unknown feature '{name}'")))?;
            column_names.push(name.clone());
            columns.push(self.columns[idx].clone());
        }
        column_names.push(self.target_name().to_string());
        columns.push(self.target().to_vec());
        DataTable::new(column_names, columns, names.len())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.column_names).map_err(|e| Error::Csv(e.to_string()))?;
        for r in 0..self.row_count() {
            w.write_record(self.columns.iter().map(|c| format_real(c[r])))
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest round-trip decimal representation.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

/// Reads a CSV with a single header row; every body cell must be a finite number.
pub fn load_csv(path: &Path, target_name: &str) -> Result<DataTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_name)
}

pub fn read_csv<R: Read>(reader: R, target_name: &str) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_index = header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::Data(format!("target column '{target_name}' not found")))?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => Error::Csv(format!(
                "row {row} has {len} fields, expected {expected_len}"
            )),
            _ => Error::Csv(format!("row {row}: {e}")),
        })?;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Csv(format!("row {row}, column '{}': cannot parse '{cell}' as a number", header[c]))
            })?;
            if !v.is_finite() {
                return Err(Error::Csv(format!("row {row}, column '{}': non-finite value '{cell}'", header[c])));
            }
            columns[c].push(v);
        }
    }
    DataTable::new(header, columns, target_index)
}

/// Noise or exogenous distribution. `sd` is a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Distribution::Normal { mean, sd }
    }

    pub fn zero() -> Self {
        Distribution::Normal { mean: 0.0, sd: 0.0 }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            Distribution::Normal { mean, sd } if mean.is_finite() && sd.is_finite() && sd >= 0.0 => Ok(()),
            Distribution::Uniform { low, high } if low.is_finite() && high.is_finite() && low <= high => Ok(()),
            _ => Err(Error::InvalidArgument(format!("invalid distribution for {what}: {self:?}"))),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                mean + sd * z
            }
            Distribution::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    Uniform::new(low, high).expect("validated bounds").sample(rng)
                }
            }
        }
    }
}

/// How a structural equation's linear predictor becomes the variable value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// value = Σ coefficient·parent + noise
    #[default]
    Identity,
    /// value ~ Bernoulli(logistic(Σ coefficient·parent + noise)), coded 0/1
    LogisticBernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub parents: Vec<(String, f64)>,
    pub noise: Distribution,
    #[serde(default)]
    pub link: Link,
}

/// A linear structural equation model with a designated target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemSpec {
    pub variables: Vec<String>,
    pub exogenous: BTreeMap<String, Distribution>,
    pub equations: BTreeMap<String, Equation>,
    pub target: String,
    pub seed: u64,
}

impl SemSpec {
    pub fn validate(&self) -> Result<()> {
        let mut defined: HashSet<&str> = HashSet::new();
        for name in &self.variables {
            if defined.contains(name.as_str()) {
                return Err(Error::InvalidArgument(format!("variable '{name}' listed twice")));
            }
            match (self.exogenous.get(name), self.equations.get(name)) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "variable '{name}' is both exogenous and structural"
                    )))
                }
                (None, None) => return Err(Error::InvalidArgument(format!("variable '{name}' is undefined"))),
                (Some(d), None) => d.validate(name)?,
                (None, Some(eq)) => {
                    eq.noise.validate(name)?;
                    for (parent, coef) in &eq.parents {
                        if !defined.contains(parent.as_str()) {
                            return Err(Error::InvalidArgument(format!(
                                "parent '{parent}' of '{name}' must precede it"
                            )));
                        }
                        if !coef.is_finite() {
                            return Err(Error::InvalidArgument(format!("non-finite coefficient in '{name}'")));
                        }
                    }
                }
            }
            defined.insert(name);
        }
        let extra = self
            .exogenous
            .keys()
            .chain(self.equations.keys())
            .find(|k| !defined.contains(k.as_str()));
        if let Some(k) = extra {
            return Err(Error::InvalidArgument(format!("'{k}' is defined but not listed in variables")));
        }
        if !defined.contains(self.target.as_str()) {
            return Err(Error::InvalidArgument(format!("target '{}' is not a variable", self.target)));
        }
        Ok(())
    }

    /// Parent names of a variable; empty for exogenous ones.
    pub fn parents_of(&self, name: &str) -> Vec<(String, f64)> {
        self.equations.get(name).map(|e| e.parents.clone()).unwrap_or_default()
    }
}

/// Draws `n` independent rows from the model. Pure in `(spec, n)`.
pub fn sample_sem(spec: &SemSpec, n: usize) -> Result<DataTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    spec.validate()?;
    let index: BTreeMap<&str, usize> = spec
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    enum Step {
        Exogenous(Distribution),
        Structural(Vec<(usize, f64)>, Distribution, Link),
    }
    let steps: Vec<Step> = spec
        .variables
        .iter()
        .map(|v| match spec.exogenous.get(v) {
            Some(d) => Step::Exogenous(*d),
            None => {
                let eq = &spec.equations[v];
                let parents = eq.parents.iter().map(|(p, c)| (index[p.as_str()], *c)).collect();
                Step::Structural(parents, eq.noise, eq.link)
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns = vec![Vec::with_capacity(n); spec.variables.len()];
    let mut row = vec![0.0; spec.variables.len()];
    for _ in 0..n {
        for (k, step) in steps.iter().enumerate() {
            row[k] = match step {
                Step::Exogenous(d) => d.sample(&mut rng),
                Step::Structural(parents, noise, link) => {
                    let lin: f64 = parents.iter().map(|&(p, c)| c * row[p]).sum::<f64>() + noise.sample(&mut rng);
                    match link {
                        Link::Identity => lin,
                        Link::LogisticBernoulli => {
                            let p = 1.0 / (1.0 + (-lin).exp());
                            if rng.random::<f64>() < p {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    }
                }
            };
        }
        for (col, v) in columns.iter_mut().zip(&row) {
            col.push(*v);
        }
    }
    let target_index = index[spec.target.as_str()];
    DataTable::new(spec.variables.clone(), columns, target_index)
}

fn structural(parents: &[(&str, f64)], noise: Distribution) -> Equation {
    Equation {
        parents: parents.iter().map(|(p, c)| (p.to_string(), *c)).collect(),
        noise,
        link: Link::Identity,
    }
}

/// Smoking and stress confound coffee drinking and lung-cancer risk.
pub fn lung_cancer_spec(seed: u64) -> SemSpec {
    SemSpec {
        variables: ["smoking", "stress", "drink_coffee", "lung_cancer_risk"]
            .map(String::from)
            .to_vec(),
        exogenous: BTreeMap::from([
            ("smoking".to_string(), Distribution::normal(5.0, 2.0)),
            ("stress".to_string(), Distribution::normal(5.0, 2.0)),
        ]),
        equations: BTreeMap::from([
            (
                "drink_coffee".to_string(),
                structural(&[("smoking", 2.0), ("stress", 1.0)], Distribution::normal(0.0, 1.0)),
            ),
            (
                "lung_cancer_risk".to_string(),
                structural(&[("smoking", 2.0), ("stress", 1.2)], Distribution::normal(0.0, 3.0)),
            ),
        ]),
        target: "lung_cancer_risk".into(),
        seed,
    }
}

/// Diet and sleep act on cardiovascular risk only through BMI; mental health is a
/// sink and family history is an isolated control column.
pub fn cardio_spec(seed: u64) -> SemSpec {
    SemSpec {
        variables: [
            "diet_score",
            "sleep_duration",
            "family_history",
            "bmi",
            "mental_health",
            "cv_risk",
        ]
        .map(String::from)
        .to_vec(),
        exogenous: BTreeMap::from([
            ("diet_score".to_string(), Distribution::Uniform { low: 1.0, high: 10.0 }),
            ("sleep_duration".to_string(), Distribution::normal(8.0, 4.0)),
            ("family_history".to_string(), Distribution::normal(4.0, 2.0)),
        ]),
        equations: BTreeMap::from([
            (
                "bmi".to_string(),
                structural(
                    &[("diet_score", 0.4), ("sleep_duration", 0.5)],
                    Distribution::normal(0.0, 1.0),
                ),
            ),
            (
                "mental_health".to_string(),
                structural(&[("bmi", 1.5)], Distribution::normal(0.0, 1.0)),
            ),
            (
                "cv_risk".to_string(),
                structural(&[("bmi", 1.5)], Distribution::normal(2.0, 3.0)),
            ),
        ]),
        target: "cv_risk".into(),
        seed,
    }
}

/// Binary-outcome model with six features: two direct causes, one cause acting
/// through a mediator, a weak direct cause, an isolated noise column and a
/// spurious correlate that shares a common cause with the outcome but has no
/// effect on it.
pub fn classification_spec(seed: u64) -> SemSpec {
    let n01 = Distribution::normal(0.0, 1.0);
    SemSpec {
        variables: ["age", "exposure", "marker", "spurious", "weak", "noise", "outcome"]
            .map(String::from)
            .to_vec(),
        exogenous: BTreeMap::from([
            ("age".to_string(), n01),
            ("exposure".to_string(), n01),
            ("weak".to_string(), n01),
            ("noise".to_string(), n01),
        ]),
        equations: BTreeMap::from([
            ("marker".to_string(), structural(&[("exposure", 0.9)], Distribution::normal(0.0, 0.5))),
            ("spurious".to_string(), structural(&[("age", 0.9)], Distribution::normal(0.0, 0.6))),
            (
                "outcome".to_string(),
                Equation {
                    parents: vec![
                        ("age".into(), 1.5),
                        ("marker".into(), 1.2),
                        ("weak".into(), 0.4),
                    ],
                    noise: Distribution::zero(),
                    link: Link::LogisticBernoulli,
                },
            ),
        ]),
        target: "outcome".into(),
        seed,
    }
}

pub const BUILTIN_SPECS: [&str; 3] = ["lung_cancer", "cardio", "classification"];

pub fn builtin_spec(name: &str, seed: u64) -> Result<SemSpec> {
    match name {
        "lung_cancer" => Ok(lung_cancer_spec(seed)),
        "cardio" => Ok(cardio_spec(seed)),
        "classification" => Ok(classification_spec(seed)),
        other => Err(Error::InvalidArgument(format!(
            "unknown dataset spec '{other}' (known: {})",
            BUILTIN_SPECS.join(", ")
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: DataTable,
    pub test: DataTable,
    pub seed: u64,
    /// Source row index of every train row, then every test row.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Seeded shuffle; the first ⌈(1−f)·n⌉ rows (clamped so both sides are nonempty) train.
pub fn train_test_split(table: &DataTable, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = table.row_count();
    if n < 2 {
        return Err(Error::InvalidArgument("splitting needs at least two rows".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (((1.0 - test_fraction) * n as f64) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let (train_rows, test_rows) = order.split_at(n_train);
    Ok(Split {
        train: table.select_rows(train_rows),
        test: table.select_rows(test_rows),
        seed,
        train_rows: train_rows.to_vec(),
        test_rows: test_rows.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn column_stats(table: &DataTable) -> Result<Vec<ColumnStats>> {
    if table.row_count() == 0 {
        return Err(Error::Data("column statistics of an empty table".into()));
    }
    Ok(table
        .columns()
        .iter()
        .map(|c| ColumnStats {
            mean: linalg::mean(c),
            sd: linalg::sd(c),
            min: c.iter().copied().fold(f64::INFINITY, f64::min),
            max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str, target: &str) -> Result<DataTable> {
        read_csv(csv.as_bytes(), target)
    }

    #[test]
    fn loads_three_columns() {
        let t = table("a,b,y\n1,2,3\n4,5,6\n7,8,9\n1,1,1\n0,0,0\n", "y").unwrap();
        assert_eq!(t.row_count(), 5);
        assert_eq!(t.target_index(), 2);
        assert_eq!(t.feature_names(), vec!["a", "b"]);
    }

    #[test]
    fn header_only_file_is_empty_table() {
        let t = table("a,b,y\n", "y").unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn bad_cell_names_its_row() {
        let err = table("a,y\n1,2\n3,4\n5,6\nabc,7\n", "y").unwrap_err().to_string();
        assert!(err.contains("row 4"), "{err}");
        assert!(err.contains("abc"), "{err}");
    }

    #[test]
    fn missing_target_and_ragged_rows() {
        assert!(table("a,b\n1,2\n", "y").is_err());
        let err = table("a,y\n1,2\n3\n", "y").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(table("a,y\n1,NaN\n", "y").is_err());
        assert!(table("a,y\n1,inf\n", "y").is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(table("a,a,y\n1,2,3\n", "y").is_err());
    }

    #[test]
    fn zero_noise_chain_copies_parent() {
        let spec = SemSpec {
            variables: vec!["a".into(), "b".into()],
            exogenous: BTreeMap::from([("a".into(), Distribution::normal(0.0, 1.0))]),
            equations: BTreeMap::from([("b".into(), structural(&[("a", 1.0)], Distribution::zero()))]),
            target: "b".into(),
            seed: 3,
        };
        let t = sample_sem(&spec, 50).unwrap();
        assert_eq!(t.column(0), t.column(1));
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = lung_cancer_spec(11);
        assert_eq!(sample_sem(&spec, 100).unwrap(), sample_sem(&spec, 100).unwrap());
        assert_ne!(
            sample_sem(&spec, 100).unwrap(),
            sample_sem(&lung_cancer_spec(12), 100).unwrap()
        );
        assert!(sample_sem(&spec, 0).is_err());
    }

    #[test]
    fn lung_spec_shape() {
        let spec = lung_cancer_spec(0);
        spec.validate().unwrap();
        assert_eq!(
            spec.parents_of("drink_coffee"),
            vec![("smoking".to_string(), 2.0), ("stress".to_string(), 1.0)]
        );
        assert!(spec
            .parents_of("lung_cancer_risk")
            .iter()
            .all(|(p, _)| p != "drink_coffee"));
    }

    #[test]
    fn cardio_spec_shape() {
        let spec = cardio_spec(0);
        spec.validate().unwrap();
        assert_eq!(
            spec.parents_of("bmi"),
            vec![("diet_score".to_string(), 0.4), ("sleep_duration".to_string(), 0.5)]
        );
        assert_eq!(spec.parents_of("cv_risk"), vec![("bmi".to_string(), 1.5)]);
        // nothing lists mental_health or family_history as a parent
        for eq in spec.equations.values() {
            assert!(eq.parents.iter().all(|(p, _)| p != "mental_health" && p != "family_history"));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = lung_cancer_spec(0);
        spec.variables.swap(0, 2);
        assert!(spec.validate().is_err());
        let mut spec = lung_cancer_spec(0);
        spec.exogenous.insert("drink_coffee".into(), Distribution::normal(0.0, 1.0));
        assert!(spec.validate().is_err());
        assert!(builtin_spec("nope", 0).is_err());
    }

    #[test]
    fn spec_json_keys() {
        let v = serde_json::to_value(lung_cancer_spec(5)).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["variables", "exogenous", "equations", "target", "seed"] {
            assert!(keys.iter().any(|x| x == k));
        }
        let back: SemSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, lung_cancer_spec(5));
    }

    #[test]
    fn split_sizes() {
        let t = sample_sem(&lung_cancer_spec(1), 1000).unwrap();
        let s = train_test_split(&t, 0.2, 9).unwrap();
        assert_eq!((s.train.row_count(), s.test.row_count()), (800, 200));
        assert_eq!(s, train_test_split(&t, 0.2, 9).unwrap());
        let two = t.select_rows(&[0, 1]);
        let s = train_test_split(&two, 0.5, 0).unwrap();
        assert_eq!((s.train.row_count(), s.test.row_count()), (1, 1));
        assert!(train_test_split(&t, 0.0, 0).is_err());
        assert!(train_test_split(&t, 1.0, 0).is_err());
    }

    #[test]
    fn stats() {
        let t = DataTable::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]],
            1,
        )
        .unwrap();
        let s = column_stats(&t).unwrap();
        assert_eq!(s[0].mean, 2.0);
        assert_eq!(s[0].sd, 1.0);
        assert_eq!(s[1].sd, 0.0);
        assert_eq!((s[0].min, s[0].max), (1.0, 3.0));
        let empty = table("a,y\n", "y").unwrap();
        assert!(column_stats(&empty).is_err());
    }
}

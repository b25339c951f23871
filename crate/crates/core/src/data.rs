//! Columnar tabular data: schema inference from CSV, min-max normalization,
//! and ground-truth labels used only for evaluation.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Nominal,
}

impl AttributeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Numeric => "numeric",
            AttributeKind::Nominal => "nominal",
        }
    }
}

impl std::str::FromStr for AttributeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(AttributeKind::Numeric),
            "nominal" => Ok(AttributeKind::Nominal),
            other => Err(Error::Schema(format!("unknown attribute kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub kind: AttributeKind,
    /// Category strings in first-appearance order; empty for numeric attributes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub index: usize,
}

impl AttributeMeta {
    pub fn numeric(name: impl Into<String>, index: usize) -> Self {
        AttributeMeta {
            name: name.into(),
            kind: AttributeKind::Numeric,
            categories: Vec::new(),
            index,
        }
    }

    pub fn nominal(name: impl Into<String>, index: usize, categories: Vec<String>) -> Self {
        AttributeMeta {
            name: name.into(),
            kind: AttributeKind::Nominal,
            categories,
            index,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == AttributeKind::Numeric
    }

    pub fn category_index(&self, token: &str) -> Option<u32> {
        self.categories
            .iter()
            .position(|c| c == token)
            .map(|p| p as u32)
    }

    /// Category name, or a placeholder for indices outside the training categories.
    pub fn category_name(&self, idx: u32) -> &str {
        self.categories
            .get(idx as usize)
            .map(String::as_str)
            .unwrap_or("<unseen>")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column<T> {
    Numeric(Vec<T>),
    Nominal(Vec<u32>),
}

impl<T> Column<T> {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Nominal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One cell of an instance. `Cat(None)` marks a category that was never seen in training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value<T> {
    Num(T),
    Cat(Option<u32>),
}

impl<T: Scalar> Value<T> {
    pub fn as_num(&self) -> Option<T> {
        match *self {
            Value::Num(x) => Some(x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<Option<u32>> {
        match *self {
            Value::Cat(c) => Some(c),
            Value::Num(_) => None,
        }
    }
}

pub type Instance<T> = Vec<Value<T>>;

/// Immutable N x M table with per-attribute kinds and optional anomaly labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    attributes: Vec<AttributeMeta>,
    columns: Vec<Column<T>>,
    labels: Option<Vec<bool>>,
    label_name: Option<String>,
    n_rows: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        attributes: Vec<AttributeMeta>,
        columns: Vec<Column<T>>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        if attributes.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} attributes but {} columns",
                attributes.len(),
                columns.len()
            )));
        }
        if attributes.len() < 2 {
            return Err(Error::InvalidDataset(
                "at least two attributes are required".into(),
            ));
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        let mut names = HashSet::new();
        let mut attributes = attributes;
        for (j, (meta, col)) in attributes.iter_mut().zip(&columns).enumerate() {
            meta.index = j;
            if !names.insert(meta.name.clone()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate attribute name '{}'",
                    meta.name
                )));
            }
            if col.len() != n_rows {
                return Err(Error::InvalidDataset(format!(
                    "column '{}' has {} rows, expected {}",
                    meta.name,
                    col.len(),
                    n_rows
                )));
            }
            match (meta.kind, col) {
                (AttributeKind::Numeric, Column::Numeric(v)) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::MissingCell {
                            row,
                            column: meta.name.clone(),
                        });
                    }
                }
                (AttributeKind::Nominal, Column::Nominal(v)) => {
                    if meta.categories.is_empty() {
                        return Err(Error::InvalidDataset(format!(
                            "nominal attribute '{}' has no categories",
                            meta.name
                        )));
                    }
                    let k = meta.categories.len() as u32;
                    if v.iter().any(|&c| c >= k) {
                        return Err(Error::InvalidDataset(format!(
                            "nominal attribute '{}' has a category index out of range",
                            meta.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidDataset(format!(
                        "column '{}' does not match its declared kind",
                        meta.name
                    )))
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n_rows {
                return Err(Error::LengthMismatch(l.len(), n_rows));
            }
        }
        Ok(Dataset {
            attributes,
            columns,
            labels,
            label_name: None,
            n_rows,
        })
    }

    /// All-numeric dataset from named columns.
    pub fn from_numeric_columns(
        names: &[&str],
        columns: Vec<Vec<T>>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let attributes = names
            .iter()
            .enumerate()
            .map(|(j, n)| AttributeMeta::numeric(*n, j))
            .collect();
        Self::new(
            attributes,
            columns.into_iter().map(Column::Numeric).collect(),
            labels,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[AttributeMeta] {
        &self.attributes
    }

    pub fn attribute(&self, j: usize) -> &AttributeMeta {
        &self.attributes[j]
    }

    pub fn column(&self, j: usize) -> &Column<T> {
        &self.columns[j]
    }

    pub fn numeric(&self, j: usize) -> Option<&[T]> {
        match &self.columns[j] {
            Column::Numeric(v) => Some(v),
            Column::Nominal(_) => None,
        }
    }

    pub fn nominal(&self, j: usize) -> Option<&[u32]> {
        match &self.columns[j] {
            Column::Nominal(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    pub fn value(&self, i: usize, j: usize) -> Value<T> {
        match &self.columns[j] {
            Column::Numeric(v) => Value::Num(v[i]),
            Column::Nominal(v) => Value::Cat(Some(v[i])),
        }
    }

    pub fn instance(&self, i: usize) -> Instance<T> {
        (0..self.n_attributes()).map(|j| self.value(i, j)).collect()
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<bool>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n_rows {
                return Err(Error::LengthMismatch(l.len(), self.n_rows));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = Some(name.into());
        self
    }

    /// Range (max - min) of a numeric column; zero for nominal columns.
    pub fn range(&self, j: usize) -> T {
        match &self.columns[j] {
            Column::Numeric(v) => {
                let (lo, hi) = min_max(v);
                hi - lo
            }
            Column::Nominal(_) => T::zero(),
        }
    }

    /// Appends columns to the right; labels are kept.
    pub fn append_columns(&self, extra: Vec<(AttributeMeta, Column<T>)>) -> Result<Self> {
        let mut attributes = self.attributes.clone();
        let mut columns = self.columns.clone();
        for (meta, col) in extra {
            attributes.push(meta);
            columns.push(col);
        }
        let mut d = Dataset::new(attributes, columns, self.labels.clone())?;
        d.label_name = self.label_name.clone();
        Ok(d)
    }

    /// Maps every row onto another schema (matched by attribute name), translating
    /// nominal cells through category strings. Categories unknown to `schema` become
    /// `Value::Cat(None)`.
    pub fn instances_for(&self, schema: &[AttributeMeta]) -> Result<Vec<Instance<T>>> {
        let mut lookup = Vec::with_capacity(schema.len());
        for target in schema {
            let src = self
                .attributes
                .iter()
                .find(|a| a.name == target.name)
                .ok_or_else(|| Error::Schema(format!("attribute '{}' missing", target.name)))?;
            if src.kind != target.kind {
                return Err(Error::KindMismatch {
                    attribute: target.name.clone(),
                    expected: target.kind.as_str(),
                });
            }
            let remap: Vec<Option<u32>> = src
                .categories
                .iter()
                .map(|c| target.category_index(c))
                .collect();
            lookup.push((src.index, remap));
        }
        Ok((0..self.n_rows)
            .map(|i| {
                lookup
                    .iter()
                    .map(|(src, remap)| match self.value(i, *src) {
                        Value::Num(x) => Value::Num(x),
                        Value::Cat(c) => Value::Cat(c.and_then(|c| remap[c as usize])),
                    })
                    .collect()
            })
            .collect())
    }
}

pub(crate) fn min_max<T: Scalar>(v: &[T]) -> (T, T) {
    v.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Options for [`load_csv`].
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub label_column: Option<String>,
    /// Label tokens read as "anomaly"; compared after trimming, case-insensitively.
    pub positive_tokens: Vec<String>,
    /// Forced attribute kinds by column name.
    pub schema: HashMap<String, AttributeKind>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label_column: None,
            positive_tokens: vec!["1".into(), "anomaly".into()],
            schema: HashMap::new(),
        }
    }
}

impl LoadOptions {
    pub fn with_label(label: impl Into<String>) -> Self {
        LoadOptions {
            label_column: Some(label.into()),
            ..Default::default()
        }
    }
}

/// Reads `name=numeric|nominal` lines; blank lines and `#` comments are skipped.
pub fn read_schema(path: &Path) -> Result<HashMap<String, AttributeKind>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line
            .split_once('=')
            .ok_or_else(|| Error::Schema(format!("line {}: expected name=kind", ln + 1)))?;
        out.insert(name.trim().to_string(), kind.parse()?);
    }
    Ok(out)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.parse::<f64>().map(|x| !x.is_finite()).unwrap_or(false)
}

/// Loads a header-first, comma-separated file.
///
/// A column is numeric when every cell parses as a finite real, otherwise nominal with
/// categories in first-appearance order. Empty and NaN cells are rejected.
pub fn load_csv<T: Scalar>(path: &Path, opts: &LoadOptions) -> Result<Dataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<T: Scalar, R: std::io::Read>(input: R, opts: &LoadOptions) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Empty("file has no header".into())),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let width = names.len();
    let label_pos = match &opts.label_column {
        Some(l) => Some(
            names
                .iter()
                .position(|n| n == l)
                .ok_or_else(|| Error::LabelColumn(l.clone()))?,
        ),
        None => None,
    };

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        // header is line 1
        let line = r + 2;
        if rec.len() != width {
            return Err(Error::RowWidth {
                row: line,
                expected: width,
                found: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if Some(j) != label_pos && is_missing(cell) {
                return Err(Error::MissingCell {
                    row: line,
                    column: names[j].clone(),
                });
            }
            cells[j].push(cell.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::Empty("file has a header but no rows".into()));
    }

    let positives: Vec<String> = opts
        .positive_tokens
        .iter()
        .map(|t| t.trim().to_ascii_lowercase())
        .collect();
    let mut attributes = Vec::new();
    let mut columns = Vec::new();
    let mut labels = None;
    for (j, (name, col)) in names.iter().zip(cells).enumerate() {
        if Some(j) == label_pos {
            labels = Some(
                col.iter()
                    .map(|c| positives.contains(&c.to_ascii_lowercase()))
                    .collect(),
            );
            continue;
        }
        let forced = opts.schema.get(name).copied();
        let numeric = match forced {
            Some(AttributeKind::Numeric) => true,
            Some(AttributeKind::Nominal) => false,
            None => col.iter().all(|c| parse_finite(c).is_some()),
        };
        let index = attributes.len();
        if numeric {
            let mut v = Vec::with_capacity(col.len());
            for (r, c) in col.iter().enumerate() {
                let x = parse_finite(c).ok_or_else(|| Error::MissingCell {
                    row: r + 2,
                    column: name.clone(),
                })?;
                v.push(T::of(x));
            }
            attributes.push(AttributeMeta::numeric(name.clone(), index));
            columns.push(Column::Numeric(v));
        } else {
            let mut categories: Vec<String> = Vec::new();
            let mut seen: HashMap<String, u32> = HashMap::new();
            let v = col
                .into_iter()
                .map(|c| {
                    *seen.entry(c.clone()).or_insert_with(|| {
                        categories.push(c);
                        (categories.len() - 1) as u32
                    })
                })
                .collect();
            attributes.push(AttributeMeta::nominal(name.clone(), index, categories));
            columns.push(Column::Nominal(v));
        }
    }
    let d = Dataset::new(attributes, columns, labels)?;
    Ok(match &opts.label_column {
        Some(l) => d.with_label_name(l.clone()),
        None => d,
    })
}

/// Writes the dataset in the format [`load_csv`] reads; labels go to a trailing
/// column (named after the original label column, or `label`) as `1`/`0`.
pub fn save_csv<T: Scalar>(d: &Dataset<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(d, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv<T: Scalar, W: Write>(d: &Dataset<T>, w: &mut W) -> std::io::Result<()> {
    let mut header: Vec<String> = d.attributes.iter().map(|a| csv_field(&a.name)).collect();
    if d.labels.is_some() {
        header.push(csv_field(d.label_name().unwrap_or("label")));
    }
    writeln!(w, "{}", header.join(","))?;
    let mut row = String::new();
    for i in 0..d.n_rows {
        row.clear();
        for j in 0..d.n_attributes() {
            if j > 0 {
                row.push(',');
            }
            match &d.columns[j] {
                // Display prints the shortest representation that parses back exactly.
                Column::Numeric(v) => row.push_str(&v[i].to_string()),
                Column::Nominal(v) => {
                    row.push_str(&csv_field(d.attributes[j].category_name(v[i])))
                }
            }
        }
        if let Some(l) = &d.labels {
            row.push_str(if l[i] { ",1" } else { ",0" });
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s != s.trim() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Affinely maps every numeric column onto [0, 1]; constant columns become 0.
pub fn normalize_minmax<T: Scalar>(d: &Dataset<T>) -> Dataset<T> {
    let columns = d
        .columns
        .iter()
        .map(|c| match c {
            Column::Numeric(v) => {
                let (lo, hi) = min_max(v);
                let span = hi - lo;
                Column::Numeric(
                    v.iter()
                        .map(|&x| {
                            if span > T::zero() {
                                (x - lo) / span
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                )
            }
            Column::Nominal(v) => Column::Nominal(v.clone()),
        })
        .collect();
    Dataset {
        attributes: d.attributes.clone(),
        columns,
        labels: d.labels.clone(),
        label_name: d.label_name.clone(),
        n_rows: d.n_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, opts: &LoadOptions) -> Result<Dataset<f64>> {
        read_csv(text.as_bytes(), opts)
    }

    #[test]
    fn numeric_columns_are_inferred() {
        let d = parse("a,b\n1,2\n3.5,4\n-1,0\n", &LoadOptions::default()).unwrap();
        assert_eq!(d.n_attributes(), 2);
        assert_eq!(d.n_rows(), 3);
        assert!(d.attributes().iter().all(|a| a.is_numeric()));
        assert_eq!(d.numeric(0).unwrap(), &[1.0, 3.5, -1.0]);
    }

    #[test]
    fn nominal_first_appearance_order() {
        let d = parse("x,c\n1,a\n2,b\n3,a\n", &LoadOptions::default()).unwrap();
        let meta = d.attribute(1);
        assert_eq!(meta.kind, AttributeKind::Nominal);
        assert_eq!(meta.categories, vec!["a", "b"]);
        assert_eq!(d.nominal(1).unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn label_column_is_split_off() {
        let d = parse(
            "x,y,z\n0.1,0,5\n0.2,1,6\n0.3,0,7\n",
            &LoadOptions::with_label("y"),
        )
        .unwrap();
        assert_eq!(d.n_attributes(), 2);
        assert_eq!(d.attribute(1).name, "z");
        assert_eq!(d.labels().unwrap(), &[false, true, false]);
        let d = parse(
            "x,z,y\n0.1,5,normal\n0.2,6,Anomaly\n",
            &LoadOptions::with_label("y"),
        )
        .unwrap();
        assert_eq!(d.labels().unwrap(), &[false, true]);
    }

    #[test]
    fn errors_name_the_problem() {
        match parse("a,b\n1,2\n3\n", &LoadOptions::default()) {
            Err(Error::RowWidth { row: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("a,b\n1,2\n3,\n", &LoadOptions::default()) {
            Err(Error::MissingCell { row: 3, column }) => assert_eq!(column, "b"),
            other => panic!("unexpected {other:?}"),
        }
        match parse("a,b\n1,NaN\n", &LoadOptions::default()) {
            Err(Error::MissingCell { row: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("", &LoadOptions::default()), Err(Error::Empty(_))));
        assert!(matches!(parse("a,b\n", &LoadOptions::default()), Err(Error::Empty(_))));
        assert!(matches!(
            parse("a,b\n1,2\n", &LoadOptions::with_label("q")),
            Err(Error::LabelColumn(_))
        ));
    }

    #[test]
    fn schema_override_forces_nominal() {
        let mut opts = LoadOptions::default();
        opts.schema.insert("b".into(), AttributeKind::Nominal);
        let d = parse("a,b\n1,0\n2,1\n3,0\n", &opts).unwrap();
        assert_eq!(d.attribute(1).kind, AttributeKind::Nominal);
        assert_eq!(d.attribute(1).categories, vec!["0", "1"]);
    }

    #[test]
    fn minmax_examples() {
        let attrs = vec![
            AttributeMeta::numeric("x", 0),
            AttributeMeta::numeric("k", 1),
            AttributeMeta::nominal("c", 2, vec!["p".into(), "q".into()]),
        ];
        let d = Dataset::<f64>::new(
            attrs,
            vec![
                Column::Numeric(vec![2.0, 4.0, 6.0]),
                Column::Numeric(vec![5.0, 5.0, 5.0]),
                Column::Nominal(vec![1, 0, 1]),
            ],
            Some(vec![false, true, false]),
        )
        .unwrap();
        let n = normalize_minmax(&d);
        assert_eq!(n.numeric(0).unwrap(), &[0.0, 0.5, 1.0]);
        assert_eq!(n.numeric(1).unwrap(), &[0.0, 0.0, 0.0]);
        assert_eq!(n.nominal(2).unwrap(), &[1, 0, 1]);
        assert_eq!(n.labels(), d.labels());
    }

    #[test]
    fn dataset_invariants_are_enforced() {
        let one = Dataset::<f64>::from_numeric_columns(&["a"], vec![vec![1.0]], None);
        assert!(one.is_err());
        let dup = Dataset::<f64>::from_numeric_columns(&["a", "a"], vec![vec![1.0], vec![2.0]], None);
        assert!(dup.is_err());
        let bad_cat = Dataset::<f64>::new(
            vec![
                AttributeMeta::numeric("a", 0),
                AttributeMeta::nominal("c", 1, vec!["x".into()]),
            ],
            vec![Column::Numeric(vec![0.0]), Column::Nominal(vec![1])],
            None,
        );
        assert!(bad_cat.is_err());
    }

    #[test]
    fn instances_for_remaps_categories() {
        let train = parse("x,c\n1,a\n2,b\n", &LoadOptions::default()).unwrap();
        let fresh = parse("c,x\nb,5\nz,6\n", &LoadOptions::default()).unwrap();
        let rows = fresh.instances_for(train.attributes()).unwrap();
        assert_eq!(rows[0], vec![Value::Num(5.0), Value::Cat(Some(1))]);
        assert_eq!(rows[1], vec![Value::Num(6.0), Value::Cat(None)]);
    }
}

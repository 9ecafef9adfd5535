//! CODLAG condition-based-maintenance dataset: loading, validation, the
//! 80:20 split and the two supervised tasks.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const N_COLUMNS: usize = 18;
pub const N_FEATURES: usize = 17;
pub const CANONICAL_ROWS: usize = 11934;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Slack allowed when checking values against the published 3-decimal ranges.
const RANGE_SLACK: f64 = 5e-4;

/// Dataset columns, in file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Column {
    LeverPosition,
    ShipSpeed,
    GtShaftTorque,
    GtRevolutions,
    GgRevolutions,
    StarboardTorque,
    PortTorque,
    HpExitTemp,
    CompressorInletTemp,
    CompressorOutletTemp,
    HpExitPressure,
    CompressorInletPressure,
    CompressorOutletPressure,
    ExhaustPressure,
    TurbineInjectionControl,
    FuelFlow,
    CompressorDecay,
    TurbineDecay,
}

use Column::*;

impl Column {
    pub const ALL: [Column; N_COLUMNS] = [
        LeverPosition,
        ShipSpeed,
        GtShaftTorque,
        GtRevolutions,
        GgRevolutions,
        StarboardTorque,
        PortTorque,
        HpExitTemp,
        CompressorInletTemp,
        CompressorOutletTemp,
        HpExitPressure,
        CompressorInletPressure,
        CompressorOutletPressure,
        ExhaustPressure,
        TurbineInjectionControl,
        FuelFlow,
        CompressorDecay,
        TurbineDecay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name used in csv headers.
    pub fn short_name(self) -> &'static str {
        match self {
            LeverPosition => "lp",
            ShipSpeed => "v",
            GtShaftTorque => "GTT",
            GtRevolutions => "GTn",
            GgRevolutions => "GGn",
            StarboardTorque => "Ts",
            PortTorque => "Tp",
            HpExitTemp => "T48",
            CompressorInletTemp => "T1",
            CompressorOutletTemp => "T2",
            HpExitPressure => "P48",
            CompressorInletPressure => "P1",
            CompressorOutletPressure => "P2",
            ExhaustPressure => "Pexh",
            TurbineInjectionControl => "TIC",
            FuelFlow => "mf",
            CompressorDecay => "kMc",
            TurbineDecay => "kMt",
        }
    }

    /// Documented value range (inclusive).
    pub fn range(self) -> (f64, f64) {
        match self {
            LeverPosition => (1.138, 9.3),
            ShipSpeed => (3.0, 27.0),
            GtShaftTorque => (253.547, 72784.872),
            GtRevolutions => (1307.675, 3560.741),
            GgRevolutions => (6589.002, 9797.103),
            StarboardTorque | PortTorque => (5.304, 645.249),
            HpExitTemp => (442.364, 1115.797),
            CompressorInletTemp => (288.0, 288.0),
            CompressorOutletTemp => (540.442, 789.094),
            HpExitPressure => (1.093, 4.56),
            CompressorInletPressure => (0.998, 0.998),
            CompressorOutletPressure => (5.828, 23.14),
            ExhaustPressure => (1.019, 1.052),
            TurbineInjectionControl => (0.0, 92.556),
            FuelFlow => (0.068, 1.832),
            CompressorDecay => (0.95, 1.0),
            TurbineDecay => (0.975, 1.0),
        }
    }

    pub fn from_short_name(name: &str) -> Option<Column> {
        Column::ALL
            .iter()
            .copied()
            .find(|c| c.short_name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: `{text}` is not a number")]
    Malformed {
        line: usize,
        column: usize,
        text: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv header does not name the 18 dataset columns: {0}")]
    Header(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected {expected} rows, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("row {row} (line {line}), column {column}: {value} outside [{lo}, {hi}]")]
    OutOfRange {
        row: usize,
        line: usize,
        column: Column,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("feature count mismatch: expected {expected}, found {found}")]
    FeatureCount { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Whitespace,
    Csv,
}

impl Format {
    /// `.csv` files are csv; anything else is whitespace separated.
    pub fn infer(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Whitespace,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" | "ws" | "txt" => Ok(Format::Whitespace),
            "csv" => Ok(Format::Csv),
            other => Err(format!(
                "unknown format `{other}` (expected whitespace or csv)"
            )),
        }
    }
}

/// An 18-column table, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    /// Source line of each row, for diagnostics.
    lines: Vec<usize>,
}

impl Dataset {
    pub fn from_rows(rows: &[[f64; N_COLUMNS]]) -> Dataset {
        let mut columns: Vec<Vec<f64>> = (0..N_COLUMNS)
            .map(|_| Vec::with_capacity(rows.len()))
            .collect();
        for row in rows {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(*v);
            }
        }
        Dataset {
            columns,
            lines: (1..=rows.len()).collect(),
        }
    }

    /// Reads a file and checks every canonical invariant (row count,
    /// constant columns, value ranges).
    pub fn load(path: &Path, format: Format) -> Result<Dataset, DataError> {
        let ds = Dataset::read(path, format)?;
        ds.validate()?;
        Ok(ds)
    }

    /// Reads a file checking only that every row has 18 numeric fields.
    pub fn read(path: &Path, format: Format) -> Result<Dataset, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        match format {
            Format::Whitespace => Dataset::parse_whitespace(&text),
            Format::Csv => Dataset::parse_csv(&text),
        }
    }

    pub fn parse_whitespace(text: &str) -> Result<Dataset, DataError> {
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            rows.push(parse_fields(&fields, line_no)?);
            lines.push(line_no);
        }
        let mut ds = Dataset::from_rows(&rows);
        ds.lines = lines;
        Ok(ds)
    }

    pub fn parse_csv(text: &str) -> Result<Dataset, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let named: Vec<Option<Column>> = header.iter().map(Column::from_short_name).collect();
        if named.len() != N_COLUMNS || named.iter().zip(Column::ALL).any(|(n, c)| *n != Some(c)) {
            return Err(DataError::Header(
                header.iter().collect::<Vec<_>>().join(","),
            ));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line_no = record.position().map_or(0, |p| p.line() as usize);
            let fields: Vec<&str> = record.iter().collect();
            if fields.iter().all(|f| f.is_empty()) {
                continue;
            }
            rows.push(parse_fields(&fields, line_no)?);
            lines.push(line_no);
        }
        let mut ds = Dataset::from_rows(&rows);
        ds.lines = lines;
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.lines.len()
    }

    pub fn column(&self, c: Column) -> &[f64] {
        &self.columns[c.index()]
    }

    pub fn row(&self, r: usize) -> [f64; N_COLUMNS] {
        std::array::from_fn(|c| self.columns[c][r])
    }

    /// Checks the canonical invariants: row count, T1 ≡ 288, P1 ≡ 0.998,
    /// and every column within its documented range.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_rows() != CANONICAL_ROWS {
            return Err(DataError::Shape {
                expected: CANONICAL_ROWS,
                found: self.n_rows(),
            });
        }
        self.validate_ranges()
    }

    /// The range and constant-column checks alone.
    pub fn validate_ranges(&self) -> Result<(), DataError> {
        for column in Column::ALL {
            let (lo, hi) = column.range();
            for (row, &value) in self.column(column).iter().enumerate() {
                let slack = RANGE_SLACK + 1e-9 * value.abs();
                if !(value >= lo - slack && value <= hi + slack) {
                    return Err(DataError::OutOfRange {
                        row,
                        line: self.lines[row],
                        column,
                        value,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(())
    }

    /// Writes the table as csv with a header row of short column names.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(Column::ALL.iter().map(|c| c.short_name()))?;
        for r in 0..self.n_rows() {
            writer.write_record(self.row(r).iter().map(|v| v.to_string()))?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let file = fs::File::create(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn parse_fields(fields: &[&str], line: usize) -> Result<[f64; N_COLUMNS], DataError> {
    if fields.len() != N_COLUMNS {
        return Err(DataError::ColumnCount {
            line,
            expected: N_COLUMNS,
            found: fields.len(),
        });
    }
    let mut row = [0.0; N_COLUMNS];
    for (i, field) in fields.iter().enumerate() {
        let value: f64 = field.parse().map_err(|_| DataError::Malformed {
            line,
            column: i + 1,
            text: field.to_string(),
        })?;
        if !value.is_finite() {
            return Err(DataError::Malformed {
                line,
                column: i + 1,
                text: field.to_string(),
            });
        }
        row[i] = value;
    }
    Ok(row)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    GasTurbineTorque,
    FuelFlow,
}

impl Task {
    pub fn short_name(self) -> &'static str {
        match self {
            Task::GasTurbineTorque => "gtt",
            Task::FuelFlow => "ff",
        }
    }

    pub fn spec(self) -> TaskSpec {
        TaskSpec::new(self)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gtt" | "torque" => Ok(Task::GasTurbineTorque),
            "ff" | "mf" | "fuel" => Ok(Task::FuelFlow),
            other => Err(format!("unknown task `{other}` (expected gtt or ff)")),
        }
    }
}

/// Binding of dataset columns to `X0..X16` and `y` for one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub task: Task,
    pub inputs: [Column; N_FEATURES],
    pub target: Column,
}

impl TaskSpec {
    /// Inputs are every other column, in file order.
    pub fn new(task: Task) -> TaskSpec {
        let target = match task {
            Task::GasTurbineTorque => GtShaftTorque,
            Task::FuelFlow => FuelFlow,
        };
        let others: Vec<Column> = Column::ALL
            .iter()
            .copied()
            .filter(|c| *c != target)
            .collect();
        TaskSpec {
            task,
            inputs: others.try_into().expect("17 input columns"),
            target,
        }
    }

    /// Variable index bound to `column`, if it is an input.
    pub fn feature_of(&self, column: Column) -> Option<usize> {
        self.inputs.iter().position(|c| *c == column)
    }
}

/// Disjoint train/test row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle; the test set takes `floor(test_fraction * n)` rows.
pub fn split(n_rows: usize, test_fraction: f64, seed: u64) -> Split {
    assert!(
        (0.0..1.0).contains(&test_fraction),
        "test fraction must be in [0, 1)"
    );
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_fraction * n_rows as f64).floor() as usize;
    let test = order.split_off(n_rows - n_test);
    Split {
        train: order,
        test,
        seed,
    }
}

/// Column-major feature matrix with its target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskMatrix {
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl TaskMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.features.iter().map(|c| c[r]).collect()
    }

    /// The rows listed in `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> TaskMatrix {
        TaskMatrix {
            features: self
                .features
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
        }
    }

    /// Writes `X0..X{n-1},y` csv preceded by a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.n_features()).map(|i| format!("X{i}")).collect();
        header.push("y".into());
        writer.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut record: Vec<String> = self.features.iter().map(|c| c[r].to_string()).collect();
            record.push(self.target[r].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Train and test matrices for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub spec: TaskSpec,
    pub train: TaskMatrix,
    pub test: TaskMatrix,
}

/// Every row of `ds` in file order, bound per `spec`.
pub fn task_matrix(ds: &Dataset, spec: &TaskSpec) -> TaskMatrix {
    TaskMatrix {
        features: spec.inputs.iter().map(|c| ds.column(*c).to_vec()).collect(),
        target: ds.column(spec.target).to_vec(),
    }
}

pub fn materialize(ds: &Dataset, spec: &TaskSpec, split: &Split) -> TaskData {
    let all = task_matrix(ds, spec);
    TaskData {
        spec: spec.clone(),
        train: all.select(&split.train),
        test: all.select(&split.test),
    }
}

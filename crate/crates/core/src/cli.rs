//! Command-line front end.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::data::{
    self, Column, Dataset, Format, Task, TaskData, TaskMatrix, DEFAULT_TEST_FRACTION, N_FEATURES,
};
use crate::evolve::{self, RunConfig};
use crate::kv;
use crate::metrics;
use crate::search::{self, ParamRanges, Preset};
use crate::tree::{parse_text, SyntaxTree};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<data::DataError> for CliError {
    fn from(e: data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "codlag-gp",
    version,
    about = "Symbolic regression of gas-turbine torque and fuel flow"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one model and write its result file.
    Run(RunArgs),
    /// Random hyperparameter search over a preset or range file.
    Search(SearchArgs),
    /// Score an expression on the train, test and full data.
    EvalExpr(EvalArgs),
    /// Check a dataset file against the canonical invariants.
    DatasetCheck(DataArgs),
    /// Per-ship-speed means of actual and predicted values, as csv.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset file (whitespace separated, or csv with a header).
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the format inferred from the file extension.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// gtt (shaft torque) or ff (fuel flow).
    #[arg(long)]
    pub task: Task,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Config file of `key = value` lines.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Draw the config from a preset's ranges using --seed.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Run seed; overrides the config file's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, conflicts_with = "ranges", default_value = "table4")]
    pub preset: Preset,
    /// Range file of `key = lower, upper` lines.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    /// Base seed; run i uses base + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub top: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "expression", required = true, multiple = false)]
pub struct ExprArgs {
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long)]
    pub expr_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub expr: ExprArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("model").required(true).multiple(false)))]
pub struct PlotArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub task: Task,
    /// Result file written by `run`.
    #[arg(long, group = "model")]
    pub result: Option<PathBuf>,
    #[arg(long, group = "model")]
    pub expr: Option<String>,
    #[arg(long, group = "model")]
    pub expr_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Search(a) => cmd_search(&a, out),
        Command::EvalExpr(a) => cmd_eval_expr(&a, out),
        Command::DatasetCheck(a) => cmd_dataset_check(&a, out),
        Command::PlotData(a) => cmd_plot_data(&a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))
}

/// Reads a dataset and checks every value against the documented ranges.
pub fn load_dataset(args: &DataArgs) -> Result<Dataset, CliError> {
    let format = args.format.unwrap_or_else(|| Format::infer(&args.data));
    let ds = Dataset::read(&args.data, format)?;
    if ds.n_rows() == 0 {
        return Err(CliError::Data(format!(
            "{}: no data rows",
            args.data.display()
        )));
    }
    ds.validate_ranges()?;
    Ok(ds)
}

fn task_data(ds: &Dataset, args: &TaskArgs) -> TaskData {
    let split = data::split(ds.n_rows(), DEFAULT_TEST_FRACTION, args.split_seed);
    data::materialize(ds, &args.task.spec(), &split)
}

/// The config `run` uses for the given flags.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let usage = |e: evolve::ConfigError| CliError::Usage(e.to_string());
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => RunConfig::from_text(&read_text(path)?).map_err(usage)?,
        (None, Some(preset)) => search::config_for_run(&preset.ranges(), args.seed.unwrap_or(0), 0),
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(args)?;
    let ds = load_dataset(&args.task.data)?;
    let td = task_data(&ds, &args.task);
    let result =
        evolve::run(&cfg, &td.train, &td.test).map_err(|e| CliError::Runtime(e.to_string()))?;
    let header = [
        ("task", args.task.task.to_string()),
        ("split_seed", args.task.split_seed.to_string()),
    ];
    write_file(&args.out, &result.to_text(&header))?;
    print(
        out,
        &format!(
            "best_expression = {}\ntest_r2 = {}\ntest_mae = {}\nterminated_by = {}\n",
            result.best_expression,
            result.test_r2,
            result.test_mae,
            result.terminated_by.as_str()
        ),
    )
}

fn cmd_search(args: &SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ranges = match &args.ranges {
        Some(path) => {
            ParamRanges::from_text(&read_text(path)?).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => args.preset.ranges(),
    };
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let ds = load_dataset(&args.task.data)?;
    let td = task_data(&ds, &args.task);
    let report = search::random_search(args.runs, &ranges, &td, args.seed);
    for f in &report.failures {
        eprintln!("run {} (seed {}) failed: {}", f.run_index, f.seed, f.error);
    }
    let text = report.to_text(args.top);
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print(out, &text)?,
    }
    if report.entries.is_empty() {
        return Err(CliError::Runtime("every search run failed".into()));
    }
    Ok(())
}

fn expression(expr: Option<&str>, file: Option<&Path>) -> Result<SyntaxTree, CliError> {
    let text = match (expr, file) {
        (Some(e), _) => e.to_string(),
        (None, Some(path)) => read_text(path)?,
        (None, None) => return Err(CliError::Usage("an expression is required".into())),
    };
    let tree = parse_text(text.trim()).map_err(|e| CliError::Usage(format!("expression: {e}")))?;
    tree.check_features(N_FEATURES)
        .map_err(|e| CliError::Usage(format!("expression: {e}")))?;
    Ok(tree)
}

/// MAE and R² of one data part; R² is `None` when the target is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub mae: f64,
    pub r2: Option<f64>,
    pub rows: usize,
}

pub fn score(tree: &SyntaxTree, m: &TaskMatrix) -> Result<Scores, CliError> {
    let predicted = tree
        .eval_columns(&m.features)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(Scores {
        mae: metrics::mae(&m.target, &predicted),
        r2: metrics::r2(&m.target, &predicted).ok(),
        rows: m.n_rows(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub expression: String,
    pub train: Scores,
    pub test: Scores,
    pub full: Scores,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("expression = {}\n", self.expression);
        for (name, sc) in [
            ("train", &self.train),
            ("test", &self.test),
            ("full", &self.full),
        ] {
            let r2 = sc
                .r2
                .map_or_else(|| "undefined".to_string(), |v| v.to_string());
            let _ = writeln!(s, "{name}_rows = {}", sc.rows);
            let _ = writeln!(s, "{name}_mae = {}", sc.mae);
            let _ = writeln!(s, "{name}_r2 = {r2}");
        }
        s
    }
}

pub fn eval_expression(
    tree: &SyntaxTree,
    ds: &Dataset,
    task: Task,
    split_seed: u64,
) -> Result<EvalReport, CliError> {
    let spec = task.spec();
    let all = data::task_matrix(ds, &spec);
    let split = data::split(ds.n_rows(), DEFAULT_TEST_FRACTION, split_seed);
    let part = |rows: &[usize]| -> Result<Scores, CliError> {
        if rows.is_empty() {
            return Err(CliError::Data("data part has no rows".into()));
        }
        score(tree, &all.select(rows))
    };
    Ok(EvalReport {
        expression: tree.to_text(),
        train: part(&split.train)?,
        test: part(&split.test)?,
        full: score(tree, &all)?,
    })
}

fn cmd_eval_expr(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tree = expression(args.expr.expr.as_deref(), args.expr.expr_file.as_deref())?;
    let ds = load_dataset(&args.task.data)?;
    let report = eval_expression(&tree, &ds, args.task.task, args.task.split_seed)?;
    print(out, &report.to_text())
}

fn cmd_dataset_check(args: &DataArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let format = args.format.unwrap_or_else(|| Format::infer(&args.data));
    let ds = Dataset::read(&args.data, format)?;
    let mut s = String::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        let _ = writeln!(s, "{} {name}: {detail}", if pass { "ok  " } else { "FAIL" });
    };
    check(
        "rows",
        ds.n_rows() == data::CANONICAL_ROWS,
        format!("{} (expected {})", ds.n_rows(), data::CANONICAL_ROWS),
    );
    for (column, value) in [
        (Column::CompressorInletTemp, 288.0),
        (Column::CompressorInletPressure, 0.998),
    ] {
        let constant = ds.column(column).iter().all(|&v| v == value);
        check(
            &format!("{column} constant"),
            constant,
            format!("every value equals {value}"),
        );
    }
    match ds.validate_ranges() {
        Ok(()) => check(
            "ranges",
            true,
            "every column within its documented range".into(),
        ),
        Err(e) => check("ranges", false, e.to_string()),
    }
    let speeds = distinct(ds.column(Column::ShipSpeed));
    check(
        "ship speeds",
        !speeds.is_empty(),
        format!("{} distinct values", speeds.len()),
    );
    print(out, &s)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} fails the dataset checks",
            args.data.display()
        )))
    }
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let bits: BTreeSet<u64> = values.iter().map(|v| v.to_bits()).collect();
    let mut out: Vec<f64> = bits.into_iter().map(f64::from_bits).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Best expression recorded in a result file.
pub fn result_expression(text: &str) -> Result<SyntaxTree, CliError> {
    let entries =
        kv::parse(text, &["result"]).map_err(|e| CliError::Usage(format!("result file: {e}")))?;
    let entry = entries
        .iter()
        .find(|e| e.key == "best_expression")
        .ok_or_else(|| CliError::Usage("result file has no best_expression".into()))?;
    parse_text(&entry.value).map_err(|e| CliError::Usage(format!("result file expression: {e}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub ship_speed: f64,
    pub actual_mean: f64,
    pub predicted_mean: f64,
}

/// Means of the target and the prediction over each distinct ship speed,
/// in increasing speed order.
pub fn plot_rows(tree: &SyntaxTree, ds: &Dataset, task: Task) -> Result<Vec<PlotRow>, CliError> {
    let m = data::task_matrix(ds, &task.spec());
    let predicted = tree
        .eval_columns(&m.features)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let speed = ds.column(Column::ShipSpeed);
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    order.sort_by(|&a, &b| speed[a].total_cmp(&speed[b]).then(a.cmp(&b)));
    let mut rows = Vec::new();
    for group in order.chunk_by(|&a, &b| speed[a].to_bits() == speed[b].to_bits()) {
        let n = group.len() as f64;
        rows.push(PlotRow {
            ship_speed: speed[group[0]],
            actual_mean: group.iter().map(|&r| m.target[r]).sum::<f64>() / n,
            predicted_mean: group.iter().map(|&r| predicted[r]).sum::<f64>() / n,
        });
    }
    Ok(rows)
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["ship_speed", "actual_mean", "predicted_mean"])?;
    for r in rows {
        writer.write_record([
            r.ship_speed.to_string(),
            r.actual_mean.to_string(),
            r.predicted_mean.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_plot_data(args: &PlotArgs) -> Result<(), CliError> {
    let tree = match &args.result {
        Some(path) => result_expression(&read_text(path)?)?,
        None => expression(args.expr.as_deref(), args.expr_file.as_deref())?,
    };
    tree.check_features(N_FEATURES)
        .map_err(|e| CliError::Usage(format!("expression: {e}")))?;
    let ds = load_dataset(&args.data)?;
    let rows = plot_rows(&tree, &ds, args.task)?;
    let mut buf = Vec::new();
    write_plot_csv(&rows, &mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(
        &args.out,
        &String::from_utf8(buf).expect("csv output is utf-8"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(
            main_with_args(["codlag-gp", "run", "--task", "gtt"]),
            EXIT_USAGE
        );
        assert_eq!(
            main_with_args([
                "codlag-gp",
                "eval-expr",
                "--data",
                "x",
                "--task",
                "nope",
                "--expr",
                "1"
            ]),
            EXIT_USAGE
        );
    }

    fn ds() -> Dataset {
        let mut rows = Vec::new();
        for (i, v) in [3.0, 9.0, 3.0, 27.0, 9.0].into_iter().enumerate() {
            let mut r: [f64; 18] = std::array::from_fn(|c| Column::ALL[c].range().0);
            r[Column::ShipSpeed.index()] = v;
            r[Column::GtShaftTorque.index()] = 1000.0 * v + i as f64;
            rows.push(r);
        }
        Dataset::from_rows(&rows)
    }

    #[test]
    fn plot_groups_by_speed() {
        let rows = plot_rows(&parse_text("1").unwrap(), &ds(), Task::GasTurbineTorque).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(
            rows.iter().map(|r| r.ship_speed).collect::<Vec<_>>(),
            vec![3.0, 9.0, 27.0]
        );
        assert!(rows.iter().all(|r| r.predicted_mean == 1.0));
        assert_eq!(rows[0].actual_mean, 3001.0);
        let mut buf = Vec::new();
        write_plot_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ship_speed,actual_mean,predicted_mean\n3,3001,1\n"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn result_file_expression() {
        let text =
            "# x\n[run]\ntask = gtt\n[result]\nbest_expression = add(X1, 2)\n[history]\n1,2,3,4\n";
        assert_eq!(result_expression(text).unwrap().to_text(), "add(X1, 2)");
        assert!(result_expression("[result]\ntest_r2 = 1\n").is_err());
    }

    #[test]
    fn preset_config_uses_seed() {
        let cli = Cli::try_parse_from([
            "codlag-gp",
            "run",
            "--data",
            "d",
            "--task",
            "ff",
            "--preset",
            "table6",
            "--seed",
            "4",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!()
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg, search::config_for_run(&ParamRanges::table6(), 4, 0));
        assert_eq!(cfg.rng_seed, 4);
        assert!(ParamRanges::table6().admits(&cfg));

        let cli = Cli::try_parse_from([
            "codlag-gp",
            "run",
            "--data",
            "d",
            "--task",
            "gtt",
            "--out",
            "o",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!()
        };
        assert_eq!(resolve_config(&args).unwrap(), RunConfig::default());
    }

    #[test]
    fn variables_beyond_17_rejected() {
        assert!(matches!(
            expression(Some("X17"), None),
            Err(CliError::Usage(_))
        ));
        assert!(
            matches!(expression(Some("Q1"), None), Err(CliError::Usage(m)) if m.contains("unknown identifier"))
        );
    }
}

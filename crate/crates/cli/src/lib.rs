//! Subcommands of the `lrcc` binary.
//!
//! Every command returns the text it would print on success; failures carry
//! the process exit code. JSON and CSV outputs contain no timings so that
//! identical flags and seeds give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lrcc_core::bounds::{self, BoundReport, Symbols};
use lrcc_core::conversion::{self, ConversionProcedure, ConvertiblePair, NodeRole};
use lrcc_core::entropy;
use lrcc_core::lrc::{self, CodeRecord, LrcCode, DEFAULT_PATTERN_BUDGET};
use lrcc_core::{Error, Field, FieldSpec, LrcParams, MergeSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_VERIFICATION: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn verification(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VERIFICATION,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidField(_)
            | Error::ElementOutOfRange { .. }
            | Error::DimensionMismatch(_)
            | Error::InvalidParams(_)
            | Error::LengthMismatch { .. }
            | Error::InvalidSpec(_)
            | Error::UnsupportedRegime(_)
            | Error::SizeMismatch(_)
            | Error::Malformed(_) => EXIT_INVALID,
            Error::Unrecoverable(_)
            | Error::BudgetExceeded { .. }
            | Error::ConstructionFailed { .. }
            | Error::RoleViolation { .. }
            | Error::ConversionIncorrect { .. }
            | Error::CoordinatorViolation { .. }
            | Error::HypothesisUnsatisfied { .. } => EXIT_VERIFICATION,
            Error::NoSolution
            | Error::Singular
            | Error::Inconsistent
            | Error::BoundViolation { .. } => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CmdResult = Result<String, Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "lrcc",
    version,
    about = "Optimal-distance LRCs and global-merge conversion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a pyramid code and verify its distance.
    Construct(ConstructArgs),
    /// Re-verify the distance of a serialized code.
    VerifyDistance(VerifyDistanceArgs),
    /// Run entropy checks on a serialized code.
    Verify(VerifyArgs),
    /// Execute a conversion procedure on random messages.
    Convert(ConvertArgs),
    /// Evaluate the read-bandwidth lower bound for a merge spec.
    Bound(BoundArgs),
    /// Evaluate bound, construction cost and achieved cost over a grid.
    Sweep(SweepArgs),
    /// End-to-end merge of two (9,3,3,1) codewords.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub g: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    /// Field size q = 2^w.
    #[arg(long, default_value_t = 256)]
    pub field: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
    pub budget: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyDistanceArgs {
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub code: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "prop1,prop2,prop3,dist-entropy"
    )]
    pub checks: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureKind {
    Default,
    MergeOptimal,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value = "merge-optimal")]
    pub procedure: ProcedureKind,
    #[arg(long, default_value_t = 256)]
    pub field: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 9)]
    pub ki: usize,
    #[arg(long, default_value_t = 3)]
    pub gi: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 1)]
    pub delta: usize,
    #[arg(long, default_value_t = 2)]
    pub lambda: usize,
    #[arg(long, default_value_t = 3)]
    pub gf: usize,
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Construct(a) => construct(&a),
        Command::VerifyDistance(a) => verify_distance(&a),
        Command::Verify(a) => verify(&a),
        Command::Convert(a) => convert(&a),
        Command::Bound(a) => bound(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Demo(a) => demo(&a),
    }
}

fn field(q: u32) -> Result<Field, Failure> {
    Ok(Field::new(FieldSpec::with_size(q)?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })
}

/// Writes `text` to `out` and returns a short note, or returns `text` itself.
fn emit(text: String, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => {
            fs::write(path, &text)
                .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            Ok(format!("wrote {}\n", path.display()))
        }
        None => Ok(text),
    }
}

fn read_spec(path: &Path) -> Result<MergeSpec, Failure> {
    let spec: MergeSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

fn load_code(path: &Path) -> Result<LrcCode, Failure> {
    let rec: CodeRecord = read_json(path)?;
    Ok(LrcCode::from_record(&rec)?)
}

pub fn construct(a: &ConstructArgs) -> CmdResult {
    let params = LrcParams::new(a.k, a.g, a.r, a.delta, a.alpha)?;
    let f = field(a.field)?;
    let scalar = lrc::construct_pyramid_with_budget(params.scalar(), &f, a.seed, a.budget)?;
    let code = if a.alpha == 1 {
        scalar
    } else {
        scalar.replicate(a.alpha)?
    };
    emit(to_json(&code.to_record())?, a.out.as_deref())
}

pub fn verify_distance(a: &VerifyDistanceArgs) -> CmdResult {
    let code = load_code(&a.code)?;
    let alpha = code.params().alpha;
    // distance is a property of the scalar layout
    let mut scalar = if alpha == 1 {
        code
    } else {
        let p = code.params().scalar();
        let rows: Vec<usize> = (0..p.k).map(|j| j * alpha).collect();
        let cols: Vec<usize> = (0..p.n()).map(|n| n * alpha).collect();
        let gen = code.generator().select_rows(&rows).select_columns(&cols);
        LrcCode::from_generator(p, code.field().clone(), gen)?
    };
    let report = scalar.verify_distance(a.budget)?;
    let text = to_json(&report)?;
    let want = scalar.params().optimal_distance();
    if report.d != want {
        return Err(Failure::verification(format!(
            "{text}distance {} is below g + delta + 1 = {want}",
            report.d
        )));
    }
    Ok(text)
}

pub fn verify(a: &VerifyArgs) -> CmdResult {
    let code = load_code(&a.code)?;
    let checks: Vec<&str> = a.checks.iter().map(String::as_str).collect();
    let reports = entropy::run_checks(&code, &checks, a.budget)?;
    let text = to_json(&reports)?;
    if reports.iter().all(|r| r.passed()) {
        Ok(text)
    } else {
        Err(Failure::verification(text.trim_end().to_string()))
    }
}

fn procedure(kind: ProcedureKind, pair: &ConvertiblePair) -> Result<ConversionProcedure, Failure> {
    let spec = pair.spec();
    Ok(match kind {
        ProcedureKind::Default => conversion::default_reencode_procedure(pair, spec)?,
        ProcedureKind::MergeOptimal => conversion::merge_optimal_procedure(pair, spec)?,
    })
}

#[derive(Debug, Serialize)]
pub struct ConvertReport {
    pub spec: MergeSpec,
    pub procedure: ProcedureKind,
    pub field: FieldSpec,
    pub seed: u64,
    pub trials: usize,
    pub correct: bool,
    /// First trial whose output differed from direct encoding.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<String>,
    pub bandwidth: conversion::BandwidthReport,
    pub download_constraint: bounds::Lemma5Check,
}

/// Runs `trials` random messages through a procedure; `seed` drives both the
/// code construction and the messages.
fn trial_run(
    spec: &MergeSpec,
    kind: ProcedureKind,
    f: &Field,
    seed: u64,
    trials: usize,
) -> Result<ConvertReport, Failure> {
    let pair = conversion::build_merge_pair(spec, f, seed)?;
    let proc = procedure(kind, &pair)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first_mismatch = None;
    let mut bandwidth = conversion::BandwidthReport::for_plan(&proc.plan, spec)?;
    for t in 0..trials {
        let m = conversion::random_message(spec, f, &mut rng);
        let out = conversion::run(&proc, &pair, &m)?;
        if let (None, Some(node)) = (&first_mismatch, &out.mismatch) {
            first_mismatch = Some(format!("trial {t}, node {node}"));
        }
        bandwidth = out.report;
    }
    if first_mismatch.is_none() && bandwidth.gap.is_negative() {
        return Err(Error::BoundViolation {
            achieved: bandwidth.gamma_r.to_string(),
            bound: bandwidth.bound.to_string(),
        }
        .into());
    }
    Ok(ConvertReport {
        spec: *spec,
        procedure: kind,
        field: f.spec(),
        seed,
        trials,
        correct: first_mismatch.is_none(),
        first_mismatch,
        bandwidth,
        download_constraint: entropy::check_download_constraint(&pair, &proc.plan)?,
    })
}

pub fn convert(a: &ConvertArgs) -> CmdResult {
    let spec = read_spec(&a.spec)?;
    let f = field(a.field)?;
    let report = trial_run(&spec, a.procedure, &f, a.seed, a.trials)?;
    let text = to_json(&report)?;
    let written = emit(text.clone(), a.out.as_deref())?;
    if report.correct {
        Ok(written)
    } else {
        Err(Failure::verification(text.trim_end().to_string()))
    }
}

pub fn bound(a: &BoundArgs) -> CmdResult {
    let spec = read_spec(&a.spec)?;
    to_json(&bounds::theorem1_bound(&spec)?)
}

fn default_field() -> u32 {
    256
}

fn default_trials() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridEntry {
    #[serde(flatten)]
    pub spec: MergeSpec,
    #[serde(default = "default_field")]
    pub field: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

/// Sweep input: `{"entries": [...]}` or a bare array of entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExperimentGrid {
    Object { entries: Vec<GridEntry> },
    List(Vec<GridEntry>),
}

impl ExperimentGrid {
    pub fn entries(&self) -> &[GridEntry] {
        match self {
            ExperimentGrid::Object { entries } | ExperimentGrid::List(entries) => entries,
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        for (i, e) in self.entries().iter().enumerate() {
            e.spec
                .validate()
                .map_err(|err| Failure::invalid(format!("grid entry {i}: {err}")))?;
            FieldSpec::with_size(e.field)
                .map_err(|err| Failure::invalid(format!("grid entry {i}: {err}")))?;
        }
        Ok(())
    }
}

pub const SWEEP_HEADER: [&str; 13] = [
    "kI",
    "gI",
    "r",
    "delta",
    "lambda",
    "gF",
    "alpha",
    "case",
    "bound",
    "construction_cost",
    "achieved",
    "gap",
    "correct",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "kI")]
    pub k_initial: usize,
    #[serde(rename = "gI")]
    pub g_initial: usize,
    pub r: usize,
    pub delta: usize,
    pub lambda: usize,
    #[serde(rename = "gF")]
    pub g_final: usize,
    pub alpha: usize,
    pub case: String,
    pub bound: String,
    pub construction_cost: String,
    /// Achieved read bandwidth, `n/a` when no procedure is implemented.
    pub achieved: String,
    pub gap: String,
    /// `true`/`false` over the entry's trials, `n/a`, or `error: ...`.
    pub correct: String,
}

fn sweep_row(e: &GridEntry) -> Result<SweepRow, Failure> {
    let s = e.spec;
    let report: BoundReport = bounds::theorem1_bound(&s)?;
    let (achieved, gap, correct) = if s.g_final > s.g_initial {
        ("n/a".to_string(), "n/a".to_string(), "n/a".to_string())
    } else {
        match trial_run(
            &s,
            ProcedureKind::MergeOptimal,
            &field(e.field)?,
            e.seed,
            e.trials,
        ) {
            Ok(r) => (
                r.bandwidth.gamma_r.to_string(),
                r.bandwidth.gap.to_string(),
                r.correct.to_string(),
            ),
            Err(f) if f.code == EXIT_INTERNAL => return Err(f),
            Err(f) => ("n/a".into(), "n/a".into(), format!("error: {}", f.message)),
        }
    };
    Ok(SweepRow {
        k_initial: s.k_initial,
        g_initial: s.g_initial,
        r: s.r,
        delta: s.delta,
        lambda: s.lambda,
        g_final: s.g_final,
        alpha: s.alpha,
        case: report.case_label.to_string(),
        bound: report.bound_gamma_r.to_string(),
        construction_cost: report.construction_gamma_r.to_string(),
        achieved,
        gap,
        correct,
    })
}

pub fn sweep_rows(grid: &ExperimentGrid) -> Result<Vec<SweepRow>, Failure> {
    grid.validate()?;
    grid.entries().par_iter().map(sweep_row).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, Failure> {
    let internal = |e: csv::Error| Failure {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).map_err(internal)?;
    for row in rows {
        w.serialize(row).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let grid: ExperimentGrid = read_json(&a.grid)?;
    let rows = sweep_rows(&grid)?;
    let failed = rows
        .iter()
        .filter(|r| r.correct.starts_with("error"))
        .count();
    let text = emit(sweep_csv(&rows)?, a.out.as_deref())?;
    if !rows.is_empty() && failed == rows.len() {
        return Err(Failure::verification(format!("all {failed} rows failed")));
    }
    Ok(text)
}

fn alpha_units(x: Symbols, alpha: usize) -> String {
    let v = x.per_alpha(alpha);
    if v.is_integer() {
        format!("{v}α")
    } else {
        format!("({v})α")
    }
}

fn role_table(spec: &MergeSpec, out: &mut String) -> Result<(), Failure> {
    let roles = conversion::classify_layout(spec)?;
    let _ = writeln!(out, "node roles:");
    for t in 0..spec.lambda {
        let mut unchanged = Vec::new();
        let mut retired = Vec::new();
        for e in roles.entries.iter().filter(|e| e.codeword == Some(t)) {
            match e.role {
                NodeRole::Retired => retired.push(e.node.to_string()),
                _ => unchanged.push(e.node.to_string()),
            }
        }
        let _ = writeln!(
            out,
            "  codeword {}: unchanged {}; retired {}",
            t + 1,
            unchanged.join(" "),
            if retired.is_empty() {
                "-".into()
            } else {
                retired.join(" ")
            }
        );
    }
    let new: Vec<&str> = roles
        .entries
        .iter()
        .filter(|e| e.role == NodeRole::New)
        .map(|e| e.label.as_str())
        .collect();
    let _ = writeln!(
        out,
        "  new: {}",
        if new.is_empty() {
            "-".into()
        } else {
            new.join(" ")
        }
    );
    let _ = writeln!(
        out,
        "  counts: {} unchanged, {} retired, {} new",
        roles.count(NodeRole::Unchanged),
        roles.count(NodeRole::Retired),
        roles.count(NodeRole::New)
    );
    Ok(())
}

pub fn demo(a: &DemoArgs) -> CmdResult {
    let spec = MergeSpec::new(a.ki, a.gi, a.r, a.delta, a.lambda, a.gf, a.alpha)?;
    let report = bounds::theorem1_bound(&spec)?;
    let mut out = String::new();
    let _ = writeln!(out, "spec {spec}");
    role_table(&spec, &mut out)?;
    let bound = alpha_units(report.bound_gamma_r, spec.alpha);
    if spec.g_final > spec.g_initial {
        let _ = writeln!(
            out,
            "bound = {bound} (case {}), no executable procedure (g^F > g^I)",
            report.case_label
        );
        let _ = writeln!(
            out,
            "construction cost = {}",
            alpha_units(report.construction_gamma_r, spec.alpha)
        );
        return Ok(out);
    }

    let f = Field::gf256();
    let pair = conversion::build_merge_pair(&spec, &f, a.seed)?;
    conversion::classify_nodes(&pair, &spec)?;
    let proc = conversion::merge_optimal_procedure(&pair, &spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let m = conversion::random_message(&spec, &f, &mut rng);
    let (_, bw) = conversion::execute(&proc, &pair, &m)?;
    let achieved = alpha_units(Symbols::from(bw.gamma_r), spec.alpha);
    let verdict = if bw.gap.is_zero() {
        "OPTIMAL".to_string()
    } else {
        format!("gap {}", alpha_units(bw.gap, spec.alpha))
    };
    let _ = writeln!(out, "γ_R = {achieved}, bound = {bound}, {verdict}");
    let default = conversion::default_reencode_procedure(&pair, &spec)?;
    let (_, dbw) = conversion::execute(&default, &pair, &m)?;
    let _ = writeln!(
        out,
        "re-encode baseline: γ_R = {}, gap {}",
        alpha_units(Symbols::from(dbw.gamma_r), spec.alpha),
        alpha_units(dbw.gap, spec.alpha)
    );

    let mut checks = Vec::new();
    for (name, code) in [("initial", pair.initial()), ("final", pair.final_code())] {
        let all = ["prop1", "prop2", "prop3", "dist-entropy"];
        let reports = entropy::run_checks(code, &all, DEFAULT_PATTERN_BUDGET)?;
        for r in reports {
            checks.push((format!("{name} {}", r.check), r.passed()));
        }
    }
    checks.push((
        "coordinator".into(),
        entropy::check_coordinator(&pair, &proc.plan)?.passed(),
    ));
    checks.push((
        "codeword independence".into(),
        entropy::check_codeword_independence(&pair)?.passed(),
    ));
    let c = entropy::check_download_constraint(&pair, &proc.plan)?;
    checks.push((
        format!("download constraint ({} >= {})", c.lhs, c.rhs),
        c.holds,
    ));
    let _ = writeln!(out, "entropy checks:");
    for (name, ok) in &checks {
        let _ = writeln!(out, "  {:<40} {}", name, if *ok { "PASS" } else { "FAIL" });
    }
    if checks.iter().all(|(_, ok)| *ok) {
        Ok(out)
    } else {
        Err(Failure::verification(out))
    }
}

//! Grid runner, result CSV, round plots and known-answer checks.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::cipher::{CipherKind, RoundReduced};
use crate::diffgen::{generate_for, parse_hex, random_class_set, shift_family, DiffClassSet, DiffSample};
use crate::error::{DiffError, ExperimentError};
use crate::nn::{init_model, train, LabeledMatrix, Mlp, MlpArch, OutputHead, TrainConfig, TrainReport};
use crate::present::{self, PresentKey80};
use crate::rng::{self, derive};
use crate::simeck::{self, SimeckKey128};
use crate::Block64;

pub const CSV_HEADER: &str = "cipher,rounds,model,trial,seed,val_acc_min,val_acc_max,val_acc_final,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelPreset {
    Baksi,
    Proposed,
}

impl ModelPreset {
    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::Baksi => "baksi",
            ModelPreset::Proposed => "proposed",
        }
    }

    pub fn arch(self, classes: usize) -> MlpArch {
        match self {
            ModelPreset::Baksi => MlpArch::baksi(classes),
            ModelPreset::Proposed => MlpArch::proposed(classes),
        }
    }

    fn code(self) -> u64 {
        match self {
            ModelPreset::Baksi => 0,
            ModelPreset::Proposed => 1,
        }
    }
}

impl fmt::Display for ModelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baksi" => Ok(ModelPreset::Baksi),
            "proposed" => Ok(ModelPreset::Proposed),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// Where the input differentials of a cell come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffMode {
    Selected,
    /// `classes` fresh random differentials per trial.
    Random { classes: usize },
    Family { base: Block64, shifts: Vec<i32> },
    File(PathBuf),
}

impl DiffMode {
    pub fn class_set(&self, seed: u64) -> Result<DiffClassSet, ExperimentError> {
        match self {
            DiffMode::Selected => Ok(DiffClassSet::selected()),
            DiffMode::Random { classes } => Ok(random_class_set(*classes, seed)?),
            DiffMode::Family { base, shifts } => Ok(shift_family(*base, shifts)?),
            DiffMode::File(path) => {
                let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(DiffClassSet::parse_hex_list(&text)?)
            }
        }
    }

    fn code(&self) -> u64 {
        match self {
            DiffMode::Selected => 0,
            DiffMode::Random { .. } => 1,
            DiffMode::Family { .. } => 2,
            DiffMode::File(_) => 3,
        }
    }

    fn short(&self) -> &'static str {
        match self {
            DiffMode::Selected => "selected",
            DiffMode::Random { .. } => "random",
            DiffMode::Family { .. } => "family",
            DiffMode::File(_) => "file",
        }
    }
}

impl fmt::Display for DiffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffMode::Selected => f.write_str("selected"),
            DiffMode::Random { classes: 4 } => f.write_str("random"),
            DiffMode::Random { classes } => write!(f, "random:{classes}"),
            DiffMode::Family { base, shifts } => {
                let s: Vec<String> = shifts.iter().map(|x| x.to_string()).collect();
                write!(f, "family:{base:#018x}:{}", s.join(","))
            }
            DiffMode::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for DiffMode {
    type Err = String;

    /// `selected`, `random[:t]`, `family:<hexbase>:<s1,s2,..>` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "selected" {
            return Ok(DiffMode::Selected);
        }
        if s == "random" {
            return Ok(DiffMode::Random { classes: 4 });
        }
        if let Some(t) = s.strip_prefix("random:") {
            let classes = t.parse().map_err(|_| format!("bad class count `{t}`"))?;
            return Ok(DiffMode::Random { classes });
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(DiffMode::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("family:") {
            let (base, shifts) = rest
                .split_once(':')
                .ok_or_else(|| format!("expected family:<hexbase>:<shifts>, got `{s}`"))?;
            let base = parse_hex(base).ok_or_else(|| format!("bad base `{base}`"))?;
            let shifts = shifts
                .split(',')
                .map(|x| {
                    let x = x.trim();
                    x.strip_prefix('+')
                        .unwrap_or(x)
                        .parse::<i32>()
                        .map_err(|_| format!("bad shift `{x}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(DiffMode::Family { base, shifts });
        }
        Err(format!("unknown differential mode `{s}`"))
    }
}

/// Table tag for a (model, differentials) pair: `M1`..`M4` for the four
/// standard presets, otherwise `<model>-<mode>`.
pub fn model_tag(model: ModelPreset, diffs: &DiffMode) -> String {
    match (model, diffs) {
        (ModelPreset::Baksi, DiffMode::Random { .. }) => "M1".into(),
        (ModelPreset::Proposed, DiffMode::Random { .. }) => "M2".into(),
        (ModelPreset::Baksi, DiffMode::Selected) => "M3".into(),
        (ModelPreset::Proposed, DiffMode::Selected) => "M4".into(),
        (m, d) => format!("{}-{}", m.name(), d.short()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub ciphers: Vec<CipherKind>,
    /// Inclusive round range.
    pub rounds: (usize, usize),
    pub models: Vec<ModelPreset>,
    pub diffs: Vec<DiffMode>,
    pub trials: usize,
    pub pair_count: usize,
    pub train: TrainConfig,
    pub head: OutputHead,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Record wall-clock times; off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ciphers: vec![CipherKind::Present],
            rounds: (3, 6),
            models: vec![ModelPreset::Proposed],
            diffs: vec![DiffMode::Selected],
            trials: 5,
            pair_count: 10_000,
            train: TrainConfig::default(),
            head: OutputHead::Sigmoid,
            seed: 0,
            out_dir: PathBuf::from("results"),
            timing: false,
        }
    }
}

pub fn parse_rounds(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("bad round range `{s}`");
    match s.split_once("..") {
        Some((a, b)) => {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().strip_prefix('=').unwrap_or(b.trim());
            Ok((a, b.trim().parse().map_err(|_| bad())?))
        }
        None => {
            let r = s.trim().parse().map_err(|_| bad())?;
            Ok((r, r))
        }
    }
}

fn list<T: FromStr<Err = String>>(s: &str, commas: bool) -> Result<Vec<T>, String> {
    s.split(|c: char| c.is_whitespace() || (commas && c == ','))
        .filter(|t| !t.is_empty())
        .map(T::from_str)
        .collect()
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, ExperimentError> {
    v.parse()
        .map_err(|_| ExperimentError::Config(format!("bad value for `{key}`: `{v}`")))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        if self.ciphers.is_empty() || self.models.is_empty() || self.diffs.is_empty() {
            return err("cipher, model and diffs lists must be nonempty".into());
        }
        let (a, b) = self.rounds;
        if a == 0 || a > b {
            return err(format!("bad round range {a}..{b}"));
        }
        for c in &self.ciphers {
            if *c == CipherKind::Identity || b > c.max_rounds() {
                return err(format!("rounds {a}..{b} outside 1..{} for {c}", c.max_rounds()));
            }
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.pair_count == 0 {
            return err("pairs must be at least 1".into());
        }
        self.train
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Apply one `key = value` setting. Keys mirror the command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let v = value.trim();
        let cfg = |m: String| ExperimentError::Config(format!("{key}: {m}"));
        match key.trim() {
            "cipher" => self.ciphers = list(v, true).map_err(cfg)?,
            "rounds" => self.rounds = parse_rounds(v).map_err(cfg)?,
            "model" => self.models = list(v, true).map_err(cfg)?,
            "diffs" => self.diffs = list(v, false).map_err(cfg)?,
            "trials" => self.trials = parse_value(key, v)?,
            "pairs" => self.pair_count = parse_value(key, v)?,
            "lr" => self.train.learning_rate = parse_value(key, v)?,
            "epochs" => self.train.epochs = parse_value(key, v)?,
            "batch" => self.train.batch_size = parse_value(key, v)?,
            "val_fraction" => self.train.val_fraction = parse_value(key, v)?,
            "head" => {
                self.head = match v {
                    "sigmoid" => OutputHead::Sigmoid,
                    "softmax" => OutputHead::Softmax,
                    _ => return Err(cfg(format!("unknown head `{v}`"))),
                }
            }
            "seed" => self.seed = parse_value(key, v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "timing" => self.timing = parse_value(key, v)?,
            other => return Err(ExperimentError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parse a flat config file: one `key = value` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Overlay the settings in `text` on `self`.
    pub fn apply(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(" ");
        let head = match self.head {
            OutputHead::Sigmoid => "sigmoid",
            OutputHead::Softmax => "softmax",
        };
        let mut s = String::new();
        let _ = writeln!(s, "cipher = {}", join(self.ciphers.iter().map(|c| c.to_string()).collect()));
        let _ = writeln!(s, "rounds = {}..{}", self.rounds.0, self.rounds.1);
        let _ = writeln!(s, "model = {}", join(self.models.iter().map(|m| m.to_string()).collect()));
        let _ = writeln!(s, "diffs = {}", join(self.diffs.iter().map(|d| d.to_string()).collect()));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "pairs = {}", self.pair_count);
        let _ = writeln!(s, "lr = {}", self.train.learning_rate);
        let _ = writeln!(s, "epochs = {}", self.train.epochs);
        let _ = writeln!(s, "batch = {}", self.train.batch_size);
        let _ = writeln!(s, "val_fraction = {}", self.train.val_fraction);
        let _ = writeln!(s, "head = {head}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "timing = {}", self.timing);
        s
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Number of rows `run_grid` produces.
    pub fn row_count(&self) -> usize {
        let (a, b) = self.rounds;
        self.ciphers.len() * (b + 1 - a) * self.models.len() * self.diffs.len() * self.trials
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub cipher: CipherKind,
    pub rounds: usize,
    pub model: String,
    pub trial: usize,
    pub seed: u64,
    pub val_acc_min: f64,
    pub val_acc_max: f64,
    pub val_acc_final: f64,
    pub wall_ms: u64,
    /// Set when the cell failed; accuracies are then NaN.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Seed shared by every model of one (cipher, rounds, diffs, trial) cell, so
/// competing models see the same differentials and data.
pub fn cell_seed(master: u64, cipher: CipherKind, rounds: usize, diffs: &DiffMode, trial: usize) -> u64 {
    let c = match cipher {
        CipherKind::Present => 0,
        CipherKind::Simeck => 1,
        CipherKind::Identity => 2,
    };
    derive(master, &[c, rounds as u64, diffs.code(), trial as u64])
}

/// Output of [`train_cell`].
pub struct CellRun {
    pub class_set: DiffClassSet,
    pub model: Mlp<f32>,
    pub report: TrainReport,
    pub val: Vec<DiffSample>,
}

/// Build the class set and dataset of one cell from its seed, then train one
/// model on it.
pub fn train_cell(
    cipher: RoundReduced,
    model: ModelPreset,
    diffs: &DiffMode,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<CellRun, ExperimentError> {
    let class_set = diffs.class_set(derive(seed, &[0]))?;
    let data = generate_for(cipher, &class_set, config.pair_count, derive(seed, &[1]))?;
    let split = data.split(config.train.val_fraction, derive(seed, &[2]))?;
    let arch = model.arch(class_set.len()).with_head(config.head);
    let m = init_model::<f32>(&arch, derive(seed, &[3, model.code()]));
    let train_cfg = TrainConfig {
        seed: derive(seed, &[4, model.code()]),
        ..config.train.clone()
    };
    let (model, report) = train(
        m,
        &LabeledMatrix::from_samples(&split.train),
        &LabeledMatrix::from_samples(&split.val),
        &train_cfg,
    )?;
    Ok(CellRun {
        class_set,
        model,
        report,
        val: split.val,
    })
}

/// Train one model on one cell. Returns (min, max, final) validation accuracy
/// and the wall time.
pub fn run_cell(
    cipher: RoundReduced,
    model: ModelPreset,
    diffs: &DiffMode,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<((f64, f64, f64), u64), ExperimentError> {
    let started = Instant::now();
    let run = train_cell(cipher, model, diffs, seed, config)?;
    let r = &run.report;
    let accs = (r.min_accuracy(), r.max_accuracy(), r.final_accuracy());
    Ok((accs, started.elapsed().as_millis() as u64))
}

pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    run_grid_with(config, |_| {})
}

/// Run every (cipher, rounds, model, diffs, trial) cell. Cells are
/// independent and run in parallel; `on_row` sees rows as they complete, and
/// the returned rows are in nesting order (cell-major, trial-minor). Cell
/// failures become rows with `error` set; only an invalid config aborts.
pub fn run_grid_with(
    config: &ExperimentConfig,
    on_row: impl FnMut(&ResultRow) + Send,
) -> Result<Vec<ResultRow>, ExperimentError> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.row_count());
    for &kind in &config.ciphers {
        for rounds in config.rounds.0..=config.rounds.1 {
            let cipher = RoundReduced::new(kind, rounds)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
            for &model in &config.models {
                for diffs in &config.diffs {
                    for trial in 0..config.trials {
                        cells.push((cipher, model, diffs, trial));
                    }
                }
            }
        }
    }
    let on_row = Mutex::new(on_row);
    let rows = cells
        .into_par_iter()
        .map(|(cipher, model, diffs, trial)| {
            let (kind, rounds) = (cipher.kind(), cipher.rounds());
            let seed = cell_seed(config.seed, kind, rounds, diffs, trial);
            let (accs, ms, error) = match run_cell(cipher, model, diffs, seed, config) {
                Ok((accs, ms)) => (accs, ms, None),
                Err(e) => ((f64::NAN, f64::NAN, f64::NAN), 0, Some(e.to_string())),
            };
            let row = ResultRow {
                cipher: kind,
                rounds,
                model: model_tag(model, diffs),
                trial,
                seed,
                val_acc_min: accs.0,
                val_acc_max: accs.1,
                val_acc_final: accs.2,
                wall_ms: if config.timing { ms } else { 0 },
                error,
            };
            (on_row.lock().unwrap_or_else(|e| e.into_inner()))(&row);
            row
        })
        .collect();
    Ok(rows)
}

fn fmt_acc(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "nan".into()
    }
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.cipher,
            r.rounds,
            r.model,
            r.trial,
            r.seed,
            fmt_acc(r.val_acc_min),
            fmt_acc(r.val_acc_max),
            fmt_acc(r.val_acc_final),
            r.wall_ms
        );
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRows);
    }
    write_file(path, &csv_string(rows))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(ExperimentError::Config("results CSV: missing header".into()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || ExperimentError::Config(format!("results CSV line {}: `{line}`", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let acc = |s: &str| -> Result<f64, ExperimentError> { s.parse().map_err(|_| bad()) };
        let final_acc = acc(f[7])?;
        rows.push(ResultRow {
            cipher: f[0].parse().map_err(|_| bad())?,
            rounds: f[1].parse().map_err(|_| bad())?,
            model: f[2].to_string(),
            trial: f[3].parse().map_err(|_| bad())?,
            seed: f[4].parse().map_err(|_| bad())?,
            val_acc_min: acc(f[5])?,
            val_acc_max: acc(f[6])?,
            val_acc_final: final_acc,
            wall_ms: f[8].parse().map_err(|_| bad())?,
            error: final_acc.is_nan().then(|| "failed".to_string()),
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

/// One plotted curve: trial-mean final accuracy per round.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub tag: String,
    pub points: Vec<(usize, f64)>,
}

/// Group successful rows by model tag (first-seen order) and average the
/// final accuracy over trials at each round.
pub fn round_curves(rows: &[ResultRow]) -> Vec<Curve> {
    let mut curves: Vec<Curve> = Vec::new();
    let mut sums: Vec<Vec<(usize, f64, usize)>> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let idx = match curves.iter().position(|c| c.tag == r.model) {
            Some(i) => i,
            None => {
                curves.push(Curve {
                    tag: r.model.clone(),
                    points: Vec::new(),
                });
                sums.push(Vec::new());
                curves.len() - 1
            }
        };
        match sums[idx].iter_mut().find(|(x, _, _)| *x == r.rounds) {
            Some(e) => {
                e.1 += r.val_acc_final;
                e.2 += 1;
            }
            None => sums[idx].push((r.rounds, r.val_acc_final, 1)),
        }
    }
    for (c, mut s) in curves.iter_mut().zip(sums) {
        s.sort_by_key(|e| e.0);
        c.points = s.into_iter().map(|(x, sum, n)| (x, sum / n as f64)).collect();
    }
    curves
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Render the round curves as a standalone SVG document. `classes` places the
/// chance line at `1/classes`.
pub fn round_plot_svg(rows: &[ResultRow], classes: usize, title: &str) -> Result<String, ExperimentError> {
    let curves = round_curves(rows);
    let mut xs: Vec<usize> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
    xs.sort_unstable();
    xs.dedup();
    if xs.len() < 2 {
        return Err(ExperimentError::PlotCoverage);
    }
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 120.0, 40.0, 50.0);
    let (x0, x1) = (xs[0] as f64, xs[xs.len() - 1] as f64);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| top + (1.0 - y) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, xml_escape(title));
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=4 {
        let y = i as f64 * 0.25;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1:.1}" x2="{left}" y2="{1:.1}" stroke="black"/><text x="{2}" y="{3:.1}" text-anchor="end">{y:.2}</text>"#,
            left - 4.0,
            py(y),
            left - 6.0,
            py(y) + 4.0
        );
    }
    for &x in &xs {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1}" x2="{0:.1}" y2="{2}" stroke="black"/><text x="{0:.1}" y="{3}" text-anchor="middle">{x}</text>"#,
            px(x as f64),
            h - bottom,
            h - bottom + 4.0,
            h - bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">rounds</text>"#,
        left + (w - left - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">mean validation accuracy</text>"#,
        top + (h - top - bottom) / 2.0
    );
    let chance = 1.0 / classes.max(1) as f64;
    let _ = writeln!(
        s,
        r#"<line class="chance" x1="{left}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="gray" stroke-dasharray="4 3"/><text x="{2}" y="{3:.1}" fill="gray">1/t = {chance:.2}</text>"#,
        py(chance),
        w - right,
        w - right + 6.0,
        py(chance) + 4.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x as f64), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-tag="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            xml_escape(&c.tag),
            pts.join(" ")
        );
        for &(x, y) in &c.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"><title>{} r={x}: {y:.4}</title></circle>"#,
                px(x as f64),
                py(y),
                xml_escape(&c.tag)
            );
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}">{5}</text>"#,
            w - right + 10.0,
            ly,
            w - right + 30.0,
            w - right + 35.0,
            ly + 4.0,
            xml_escape(&c.tag)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn emit_round_plot(rows: &[ResultRow], classes: usize, title: &str, path: &Path) -> Result<(), ExperimentError> {
    let svg = round_plot_svg(rows, classes, title)?;
    write_file(path, &svg)
}

pub const PRESENT_KATS: &str = include_str!("../fixtures/present80.kat");
pub const SIMECK_KATS: &str = include_str!("../fixtures/simeck64_128.kat");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KatVector {
    pub key: u128,
    pub plaintext: Block64,
    pub ciphertext: Block64,
}

/// Parse `key plaintext ciphertext` hex lines; `#` starts a comment.
pub fn parse_kat_file(text: &str) -> Result<Vec<KatVector>, DiffError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || DiffError::Parse {
            line: n + 1,
            msg: format!("bad vector `{line}`"),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad());
        }
        out.push(KatVector {
            key: u128::from_str_radix(f[0], 16).map_err(|_| bad())?,
            plaintext: parse_hex(f[1]).ok_or_else(bad)?,
            ciphertext: parse_hex(f[2]).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KatOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KatReport {
    pub outcomes: Vec<KatOutcome>,
}

impl KatReport {
    pub fn all_passed(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &KatOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

impl fmt::Display for KatReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)?;
        }
        Ok(())
    }
}

pub const ROUND_TRIPS: usize = 1000;

/// Run the bundled vectors and round trips against the library ciphers.
pub fn kat_check() -> KatReport {
    kat_check_with(
        |p, k| present::present_encrypt(p, PresentKey80::new(k), present::FULL_ROUNDS).ok(),
        |p, k| simeck::simeck_encrypt(p, SimeckKey128::from_u128(k), simeck::FULL_ROUNDS).ok(),
    )
}

/// Check the bundled full-round vectors against the given encryption
/// functions `(plaintext, key) -> ciphertext`, then run the library round
/// trips.
pub fn kat_check_with(
    present_fn: impl Fn(Block64, u128) -> Option<Block64>,
    simeck_fn: impl Fn(Block64, u128) -> Option<Block64>,
) -> KatReport {
    let mut report = KatReport::default();
    let suites: [(&str, &str, &dyn Fn(Block64, u128) -> Option<Block64>); 2] =
        [("present80", PRESENT_KATS, &present_fn), ("simeck64_128", SIMECK_KATS, &simeck_fn)];
    for (name, text, enc) in suites {
        match parse_kat_file(text) {
            Err(e) => report.outcomes.push(KatOutcome {
                name: format!("{name} fixture"),
                passed: false,
                detail: e.to_string(),
            }),
            Ok(vectors) => {
                for (i, v) in vectors.iter().enumerate() {
                    let got = enc(v.plaintext, v.key);
                    report.outcomes.push(KatOutcome {
                        name: format!("{name} #{i} key={:x} pt={:016x}", v.key, v.plaintext),
                        passed: got == Some(v.ciphertext),
                        detail: match got {
                            Some(c) => format!("expected {:016x}, got {c:016x}", v.ciphertext),
                            None => "encryption failed".into(),
                        },
                    });
                }
            }
        }
    }
    for kind in [CipherKind::Present, CipherKind::Simeck] {
        report.outcomes.push(round_trips(kind, ROUND_TRIPS));
    }
    report
}

fn round_trips(kind: CipherKind, count: usize) -> KatOutcome {
    let mut rng = rng::stream(0x4b41_5400, kind.key_bits() as u64);
    let mut failed = None;
    for i in 0..count {
        let rounds = rng.random_range(1..=kind.max_rounds());
        let key = rng.random::<u128>() & kind.key_mask();
        let p: Block64 = rng.random();
        let keyed = RoundReduced::new(kind, rounds).expect("rounds in range").schedule(key);
        if keyed.decrypt(keyed.encrypt(p)) != p {
            failed = Some(format!("trip {i}: rounds={rounds} key={key:x} pt={p:016x}"));
            break;
        }
    }
    KatOutcome {
        name: format!("{kind} round trips"),
        passed: failed.is_none(),
        detail: failed.unwrap_or_else(|| format!("{count} ok")),
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use neurodiff::baseline::DdtTable;
use neurodiff::diffgen::generate_for;
use neurodiff::distinguisher::{offline_phase, online_phase, DecisionPolicy, OfflineConfig, OfflineOutcome, OracleKind};
use neurodiff::experiment::{
    self, cell_seed, emit_csv, emit_round_plot, kat_check, load_csv, run_grid_with, train_cell,
    ExperimentConfig,
};
use neurodiff::nn::{evaluate_samples, load_model, save_model};
use neurodiff::rng::derive;
use neurodiff::{DiffDataset, Mlp32, RoundReduced};

#[derive(Parser)]
#[command(name = "neurodiff", version, about = "Neural differential distinguishers for round-reduced PRESENT and Simeck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the bundled known-answer vectors and round trips.
    Kat,
    /// Print the PRESENT S-box difference distribution table.
    Ddt {
        #[arg(long)]
        csv: bool,
    },
    /// Generate a labelled output-difference dataset.
    GenData(Common),
    /// Train one model and save it.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on a saved dataset instead of generating one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Accuracy of a saved model on a saved dataset.
    Evaluate {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Offline training followed by online oracle queries.
    Distinguish {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = OracleArg::Cipher)]
        oracle: OracleArg,
        /// Online query pairs.
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// Skip offline training and use this model.
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Run the experiment grid and write results.csv and plots.
    Grid(Common),
    /// Plot trial-mean final accuracy per round from a results CSV.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Cipher,
    Random,
}

/// Flags shared by the data, training and grid commands. Each mirrors a key
/// of the config file and overrides it.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cipher: Option<String>,
    /// `R` or `A..B`.
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// selected | random | family:<hexbase>:<shifts> | file:<path>
    #[arg(long)]
    diffs: Option<String>,
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("cipher", &self.cipher),
            ("rounds", &self.rounds),
            ("model", &self.model),
            ("diffs", &self.diffs),
            ("pairs", &self.pairs),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("batch", &self.batch),
            ("head", &self.head),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.timing {
            cfg.timing = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The single cell a non-grid command works on: first cipher, first round,
/// first model and first differential mode of the config.
struct Cell {
    cipher: RoundReduced,
    seed: u64,
    cfg: ExperimentConfig,
}

fn single_cell(common: &Common) -> Result<Cell> {
    let cfg = common.config()?;
    if cfg.rounds.0 != cfg.rounds.1 {
        bail!("this command takes a single round count, got {}..{}", cfg.rounds.0, cfg.rounds.1);
    }
    let kind = cfg.ciphers[0];
    let cipher = RoundReduced::new(kind, cfg.rounds.0)?;
    let seed = cell_seed(cfg.seed, kind, cfg.rounds.0, &cfg.diffs[0], 0);
    Ok(Cell { cipher, seed, cfg })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn gen_data(common: &Common) -> Result<()> {
    let cell = single_cell(common)?;
    let set = cell.cfg.diffs[0].class_set(derive(cell.seed, &[0]))?;
    let data = generate_for(cell.cipher, &set, cell.cfg.pair_count, derive(cell.seed, &[1]))?;
    create_dir(&cell.cfg.out_dir)?;
    let path = cell.cfg.out_dir.join("dataset.csv");
    data.save(&path)?;
    println!("wrote {} records to {}", data.samples.len(), path.display());
    Ok(())
}

fn train_cmd(common: &Common, data: Option<&Path>) -> Result<()> {
    let cell = single_cell(common)?;
    let cfg = &cell.cfg;
    let preset = cfg.models[0];
    let (model, report) = match data {
        Some(path) => {
            let ds = DiffDataset::load(path)?;
            let split = ds.split(cfg.train.val_fraction, derive(cell.seed, &[2]))?;
            let arch = preset.arch(ds.classes()).with_head(cfg.head);
            let m = neurodiff::nn::init_model::<f32>(&arch, derive(cell.seed, &[3]));
            let tc = neurodiff::TrainConfig {
                seed: derive(cell.seed, &[4]),
                ..cfg.train.clone()
            };
            neurodiff::nn::train(
                m,
                &neurodiff::nn::LabeledMatrix::from_samples(&split.train),
                &neurodiff::nn::LabeledMatrix::from_samples(&split.val),
                &tc,
            )?
        }
        None => {
            let run = train_cell(cell.cipher, preset, &cfg.diffs[0], cell.seed, cfg)?;
            (run.model, run.report)
        }
    };
    for (i, e) in report.epochs.iter().enumerate() {
        println!(
            "epoch {:>3}  loss {:.5}  train_acc {:.4}  val_acc {:.4}",
            i + 1,
            e.train_loss,
            e.train_accuracy,
            e.val_accuracy
        );
    }
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("model.bin");
    save_model(&model, &path)?;
    println!("final validation accuracy {:.4}; model saved to {}", report.final_accuracy(), path.display());
    Ok(())
}

fn evaluate_cmd(model_file: &Path, data: &Path) -> Result<()> {
    let model: Mlp32 = load_model(model_file)?;
    let ds = DiffDataset::load(data)?;
    if ds.classes() != model.classes() {
        bail!("dataset has {} classes, model has {}", ds.classes(), model.classes());
    }
    println!("accuracy {:.4}", evaluate_samples(&model, &ds.samples)?);
    Ok(())
}

fn distinguish_cmd(common: &Common, oracle: OracleArg, queries: usize, model_file: Option<&Path>) -> Result<()> {
    let cell = single_cell(common)?;
    let cfg = &cell.cfg;
    let set = cfg.diffs[0].class_set(derive(cell.seed, &[0]))?;
    let model: Mlp32 = match model_file {
        Some(p) => load_model(p)?,
        None => {
            let mut off = OfflineConfig::new(cfg.models[0].arch(set.len()).with_head(cfg.head), cell.seed);
            off.train = cfg.train.clone();
            off.pair_count = cfg.pair_count;
            match offline_phase(cell.cipher, &set, &off)? {
                OfflineOutcome::Distinguisher { model, accuracy, attempts, .. } => {
                    println!("offline: accuracy {accuracy:.4} after {attempts} attempt(s)");
                    model
                }
                OfflineOutcome::NoDistinguisher { attempts, best_accuracy } => {
                    println!(
                        "offline: no distinguisher after {attempts} attempts (best accuracy {best_accuracy:.4})"
                    );
                    return Ok(());
                }
            }
        }
    };
    let kind = match oracle {
        OracleArg::Cipher => OracleKind::Cipher(cell.cipher),
        OracleArg::Random => OracleKind::Random,
    };
    let mut o = kind.instantiate(derive(cell.seed, &[5]));
    let r = online_phase(&model, o.as_mut(), &set, queries, derive(cell.seed, &[6]), DecisionPolicy::default())?;
    println!(
        "online: accuracy {:.4} over {} records, threshold {:.4} (z = {}) -> {}",
        r.accuracy, r.records, r.threshold, r.z, r.verdict
    );
    Ok(())
}

fn grid_cmd(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    create_dir(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.txt"), cfg.to_config_string()).context("writing config.txt")?;
    let total = cfg.row_count();
    let mut done = 0;
    let rows = run_grid_with(&cfg, |r| {
        done += 1;
        match &r.error {
            None => eprintln!(
                "[{done}/{total}] {} r={} {} trial {}: final {:.4}",
                r.cipher, r.rounds, r.model, r.trial, r.val_acc_final
            ),
            Some(e) => eprintln!("[{done}/{total}] {} r={} {} trial {}: FAILED {e}", r.cipher, r.rounds, r.model, r.trial),
        }
    })?;
    let csv = cfg.out_dir.join("results.csv");
    emit_csv(&rows, &csv)?;
    println!("wrote {}", csv.display());
    let classes = cfg.diffs[0].class_set(0).map(|s| s.len()).unwrap_or(4);
    if cfg.rounds.1 > cfg.rounds.0 {
        for kind in &cfg.ciphers {
            let sub: Vec<_> = rows.iter().filter(|r| r.cipher == *kind).cloned().collect();
            let path = cfg.out_dir.join(format!("{kind}_rounds.svg"));
            emit_round_plot(&sub, classes, &format!("{kind}: mean final validation accuracy"), &path)?;
            println!("wrote {}", path.display());
        }
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        bail!("{failed} of {} cells failed", rows.len());
    }
    Ok(())
}

fn plot_cmd(results: &Path, out: &Path, classes: usize) -> Result<()> {
    let rows = load_csv(results)?;
    let title = match rows.first() {
        Some(r) if rows.iter().all(|x| x.cipher == r.cipher) => format!("{}: mean final validation accuracy", r.cipher),
        _ => "mean final validation accuracy".to_string(),
    };
    experiment::emit_round_plot(&rows, classes, &title, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kat => {
            let report = kat_check();
            print!("{report}");
            if !report.all_passed() {
                bail!("{} check(s) failed", report.failures().count());
            }
            Ok(())
        }
        Command::Ddt { csv } => {
            let ddt = DdtTable::present();
            if csv {
                print!("{}", ddt.to_csv());
            } else {
                print!("{ddt}");
            }
            Ok(())
        }
        Command::GenData(common) => gen_data(&common),
        Command::Train { common, data } => train_cmd(&common, data.as_deref()),
        Command::Evaluate { model_file, data } => evaluate_cmd(&model_file, &data),
        Command::Distinguish {
            common,
            oracle,
            queries,
            model_file,
        } => distinguish_cmd(&common, oracle, queries, model_file.as_deref()),
        Command::Grid(common) => grid_cmd(&common),
        Command::Plot { results, out, classes } => plot_cmd(&results, &out, classes),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

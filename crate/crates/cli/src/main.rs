//! `gazebench`: train the toy attentive classifier under five attention
//! baselines, score saliency and gaze metrics over dataset manifests, run the
//! grouped correlation protocols, and evaluate FGSM robustness.

mod pipelines;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gazebench_core::attention::AttentionKind;
use gazebench_core::error::Error as CoreError;
use gazebench_core::gaze::{ShuffleMode, ShuffleSpec};
use gazebench_core::io::Manifest;
use gazebench_core::model::{
    forward_sample, gradcheck_audit, generate_synthetic_task, load_checkpoint, save_checkpoint,
    trace_to_csv, train, FusionStage, SyntheticTaskConfig, TrainConfig,
};
use gazebench_core::protocols::{
    dataset_from_manifest, kfold_split, run_benchmark_with, write_synthetic_dataset, BenchConfig,
    GroupingMode, GroupingSpec, WithinGroupProtocol,
};
use gazebench_core::report::{emit_report, ReportFormat, ReportTable};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "gazebench",
    version,
    about = "Attention baselines vs human gaze: metrics, protocols, training, and FGSM robustness"
)]
struct Cli {
    /// Master seed for all randomized behavior.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory for reports and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel evaluation (1 = fully serial).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Report formats to emit.
    #[arg(long, global = true, value_delimiter = ',', default_values = ["csv", "json"])]
    format: Vec<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShuffleArg {
    /// All other-image fixations as negatives (no sampling noise).
    Union,
    /// Seeded fixed-size negative subsets, averaged.
    MonteCarlo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingArg {
    TopBottom,
    PosNeg,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    VsHuman,
    Pairwise,
    Both,
}

#[derive(Args)]
struct ShuffleOpts {
    /// Negative-set policy for shuffled AUC.
    #[arg(long, value_enum, default_value_t = ShuffleArg::Union)]
    shuffle: ShuffleArg,

    /// Number of Monte Carlo negative draws.
    #[arg(long, default_value_t = 100)]
    num_shuffles: usize,
}

impl ShuffleOpts {
    fn spec(&self, seed: u64) -> ShuffleSpec {
        match self.shuffle {
            ShuffleArg::Union => ShuffleSpec {
                mode: ShuffleMode::DeterministicUnion,
                num_shuffles: 1,
                seed,
            },
            ShuffleArg::MonteCarlo => ShuffleSpec::monte_carlo(self.num_shuffles, seed),
        }
    }
}

#[derive(Args)]
struct TrainOpts {
    /// Optimizer steps.
    #[arg(long, default_value_t = 200)]
    steps: usize,

    /// Classifier learning rate (the attention branch runs slower by
    /// --attention-lr-scale).
    #[arg(long, default_value_t = 0.4)]
    lr: f64,

    /// Step-size multiplier for the attention branch.
    #[arg(long, default_value_t = 0.05)]
    attention_lr_scale: f64,

    /// Minibatch size.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,

    /// Where the attention module sits: early or late fusion.
    #[arg(long, default_value = "early")]
    fusion: String,

    /// Weight of the KL supervision term (supervised baseline).
    #[arg(long, default_value_t = 0.01)]
    supervision_weight: f64,
}

impl TrainOpts {
    fn config(&self, kind: AttentionKind, seed: u64) -> Result<TrainConfig, CoreError> {
        let mut cfg = TrainConfig::new(kind);
        cfg.steps = self.steps;
        cfg.learning_rate = self.lr;
        cfg.attention_lr_scale = self.attention_lr_scale;
        cfg.batch_size = self.batch_size;
        cfg.fusion = FusionStage::parse(&self.fusion)?;
        cfg.attention.supervision_weight = self.supervision_weight;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset (images, gaze, manifest).
    GenSynthetic {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 640)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        grid: usize,
        /// Fraction of samples marked as the training split.
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },

    /// F-measure (adaptive + sweep) and MAE over a manifest.
    EvalSaliency,

    /// Shuffled AUC and Information Gain of maps vs fixations.
    EvalGaze {
        #[command(flatten)]
        shuffle: ShuffleOpts,
    },

    /// Grouped correlation tables (top/bottom and positive/negative).
    CompareAttention {
        #[command(flatten)]
        shuffle: ShuffleOpts,
        #[arg(long, value_enum, default_value_t = GroupingArg::Both)]
        grouping: GroupingArg,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
        protocol: ProtocolArg,
        /// Group size for top/bottom grouping.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Pseudo-fixation fraction for the pairwise protocol.
        #[arg(long, default_value_t = 0.05)]
        top_fraction: f64,
    },

    /// Train one baseline on the manifest dataset.
    TrainToy {
        /// activation, softmax, sigmoid, supervised, or human.
        #[arg(long)]
        baseline: String,
        #[command(flatten)]
        train: TrainOpts,
        /// Run k-fold cross-validation over the whole dataset instead of the
        /// manifest's train/test split.
        #[arg(long)]
        kfold: Option<usize>,
    },

    /// Full benchmark: every baseline, all tables, optional FGSM robustness.
    Bench {
        #[command(flatten)]
        train: TrainOpts,
        #[command(flatten)]
        shuffle: ShuffleOpts,
        /// Comma-separated baseline list (default: all five).
        #[arg(long, value_delimiter = ',')]
        baselines: Vec<String>,
        /// FGSM budget; enables the fooling-rate table.
        #[arg(long)]
        fgsm_eps: Option<f64>,
        /// Directory with checkpoint-<baseline>.json files; matching
        /// baselines are loaded instead of trained.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        grouping_k: usize,
        #[arg(long, default_value_t = 0.05)]
        top_fraction: f64,
    },

    /// Finite-difference audit of the analytic gradients.
    Gradcheck {
        /// Seeded samples per baseline.
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// Exit 1 for input/validation problems, 2 for internal/environment failures.
fn exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Io { .. } | CoreError::Divergence { .. } => 2,
        _ => 1,
    }
}

fn require_manifest(cli: &Cli) -> Result<Manifest, CoreError> {
    let path = cli.manifest.as_ref().ok_or_else(|| {
        CoreError::InvalidConfig("this subcommand needs --manifest <path>".into())
    })?;
    Manifest::load(path)
}

fn formats(cli: &Cli) -> Vec<ReportFormat> {
    cli.format
        .iter()
        .map(|f| match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        })
        .collect()
}

fn print_table(table: &ReportTable) {
    println!("# {}", table.title);
    print!("{}", table.to_csv());
    println!();
}

fn finish(cli: &Cli, tables: &[ReportTable], warnings: &[String]) -> Result<(), CoreError> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let stamp = format!(
        "unix:{}",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    );
    let tables: Vec<ReportTable> = tables
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.metadata.entry("timestamp".into()).or_insert_with(|| stamp.clone());
            t
        })
        .collect();
    for table in &tables {
        print_table(table);
    }
    if let Some(dir) = &cli.out {
        let written = emit_report(&tables, dir, &formats(cli))?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn grouping_specs(
    grouping: GroupingArg,
    protocol: ProtocolArg,
    k: usize,
    top_fraction: f64,
) -> Vec<(String, GroupingSpec)> {
    let modes: Vec<GroupingMode> = match grouping {
        GroupingArg::TopBottom => vec![GroupingMode::TopBottomK(k)],
        GroupingArg::PosNeg => vec![GroupingMode::PositiveNegative],
        GroupingArg::Both => vec![GroupingMode::TopBottomK(k), GroupingMode::PositiveNegative],
    };
    let protocols: Vec<WithinGroupProtocol> = match protocol {
        ProtocolArg::VsHuman => vec![WithinGroupProtocol::VsHuman],
        ProtocolArg::Pairwise => vec![WithinGroupProtocol::PairwisePseudo { top_fraction }],
        ProtocolArg::Both => vec![
            WithinGroupProtocol::VsHuman,
            WithinGroupProtocol::PairwisePseudo { top_fraction },
        ],
    };
    let mut specs = Vec::new();
    for mode in &modes {
        for proto in &protocols {
            let mode_name = match mode {
                GroupingMode::TopBottomK(_) => "top-bottom",
                GroupingMode::PositiveNegative => "positive-negative",
            };
            let proto_name = match proto {
                WithinGroupProtocol::VsHuman => "vs-human",
                WithinGroupProtocol::PairwisePseudo { .. } => "pairwise-pseudo",
            };
            specs.push((
                format!("attention correlation {mode_name} {proto_name}"),
                GroupingSpec {
                    mode: *mode,
                    protocol: *proto,
                },
            ));
        }
    }
    specs
}

fn run(cli: Cli) -> Result<i32, CoreError> {
    match &cli.command {
        Command::GenSynthetic {
            classes,
            samples,
            grid,
            train_fraction,
        } => {
            let out = cli.out.clone().ok_or_else(|| {
                CoreError::InvalidConfig("gen-synthetic needs --out <dir>".into())
            })?;
            if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                return Err(CoreError::InvalidConfig("--train-fraction must lie in (0, 1)".into()));
            }
            let cfg = SyntheticTaskConfig::new(*classes, *grid, *samples, cli.seed);
            let dataset = generate_synthetic_task(&cfg)?;
            let train_count = ((*samples as f64) * train_fraction).round() as usize;
            let manifest_path = write_synthetic_dataset(&dataset, &out, train_count, cli.seed)?;
            println!(
                "wrote {} samples ({} train / {} test) under {}",
                samples,
                train_count,
                samples - train_count,
                out.display()
            );
            println!("manifest: {}", manifest_path.display());
            Ok(0)
        }

        Command::EvalSaliency => {
            let manifest = require_manifest(&cli)?;
            let (table, warnings) = pipelines::eval_saliency(&manifest)?;
            let table = table.with_metadata("seed", cli.seed);
            finish(&cli, &[table], &warnings)?;
            Ok(0)
        }

        Command::EvalGaze { shuffle } => {
            let manifest = require_manifest(&cli)?;
            let spec = shuffle.spec(cli.seed);
            let (table, warnings) = pipelines::eval_gaze(&manifest, &spec, 1e-9)?;
            let table = table.with_metadata("seed", cli.seed);
            finish(&cli, &[table], &warnings)?;
            Ok(0)
        }

        Command::CompareAttention {
            shuffle,
            grouping,
            protocol,
            k,
            top_fraction,
        } => {
            let manifest = require_manifest(&cli)?;
            let spec = shuffle.spec(cli.seed);
            let specs = grouping_specs(*grouping, *protocol, *k, *top_fraction);
            let (tables, warnings) =
                pipelines::compare_attention(&manifest, &specs, &spec, 1e-9)?;
            let tables: Vec<ReportTable> = tables
                .into_iter()
                .map(|t| t.with_metadata("seed", cli.seed))
                .collect();
            finish(&cli, &tables, &warnings)?;
            Ok(0)
        }

        Command::TrainToy {
            baseline,
            train: opts,
            kfold,
        } => {
            let manifest = require_manifest(&cli)?;
            let data = dataset_from_manifest(&manifest)?;
            let kind = AttentionKind::parse(baseline)?;
            let config = opts.config(kind, cli.seed)?;

            if let Some(k) = kfold {
                let all: Vec<_> = data.train.iter().chain(&data.test).cloned().collect();
                let folds = kfold_split(&all, *k, cli.seed)?;
                let mut table = ReportTable::new(
                    format!("cross validation {}", kind.name()),
                    (0..*k).map(|i| format!("fold{i}")).collect(),
                    vec!["val_accuracy".into(), "final_train_loss".into()],
                );
                for (i, (train_part, val_part)) in folds.iter().enumerate() {
                    let outcome = train(train_part, &config)?;
                    let mut correct = 0usize;
                    for sample in val_part {
                        if forward_sample(&outcome.params, sample, &config)?.predicted_label()
                            == sample.label
                        {
                            correct += 1;
                        }
                    }
                    table.set(i, 0, correct as f64 / val_part.len() as f64);
                    table.set(i, 1, outcome.final_loss);
                }
                let table = table.with_metadata("seed", cli.seed).with_metadata("folds", *k);
                finish(&cli, &[table], &[])?;
                return Ok(0);
            }

            let outcome = train(&data.train, &config)?;
            let mut correct = 0usize;
            for sample in &data.test {
                if forward_sample(&outcome.params, sample, &config)?.predicted_label() == sample.label {
                    correct += 1;
                }
            }
            let mut table = ReportTable::new(
                format!("training {}", kind.name()),
                vec![kind.name().to_string()],
                vec![
                    "test_accuracy".into(),
                    "initial_train_loss".into(),
                    "final_train_loss".into(),
                    "steps".into(),
                ],
            );
            table.set(0, 0, correct as f64 / data.test.len() as f64);
            table.set(0, 1, outcome.initial_loss);
            table.set(0, 2, outcome.final_loss);
            table.set(0, 3, outcome.params.steps_trained as f64);
            let table = table.with_metadata("seed", cli.seed);
            finish(&cli, &[table], &[])?;

            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| CoreError::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                let ckpt = dir.join(format!("checkpoint-{}.json", kind.name()));
                save_checkpoint(&outcome.params, &ckpt)?;
                let trace_path = dir.join(format!("loss-trace-{}.csv", kind.name()));
                std::fs::write(&trace_path, trace_to_csv(&outcome.trace)).map_err(|e| {
                    CoreError::Io {
                        path: trace_path.clone(),
                        source: e,
                    }
                })?;
                println!("wrote {}", ckpt.display());
                println!("wrote {}", trace_path.display());
            }
            Ok(0)
        }

        Command::Bench {
            train: opts,
            shuffle,
            baselines,
            fgsm_eps,
            checkpoints,
            grouping_k,
            top_fraction,
        } => {
            let manifest = require_manifest(&cli)?;
            let data = dataset_from_manifest(&manifest)?;
            let mut cfg = BenchConfig::new(cli.seed);
            cfg.train_template = opts.config(AttentionKind::Sigmoid, cli.seed)?;
            cfg.shuffle = shuffle.spec(cli.seed);
            cfg.fgsm_epsilon = *fgsm_eps;
            cfg.grouping_k = *grouping_k;
            cfg.top_fraction = *top_fraction;
            cfg.jobs = cli.jobs;
            if !baselines.is_empty() {
                cfg.baselines = baselines
                    .iter()
                    .map(|b| AttentionKind::parse(b))
                    .collect::<Result<_, _>>()?;
            }
            let mut pretrained = Vec::new();
            if let Some(dir) = checkpoints {
                for &kind in &cfg.baselines {
                    let path = dir.join(format!("checkpoint-{}.json", kind.name()));
                    if path.exists() {
                        pretrained.push((kind, load_checkpoint(&path)?));
                        eprintln!("loaded checkpoint for {kind}");
                    }
                }
            }
            let outcome = run_benchmark_with(&data, &cfg, &pretrained)?;
            finish(&cli, &outcome.tables, &outcome.warnings)?;
            Ok(0)
        }

        Command::Gradcheck { samples } => {
            if *samples == 0 {
                return Err(CoreError::InvalidConfig("--samples must be >= 1".into()));
            }
            let reports = gradcheck_audit(cli.seed, *samples)?;
            let mut max_err = 0.0f64;
            for report in &reports {
                for group in &report.groups {
                    println!(
                        "{:12} {:16} max rel error {:.3e}",
                        report.kind.name(),
                        group.group,
                        group.max_rel_error
                    );
                    max_err = max_err.max(group.max_rel_error);
                }
            }
            println!("max relative error {max_err:.3e} (tolerance {GRADCHECK_TOLERANCE:.0e})");
            if max_err < GRADCHECK_TOLERANCE {
                println!("gradcheck PASS");
                Ok(0)
            } else {
                println!("gradcheck FAIL");
                Ok(1)
            }
        }
    }
}

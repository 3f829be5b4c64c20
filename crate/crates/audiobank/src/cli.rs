//! Command-line surface: reproducible workflows over the pipeline.
//!
//! Every stochastic subcommand takes a mandatory `--seed`; identical
//! invocations produce byte-identical outputs. Configuration comes from an
//! optional JSON file of dotted keys (`--config`), overridden by repeated
//! `--set key=value` flags, overridden by dedicated flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use crate::audio_io::{default_corpus_specs, load_corpus, load_wav, save_corpus, synth_corpus};
use crate::bank::{build_bank, DetectorBank};
use crate::classify::{svm_train, LabeledSet, SvmConfig, SvmScheme};
use crate::config::{ClassifierKind, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{run_experiment, run_sweep, Corpus, ExperimentReport, SweepAxis};
use crate::featurize::{featurize_corpus, read_features_csv, write_features_csv};
use crate::nmf::{nmf_encode, nmf_fit, NmfConfig, NmfModel};
use crate::spectrogram::compute_spectrogram;

#[derive(Parser)]
#[command(
    name = "audiobank",
    version,
    about = "Detector-bank audio event recognition toolkit"
)]
struct Cli {
    /// JSON config file with flat dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set bank.nd=4 (repeatable).
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Worker thread cap for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic 12-class corpus (WAVs + manifest.json).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Clips per class.
        #[arg(long, default_value_t = 40)]
        per_class: usize,
    },
    /// Compute a spectrogram from a WAV file.
    Spectrogram {
        #[arg(long)]
        input: PathBuf,
        /// CSV output path (rows = frequency bins, columns = frames).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Binary dump output path.
        #[arg(long)]
        binary: Option<PathBuf>,
        /// Decimate before analysis (the pipeline default).
        #[arg(long, default_value_t = true)]
        decimate: bool,
    },
    /// Detector bank operations.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Featurize a corpus against a bank into a feature CSV.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Non-negative matrix factorization over a feature CSV.
    #[command(subcommand)]
    Nmf(NmfCommand),
    /// Train a classifier from a feature CSV and save the model.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        classifier: Option<String>,
    },
    /// Full experiment: repeated split/bank/featurize/train/test runs.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        classifier: Option<String>,
    },
    /// Sweep one axis (knn-k, train-fraction, bank-size) over values.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values, e.g. 1,11,21.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        classifier: Option<String>,
    },
    /// Render CSV tables from a saved experiment report JSON.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BankCommand {
    /// Build a bank from every clip in a corpus manifest.
    Build(BankBuildArgs),
    /// Print a bank summary.
    Inspect {
        #[arg(long)]
        bank: PathBuf,
    },
}

#[derive(Args)]
struct BankBuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Detectors per class (overrides bank.nd).
    #[arg(long)]
    nd: Option<usize>,
}

#[derive(Subcommand)]
enum NmfCommand {
    /// Fit a basis to a feature CSV; writes <out>.abnm and <out>.json.
    Fit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Encode a feature CSV against a fitted basis.
    Encode {
        #[arg(long)]
        features: PathBuf,
        /// Model path prefix as passed to `nmf fit --out`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print and exit 0; usage errors exit 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool may already exist (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("audiobank: {e}");
            e.exit_code()
        }
    }
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    for assignment in &cli.set {
        cfg.set_str(assignment)?;
    }
    Ok(cfg)
}

fn parse_classifier(cfg: &mut PipelineConfig, flag: &Option<String>) -> Result<()> {
    if let Some(s) = flag {
        cfg.classifier = ClassifierKind::parse(s)?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = effective_config(cli)?;
    cfg.validate()?;

    match &cli.command {
        Command::Synth {
            out,
            seed,
            per_class,
        } => {
            let specs = default_corpus_specs();
            let counts = vec![*per_class; specs.len()];
            let items = synth_corpus(&specs, &counts, *seed)?;
            save_corpus(&items, out)?;
            println!(
                "wrote {} clips across {} classes to {}",
                items.len(),
                specs.len(),
                out.display()
            );
            Ok(())
        }

        Command::Spectrogram {
            input,
            csv,
            binary,
            decimate,
        } => {
            let signal = load_wav(input)?;
            let signal = if *decimate {
                crate::audio_io::decimate(&signal, cfg.decimate_factor)?
            } else {
                signal
            };
            let spec = compute_spectrogram(&signal, &cfg.spectrogram_params()?)?;
            if csv.is_none() && binary.is_none() {
                return Err(Error::InvalidConfig(
                    "spectrogram needs --csv and/or --binary output paths".into(),
                ));
            }
            if let Some(path) = csv {
                let mut buf = Vec::new();
                spec.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
                std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
            }
            if let Some(path) = binary {
                let mut buf = Vec::new();
                spec.write_binary(&mut buf)
                    .map_err(|e| Error::io(path, e))?;
                std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
            }
            println!("{} bins x {} frames", spec.bins(), spec.frames());
            Ok(())
        }

        Command::Bank(BankCommand::Build(args)) => {
            if let Some(nd) = args.nd {
                cfg.detectors_per_class = nd;
                cfg.validate()?;
            }
            let items = load_corpus(&args.corpus)?;
            let clips: Vec<(usize, usize, &crate::audio_io::Signal)> = items
                .iter()
                .enumerate()
                .map(|(i, item)| (i, item.class_id, &item.signal))
                .collect();
            let bank = build_bank(&clips, &cfg, args.seed)?;
            bank.save(&args.out)?;
            println!(
                "bank of {} detectors ({} classes x {}) -> {}",
                bank.len(),
                bank.n_classes(),
                bank.per_class(),
                args.out.display()
            );
            Ok(())
        }

        Command::Bank(BankCommand::Inspect { bank }) => {
            let bank = DetectorBank::load(bank)?;
            println!(
                "detectors: {} ({} classes x {} per class)",
                bank.len(),
                bank.n_classes(),
                bank.per_class()
            );
            let (k, t) = bank.window();
            println!("window: {k} frequency bins x {t} frames");
            println!("fingerprint: {}", bank.fingerprint);
            println!("feature length: {}", bank.feature_len());
            for d in bank.detectors() {
                println!(
                    "  det {:3}  class {:2}  from clip {} at t+{}",
                    d.id, d.class_id, d.source_clip, d.time_offset
                );
            }
            Ok(())
        }

        Command::Featurize { corpus, bank, out } => {
            let items = load_corpus(corpus)?;
            let bank = DetectorBank::load(bank)?;
            let signals: Vec<&crate::audio_io::Signal> = items.iter().map(|i| &i.signal).collect();
            let features = featurize_corpus(&signals, &bank, &cfg)?;
            let rows: Vec<(usize, usize, &crate::featurize::FeatureVector)> = features
                .iter()
                .enumerate()
                .map(|(i, f)| (i, items[i].class_id, f))
                .collect();
            let mut buf = Vec::new();
            write_features_csv(&mut buf, &rows).map_err(|e| Error::io(out, e))?;
            std::fs::write(out, buf).map_err(|e| Error::io(out, e))?;
            println!(
                "featurized {} clips x {} values -> {}",
                features.len(),
                bank.feature_len(),
                out.display()
            );
            Ok(())
        }

        Command::Nmf(NmfCommand::Fit {
            features,
            out,
            seed,
            rank,
        }) => {
            let (_, _, matrix) = read_features_csv(features)?;
            let nmf_cfg = NmfConfig {
                rank: rank.unwrap_or(cfg.nmf_rank),
                max_iter: cfg.nmf_max_iter,
                rel_tol: cfg.nmf_rel_tol,
                seed: *seed,
                epsilon: 1e-12,
            };
            // Samples become columns.
            let x = matrix.t().to_owned();
            let (model, _) = nmf_fit(x.view(), &nmf_cfg)?;
            model.save(out)?;
            println!(
                "rank-{} basis over {} features, {} iterations, objective {:.6e} -> {}.abnm",
                model.rank(),
                model.feature_dim(),
                model.info.iterations,
                model.info.final_objective,
                out.display()
            );
            Ok(())
        }

        Command::Nmf(NmfCommand::Encode {
            features,
            model,
            out,
        }) => {
            let (clip_ids, labels, matrix) = read_features_csv(features)?;
            let model = NmfModel::load(model)?;
            let x = matrix.t().to_owned();
            let codes = nmf_encode(x.view(), &model, &model.config)?;
            let codes = codes.t().to_owned();
            write_codes_csv(out, &clip_ids, &labels, &codes)?;
            println!(
                "encoded {} clips to rank-{} codes -> {}",
                clip_ids.len(),
                model.rank(),
                out.display()
            );
            Ok(())
        }

        Command::Train {
            features,
            out,
            seed,
            classifier,
        } => {
            parse_classifier(&mut cfg, classifier)?;
            let (_, labels, matrix) = read_features_csv(features)?;
            let train = LabeledSet::new(matrix, labels)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            match cfg.classifier {
                ClassifierKind::Knn => {
                    // The knn "model" is the stored training set reference.
                    let info = serde_json::json!({
                        "classifier": "knn",
                        "k": cfg.knn_k,
                        "features": features.display().to_string(),
                        "n_train": train.len(),
                    });
                    let path = out.join("model.json");
                    std::fs::write(&path, serde_json::to_string_pretty(&info).unwrap())
                        .map_err(|e| Error::io(&path, e))?;
                }
                ClassifierKind::SvmA | ClassifierKind::SvmO => {
                    let (c, sigma, scheme) = if cfg.classifier == ClassifierKind::SvmA {
                        (cfg.svm_a_c, cfg.svm_a_sigma, SvmScheme::OneVsAll)
                    } else {
                        (cfg.svm_o_c, cfg.svm_o_sigma, SvmScheme::OneVsOne)
                    };
                    let mut svm_cfg = SvmConfig::new(c, sigma, scheme);
                    svm_cfg.tol = cfg.svm_tol;
                    svm_cfg.max_passes = cfg.svm_max_passes;
                    svm_cfg.form = cfg.svm_rbf_form;
                    let model = svm_train(&train, &svm_cfg, *seed)?;
                    model.save(out)?;
                }
            }
            println!(
                "trained {} on {} samples -> {}",
                cfg.classifier.as_str(),
                train.len(),
                out.display()
            );
            Ok(())
        }

        Command::Evaluate {
            corpus,
            out,
            seed,
            runs,
            classifier,
        } => {
            parse_classifier(&mut cfg, classifier)?;
            if let Some(r) = runs {
                cfg.runs = *r;
            }
            cfg.validate()?;
            let items = load_corpus(corpus)?;
            let corpus = Corpus::from_items(items)?;
            let report = run_experiment(&cfg, &corpus, *seed)?;
            write_report(out, &report)?;
            println!(
                "mean accuracy {:.4} +/- {:.4} over {} runs -> {}",
                report.mean_accuracy,
                report.std_accuracy,
                report.runs.len(),
                out.display()
            );
            Ok(())
        }

        Command::Sweep {
            corpus,
            axis,
            values,
            out,
            seed,
            runs,
            classifier,
        } => {
            parse_classifier(&mut cfg, classifier)?;
            if let Some(r) = runs {
                cfg.runs = *r;
            }
            cfg.validate()?;
            let axis = SweepAxis::parse(axis)?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad sweep value {v:?}")))
                })
                .collect::<Result<_>>()?;
            let items = load_corpus(corpus)?;
            let corpus = Corpus::from_items(items)?;
            let sweep = run_sweep(&cfg, &corpus, *seed, axis, &values)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let json_path = out.join("sweep.json");
            std::fs::write(&json_path, sweep.to_json()).map_err(|e| Error::io(&json_path, e))?;
            let csv_path = out.join("sweep.csv");
            let mut buf = Vec::new();
            sweep
                .write_csv(&mut buf)
                .map_err(|e| Error::io(&csv_path, e))?;
            std::fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
            println!("{} rows -> {}", sweep.rows.len(), out.display());
            Ok(())
        }

        Command::Report { input, out } => {
            let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
            let report = ExperimentReport::from_json(&text)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

            let runs_path = out.join("runs.csv");
            let mut buf = String::from("run,seed,accuracy,n_train,n_test\n");
            for r in &report.runs {
                buf.push_str(&format!(
                    "{},{},{:.4},{},{}\n",
                    r.run, r.seed, r.accuracy, r.n_train, r.n_test
                ));
            }
            buf.push_str(&format!(
                "mean,,{:.4},,\nstd,,{:.4},,\n",
                report.mean_accuracy, report.std_accuracy
            ));
            std::fs::write(&runs_path, buf).map_err(|e| Error::io(&runs_path, e))?;

            let confusion_path = out.join("confusion.csv");
            let mut cbuf = Vec::new();
            report
                .confusion
                .write_csv(&report.class_names, &mut cbuf)
                .map_err(|e| Error::io(&confusion_path, e))?;
            std::fs::write(&confusion_path, cbuf).map_err(|e| Error::io(&confusion_path, e))?;
            println!("wrote runs.csv and confusion.csv to {}", out.display());
            Ok(())
        }
    }
}

fn write_codes_csv(
    out: &Path,
    clip_ids: &[usize],
    labels: &[usize],
    codes: &Array2<f64>,
) -> Result<()> {
    let mut buf = String::from("clip_id,class_id");
    for i in 0..codes.ncols() {
        buf.push_str(&format!(",c{i:04}"));
    }
    buf.push('\n');
    for (row, (&clip, &label)) in clip_ids.iter().zip(labels).enumerate() {
        buf.push_str(&format!("{clip},{label}"));
        for v in codes.row(row) {
            buf.push_str(&format!(",{v:.8e}"));
        }
        buf.push('\n');
    }
    std::fs::write(out, buf).map_err(|e| Error::io(out, e))
}

/// Write report.json plus confusion.csv (the effective config is embedded
/// in the report for provenance).
fn write_report(out: &Path, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json_path = out.join("report.json");
    std::fs::write(&json_path, report.to_json()).map_err(|e| Error::io(&json_path, e))?;
    let confusion_path = out.join("confusion.csv");
    let mut buf = Vec::new();
    report
        .confusion
        .write_csv(&report.class_names, &mut buf)
        .map_err(|e| Error::io(&confusion_path, e))?;
    std::fs::write(&confusion_path, buf).map_err(|e| Error::io(&confusion_path, e))?;
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layoutjudge::dtree::TreeTarget;
use layoutjudge::harness::{self, DispatchMode, HarnessConfig, HarnessError};
use layoutjudge::Protocol;

#[derive(Parser)]
#[command(name = "layoutjudge", version, about = "Model vs human visual complexity evaluation")]
struct Cli {
    /// TOML or JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus root, overriding the config.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add the samples listed in a manifest.
    Ingest { manifest: PathBuf },
    /// Import annotations from a JSONL file.
    ImportAnnotations {
        path: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Run one protocol over every sample as a new run.
    Evaluate {
        #[arg(long)]
        protocol: Option<Protocol>,
        /// Dispatch live and append replies to this session.
        #[arg(long, conflicts_with = "replay")]
        record: Option<PathBuf>,
        /// Answer from this session without network access.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Confusion matrix and metrics per run; a comparison for two runs.
    Metrics {
        #[arg(required = true)]
        runs: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Metrics at each score threshold.
    Sweep { run: String },
    /// Train a decision tree on a diagnostic run.
    Tree {
        run: String,
        #[arg(long)]
        target: Option<TreeTarget>,
    },
    /// Write the comparison report for a run pair.
    Report { baseline: String, candidate: String },
    /// Serve the annotation and review API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        lan: bool,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<HarnessConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(root) = &cli.corpus {
        cfg.corpus_root = root.clone();
    }
    match &cli.command {
        Command::Evaluate { record: Some(p), .. } => {
            cfg.mode = DispatchMode::Record;
            cfg.session = Some(p.clone());
        }
        Command::Evaluate { replay: Some(p), .. } => {
            cfg.mode = DispatchMode::Replay;
            cfg.session = Some(p.clone());
        }
        Command::Serve { port, lan, ui_dir } => {
            if let Some(port) = port {
                cfg.serve.port = *port;
            }
            cfg.serve.lan |= *lan;
            if ui_dir.is_some() {
                cfg.serve.ui_dir = ui_dir.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Ingest { manifest } => {
            let s = harness::cmd_ingest(&cfg, &manifest)?;
            println!("{} samples in manifest: {} added, {} unchanged, {} in corpus", s.total, s.added, s.unchanged, s.corpus_total);
        }
        Command::ImportAnnotations { path, overwrite } => {
            let n = harness::cmd_import_annotations(&cfg, &path, overwrite)?;
            println!("{n} annotations imported");
        }
        Command::Evaluate { protocol, .. } => {
            let protocols = match protocol {
                Some(p) => vec![p],
                None => cfg.protocols.clone(),
            };
            for p in protocols {
                let run = harness::cmd_evaluate(&cfg, p)?;
                let failed = run.records.iter().filter(|r| r.predicted_label().is_none()).count();
                println!("{} {}: {} records, {} without a prediction", run.run_id, p, run.records.len(), failed);
            }
        }
        Command::Metrics { runs, json } => {
            let out = harness::cmd_metrics(&cfg, &runs)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
            } else {
                print!("{}", out.render_text());
            }
        }
        Command::Sweep { run } => {
            println!("threshold\tprecision\trecall\tf1\tcohen_kappa");
            for row in harness::cmd_sweep(&cfg, &run)? {
                let v = row.metrics.values();
                println!("{}\t{}\t{}\t{}\t{}", row.threshold, v[0], v[1], v[2], v[3]);
            }
        }
        Command::Tree { run, target } => {
            let out = harness::cmd_tree(&cfg, &run, target)?;
            print!("{}", out.section.rules_table);
            println!("written to {}", out.dir.display());
        }
        Command::Report { baseline, candidate } => {
            let (_, dir) = harness::cmd_report(&cfg, &baseline, &candidate)?;
            println!("written to {}", dir.display());
        }
        Command::Serve { .. } => harness::cmd_serve(&cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use densify::artifact::PipelineArtifact;
use densify::config::PipelineConfig;
use densify::corpus::write_csv;
use densify::eval::{render_improvements, render_table, Scenario};
use densify::models::{dump_hidden_activations, ModelKind};
use densify::pipeline::{self, FailureKind, PipelineError, ReportBundle, Stage};
use densify::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "densify", version, about = "Sparse text feature densification and RD-vs-FE evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and persist all outputs.
    Run(Common),
    /// Load, subsample and split the dataset (writes corpus.json).
    Ingest(Common),
    /// Fit the vocabulary on the training split (writes vocabulary.json).
    Vectorize(Common),
    /// Fit boosters and classifiers (writes model.densify).
    Train(Common),
    /// Score the trained classifiers on the test split (writes reports/).
    Evaluate(Common),
    /// Print the enhanced-minus-raw table from saved reports.
    Compare {
        #[arg(long, default_value = "densify-out")]
        output_dir: PathBuf,
    },
    /// Write hidden-layer activations of the trained mlp2 classifier.
    DumpActivations {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_scenario, default_value = "FE")]
        for_scenario: Scenario,
        /// Which split to push through the network.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score text lines from stdin with a saved artifact.
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, value_parser = parse_scenario, default_value = "FE")]
        for_scenario: Scenario,
        #[arg(long, default_value = "mlp2")]
        model: ModelKind,
    },
    /// Write the synthetic proxy corpus as CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long, default_value_t = 2022)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set tfidf.max_features=1000`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// rd, fe or both.
    #[arg(long)]
    scenario: Option<String>,
    /// Split seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    match s.to_ascii_uppercase().as_str() {
        "RD" => Ok(Scenario::Raw),
        "FE" => Ok(Scenario::Enhanced),
        _ => Err(format!("scenario must be RD or FE, got `{s}`")),
    }
}

impl Common {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = &self.scenario {
            overrides.push(format!("run.scenario=\"{}\"", s.to_ascii_lowercase()));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("split.seed={s}"));
        }
        let mut cfg = PipelineConfig::load(&self.config, &overrides)?;
        if let Some(p) = &self.dataset {
            cfg.dataset.path = p.clone();
        }
        if let Some(d) = &self.output_dir {
            cfg.run.output_dir = d.clone();
        }
        Ok(cfg)
    }
}

fn print_bundle(bundle: &ReportBundle) {
    print!("{}", render_table(&bundle.reports));
    if let Some(imp) = &bundle.improvements {
        println!();
        print!("{}", render_improvements(imp));
    }
}

fn print_sparsity(a: &PipelineArtifact) {
    let s = &a.metadata.sparsity;
    println!("sparsity raw train {:.4}, raw test {:.4}", s.raw_train, s.raw_test);
    if let (Some(tr), Some(te)) = (s.cascade_train, s.cascade_test) {
        println!("sparsity cascade train {tr:.4}, cascade test {te:.4}");
    }
}

fn resume(cfg: &PipelineConfig) -> Result<(pipeline::Ingested, pipeline::Vectorized), PipelineError> {
    let dir = &cfg.run.output_dir;
    let ing = pipeline::load_ingested(dir)?;
    let vocab = pipeline::load_vocabulary(dir)?;
    let vec = pipeline::vectorize(cfg, &ing, Some(vocab))?;
    Ok((ing, vec))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let out = pipeline::run_and_persist(&cfg)?;
            print_sparsity(&out.artifact);
            print_bundle(&out.bundle);
            println!("outputs in {}", cfg.run.output_dir.display());
        }
        Command::Ingest(c) => {
            let cfg = c.load()?;
            let ing = pipeline::ingest(&cfg)?;
            let path = pipeline::save_ingested(&cfg.run.output_dir, &ing)?;
            println!("{} train / {} test documents -> {}", ing.train.len(), ing.test.len(), path.display());
        }
        Command::Vectorize(c) => {
            let cfg = c.load()?;
            let ing = pipeline::load_ingested(&cfg.run.output_dir)?;
            let vec = pipeline::vectorize(&cfg, &ing, None)?;
            let path = pipeline::save_vocabulary(&cfg.run.output_dir, &vec.vocabulary)?;
            let s = vec.x_train.sparsity().unwrap_or(1.0);
            println!("{} terms, train sparsity {s:.4} -> {}", vec.vocabulary.len(), path.display());
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let (_, vec) = resume(&cfg)?;
            let artifact = pipeline::train(&cfg, &vec)?;
            let path = pipeline::save_trained(&cfg.run.output_dir, &artifact)?;
            print_sparsity(&artifact);
            println!("{} classifiers -> {}", artifact.classifiers.len(), path.display());
        }
        Command::Evaluate(c) => {
            let cfg = c.load()?;
            let dir = &cfg.run.output_dir;
            let artifact = pipeline::load_trained(dir)?;
            let ing = pipeline::load_ingested(dir)?;
            let vec = pipeline::vectorize(&cfg, &ing, Some(artifact.vocabulary.clone()))?;
            let reports = pipeline::evaluate(&artifact, &vec)?;
            let improvements = pipeline::compare(&reports)?;
            let bundle = ReportBundle { reports, improvements };
            pipeline::save_reports(dir, &bundle)?;
            print_bundle(&bundle);
        }
        Command::Compare { output_dir } => {
            let bundle = pipeline::load_reports(&output_dir)?;
            let imp = pipeline::compare(&bundle.reports)?.ok_or_else(|| {
                PipelineError::new(Stage::Eval, FailureKind::Data, "reports do not cover both scenarios")
            })?;
            pipeline::save_improvements(&output_dir, &imp)?;
            print!("{}", render_improvements(&imp));
        }
        Command::DumpActivations {
            common,
            for_scenario,
            split,
            out,
        } => {
            let cfg = common.load()?;
            let dir = &cfg.run.output_dir;
            let artifact = pipeline::load_trained(dir)?;
            let ing = pipeline::load_ingested(dir)?;
            let vec = pipeline::vectorize(&cfg, &ing, Some(artifact.vocabulary.clone()))?;
            let raw = match split.as_str() {
                "train" => &vec.x_train,
                "test" => &vec.x_test,
                other => {
                    return Err(PipelineError::new(
                        Stage::Config,
                        FailureKind::Config,
                        format!("--split must be train or test, got `{other}`"),
                    ))
                }
            };
            let clf = artifact
                .classifier(for_scenario, ModelKind::Mlp2)
                .map_err(|e| PipelineError::new(Stage::Models, FailureKind::Data, e))?;
            let x = artifact
                .features(for_scenario, raw)
                .map_err(|e| PipelineError::new(Stage::Enhance, FailureKind::Invariant, e))?;
            let dump = dump_hidden_activations(clf, &x, &out)
                .map_err(|e| PipelineError::new(Stage::Models, FailureKind::Data, e))?;
            println!(
                "{}\n{}\n{}",
                dump.activations.display(),
                dump.hidden_weights.display(),
                dump.output_weights.display()
            );
        }
        Command::Predict {
            artifact,
            for_scenario,
            model,
        } => {
            let a = densify::artifact::load_artifact(&artifact)
                .map_err(|e| PipelineError::new(Stage::Artifact, FailureKind::Data, e))?;
            let lines: Vec<String> = std::io::stdin()
                .lock()
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| PipelineError::new(Stage::Corpus, FailureKind::Data, e))?;
            let texts: Vec<&str> = lines.iter().map(String::as_str).collect();
            let p = a
                .predict_texts(&texts, for_scenario, model)
                .map_err(|e| PipelineError::new(Stage::Models, FailureKind::Invariant, e))?;
            println!("{}", a.taxonomy.names().join("\t"));
            for row in p.rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                println!("{}", cells.join("\t"));
            }
        }
        Command::Synth { out, rows, seed } => {
            let ds = generate(&SynthConfig {
                n_docs: rows,
                seed,
                ..Default::default()
            })
            .map_err(|e| PipelineError::new(Stage::Corpus, FailureKind::Config, e))?;
            write_synth(&ds, &out)?;
            println!("{} documents -> {}", ds.len(), out.display());
        }
    }
    Ok(())
}

fn write_synth(ds: &densify::corpus::DocumentSet, out: &Path) -> Result<(), PipelineError> {
    let file = std::fs::File::create(out)
        .map_err(|e| PipelineError::new(Stage::Corpus, FailureKind::Data, format!("{}: {e}", out.display())))?;
    write_csv(ds, std::io::BufWriter::new(file)).map_err(|e| PipelineError::new(Stage::Corpus, FailureKind::Data, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

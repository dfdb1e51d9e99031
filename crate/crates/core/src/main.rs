use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entalign::pipeline::{
    evaluate_reports, run_alignment, run_candidates, run_training, write_synthetic_dataset, Ablation,
    BackendKind, PipelineConfig, PipelineError, SynthSpec,
};
use entalign::similarity::Channel;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "entalign", version, about = "Knowledge-graph entity alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train structural embeddings.
    Train(RunArgs),
    /// Train (or reuse the cache) and write per-channel candidate files.
    Candidates(RunArgs),
    /// Run the full pipeline and write the report.
    Align(RunArgs),
    /// Average Hits@1 / Hits@10 over report files or run directories.
    Eval {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Write a synthetic isomorphic dataset with matching word vectors.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 10)]
        relations: usize,
        #[arg(long, default_value_t = 600)]
        triples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        vector_dim: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Candidates per channel.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = ["mock", "live"])]
    backend: Option<String>,
    /// structural, name, edit or llm; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<Ablation>,
    /// Sets the split, training and protocol seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(d) = &self.dataset_dir {
            cfg.dataset_dir = d.clone();
        }
        if let Some(w) = &self.word_vectors {
            cfg.word_vectors = Some(w.clone());
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(b) = &self.backend {
            cfg.backend.kind = if b == "live" { BackendKind::Live } else { BackendKind::Mock };
        }
        for &a in &self.ablate {
            cfg.ablate(a);
        }
        if let Some(s) = self.seed {
            cfg.split_seed = s;
            cfg.train.rng_seed = s;
            cfg.protocol_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a.config()?;
            let s = run_training(&cfg)?;
            say!(
                "trained on {} seeds ({} after augmentation); loss {:.4} -> {:.4}; wrote {}",
                s.train_seeds,
                s.seeds_after_augmentation,
                s.initial_loss,
                s.final_loss,
                cfg.output_dir.display()
            );
        }
        Command::Candidates(a) => {
            let cfg = a.config()?;
            let c = run_candidates(&cfg)?;
            for ch in Channel::ALL {
                if let (true, Some(sets)) = (cfg.channels.enabled(ch), c.channel(ch)) {
                    say!("{ch}: {} candidate sets", sets.len());
                }
            }
            say!("wrote {}", cfg.output_dir.join("candidates").display());
        }
        Command::Align(a) => {
            let cfg = a.config()?;
            let report = run_alignment(&cfg)?;
            say!("{}", report.summary_table().trim_end());
            say!("wrote {}", cfg.output_dir.join("report.json").display());
        }
        Command::Eval { reports } => {
            let s = evaluate_reports(&reports)?;
            for r in &s.runs {
                say!("{}  Hits@1 {:.4}  Hits@10 {:.4}", r.path.display(), r.hits_at_1, r.hits_at_10);
            }
            say!(
                "mean over {} runs: Hits@1 {:.4} ± {:.4}  Hits@10 {:.4} ± {:.4}",
                s.runs.len(),
                s.hits_at_1_mean,
                s.hits_at_1_std,
                s.hits_at_10_mean,
                s.hits_at_10_std
            );
        }
        Command::Synth {
            out,
            entities,
            relations,
            triples,
            seed,
            vector_dim,
        } => {
            let spec = SynthSpec {
                entities,
                relations,
                triples,
                seed,
                vector_dim,
                ..SynthSpec::default()
            };
            let cfg = write_synthetic_dataset(&out, &spec)?;
            say!("wrote dataset to {}; config at {}", out.display(), cfg.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

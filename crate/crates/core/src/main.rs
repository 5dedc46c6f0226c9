use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ttvseg::io;
use ttvseg::phantom;
use ttvseg::pipeline::{self, RunConfig, DEFAULT_NOISE_SEED};
use ttvseg::solver::{Regularizer, SolverConfig};

#[derive(Parser)]
#[command(name = "ttvseg", version, about = "Fuzzy multiphase segmentation with transformed total variation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one image and write memberships, labels and a JSON report.
    Run(RunArgs),
    /// Grid search over lam and a, keeping the run with the best mean DICE.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated lam values.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0025, 0.005, 0.01, 0.02, 0.05])]
        lam_grid: Vec<f64>,
        /// Comma-separated a values (ignored for TV).
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0, 100.0])]
        a_grid: Vec<f64>,
    },
    /// Write a synthetic test image and its ground truth as PGM.
    Phantom {
        #[arg(value_enum)]
        kind: PhantomKind,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    Vessel,
    Brain,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegArg {
    Ttv,
    Tv,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config with the same fields as a report's `config` block.
    /// Explicit flags override values from the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long, value_enum)]
    regularizer: Option<RegArg>,
    #[arg(long)]
    lam: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Average scores over all phases instead of foreground phases only.
    #[arg(long)]
    include_background: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => {
                let input = self.input.clone().ok_or("--input is required without --config")?;
                let out = self
                    .output_dir
                    .clone()
                    .ok_or("--output-dir is required without --config")?;
                RunConfig::new(input, out)
            }
        };
        if let Some(v) = self.input {
            cfg.input = v;
        }
        if let Some(v) = self.ground_truth {
            cfg.ground_truth = Some(v);
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.phases {
            cfg.phases = v;
        }
        if let Some(v) = self.regularizer {
            cfg.regularizer = match v {
                RegArg::Ttv => Regularizer::Ttv,
                RegArg::Tv => Regularizer::Tv,
            };
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        take!(lam, a, beta1, beta2, max_iter, tol, noise_variance, noise_seed);
        if self.include_background {
            cfg.include_background = true;
        }
        Ok(cfg)
    }
}

fn print_summary(report: &pipeline::SegmentationReport) {
    let c = &report.convergence;
    println!(
        "{} lam={} a={}: {} iterations, final change {:.3e}, {:.2}s",
        report.config.regularizer,
        report.config.lam,
        report.config.a,
        c.iterations,
        c.final_rel_change.unwrap_or(f64::NAN),
        report.timing.seconds
    );
    if let Some(s) = &report.scores {
        for r in &s.regions {
            println!("  phase {}: dice {:.4} jaccard {:.4}", r.phase, r.dice, r.jaccard);
        }
        println!("  mean: dice {:.4} jaccard {:.4}", s.mean_dice, s.mean_jaccard);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args
            .resolve()
            .and_then(|cfg| pipeline::run(&cfg).map_err(|e| e.to_string()))
            .map(|report| print_summary(&report)),
        Command::Sweep { run, lam_grid, a_grid } => run
            .resolve()
            .and_then(|cfg| pipeline::sweep(&cfg, &lam_grid, &a_grid).map_err(|e| e.to_string()))
            .map(|sweep| {
                for row in &sweep.grid {
                    println!(
                        "lam={:<8} a={:<6} dice={:.4} jaccard={:.4} iters={}",
                        row.lam, row.a, row.mean_dice, row.mean_jaccard, row.iterations
                    );
                }
                print!("best: ");
                print_summary(&sweep.best);
            }),
        Command::Phantom {
            kind,
            output_dir,
            height,
            width,
        } => write_phantom(kind, &output_dir, height, width).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn write_phantom(
    kind: PhantomKind,
    dir: &std::path::Path,
    height: Option<usize>,
    width: Option<usize>,
) -> ttvseg::Result<()> {
    let (image, truth, name) = match kind {
        PhantomKind::Vessel => {
            let (img, mask) = phantom::vessel_tree(height.unwrap_or(128), width.unwrap_or(128));
            (img, mask, "vessel")
        }
        PhantomKind::Brain => {
            let (img, mask) = phantom::brain_slice(height.unwrap_or(104), width.unwrap_or(87));
            (img, mask, "brain")
        }
    };
    std::fs::create_dir_all(dir)?;
    let bytes: Vec<u8> = image.as_slice().iter().map(|&v| v as u8).collect();
    io::write_pgm(&dir.join(format!("{name}.pgm")), image.width(), image.height(), &bytes)?;
    io::write_label_mask(&dir.join(format!("{name}_truth.pgm")), &truth)?;
    println!(
        "wrote {name}.pgm and {name}_truth.pgm ({} phases, noise seed default {DEFAULT_NOISE_SEED}, beta {})",
        truth.phases(),
        SolverConfig::DEFAULT_BETA
    );
    Ok(())
}

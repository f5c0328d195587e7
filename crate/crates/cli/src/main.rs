use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lung_core::analyzer::{analyze_batch, write_feature_csv, SeedStats};
use lung_core::dataset::{augment, synth_seeds, NoduleSet};
use lung_core::metrics::MetricsReport;
use lung_core::net::random_gradcheck;
use lung_core::pipeline::{
    bottleneck_configs, generate, interpolate, latent_scatter, run, sweep, TrainConfig,
    METRICS_FILE,
};
use lung_core::voxel::GrayImage;
use lung_core::{Network, VoxelGrid};

/// Synthetic lung nodule generation with a dense autoencoder.
#[derive(Parser, Debug)]
#[command(name = "lung", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (key = value lines). Defaults apply without it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configured one.
    #[arg(long)]
    seed: Option<u64>,
    /// Binarization threshold; overrides the configured one.
    #[arg(long)]
    threshold: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                TrainConfig::parse(&text)?
            }
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize seed nodules into a directory.
    Seeds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a seed directory into its 16x base set.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full run: train, generate, repair, analyze and score.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode random latent points from a trained network.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk the latent segment between two nodules.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long, default_value_t = 6)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance filter over a nodule directory.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Seed directory that defines the reference statistics.
        #[arg(long)]
        seeds: PathBuf,
        /// Feature CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metrics row of a finished run directory.
    Score {
        #[arg(long)]
        run: PathBuf,
    },
    /// Average repeated runs over bottleneck widths.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,8")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        repeats: usize,
        /// Sweep CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Write a PGM montage of the middle slices of a nodule directory.
    ExportMontage {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Middle z-slices per nodule.
        #[arg(long, default_value_t = 4)]
        slices: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_set(dir: &Path) -> Result<NoduleSet> {
    NoduleSet::load_dir(dir).with_context(|| format!("loading nodules from {}", dir.display()))
}

fn load_net(path: &Path) -> Result<Network> {
    Network::load(path).with_context(|| format!("loading network {}", path.display()))
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Seeds { common, count, out } => {
            let cfg = common.config()?;
            let seeds = synth_seeds(
                count.unwrap_or(cfg.seed_count),
                cfg.dims,
                cfg.spacing,
                cfg.rng_seed,
            )?;
            seeds.save_dir(&out)?;
            println!("wrote {} seeds to {}", seeds.len(), out.display());
        }
        Command::Augment { input, out } => {
            let base = augment(&load_set(&input)?)?;
            base.save_dir(&out)?;
            println!("wrote {} base nodules to {}", base.len(), out.display());
        }
        Command::Train { common, out } => {
            let cfg = common.config()?;
            let outcome = match run(&cfg, Some(&out)) {
                Ok(o) => o,
                Err(f) => bail!("{f}; partial report in {}", out.display()),
            };
            let scatter = latent_scatter(
                &outcome.network,
                &outcome.seeds,
                (0, 1.min(outcome.network.latent_dim() - 1)),
            )?;
            scatter.write_csv(fs::File::create(out.join("latent.csv"))?)?;
            println!("{}", MetricsReport::CSV_HEADER);
            println!("{}", outcome.metrics().to_csv_row());
            println!("{}", outcome.metrics());
        }
        Command::Generate {
            common,
            net,
            count,
            out,
        } => {
            let cfg = common.config()?;
            let net = load_net(&net)?;
            let batch = generate(
                &net,
                count,
                cfg.dims,
                cfg.spacing,
                cfg.rng_seed,
                cfg.threshold,
            )?;
            batch.set.save_dir(&out)?;
            let rows: Vec<VoxelGrid> = batch.set.grids().take(8).cloned().collect();
            GrayImage::montage(&rows, 4)?.save_pgm(out.join("samples.pgm"))?;
            let c = batch.counts();
            println!(
                "generated {} clean {} reconnected {} inverted {}",
                c.generated, c.clean, c.reconnected, c.inverted
            );
        }
        Command::Interpolate {
            common,
            net,
            from,
            to,
            steps,
            out,
        } => {
            let cfg = common.config()?;
            let net = load_net(&net)?;
            let a =
                VoxelGrid::load(&from).with_context(|| format!("loading {}", from.display()))?;
            let b = VoxelGrid::load(&to).with_context(|| format!("loading {}", to.display()))?;
            let walk = interpolate(&net, &a, &b, steps, cfg.threshold)?;
            walk.set.save_dir(&out)?;
            let slices = a.dims().nz.min(4);
            GrayImage::montage(&walk.raw, slices)?.save_pgm(out.join("raw.pgm"))?;
            let repaired: Vec<VoxelGrid> = walk.set.grids().cloned().collect();
            GrayImage::montage(&repaired, slices)?.save_pgm(out.join("interpolation.pgm"))?;
            println!("wrote {steps} steps to {}", out.display());
        }
        Command::Analyze {
            common,
            input,
            seeds,
            out,
        } => {
            let cfg = common.config()?;
            let set = load_set(&input)?;
            let (stats, _) = SeedStats::from_set(&load_set(&seeds)?, cfg.threshold)?;
            let analysis = analyze_batch(&set, &stats, cfg.rng_seed, cfg.threshold);
            write_feature_csv(fs::File::create(&out)?, &analysis.rows)?;
            println!(
                "accepted {}/{} ({:.4})",
                analysis.accepted.len(),
                set.len(),
                analysis.acceptance_fraction()
            );
        }
        Command::Score { run } => {
            let path = run.join(METRICS_FILE);
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report = MetricsReport::from_csv(&text)?;
            println!("{}", MetricsReport::CSV_HEADER);
            println!("{}", report.to_csv_row());
            println!("{report}");
        }
        Command::Sweep {
            common,
            widths,
            repeats,
            out,
        } => {
            let cfg = common.config()?;
            let report = sweep(&bottleneck_configs(&cfg, &widths), repeats)?;
            report.write_csv(fs::File::create(&out)?)?;
            report.write_csv(std::io::stdout().lock())?;
        }
        Command::Gradcheck { seed, count } => {
            let g = random_gradcheck(count, seed);
            println!(
                "max_rel_error {:e} max_abs_error {:e} entries {}",
                g.max_rel_error, g.max_abs_error, g.checked
            );
            if g.max_rel_error.is_nan() || g.max_rel_error >= GRADCHECK_TOLERANCE {
                eprintln!(
                    "gradient check failed: {:e} >= {GRADCHECK_TOLERANCE:e}",
                    g.max_rel_error
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::ExportMontage {
            input,
            count,
            slices,
            out,
        } => {
            let set = load_set(&input)?;
            let rows: Vec<VoxelGrid> = set.grids().take(count.max(1)).cloned().collect();
            GrayImage::montage(&rows, slices)?.save_pgm(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

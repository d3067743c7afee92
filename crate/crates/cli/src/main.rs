use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperop_cli::commands::{cmd_construct, cmd_evaluate, cmd_generate, cmd_report, cmd_spectrum, cmd_train};
use hyperop_cli::config::{Benchmark, BenchmarkConfig, Field, Split};
use hyperop_cli::{CliError, ExperimentConfig, Result};
use hyperop_constructions::Builder;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hyperop", version, about = "Operator-learning experiments: data, spectra, constructions, training, reports")]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct BenchArgs {
    /// Benchmarks to run (replaces the configured list).
    #[arg(long, value_delimiter = ',')]
    benchmark: Vec<Benchmark>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Model seeds (replaces `seeds`).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Restrict to these configured model names.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuilderName {
    AdvSdon,
    AdvFno,
    BurgSdon,
    BurgFno,
}

#[derive(Subcommand)]
enum Command {
    /// Write train/val/test datasets and print their checksums.
    Generate {
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_val: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Covariance eigenvalues, tail sums and the fitted tail exponent.
    Spectrum {
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        field: Option<Field>,
        #[arg(long)]
        p_max: Option<usize>,
        #[arg(long)]
        fit_min: Option<usize>,
        #[arg(long)]
        fit_max: Option<usize>,
    },
    /// Error and size along a budget ladder for one explicit construction.
    Construct {
        builder: Option<BuilderName>,
        /// Sensor counts (adv-sdon budgets).
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Grid sizes: adv-fno budgets, or the single grid of burg-fno.
        #[arg(long = "N", value_delimiter = ',')]
        n: Vec<usize>,
        /// Tolerances: Burgers budgets, or the single eps of adv-sdon.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Final time for the Burgers builders.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n_mc: Option<usize>,
        #[arg(long)]
        mc_seed: Option<u64>,
    },
    /// Train every configured model on every benchmark and seed.
    Train {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long)]
        epochs: Option<usize>,
        /// Print a progress line every this many epochs (0 = quiet).
        #[arg(long, default_value_t = 100)]
        progress: usize,
    },
    /// Relative L1 errors of trained models and the model × benchmark table.
    Evaluate {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Aggregate all artifacts in the output directory.
    Report,
}

fn apply_bench(cfg: &mut ExperimentConfig, b: &BenchArgs) {
    if !b.benchmark.is_empty() {
        cfg.benchmarks = b
            .benchmark
            .iter()
            .map(|&name| cfg.benchmarks.iter().find(|c| c.name == name).cloned().unwrap_or(BenchmarkConfig::preset(name)))
            .collect();
    }
}

fn apply_models(cfg: &mut ExperimentConfig, m: &ModelArgs) -> Result<()> {
    if !m.seeds.is_empty() {
        cfg.seeds = m.seeds.clone();
    }
    if !m.models.is_empty() {
        for name in &m.models {
            if !cfg.models.iter().any(|c| &c.name == name) {
                return Err(CliError::Config(format!("unknown model {name:?}")));
            }
        }
        cfg.models.retain(|c| m.models.contains(&c.name));
    }
    Ok(())
}

fn single<T: Copy>(v: &[T], flag: &str, builder: &str) -> Result<Option<T>> {
    match v {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => Err(CliError::Config(format!("{builder} takes a single --{flag}"))),
    }
}

fn resolve_builder(cfg: &mut ExperimentConfig, name: Option<BuilderName>, m: &[usize], n: &[usize], eps: &[f64], t: Option<f64>) -> Result<()> {
    let old = cfg.construct.builder;
    let Some(name) = name else {
        if old.is_none() {
            return Err(CliError::Config("construct needs a builder (adv-sdon, adv-fno, burg-sdon, burg-fno)".into()));
        }
        return Ok(());
    };
    let old_t = match old {
        Some(Builder::BurgSdon { t }) | Some(Builder::BurgFno { t, .. }) => Some(t),
        _ => None,
    };
    let t = t.or(old_t).unwrap_or(1.5);
    let (builder, budgets): (Builder, Vec<f64>) = match name {
        BuilderName::AdvSdon => {
            let old_eps = if let Some(Builder::AdvSdon { eps }) = old { Some(eps) } else { None };
            let eps = single(eps, "eps", "adv-sdon")?.or(old_eps).unwrap_or(1e-4);
            (Builder::AdvSdon { eps }, m.iter().map(|&x| x as f64).collect())
        }
        BuilderName::AdvFno => (Builder::AdvFno, n.iter().map(|&x| x as f64).collect()),
        BuilderName::BurgSdon => (Builder::BurgSdon { t }, eps.to_vec()),
        BuilderName::BurgFno => {
            let old_n = if let Some(Builder::BurgFno { n, .. }) = old { Some(n) } else { None };
            let n = single(n, "N", "burg-fno")?.or(old_n).unwrap_or(64);
            (Builder::BurgFno { t, n }, eps.to_vec())
        }
    };
    let same_kind = old.is_some_and(|o| o.name() == builder.name());
    if !budgets.is_empty() {
        cfg.construct.budgets = budgets;
    } else if !same_kind {
        cfg.construct.budgets.clear();
    }
    cfg.construct.builder = Some(builder);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    match cli.command {
        Command::Generate { bench, n_train, n_val, n_test, grid, seed } => {
            apply_bench(&mut cfg, &bench);
            let d = &mut cfg.data;
            d.n_train = n_train.unwrap_or(d.n_train);
            d.n_val = n_val.unwrap_or(d.n_val);
            d.n_test = n_test.unwrap_or(d.n_test);
            d.grid = grid.unwrap_or(d.grid);
            d.seed = seed.unwrap_or(d.seed);
            cfg.validate()?;
            let sums = cmd_generate(&cfg, threads)?;
            println!("config_hash {}", sums.config_hash);
            for f in &sums.files {
                println!("{} {} samples sha256:{}", f.path.display(), f.n_samples, f.sha256);
            }
        }
        Command::Spectrum { bench, split, field, p_max, fit_min, fit_max } => {
            apply_bench(&mut cfg, &bench);
            let s = &mut cfg.spectrum;
            s.split = split.unwrap_or(s.split);
            s.field = field.unwrap_or(s.field);
            s.p_max = p_max.unwrap_or(s.p_max);
            s.fit_min = fit_min.unwrap_or(s.fit_min);
            s.fit_max = fit_max.unwrap_or(s.fit_max);
            cfg.validate()?;
            for o in cmd_spectrum(&cfg)? {
                let exp = o.report.tail_fit.map_or("none".to_string(), |f| format!("{:.4}", f.exponent));
                println!("{}: {} eigenvalues, tail exponent {exp}", o.benchmark.name(), o.report.eigenvalues.len());
                if let Some(worst) = o.fourier.iter().map(|c| c.rel_diff).reduce(f64::max) {
                    println!("{}: largest relative gap to Fourier eigenvalues {worst:.4}", o.benchmark.name());
                }
            }
        }
        Command::Construct { builder, m, n, eps, t, n_mc, mc_seed } => {
            resolve_builder(&mut cfg, builder, &m, &n, &eps, t)?;
            cfg.construct.n_mc = n_mc.unwrap_or(cfg.construct.n_mc);
            cfg.construct.seed = mc_seed.unwrap_or(cfg.construct.seed);
            cfg.validate()?;
            let r = cmd_construct(&cfg, threads)?;
            println!("{} ({} draws)", r.builder.name(), r.n_mc);
            println!("{:>10} {:>12} {:>6} {:>6} {:>12} {:>12}", r.budget_kind, "size", "depth", "width", "mean_err", "median_err");
            for row in &r.rows {
                println!(
                    "{:>10} {:>12} {:>6} {:>6} {:>12.4e} {:>12.4e}",
                    row.budget, row.size, row.depth, row.width, row.mean_err, row.median_err
                );
            }
            if let Some(f) = &r.error_fit {
                println!("error slope {:.4}", f.slope);
            }
            if let Some(f) = &r.size_fit {
                println!("size slope vs log log(1/eps) {:.4}", f.slope);
            }
            for note in &r.notes {
                eprintln!("note: {note}");
            }
        }
        Command::Train { bench, models, epochs, progress } => {
            apply_bench(&mut cfg, &bench);
            apply_models(&mut cfg, &models)?;
            cfg.train.epochs = epochs.unwrap_or(cfg.train.epochs);
            cfg.validate()?;
            for r in cmd_train(&cfg, threads, progress, &|line| eprintln!("{line}"))? {
                println!(
                    "{}/{} s{}: best epoch {}, val rel L1 {:.4e}",
                    r.benchmark.name(),
                    r.model,
                    r.seed,
                    r.best_epoch,
                    r.best_val_rel_l1
                );
            }
        }
        Command::Evaluate { bench, models, split } => {
            apply_bench(&mut cfg, &bench);
            apply_models(&mut cfg, &models)?;
            cfg.validate()?;
            let (records, table) = cmd_evaluate(&cfg, split, threads)?;
            for r in records.iter().filter(|r| r.checkpoint_hash.as_deref() != Some(r.config_hash.as_str())) {
                eprintln!("warning: {}/{} s{} was trained under a different config", r.benchmark.name(), r.model, r.seed);
            }
            println!("model,benchmark,median,q25,q75");
            for r in &table {
                println!("{},{},{:.4e},{:.4e},{:.4e}", r.model, r.benchmark.name(), r.median, r.q25, r.q75);
            }
        }
        Command::Report => {
            let r = cmd_report(&cfg.output_dir)?;
            println!("config_hash {}", r.config_hash);
            for o in &r.ordering {
                let ratios: Vec<String> = o.ratios.iter().map(|x| format!("{x:.2}")).collect();
                println!("{}: {} (ratios {})", o.benchmark.name(), o.models.join(" < "), ratios.join(", "));
            }
            for c in &r.constructions {
                println!("{}: error slope {:?}, size slope {:?}", c.builder, c.error_slope, c.size_slope);
            }
            for s in &r.spectra {
                println!("{}: tail exponent {:?}", s.benchmark.name(), s.tail_exponent);
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

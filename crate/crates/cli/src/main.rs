use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use newsflow_cli::analyze::{self, attention_stage, tail_stage, write_attention, write_tails};
use newsflow_cli::output::OutputSet;
use newsflow_cli::prepare::{cmd_ingest, load_cache};
use newsflow_cli::validate::{cmd_validate, PowerThresholds};
use newsflow_cli::{worker_pool, RunConfig};
use newsflow_core::calendar::TimeScale;
use newsflow_core::stats::Significance;
use newsflow_core::synth::{generate, tune_causal_strength, SynthConfig};
use newsflow_core::tails::{fit_tail, TailOptions, TAIL_TABLE_HEADER};

#[derive(Parser)]
#[command(name = "newsflow", version, about = "News attention, sentiment and intraday market analytics")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "NEWSFLOW_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted structure.
    Synth(SynthArgs),
    /// Parse and normalize the inputs into `<out>/cache`.
    Ingest(RunArgs),
    /// Run the full analysis on the cache and write reports.
    Analyze(RunArgs),
    /// Check an analysis of synthetic data against its ground truth.
    Validate(ValidateArgs),
    /// Fit power-law tails to clicks per news.
    Tails(TailsArgs),
    /// Fit attention time scales per decile of click totals.
    Attention(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding inputs under the standard names, as written by `synth`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Time scales to analyze: 1, 10, 30, 65, 130, daily (comma separated).
    #[arg(long, value_delimiter = ',')]
    scale: Vec<TimeScale>,
    /// Test level before correction.
    #[arg(long)]
    level: Option<f64>,
    /// Permutations per correlation test.
    #[arg(long)]
    perms: Option<usize>,
    /// Largest lag considered by BIC selection.
    #[arg(long)]
    max_lag: Option<usize>,
    /// Use this lag for every Granger test instead of BIC selection.
    #[arg(long)]
    fixed_lag: Option<usize>,
    /// `permutation` or `asymptotic` p-values for correlations.
    #[arg(long)]
    significance: Option<String>,
    /// Seed for permutations and bootstraps.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write every company's binned series.
    #[arg(long)]
    panels: bool,
    /// Output directory; the cache lives in `<out>/cache`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            cfg = cfg.with_data_dir(d);
        }
        if !self.scale.is_empty() {
            cfg.scales = self.scale.clone();
        }
        if let Some(v) = self.level {
            cfg.level = v;
        }
        if let Some(v) = self.perms {
            cfg.perms = v;
        }
        if let Some(v) = self.max_lag {
            cfg.max_lag = v;
        }
        if self.fixed_lag.is_some() {
            cfg.fixed_lag = self.fixed_lag;
        }
        if let Some(s) = &self.significance {
            cfg.significance = match s.as_str() {
                "permutation" => Significance::Permutation,
                "asymptotic" => Significance::Asymptotic,
                other => bail!("unknown significance {other:?}"),
            };
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.panels {
            cfg.write_panels = true;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    companies: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    causal_fraction: Option<f64>,
    #[arg(long)]
    causal_strength: Option<f64>,
    /// Lag of the planted coupling, in 65-minute bins.
    #[arg(long)]
    causal_lag: Option<usize>,
    /// Pick the smallest strength whose predicted per-company power reaches
    /// this at the Bonferroni level `level / companies`.
    #[arg(long)]
    tune_power: Option<f64>,
    /// Test level used when tuning.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Ground truth file (defaults to the configured one).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Minimum WS->R detection rate among planted companies.
    #[arg(long, default_value_t = 0.8)]
    min_power: f64,
}

#[derive(Args)]
struct TailsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Fit one sample instead: a file with one positive integer per line.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.companies {
        cfg.n_companies = v;
    }
    if let Some(v) = a.days {
        cfg.n_days = v;
    }
    if let Some(v) = a.causal_fraction {
        cfg.causal_fraction = v;
    }
    if let Some(v) = a.causal_strength {
        cfg.causal_strength = v;
    }
    if let Some(v) = a.causal_lag {
        cfg.causal_lag = v;
    }
    if let Some(target) = a.tune_power {
        cfg.causal_strength = tune_causal_strength(&cfg, target, a.level / cfg.n_companies as f64)?;
        println!("tuned causal_strength {:.4} for predicted power {target}", cfg.causal_strength);
    }
    let data = generate(&cfg)?;
    let truth = data.write(&a.out)?;
    println!(
        "{} companies ({} causal), {} days, {} articles, {} click rows -> {}",
        cfg.n_companies,
        truth.causal_tickers().len(),
        cfg.n_days,
        data.articles.len(),
        data.clicks.events.len(),
        a.out.display()
    );
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<u64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {} // header
            Err(_) => bail!("{}:{}: not a non-negative integer: {line:?}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn tails(a: &TailsArgs) -> Result<()> {
    if let Some(path) = &a.samples {
        let samples = read_samples(path)?;
        let fit = fit_tail(
            &samples,
            &TailOptions {
                bootstrap: a.bootstrap,
                seed: a.run.seed.unwrap_or(0),
                ..Default::default()
            },
        )?;
        println!("{TAIL_TABLE_HEADER}");
        println!("{}", fit.table_row("sample"));
        return Ok(());
    }
    let mut cfg = a.run.resolve()?;
    cfg.tail_bootstrap = a.bootstrap;
    let p = load_cache(&cfg.cache_dir())?;
    let t = tail_stage(&p, &cfg);
    write_tails(&mut OutputSet::new(&cfg.out)?, &t)?;
    println!("{TAIL_TABLE_HEADER}");
    for c in &t.companies {
        match &c.fit {
            Ok(fit) => println!("{}", fit.table_row(&c.company)),
            Err(e) => eprintln!("{}: {e}", c.company),
        }
    }
    if let Ok(fit) = &t.pooled {
        println!("{}", fit.table_row("ALL"));
    }
    Ok(())
}

fn attention(a: &RunArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let p = load_cache(&cfg.cache_dir())?;
    let s = attention_stage(&p, &cfg);
    write_attention(&mut OutputSet::new(&cfg.out)?, &s)?;
    println!("decile,n_articles,tau,se_tau");
    for (c, f) in s.curves.iter().zip(&s.fits) {
        println!("{},{},{:.3},{:.3}", f.decile, c.n_articles, f.tau, f.se_tau);
    }
    for f in &s.failures {
        eprintln!("{}: {}", f.stage, f.message);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Synth(a) => synth(a)?,
        Command::Ingest(a) => {
            let cfg = a.resolve()?;
            let s = cmd_ingest(&cfg)?;
            println!(
                "{} companies, {} bars ({} out of session), {} of {} articles kept ({} too many tags, {} no mention), {} click rows kept -> {}",
                s.companies,
                s.bars,
                s.bars_out_of_session,
                s.articles_kept,
                s.articles,
                s.rejected_too_many_tags,
                s.rejected_no_mention,
                s.click_rows - s.click_rows_unknown_article - s.click_rows_rejected_article,
                cfg.cache_dir().display()
            );
        }
        Command::Analyze(a) => {
            let cfg = a.resolve()?;
            let res = analyze::cmd_analyze(&cfg)?;
            print!("{}", analyze::correlation_table(&res.reports, false));
            print!("{}", analyze::granger_table(&res.reports, false));
            if !res.failures.is_empty() {
                eprintln!("{} failures recorded in failures.csv", res.failures.len());
            }
            println!("reports written to {}", cfg.out.display());
        }
        Command::Validate(a) => {
            let mut cfg = a.run.resolve()?;
            if let Some(t) = &a.truth {
                cfg.ground_truth = Some(t.clone());
            }
            let thresholds = PowerThresholds {
                power: a.min_power,
                ..Default::default()
            };
            let v = cmd_validate(&cfg, &thresholds)?;
            println!("{v}");
            if !v.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Tails(a) => tails(a)?,
        Command::Attention(a) => attention(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match worker_pool(cli.workers) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

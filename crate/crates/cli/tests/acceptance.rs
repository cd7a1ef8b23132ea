//! End-to-end acceptance checks on synthetic data. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use newsflow_cli::analyze::cmd_analyze;
use newsflow_cli::prepare::cmd_ingest;
use newsflow_cli::validate::{cmd_validate, PowerThresholds, Validation};
use newsflow_cli::{worker_pool, RunConfig};
use newsflow_core::attention::{article_curves, decile_curves, fit_tau, AttentionCurve, DEFAULT_HORIZON};
use newsflow_core::calendar::{TimeScale, SESSION_MINUTES};
use newsflow_core::rng::substream;
use newsflow_core::series::{
    deseasonalize, seasonal_profile_clicks, seasonal_profile_returns, seasonal_profile_volume, SeasonalProfile,
};
use newsflow_core::stats::special::f_sf;
use newsflow_core::stats::{granger, ols, spearman, Design};
use newsflow_core::synth::{attention_cohort, generate, oracle_power, tune_causal_strength, SynthConfig};
use newsflow_core::tails::{fit_tail, DiscretePowerLaw, TailOptions};
use rand::Rng;
use rand_distr::{Normal, StandardNormal};

const LEVEL: f64 = 0.05;

type Check = fn(&Path) -> Result<Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn run_pipeline(data: &Path, out: &Path, scales: &[TimeScale], workers: usize) -> Result<RunConfig> {
    let mut cfg = RunConfig::default().with_data_dir(data);
    cfg.out = out.to_path_buf();
    cfg.scales = scales.to_vec();
    worker_pool(Some(workers))?.install(|| -> Result<()> {
        cmd_ingest(&cfg)?;
        cmd_analyze(&cfg)?;
        Ok(())
    })?;
    Ok(cfg)
}

fn describe(v: &Validation, names: &[&str]) -> (bool, String) {
    let picked: Vec<_> = v.checks.iter().filter(|c| names.is_empty() || names.contains(&c.name.as_str())).collect();
    let pass = !picked.is_empty() && picked.iter().all(|c| c.pass);
    let text = picked
        .iter()
        .map(|c| format!("{} {:.3}{}", c.name, c.value, if c.pass { "" } else { " (out of bounds)" }))
        .collect::<Vec<_>>()
        .join("; ");
    (pass, text)
}

fn null_calibration(dir: &Path) -> Result<Verdict> {
    let start = Instant::now();
    let data = dir.join("null_data");
    generate(&SynthConfig::default())?.write(&data)?;
    let cfg = run_pipeline(&data, &dir.join("null_a"), &TimeScale::ALL, 4)?;
    let v = cmd_validate(&cfg, &PowerThresholds::default())?;
    let elapsed = start.elapsed();
    let (ok, text) = describe(&v, &[]);
    let failing: Vec<String> = v
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} {:.3} outside {}", c.name, c.value, c.bound))
        .collect();
    let detail = if failing.is_empty() {
        format!("11 of 11 rejection rates in band, {:.0} s; {text}", elapsed.as_secs_f64())
    } else {
        format!("{}; {:.0} s", failing.join("; "), elapsed.as_secs_f64())
    };
    Ok(verdict(ok && elapsed < Duration::from_secs(300), detail))
}

struct Planted {
    validation: Validation,
    strength: f64,
    predicted: f64,
}

fn planted_run(dir: &Path) -> Result<Planted> {
    let mut cfg = SynthConfig {
        causal_fraction: 0.5,
        causal_lag: 1,
        ..SynthConfig::default()
    };
    let level = LEVEL / cfg.n_companies as f64;
    cfg.causal_strength = tune_causal_strength(&cfg, 0.9, level)?;
    let predicted = oracle_power(&cfg, cfg.causal_strength, level)?;
    let data = dir.join("planted_data");
    generate(&cfg)?.write(&data)?;
    let run = run_pipeline(&data, &dir.join("planted_out"), &[cfg.coupling_scale], 4)?;
    Ok(Planted {
        validation: cmd_validate(&run, &PowerThresholds::default())?,
        strength: cfg.causal_strength,
        predicted,
    })
}

fn planted_power(p: &Planted) -> Verdict {
    let (ok, text) = describe(
        &p.validation,
        &["power WS->R (planted)", "false positives WS->R", "reverse R->WS (all)"],
    );
    verdict(
        ok && p.predicted >= 0.9,
        format!("strength {:.3}, oracle power {:.2}; {text}", p.strength, p.predicted),
    )
}

fn bonferroni_shape(p: &Planted) -> Verdict {
    let (ok, text) = describe(
        &p.validation,
        &["corrected not subset of raw", "power WS->R corrected (planted)", "S->R after correction"],
    );
    verdict(ok, text)
}

fn power_law(_: &Path) -> Result<Verdict> {
    let start = Instant::now();
    let mut rng = substream(4, "acceptance/tail");
    let law = DiscretePowerLaw::new(1.0, 100)?;
    let samples = law.sample_n(&mut rng, 50_000);
    let fit = fit_tail(&samples, &TailOptions::default())?;
    let alpha_ok = (fit.alpha - 1.0).abs() <= 3.0 * fit.se_alpha;
    let xmin_ok = fit.x_min_ci[0] <= 100 && 100 <= fit.x_min_ci[1];

    let spread = Normal::new(1.15, 0.30)?;
    let mut fitted = Vec::new();
    let mut planted = Vec::new();
    for i in 0..100 {
        let mut rng = substream(4, &format!("acceptance/cohort/{i}"));
        let alpha = loop {
            let a: f64 = rng.sample(spread);
            if a > 0.3 {
                break a;
            }
        };
        let samples = DiscretePowerLaw::new(alpha, 10)?.sample_n(&mut rng, 1000);
        let f = fit_tail(
            &samples,
            &TailOptions {
                bootstrap: 0,
                ..TailOptions::default()
            },
        )?;
        planted.push(alpha);
        fitted.push(f.alpha);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cohort_ok = (mean(&fitted) - 1.15).abs() < 0.1;
    let elapsed = start.elapsed();
    Ok(verdict(
        alpha_ok && xmin_ok && cohort_ok && elapsed < Duration::from_secs(120),
        format!(
            "alpha {:.4} ± {:.4}, x_min {} in [{}, {}]; cohort mean {:.3} (drawn {:.3}); {:.0} s",
            fit.alpha,
            fit.se_alpha,
            fit.x_min,
            fit.x_min_ci[0],
            fit.x_min_ci[1],
            mean(&fitted),
            mean(&planted),
            elapsed.as_secs_f64()
        ),
    ))
}

// Largest relative spread of a within-day-constant series.
fn within_day_spread(values: &[f64]) -> f64 {
    values
        .chunks_exact(SESSION_MINUTES)
        .map(|day| {
            let (lo, hi) = day.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            (hi - lo) / hi.abs()
        })
        .fold(0.0, f64::max)
}

fn deseasonalization(_: &Path) -> Result<Verdict> {
    let mut rng = substream(5, "acceptance/profiles");
    let days = 60;
    let a: Vec<f64> = (0..days).map(|_| rng.random_range(0.2..5.0)).collect();
    let b: Vec<f64> = (0..SESSION_MINUTES).map(|_| rng.random_range(0.1..3.0)).collect();
    let raw: Vec<f64> = (0..days * SESSION_MINUTES).map(|i| a[i / SESSION_MINUTES] * b[i % SESSION_MINUTES]).collect();
    let signs: Vec<f64> = raw.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let returns: Vec<f64> = raw.iter().zip(&signs).map(|(x, s)| 1e-3 * x * s).collect();

    let spread = |raw: &[f64], profile: SeasonalProfile, abs: bool| -> Result<f64> {
        let out = deseasonalize(raw, &profile)?;
        let out: Vec<f64> = if abs { out.iter().map(|v| v.abs()).collect() } else { out };
        Ok(within_day_spread(&out))
    };
    let volume = spread(&raw, seasonal_profile_volume(&raw)?, false)?;
    let clicks = spread(&raw, seasonal_profile_clicks(&raw)?, false)?;
    let ret = spread(&returns, seasonal_profile_returns(&returns)?, true)?;
    let worst = volume.max(clicks).max(ret);
    Ok(verdict(
        worst <= 1e-9,
        format!("max within-day relative spread: volume {volume:.1e}, returns {ret:.1e}, clicks {clicks:.1e}"),
    ))
}

fn brute_force_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

// Normal equations solved by Gaussian elimination with partial pivoting.
fn normal_equations_rss(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    let p = rows[0].len();
    let mut m = vec![vec![0.0; p + 1]; p];
    for (r, t) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += r[i] * r[j];
            }
            m[i][p] += r[i] * t;
        }
    }
    for c in 0..p {
        let pivot = (c..p).max_by(|a, b| m[*a][c].abs().total_cmp(&m[*b][c].abs())).unwrap();
        m.swap(c, pivot);
        for r in c + 1..p {
            let f = m[r][c] / m[c][c];
            for k in c..=p {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| m[i][j] * beta[j]).sum();
        beta[i] = (m[i][p] - s) / m[i][i];
    }
    rows.iter()
        .zip(y)
        .map(|(r, t)| (t - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum()
}

fn granger_oracle(x: &[f64], y: &[f64], lag: usize) -> f64 {
    let (mut restricted, mut unrestricted) = (Vec::new(), Vec::new());
    for t in lag..y.len() {
        let mut row = vec![1.0];
        row.extend((1..=lag).map(|k| y[t - k]));
        restricted.push(row.clone());
        row.extend((1..=lag).map(|k| x[t - k]));
        unrestricted.push(row);
    }
    let target = &y[lag..];
    let (r, u) = (normal_equations_rss(&restricted, target), normal_equations_rss(&unrestricted, target));
    let df2 = (target.len() - 2 * lag - 1) as f64;
    ((r - u) / lag as f64) / (u / df2)
}

// (d1, d2, upper-tail probability, quantile) from a reference implementation.
const F_QUANTILES: [(f64, f64, f64, f64); 12] = [
    (1.0, 120.0, 0.05, 3.9201244089699054),
    (1.0, 120.0, 0.01, 6.850893450852537),
    (2.0, 60.0, 0.05, 3.1504113105827303),
    (2.0, 60.0, 0.01, 4.977432035394953),
    (3.0, 200.0, 0.05, 2.6497516433979524),
    (3.0, 200.0, 0.01, 3.88102177262219),
    (5.0, 100.0, 0.05, 2.305318241675225),
    (5.0, 100.0, 0.01, 3.2058717714230007),
    (1.0, 30.0, 0.05, 4.170876785766691),
    (1.0, 30.0, 0.01, 7.5624760946386385),
    (4.0, 40.0, 0.05, 2.605974949123867),
    (4.0, 40.0, 0.01, 3.8282935494048713),
];

fn small_case(rng: &mut impl Rng, n: usize, ties: bool) -> Vec<f64> {
    if ties {
        (0..n).map(|_| rng.random_range(0..5) as f64).collect()
    } else {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }
}

fn kernels(_: &Path) -> Result<Verdict> {
    let mut rng = substream(6, "acceptance/kernels");
    let mut rho_err: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(3..30);
        let ties = case % 3 == 0;
        let x = small_case(&mut rng, n, ties);
        let y = small_case(&mut rng, n, ties);
        match spearman(&x, &y) {
            Ok(rho) => rho_err = rho_err.max((rho - brute_force_spearman(&x, &y)).abs()),
            // constant input: the oracle is undefined too
            Err(_) => ensure!(brute_force_spearman(&x, &y).is_nan(), "spearman rejected case {case}"),
        }
    }

    let mut ols_err: f64 = 0.0;
    let mut f_err: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(40..300);
        let lag = rng.random_range(1..5);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let coupling = if case % 2 == 0 { 0.0 } else { 0.3 };
        let y: Vec<f64> = (0..n).map(|t| e[t] + if t > 0 { coupling * x[t - 1] } else { 0.0 }).collect();

        let mut design = Design::new(n);
        design.push_column(std::iter::repeat_n(1.0, n));
        design.push_column(x.iter().copied());
        design.push_column(e.iter().map(|v| v * v));
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, x[i], e[i] * e[i]]).collect();
        let want = normal_equations_rss(&rows, &y);
        ols_err = ols_err.max((ols(&design, &y)?.rss - want).abs() / want);

        let got = granger(&x, &y, lag)?.f_stat;
        let want = granger_oracle(&x, &y, lag);
        f_err = f_err.max((got - want).abs() / want.max(1e-3));
    }

    let tail_err = F_QUANTILES
        .iter()
        .map(|(d1, d2, p, q)| (f_sf(*q, *d1, *d2) - p).abs())
        .fold(0.0, f64::max);
    Ok(verdict(
        rho_err <= 1e-12 && ols_err <= 1e-8 && f_err <= 1e-8 && tail_err <= 1e-6,
        format!("spearman {rho_err:.1e}, OLS rss {ols_err:.1e}, F statistic {f_err:.1e}, F tail {tail_err:.1e}"),
    ))
}

fn attention(_: &Path) -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for tau in [30.0, 60.0, 90.0, 120.0] {
        for amplitude in [1.0, 0.8] {
            let minutes: Vec<usize> = (0..=DEFAULT_HORIZON).collect();
            let curve = AttentionCurve {
                decile: 1,
                mean_cum_fraction: minutes.iter().map(|m| amplitude * (1.0 - (-(*m as f64) / tau).exp())).collect(),
                minutes,
                n_articles: 1,
            };
            worst = worst.max((fit_tau(&curve)?.tau / tau - 1.0).abs());
        }
    }

    let cohort = attention_cohort(5000, (60.0, 120.0), DiscretePowerLaw::new(1.15, 10)?, 7);
    let (articles, _) = article_curves(&cohort.articles, &cohort.clicks, DEFAULT_HORIZON);
    let taus = decile_curves(&articles)?
        .iter()
        .map(|c| fit_tau(c).map(|f| f.tau))
        .collect::<newsflow_core::Result<Vec<f64>>>()?;
    let increasing = taus.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = taus.iter().map(|t| format!("{t:.0}")).collect();
    Ok(verdict(
        worst < 0.01 && increasing,
        format!("noiseless worst relative error {worst:.1e}; decile taus {}", shown.join(" ")),
    ))
}

fn tree_bytes(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).with_context(|| dir.display().to_string())? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path)?;
                files.insert(path.strip_prefix(root)?.to_path_buf(), bytes);
            }
        }
    }
    Ok(files)
}

fn determinism(dir: &Path) -> Result<Verdict> {
    let data = dir.join("null_data");
    let first = dir.join("null_a");
    ensure!(first.join("manifest.json").exists(), "null run missing");
    run_pipeline(&data, &dir.join("null_b"), &TimeScale::ALL, 1)?;
    let a = tree_bytes(&first)?;
    let b = tree_bytes(&dir.join("null_b"))?;
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Ok(verdict(
        differing.is_empty() && !a.is_empty(),
        if differing.is_empty() {
            format!("{} files identical with 4 and 1 workers", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

fn report(id: usize, name: &str, outcome: std::thread::Result<Result<Verdict>>, elapsed: Duration) -> bool {
    let v = match outcome {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => verdict(false, format!("error: {e:#}")),
        Err(_) => verdict(false, "panicked"),
    };
    println!(
        "criterion {id} {} {name} ({:.1} s): {}",
        if v.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        v.detail
    );
    v.pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (std::thread::Result<T>, Duration) {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f));
    (out, start.elapsed())
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let mut all = true;

    let (out, t) = timed(|| null_calibration(dir));
    all &= report(1, "null calibration", out, t);

    let (planted, t) = timed(|| planted_run(dir));
    let (out2, out3) = match planted {
        Ok(Ok(p)) => (Ok(Ok(planted_power(&p))), Ok(Ok(bonferroni_shape(&p)))),
        Ok(Err(e)) => {
            let msg = format!("{e:#}");
            (Ok(Err(anyhow::anyhow!(msg.clone()))), Ok(Err(anyhow::anyhow!(msg))))
        }
        Err(_) => (Ok(Ok(verdict(false, "panicked"))), Ok(Ok(verdict(false, "panicked")))),
    };
    all &= report(2, "planted causality power", out2, t);
    all &= report(3, "Bonferroni shape", out3, t);

    let checks: [(usize, &str, Check); 5] = [
        (4, "power-law recovery", power_law),
        (5, "de-seasonalization exactness", deseasonalization),
        (6, "statistical kernel oracles", kernels),
        (7, "attention round trip", attention),
        (8, "determinism across worker counts", determinism),
    ];
    for (id, name, f) in checks {
        let (out, t) = timed(|| f(dir));
        all &= report(id, name, out, t);
    }

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use newsflow_core::attention::{
    article_curves, decile_curves, fit_tau, write_curves_csv, write_fits_csv, AttentionCurve, AttentionFit,
};
use newsflow_core::calendar::TimeScale;
use newsflow_core::ingest::{attribute_clicks, NewsArticle};
use newsflow_core::rng::derive_seed;
use newsflow_core::series::{build_panel, ArticleSign, CompanyPanel, MinuteSeries, Profiles};
use newsflow_core::stats::{run_test_battery, Pair, TestReport, GRANGER_DIRECTIONS};
use newsflow_core::series::SeriesKind;
use newsflow_core::tails::{ccdf_points, fit_tail, TailFit, TailOptions, TAIL_TABLE_HEADER};
use newsflow_core::Result;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::OutputSet;
use crate::prepare::{load_cache, CachedArticle, Prepared, SUMMARY_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Column order of the correlation tables.
pub const TABLE_PAIRS: [Pair; 3] = [
    Pair(SeriesKind::WS, SeriesKind::R),
    Pair(SeriesKind::C, SeriesKind::Sigma),
    Pair(SeriesKind::C, SeriesKind::V),
];

/// CCDF curves are rescaled so the largest click count maps here.
const CCDF_MAX: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub company: String,
    pub stage: String,
    pub message: String,
}

pub struct CompanyTail {
    pub company: String,
    pub samples: Vec<u64>,
    pub fit: Result<TailFit>,
}

pub struct Analysis {
    /// Companies with usable series, by ascending news count then ticker.
    pub companies: Vec<String>,
    pub news_counts: BTreeMap<String, usize>,
    pub profiles: Vec<(String, Profiles)>,
    pub panels: Vec<Vec<CompanyPanel>>,
    pub reports: Vec<TestReport>,
    pub tails: TailStage,
    pub attention: AttentionStage,
    pub failures: Vec<Failure>,
}

fn failure(company: &str, stage: &str, message: impl ToString) -> Failure {
    Failure {
        company: company.to_string(),
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

/// Runs every analysis stage on prepared data. Deterministic for a given
/// config regardless of the size of the rayon pool it runs in.
pub fn analyze(p: &Prepared, cfg: &RunConfig) -> Analysis {
    let mut failures = Vec::new();
    let index = p.clicks.by_article();
    let all = p.market.companies();

    let built: Vec<(String, Result<MinuteSeries>)> = all
        .par_iter()
        .map(|company| {
            let arts = p.company_articles(company);
            let signs: Vec<ArticleSign> = arts
                .iter()
                .map(|a| ArticleSign {
                    article_id: a.article_id.clone(),
                    sign: a.sign,
                    published: p.calendar.minute_index(&a.published),
                })
                .collect();
            let ids: Vec<&str> = arts.iter().map(|a| a.article_id.as_str()).collect();
            let clicks = attribute_clicks(company, &ids, &index, &p.calendar);
            let series = MinuteSeries::build(company, p.calendar.n_days(), p.market.company_bars(company), &clicks, &signs);
            (company.clone(), series)
        })
        .collect();

    let news_counts: BTreeMap<String, usize> =
        all.iter().map(|c| (c.clone(), p.company_articles(c).len())).collect();
    let mut series = Vec::new();
    for (company, s) in built {
        match s {
            Ok(s) => series.push(s),
            Err(e) => failures.push(failure(&company, "series", e)),
        }
    }
    series.sort_by(|a, b| (news_counts[&a.company], &a.company).cmp(&(news_counts[&b.company], &b.company)));
    let companies: Vec<String> = series.iter().map(|s| s.company.clone()).collect();

    let panels: Vec<Vec<CompanyPanel>> = cfg
        .scales
        .iter()
        .map(|&scale| series.par_iter().map(|s| build_panel(s, scale)).collect())
        .collect();
    let profiles = series.into_iter().map(|s| (s.company, s.profiles)).collect();

    let battery = cfg.battery();
    let reports: Vec<TestReport> = cfg
        .scales
        .iter()
        .zip(&panels)
        .map(|(&scale, ps)| run_test_battery(ps, scale, &battery))
        .collect();
    for r in &reports {
        for c in &r.companies {
            for (test, err) in c
                .correlations
                .iter()
                .map(|e| (&e.test, &e.error))
                .chain(c.granger.iter().map(|e| (&e.test, &e.error)))
            {
                if let Some(err) = err {
                    failures.push(failure(&c.company, &format!("{}/{test}", r.scale), err));
                }
            }
        }
    }

    let tails = tail_stage(p, cfg);
    failures.extend(tails.failures.iter().cloned());
    let attention = attention_stage(p, cfg);
    failures.extend(attention.failures.iter().cloned());

    Analysis {
        companies,
        news_counts,
        profiles,
        panels,
        reports,
        tails,
        attention,
        failures,
    }
}

pub struct TailStage {
    pub companies: Vec<CompanyTail>,
    pub pooled_samples: Vec<u64>,
    pub pooled: Result<TailFit>,
    pub failures: Vec<Failure>,
}

/// Clicks-per-news tail fits, per company and pooled over distinct articles.
pub fn tail_stage(p: &Prepared, cfg: &RunConfig) -> TailStage {
    let index = p.clicks.by_article();
    let mut failures = Vec::new();
    // totals over the whole log, not just session minutes
    let totals: HashMap<&str, u64> = index
        .iter()
        .map(|(id, rows)| (*id, rows.iter().map(|e| e.clicks).sum()))
        .collect();
    let companies: Vec<CompanyTail> = p
        .market
        .companies()
        .par_iter()
        .map(|company| {
            let samples: Vec<u64> = p
                .company_articles(company)
                .iter()
                .filter_map(|a| totals.get(a.article_id.as_str()).copied())
                .collect();
            let opts = TailOptions {
                n_tail_min: cfg.tail_min,
                bootstrap: cfg.tail_bootstrap,
                seed: derive_seed(cfg.seed, &format!("tails/{company}")),
            };
            let fit = fit_tail(&samples, &opts);
            CompanyTail {
                company: company.clone(),
                samples,
                fit,
            }
        })
        .collect();
    for t in &companies {
        if let Err(e) = &t.fit {
            failures.push(failure(&t.company, "tails", e));
        }
    }
    let pooled_samples: Vec<u64> = distinct_articles(p)
        .iter()
        .filter_map(|a| totals.get(a.article_id.as_str()).copied())
        .collect();
    let pooled = fit_tail(
        &pooled_samples,
        &TailOptions {
            n_tail_min: cfg.tail_min,
            bootstrap: cfg.tail_bootstrap,
            seed: derive_seed(cfg.seed, "tails/pooled"),
        },
    );
    if let Err(e) = &pooled {
        failures.push(failure("*", "tails", e));
    }
    TailStage {
        companies,
        pooled_samples,
        pooled,
        failures,
    }
}

/// Kept articles once each, in id order.
fn distinct_articles(p: &Prepared) -> Vec<&CachedArticle> {
    let mut unique: BTreeMap<&str, &CachedArticle> = BTreeMap::new();
    for a in &p.articles {
        unique.entry(a.article_id.as_str()).or_insert(a);
    }
    unique.into_values().collect()
}

pub struct AttentionStage {
    pub curves: Vec<AttentionCurve>,
    pub fits: Vec<AttentionFit>,
    pub excluded: usize,
    pub failures: Vec<Failure>,
}

/// Decile curves of post-publication attention and their time scales.
pub fn attention_stage(p: &Prepared, cfg: &RunConfig) -> AttentionStage {
    let mut failures = Vec::new();
    let news: Vec<NewsArticle> = distinct_articles(p)
        .into_iter()
        .map(|a| NewsArticle {
            article_id: a.article_id.clone(),
            published: a.published,
            title: String::new(),
            first_paragraph: None,
            tickers: Default::default(),
        })
        .collect();
    let (curves, excluded) = article_curves(&news, &p.clicks, cfg.attention_horizon);
    let (curves, fits) = match decile_curves(&curves) {
        Ok(dc) => {
            let mut fits = Vec::new();
            for c in &dc {
                match fit_tau(c) {
                    Ok(f) => fits.push(f),
                    Err(e) => failures.push(failure("*", &format!("attention/decile{}", c.decile), e)),
                }
            }
            (dc, fits)
        }
        Err(e) => {
            failures.push(failure("*", "attention", e));
            (Vec::new(), Vec::new())
        }
    };
    AttentionStage {
        curves,
        fits,
        excluded,
        failures,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Table 1 layout: one row per time interval, one column per pair.
pub fn correlation_table(reports: &[TestReport], bonferroni: bool) -> String {
    let mut out = String::from("interval");
    for pair in TABLE_PAIRS {
        write!(out, ",{pair}").expect("string write");
    }
    out.push('\n');
    for r in reports {
        out.push_str(&r.scale.label());
        for pair in TABLE_PAIRS {
            let row = r.summary_row(&pair.to_string()).expect("summary row");
            let pct = if bonferroni { row.bonferroni_percent } else { row.raw_percent };
            write!(out, ",{pct:.1}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// One row per causality direction, one column per time interval.
pub fn granger_table(reports: &[TestReport], bonferroni: bool) -> String {
    let mut out = String::from("direction");
    for r in reports {
        write!(out, ",{}", r.scale.label()).expect("string write");
    }
    out.push('\n');
    for d in GRANGER_DIRECTIONS {
        out.push_str(&d.to_string());
        for r in reports {
            let row = r.summary_row(&d.to_string()).expect("summary row");
            let pct = if bonferroni { row.bonferroni_percent } else { row.raw_percent };
            write!(out, ",{pct:.1}").expect("string write");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: RunConfig,
    cache_summary: String,
    companies: &'a [String],
    news_counts: &'a BTreeMap<String, usize>,
    attention_excluded: usize,
    failures: &'a [Failure],
    files: BTreeMap<String, String>,
}

fn bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("in-memory write");
    buf
}

/// Writes every report file and `manifest.json` under `cfg.out`.
pub fn write_outputs(a: &Analysis, p: &Prepared, cfg: &RunConfig, cache_digest: String) -> Result<BTreeMap<String, String>> {
    let mut out = OutputSet::new(&cfg.out)?;

    out.write("correlation_table.csv", correlation_table(&a.reports, false).as_bytes())?;
    out.write("correlation_table_bonferroni.csv", correlation_table(&a.reports, true).as_bytes())?;
    out.write("granger_table.csv", granger_table(&a.reports, false).as_bytes())?;
    out.write("granger_table_bonferroni.csv", granger_table(&a.reports, true).as_bytes())?;

    for r in &a.reports {
        let dir = format!("scale_{}", r.scale.label());
        out.write(&format!("{dir}/report.json"), (serde_json::to_string_pretty(r)? + "\n").as_bytes())?;
        out.write(&format!("{dir}/rho.csv"), &bytes(|w| r.write_rho_matrix(w)))?;
        out.write(&format!("{dir}/granger.csv"), &bytes(|w| r.write_granger_matrix(w, false)))?;
        out.write(&format!("{dir}/granger_bonferroni.csv"), &bytes(|w| r.write_granger_matrix(w, true)))?;
        out.write(&format!("{dir}/summary.csv"), &bytes(|w| r.write_summary(w, false)))?;
        out.write(&format!("{dir}/summary_bonferroni.csv"), &bytes(|w| r.write_summary(w, true)))?;
    }

    if cfg.write_panels {
        for (scale, ps) in cfg.scales.iter().zip(&a.panels) {
            for panel in ps {
                let rel = format!("panels/{}/{}.csv", scale.label(), panel.company);
                out.write(&rel, &bytes(|w| panel.write_csv(&p.calendar, w)))?;
            }
        }
    }

    let mut text = String::from("company,kind,minute,zeta\n");
    for (company, pr) in &a.profiles {
        for (kind, prof) in [("volume", &pr.volume), ("returns", &pr.returns), ("clicks", &pr.clicks)] {
            for (t, z) in prof.zeta.iter().enumerate() {
                writeln!(text, "{company},{kind},{t},{z}").expect("string write");
            }
        }
    }
    out.write("profiles.csv", text.as_bytes())?;

    write_tails(&mut out, &a.tails)?;
    write_attention(&mut out, &a.attention)?;

    let mut text = String::from("company,stage,message\n");
    for f in &a.failures {
        writeln!(text, "{},{},{}", f.company, f.stage, csv_field(&f.message)).expect("string write");
    }
    out.write("failures.csv", text.as_bytes())?;

    let files = out.digests().clone();
    let manifest = Manifest {
        // the output location is not part of the result
        config: RunConfig {
            out: Default::default(),
            ..cfg.clone()
        },
        cache_summary: cache_digest,
        companies: &a.companies,
        news_counts: &a.news_counts,
        attention_excluded: a.attention.excluded,
        failures: &a.failures,
        files: files.clone(),
    };
    out.write(MANIFEST_FILE, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(files)
}

pub fn write_tails(out: &mut OutputSet, t: &TailStage) -> Result<()> {
    let mut text = format!("{TAIL_TABLE_HEADER}\n");
    for c in &t.companies {
        if let Ok(fit) = &c.fit {
            writeln!(text, "{}", fit.table_row(&c.company)).expect("string write");
        }
    }
    if let Ok(fit) = &t.pooled {
        writeln!(text, "{}", fit.table_row("ALL")).expect("string write");
    }
    out.write("tails.csv", text.as_bytes())?;

    let mut text = String::from("series,x,ccdf\n");
    for (name, samples) in t
        .companies
        .iter()
        .map(|c| (c.company.as_str(), &c.samples))
        .chain(std::iter::once(("ALL", &t.pooled_samples)))
    {
        for (x, y) in ccdf_points(samples, Some(CCDF_MAX)) {
            writeln!(text, "{name},{x},{y}").expect("string write");
        }
    }
    out.write("ccdf.csv", text.as_bytes())
}

pub fn write_attention(out: &mut OutputSet, a: &AttentionStage) -> Result<()> {
    out.write("attention_curves.csv", &bytes(|w| write_curves_csv(&a.curves, w)))?;
    out.write("attention_fits.csv", &bytes(|w| write_fits_csv(&a.fits, w)))
}

/// Loads the cache under `<out>/cache`, analyzes it and writes the reports.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Analysis> {
    cfg.validate()?;
    let cache = cfg.cache_dir();
    let p = load_cache(&cache)?;
    let digest = crate::output::sha256_file(&cache.join(SUMMARY_FILE))?;
    let a = analyze(&p, cfg);
    write_outputs(&a, &p, cfg, digest)?;
    Ok(a)
}

/// Percent of companies rejecting `test` at `scale`.
pub fn rejection_percent(reports: &[TestReport], scale: TimeScale, test: &str, bonferroni: bool) -> Option<f64> {
    let r = reports.iter().find(|r| r.scale == scale)?.summary_row(test)?;
    Some(if bonferroni { r.bonferroni_percent } else { r.raw_percent })
}

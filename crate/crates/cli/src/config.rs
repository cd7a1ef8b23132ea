use std::path::{Path, PathBuf};

use newsflow_core::calendar::TimeScale;
use newsflow_core::stats::{BatteryConfig, Significance};
use newsflow_core::synth;
use newsflow_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Loaded from a TOML file; command-line flags
/// override individual keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub market: PathBuf,
    pub clicks: PathBuf,
    pub news: PathBuf,
    pub calendar: PathBuf,
    pub aliases: Option<PathBuf>,
    /// One lexicon, or a general and a financial one to merge (financial wins).
    /// Empty means the built-in financial word list.
    pub lexicons: Vec<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub scales: Vec<TimeScale>,
    pub level: f64,
    pub perms: usize,
    pub max_lag: usize,
    pub fixed_lag: Option<usize>,
    pub significance: Significance,
    pub seed: u64,
    pub max_tags: usize,
    pub attention_horizon: usize,
    pub tail_bootstrap: usize,
    pub tail_min: usize,
    /// Write every company's binned series under `panels/`.
    pub write_panels: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            market: synth::MARKET_FILE.into(),
            clicks: synth::CLICKS_FILE.into(),
            news: synth::NEWS_FILE.into(),
            calendar: synth::CALENDAR_FILE.into(),
            aliases: None,
            lexicons: Vec::new(),
            ground_truth: None,
            scales: TimeScale::ALL.to_vec(),
            level: 0.05,
            perms: 1000,
            max_lag: 5,
            fixed_lag: None,
            significance: Significance::Permutation,
            seed: 0,
            max_tags: newsflow_core::ingest::DEFAULT_MAX_TAGS,
            attention_horizon: newsflow_core::attention::DEFAULT_HORIZON,
            tail_bootstrap: 200,
            tail_min: newsflow_core::tails::N_TAIL_MIN,
            write_panels: false,
            out: "out".into(),
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.market, &mut self.clicks, &mut self.news, &mut self.calendar, &mut self.out] {
            fix(p);
        }
        for p in self.aliases.iter_mut().chain(self.ground_truth.iter_mut()).chain(self.lexicons.iter_mut()) {
            fix(p);
        }
    }

    /// Points every input at the file names `synth` writes into `dir`,
    /// including aliases, lexicon and ground truth.
    pub fn with_data_dir(mut self, dir: &Path) -> Self {
        self.market = dir.join(synth::MARKET_FILE);
        self.clicks = dir.join(synth::CLICKS_FILE);
        self.news = dir.join(synth::NEWS_FILE);
        self.calendar = dir.join(synth::CALENDAR_FILE);
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        self.aliases = opt(synth::ALIASES_FILE);
        self.ground_truth = opt(synth::TRUTH_FILE);
        self.lexicons = opt(synth::LEXICON_FILE).into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if self.scales.is_empty() {
            return bad("no scales selected".into());
        }
        if self.significance == Significance::Permutation && self.perms == 0 {
            return bad("perms must be positive for permutation tests".into());
        }
        if self.max_lag == 0 || self.fixed_lag == Some(0) {
            return bad("lags must be positive".into());
        }
        if self.lexicons.len() > 2 {
            return bad(format!("at most two lexicons, got {}", self.lexicons.len()));
        }
        if self.max_tags == 0 || self.attention_horizon == 0 {
            return bad("max_tags and attention_horizon must be positive".into());
        }
        Ok(())
    }

    pub fn battery(&self) -> BatteryConfig {
        BatteryConfig {
            level: self.level,
            n_perm: self.perms,
            max_lag: self.max_lag,
            fixed_lag: self.fixed_lag,
            seed: self.seed,
            significance: self.significance,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.out.join("cache")
    }
}

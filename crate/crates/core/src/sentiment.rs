//! Lexicon-based headline scoring.
//!
//! A headline gets sign `+1`, `-1` or `0` depending on whether it contains
//! more positive or more negative lexicon words. There is no negation
//! handling, stemming or intensity weighting: only the sign of the hit
//! difference leaves this module.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEMO_FINANCIAL: &str = include_str!("../data/financial_lexicon.csv");
const DEMO_GENERAL: &str = include_str!("../data/general_lexicon.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    General,
    Financial,
    Merged,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::General => "general",
            Provenance::Financial => "financial",
            Provenance::Merged => "merged",
        })
    }
}

/// Token to valence map. Valences are never zero and tokens are single
/// lowercase words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, i32>,
    provenance: Provenance,
}

impl Lexicon {
    pub fn new(entries: BTreeMap<String, i32>, provenance: Provenance) -> Result<Self> {
        for (token, &valence) in &entries {
            check_entry(token, valence).map_err(Error::InvalidArgument)?;
        }
        Ok(Self { entries, provenance })
    }

    /// Parses `token,valence` CSV. A `token,valence` header line and `#`
    /// comment lines are allowed. Later duplicates overwrite earlier ones.
    pub fn parse(text: &str, origin: &Path, provenance: Provenance) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, valence) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(origin, line_no, "expected `token,valence`"))?;
            let (token, valence) = (token.trim(), valence.trim());
            if entries.is_empty() && token == "token" && valence == "valence" {
                continue;
            }
            let valence: i32 = valence
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("bad valence {valence:?}")))?;
            check_entry(token, valence).map_err(|m| Error::parse(origin, line_no, m))?;
            entries.insert(token.to_string(), valence);
        }
        Ok(Self { entries, provenance })
    }

    pub fn from_file(path: impl AsRef<Path>, provenance: Provenance) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, provenance)
    }

    /// Bundled stand-in for a finance-specific word list.
    pub fn demo_financial() -> Self {
        Self::parse(DEMO_FINANCIAL, Path::new("<demo financial>"), Provenance::Financial)
            .expect("bundled lexicon is valid")
    }

    /// Bundled stand-in for a general-purpose sentiment dictionary.
    pub fn demo_general() -> Self {
        Self::parse(DEMO_GENERAL, Path::new("<demo general>"), Provenance::General)
            .expect("bundled lexicon is valid")
    }

    pub fn valence(&self, token: &str) -> Option<i32> {
        self.entries.get(token).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, i32> {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same tokens with every valence negated.
    pub fn negated(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            provenance: self.provenance,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("token,valence\n");
        for (token, valence) in &self.entries {
            out.push_str(&format!("{token},{valence}\n"));
        }
        out
    }
}

fn check_entry(token: &str, valence: i32) -> std::result::Result<(), String> {
    if valence == 0 {
        return Err(format!("token {token:?} has zero valence"));
    }
    if token.is_empty() || !token.chars().all(char::is_alphanumeric) {
        return Err(format!("token {token:?} is not a single word"));
    }
    if token.chars().any(char::is_uppercase) {
        return Err(format!("token {token:?} is not lowercase"));
    }
    Ok(())
}

/// Splits on every non-alphanumeric character and lowercases.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub sign: i8,
    pub pos_hits: u32,
    pub neg_hits: u32,
}

pub fn score_title(title: &str, lex: &Lexicon) -> SentimentScore {
    let mut score = SentimentScore::default();
    for token in tokenize(title) {
        match lex.valence(&token) {
            Some(v) if v > 0 => score.pos_hits += 1,
            Some(_) => score.neg_hits += 1,
            None => {}
        }
    }
    score.sign = match score.pos_hits.cmp(&score.neg_hits) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    };
    score
}

/// Union of both lexicons; the financial valence wins on conflicts.
pub fn merge_lexicons(general: &Lexicon, financial: &Lexicon) -> Lexicon {
    let mut entries = general.entries.clone();
    entries.extend(financial.entries.iter().map(|(k, v)| (k.clone(), *v)));
    Lexicon {
        entries,
        provenance: Provenance::Merged,
    }
}

/// How two lexicons classify the same corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n_titles: usize,
    /// Fraction of titles with the same sign under both lexicons.
    pub same_sign: f64,
    /// Fraction of titles neutral under `a` that `b` signs.
    pub a_neutral_signed_by_b: f64,
    /// Fraction of titles neutral under `b` that `a` signs.
    pub b_neutral_signed_by_a: f64,
}

pub fn dictionary_agreement<'a, I>(a: &Lexicon, b: &Lexicon, titles: I) -> Agreement
where
    I: IntoIterator<Item = &'a str>,
{
    let (mut n, mut same) = (0usize, 0usize);
    let (mut a_neutral, mut a_neutral_signed) = (0usize, 0usize);
    let (mut b_neutral, mut b_neutral_signed) = (0usize, 0usize);
    for title in titles {
        let sa = score_title(title, a).sign;
        let sb = score_title(title, b).sign;
        n += 1;
        same += usize::from(sa == sb);
        if sa == 0 {
            a_neutral += 1;
            a_neutral_signed += usize::from(sb != 0);
        }
        if sb == 0 {
            b_neutral += 1;
            b_neutral_signed += usize::from(sa != 0);
        }
    }
    let frac = |k: usize, d: usize| if d == 0 { 0.0 } else { k as f64 / d as f64 };
    Agreement {
        n_titles: n,
        same_sign: frac(same, n),
        a_neutral_signed_by_b: frac(a_neutral_signed, a_neutral),
        b_neutral_signed_by_a: frac(b_neutral_signed, b_neutral),
    }
}

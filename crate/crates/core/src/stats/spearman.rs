//! Spearman rank correlation and its significance.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::special::t_two_sided;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pair: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// How the null distribution of rho is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Significance {
    /// Two-sided permutation test over shuffles of the second series.
    #[default]
    Permutation,
    /// Student-t approximation with `n − 2` degrees of freedom.
    Asymptotic,
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn centered(v: Vec<f64>) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.into_iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum();
    (c, ss)
}

/// Centered ranks of a validated pair.
struct RankedPair {
    rx: Vec<f64>,
    ry: Vec<f64>,
    denom: f64,
}

impl RankedPair {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!("lengths {} and {}", x.len(), y.len())));
        }
        if x.len() < 3 {
            return Err(Error::InsufficientData(format!("{} observations", x.len())));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value".into()));
        }
        let (rx, sx) = centered(average_ranks(x));
        let (ry, sy) = centered(average_ranks(y));
        if sx == 0.0 || sy == 0.0 {
            return Err(Error::UndefinedCorrelation("constant series".into()));
        }
        Ok(Self {
            rx,
            ry,
            denom: (sx * sy).sqrt(),
        })
    }

    fn numerator(&self, ry: &[f64]) -> f64 {
        self.rx.iter().zip(ry).map(|(a, b)| a * b).sum()
    }

    fn rho(&self) -> f64 {
        (self.numerator(&self.ry) / self.denom).clamp(-1.0, 1.0)
    }
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(RankedPair::new(x, y)?.rho())
}

fn permutation_p(pair: &RankedPair, n_perm: usize, rng: &mut ChaCha8Rng) -> f64 {
    let observed = pair.numerator(&pair.ry).abs();
    // shuffles tying the observed value count as at least as extreme
    let threshold = observed * (1.0 - 1e-12);
    let mut ry = pair.ry.clone();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        ry.shuffle(rng);
        if pair.numerator(&ry).abs() >= threshold {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (n_perm + 1) as f64
}

/// Two-sided permutation p-value `(hits + 1) / (n_perm + 1)`.
pub fn spearman_pvalue(x: &[f64], y: &[f64], n_perm: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let pair = RankedPair::new(x, y)?;
    Ok(permutation_p(&pair, n_perm, rng))
}

pub fn spearman_pvalue_asymptotic(x: &[f64], y: &[f64]) -> Result<f64> {
    let pair = RankedPair::new(x, y)?;
    Ok(asymptotic_p(pair.rho(), x.len()))
}

fn asymptotic_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let nu = (n - 2) as f64;
    t_two_sided(rho * (nu / (1.0 - rho * rho)).sqrt(), nu)
}

/// Rho and its p-value under the chosen significance method.
pub fn correlate(
    pair: &str,
    x: &[f64],
    y: &[f64],
    method: Significance,
    n_perm: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CorrelationResult> {
    let ranked = RankedPair::new(x, y)?;
    let rho = ranked.rho();
    let p_value = match method {
        Significance::Permutation => permutation_p(&ranked, n_perm, rng),
        Significance::Asymptotic => asymptotic_p(rho, x.len()),
    };
    Ok(CorrelationResult {
        pair: pair.to_string(),
        rho,
        p_value,
        n: x.len(),
    })
}

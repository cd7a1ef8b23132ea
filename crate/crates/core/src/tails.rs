//! Discrete power-law tails: `p(x) = x^{-1-α} / ζ(1+α, x_min)` for `x ≥ x_min`.
//!
//! `α` is fitted by maximum likelihood, `x_min` by minimizing the
//! Kolmogorov-Smirnov distance between the empirical and fitted tail CDFs,
//! and the spread of `x_min` by a seeded bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

pub const N_TAIL_MIN: usize = 50;
pub const ALPHA_BRACKET: (f64, f64) = (0.1, 5.0);
const ALPHA_TOL: f64 = 1e-6;

// B_{2j} / (2j)!, j = 1..=10
const EM_COEF: [f64; 10] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
];

/// Shift below which terms are summed directly before the asymptotic tail.
const EM_SHIFT: f64 = 20.0;

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (k + a)^{-s}`.
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!("hurwitz zeta needs s > 1, got {s}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("hurwitz zeta needs a > 0, got {a}")));
    }
    Ok(zeta_unchecked(s, a))
}

fn zeta_unchecked(s: f64, a: f64) -> f64 {
    let mut direct = 0.0;
    let mut q = a;
    while q < EM_SHIFT {
        direct += q.powf(-s);
        q += 1.0;
    }
    // Euler-Maclaurin from q
    let q_s = q.powf(-s);
    let mut tail = q * q_s / (s - 1.0) + 0.5 * q_s;
    let mut poch = s; // s (s+1) ... (s+2j-2)
    let mut qpow = q_s / q; // q^{-s-2j+1}
    let q2 = q * q;
    for (j, c) in EM_COEF.iter().enumerate() {
        let term = c * poch * qpow;
        tail += term;
        if term.abs() < 1e-17 * tail {
            break;
        }
        let k = (2 * j + 1) as f64;
        poch *= (s + k) * (s + k + 1.0);
        qpow /= q2;
    }
    direct + tail
}

/// The discrete power law with exponent `alpha` above `x_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePowerLaw {
    pub alpha: f64,
    pub x_min: u64,
}

/// Largest value returned by [`DiscretePowerLaw::sample`].
pub const SAMPLE_CAP: u64 = 1 << 62;

impl DiscretePowerLaw {
    pub fn new(alpha: f64, x_min: u64) -> Result<Self> {
        if !(alpha > 0.0) || x_min == 0 {
            return Err(Error::InvalidArgument(format!("alpha {alpha}, x_min {x_min}")));
        }
        Ok(Self { alpha, x_min })
    }

    fn s(&self) -> f64 {
        1.0 + self.alpha
    }

    pub fn pmf(&self, x: u64) -> f64 {
        if x < self.x_min {
            return 0.0;
        }
        (x as f64).powf(-self.s()) / zeta_unchecked(self.s(), self.x_min as f64)
    }

    /// `P(X ≥ x)`.
    pub fn ccdf(&self, x: u64) -> f64 {
        if x <= self.x_min {
            return 1.0;
        }
        zeta_unchecked(self.s(), x as f64) / zeta_unchecked(self.s(), self.x_min as f64)
    }

    /// Exact inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let s = self.s();
        let z = zeta_unchecked(s, self.x_min as f64);
        // smallest x with P(X > x) < u
        let beyond = |x: u64| zeta_unchecked(s, (x + 1) as f64) / z < u;
        let guess = (self.x_min as f64 - 0.5) * u.powf(-1.0 / self.alpha) + 0.5;
        let guess = (guess.floor() as u64).clamp(self.x_min, SAMPLE_CAP);
        let (mut lo, mut hi);
        if beyond(guess) {
            hi = guess;
            let mut step = 1u64;
            loop {
                let cand = hi.saturating_sub(step).max(self.x_min - 1);
                if !beyond(cand) {
                    lo = cand;
                    break;
                }
                hi = cand;
                step *= 2;
            }
        } else {
            lo = guess;
            let mut step = 1u64;
            loop {
                if lo >= SAMPLE_CAP {
                    return SAMPLE_CAP;
                }
                let cand = lo.saturating_add(step).min(SAMPLE_CAP);
                if beyond(cand) {
                    hi = cand;
                    break;
                }
                lo = cand;
                step *= 2;
            }
        }
        // beyond(lo) is false (it always is at x_min - 1), beyond(hi) is true
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if beyond(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Maximum-likelihood exponent for a fixed `x_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub se_alpha: f64,
    pub log_likelihood: f64,
    /// The optimum sits on the edge of the search bracket.
    pub at_bound: bool,
}

/// `ℓ(α) = −(1+α) Σ ln x_i − n ln ζ(1+α, x_min)`.
pub fn log_likelihood(alpha: f64, n: usize, sum_ln: f64, x_min: u64) -> f64 {
    let s = 1.0 + alpha;
    -s * sum_ln - n as f64 * zeta_unchecked(s, x_min as f64).ln()
}

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the bracket ends are candidates too: the likelihood may be monotone
    [lo, mid, hi]
        .into_iter()
        .map(|x| (x, f(x)))
        .fold((mid, f64::NEG_INFINITY), |best, (x, fx)| if fx > best.1 { (x, fx) } else { best })
        .0
}

fn fit_alpha_stats(n: usize, sum_ln: f64, x_min: u64) -> AlphaFit {
    let ll = |a: f64| log_likelihood(a, n, sum_ln, x_min);
    let (lo, hi) = ALPHA_BRACKET;
    let alpha = golden_max(ll, lo, hi, ALPHA_TOL);
    let at_bound = alpha - lo < 10.0 * ALPHA_TOL || hi - alpha < 10.0 * ALPHA_TOL;
    // observed information from the curvature of ln ζ
    let h = 1e-4;
    let lz = |a: f64| zeta_unchecked(1.0 + a, x_min as f64).ln();
    let curv = n as f64 * (lz(alpha + h) - 2.0 * lz(alpha) + lz(alpha - h)) / (h * h);
    let se_alpha = if curv > 0.0 { 1.0 / curv.sqrt() } else { f64::INFINITY };
    AlphaFit {
        alpha,
        se_alpha,
        log_likelihood: ll(alpha),
        at_bound,
    }
}

/// Fits `α` to the samples at or above `x_min`.
pub fn fit_alpha(samples: &[u64], x_min: u64) -> Result<AlphaFit> {
    if x_min == 0 {
        return Err(Error::InvalidArgument("x_min must be positive".into()));
    }
    let tail: Vec<u64> = samples.iter().copied().filter(|x| *x >= x_min).collect();
    if tail.len() < N_TAIL_MIN {
        return Err(Error::InsufficientTail {
            needed: N_TAIL_MIN,
            got: tail.len(),
        });
    }
    let sum_ln = tail.iter().map(|x| (*x as f64).ln()).sum();
    Ok(fit_alpha_stats(tail.len(), sum_ln, x_min))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    pub n_tail_min: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            n_tail_min: N_TAIL_MIN,
            bootstrap: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha: f64,
    pub se_alpha: f64,
    pub x_min: u64,
    pub se_xmin: f64,
    /// 2.5% and 97.5% bootstrap quantiles of `x_min`; equal to the point
    /// estimate when no replicates were drawn.
    pub x_min_ci: [u64; 2],
    pub ks: f64,
    pub n_tail: usize,
    pub at_bound: bool,
}

impl TailFit {
    /// Rough acceptance threshold `1.36 / sqrt(n_tail)` for the KS distance.
    pub fn ks_threshold(&self) -> f64 {
        1.36 / (self.n_tail as f64).sqrt()
    }

    pub fn plausible(&self) -> bool {
        !self.at_bound && self.ks < self.ks_threshold()
    }
}

/// Sorted sample with suffix statistics shared by the candidate scan.
struct SortedSample {
    /// distinct values, ascending
    values: Vec<u64>,
    /// occurrences of each distinct value
    counts: Vec<usize>,
    /// number of samples ≥ values[i]
    above: Vec<usize>,
    /// Σ ln x over samples ≥ values[i]
    sum_ln_above: Vec<f64>,
}

impl SortedSample {
    fn new(sorted: &[u64]) -> Self {
        let mut values = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &x in sorted {
            if values.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(x);
                counts.push(1);
            }
        }
        let m = values.len();
        let mut above = vec![0; m];
        let mut sum_ln_above = vec![0.0; m];
        let (mut acc_n, mut acc_ln) = (0usize, 0.0f64);
        for i in (0..m).rev() {
            acc_n += counts[i];
            acc_ln += counts[i] as f64 * (values[i] as f64).ln();
            above[i] = acc_n;
            sum_ln_above[i] = acc_ln;
        }
        Self {
            values,
            counts,
            above,
            sum_ln_above,
        }
    }

    /// KS distance of the tail starting at distinct index `i`; returns early
    /// with a value ≥ `give_up` once the distance is known to reach it.
    fn ks(&self, i: usize, alpha: f64, give_up: f64) -> f64 {
        let s = 1.0 + alpha;
        let x_min = self.values[i];
        let n = self.above[i] as f64;
        let z0 = zeta_unchecked(s, x_min as f64);
        let mut z = z0; // ζ(s, x) for the current x
        let mut x = x_min;
        let mut seen = 0usize;
        let mut d = 0.0f64;
        for j in i..self.values.len() {
            let v = self.values[j];
            // advance ζ(s, x) to ζ(s, v)
            let gap = v - x;
            if gap <= 32 {
                for k in x..v {
                    z -= (k as f64).powf(-s);
                }
            } else {
                z = zeta_unchecked(s, v as f64);
            }
            x = v;
            // F(v−) vs empirical before v, then F(v) vs empirical through v
            let model_below = 1.0 - z / z0;
            let emp_below = seen as f64 / n;
            seen += self.counts[j];
            let model_at = 1.0 - (z - (v as f64).powf(-s)) / z0;
            let emp_at = seen as f64 / n;
            d = d.max((emp_below - model_below).abs()).max((emp_at - model_at).abs());
            if d >= give_up {
                return d;
            }
        }
        d
    }
}

fn scan(sample: &SortedSample, n_tail_min: usize) -> Result<(usize, AlphaFit, f64)> {
    let mut best: Option<(usize, AlphaFit, f64)> = None;
    for i in 0..sample.values.len() {
        if sample.above[i] < n_tail_min {
            break;
        }
        let fit = fit_alpha_stats(sample.above[i], sample.sum_ln_above[i], sample.values[i]);
        let give_up = best.as_ref().map_or(f64::INFINITY, |b| b.2);
        let ks = sample.ks(i, fit.alpha, give_up);
        if ks < give_up {
            best = Some((i, fit, ks));
        }
    }
    best.ok_or_else(|| Error::InsufficientTail {
        needed: n_tail_min,
        got: sample.above.first().copied().unwrap_or(0),
    })
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn quantile_sorted(xs: &[u64], q: f64) -> u64 {
    let pos = q * (xs.len() - 1) as f64;
    xs[pos.round() as usize]
}

/// Jointly estimates `x_min` and `α`; see the module docs.
pub fn fit_tail(samples: &[u64], opts: &TailOptions) -> Result<TailFit> {
    let n_tail_min = opts.n_tail_min.max(2);
    if samples.contains(&0) {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let sample = SortedSample::new(&sorted);
    if sample.values.len() < 2 {
        return Err(Error::InsufficientTail {
            needed: n_tail_min,
            got: 0,
        });
    }
    let (i, fit, ks) = scan(&sample, n_tail_min)?;
    let x_min = sample.values[i];

    let mut boot: Vec<u64> = (0..opts.bootstrap)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = substream(opts.seed, &format!("bootstrap/{b}"));
            let mut re: Vec<u64> = (0..sorted.len()).map(|_| sorted[rng.random_range(0..sorted.len())]).collect();
            re.sort_unstable();
            let re = SortedSample::new(&re);
            scan(&re, n_tail_min).ok().map(|(j, _, _)| re.values[j])
        })
        .collect();
    boot.sort_unstable();
    let (se_xmin, x_min_ci) = if boot.is_empty() {
        (0.0, [x_min, x_min])
    } else {
        let as_f: Vec<f64> = boot.iter().map(|x| *x as f64).collect();
        (sd(&as_f), [quantile_sorted(&boot, 0.025), quantile_sorted(&boot, 0.975)])
    };
    Ok(TailFit {
        alpha: fit.alpha,
        se_alpha: fit.se_alpha,
        x_min,
        se_xmin,
        x_min_ci,
        ks,
        n_tail: sample.above[i],
        at_bound: fit.at_bound,
    })
}

/// Empirical `P(X ≥ x)` at each distinct value. With `rescale_max`, both
/// coordinates are multiplied by `rescale_max / max(samples)`, which keeps
/// log-log slopes unchanged.
pub fn ccdf_points(samples: &[u64], rescale_max: Option<f64>) -> Vec<(f64, f64)> {
    if samples.is_empty() {
        return vec![];
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let sample = SortedSample::new(&sorted);
    let n = sorted.len() as f64;
    let c = rescale_max.map_or(1.0, |m| m / *sorted.last().unwrap() as f64);
    sample
        .values
        .iter()
        .zip(&sample.above)
        .map(|(x, a)| (*x as f64 * c, *a as f64 / n * c))
        .collect()
}

/// Header of the fit table.
pub const TAIL_TABLE_HEADER: &str = "ticker,alpha,se_alpha,x_min,se_x_min,ks,n_tail";

impl TailFit {
    pub fn table_row(&self, ticker: &str) -> String {
        format!(
            "{ticker},{},{},{},{},{},{}",
            self.alpha, self.se_alpha, self.x_min, self.se_xmin, self.ks, self.n_tail
        )
    }
}

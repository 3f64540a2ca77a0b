//! Tail classification and clustering diagnostics for return/volume series.
//!
//! The regime question — do magnitudes beyond a quantile threshold fall off
//! like a Gaussian, an exponential, or a power law — is settled by maximum
//! likelihood over the three candidate families on the conditional tail,
//! with a log-likelihood margin below which the verdict is `indeterminate`.
//! A Kolmogorov–Smirnov statistic per fitted family is reported as a
//! goodness diagnostic, not used for selection.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Tail-threshold quantile of the magnitude distribution.
///
/// Calibrated so that all of Normal, Laplace, Pareto and Student-t synthetic
/// samples are recovered at 10^5 points, and so the simulator's strong- and
/// weak-coupling regimes separate; see README for the calibration sweep.
pub const DEFAULT_Q_THRESHOLD: f64 = 0.85;
/// Fraction of the sample used as upper order statistics by the Hill estimator.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;
/// Log-likelihood gap under which a family verdict is downgraded.
pub const DEFAULT_MARGIN_MIN: f64 = 2.0;

/// Minimum tail points for any fit reported as reliable.
const MIN_TAIL: usize = 50;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, PartialEq)]
pub enum TailError {
    #[error("need at least {need} samples (got {got})")]
    NotEnoughSamples { need: usize, got: usize },
    #[error("need at least {MIN_TAIL} tail samples above the threshold (got {got})")]
    InsufficientTail { got: usize },
    #[error("samples must be finite")]
    NonFinite,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("magnitude samples must be nonnegative")]
    NegativeMagnitude,
    #[error("{name} must lie in {range} (got {value})")]
    BadParameter {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("series too short: autocorrelation at {max_lag} lags needs more than {need} points (got {got})")]
    ShortSeries {
        max_lag: usize,
        need: usize,
        got: usize,
    },
}

/// Candidate tail families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailFamily {
    Gaussian,
    Exponential,
    #[serde(rename = "powerlaw")]
    PowerLaw,
}

/// Classification outcome: a family, or no family decisively ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailClass {
    Gaussian,
    Exponential,
    #[serde(rename = "powerlaw")]
    PowerLaw,
    Indeterminate,
}

impl From<TailFamily> for TailClass {
    fn from(f: TailFamily) -> Self {
        match f {
            TailFamily::Gaussian => TailClass::Gaussian,
            TailFamily::Exponential => TailClass::Exponential,
            TailFamily::PowerLaw => TailClass::PowerLaw,
        }
    }
}

/// One family fitted to the conditional tail above `x_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub family: TailFamily,
    /// α for the power law, rate for the exponential, σ for the Gaussian.
    pub exponent_or_scale: f64,
    pub x_min: f64,
    pub log_likelihood: f64,
    pub ks_stat: f64,
    pub n_tail: usize,
}

/// The three per-family fits over one common tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFits {
    pub gaussian: TailFit,
    pub exponential: TailFit,
    pub powerlaw: TailFit,
}

impl TailFits {
    pub fn iter(&self) -> impl Iterator<Item = &TailFit> {
        [&self.gaussian, &self.exponential, &self.powerlaw].into_iter()
    }

    /// Fits ranked by log-likelihood, best first.
    fn ranked(&self) -> [&TailFit; 3] {
        let mut fits = [&self.gaussian, &self.exponential, &self.powerlaw];
        fits.sort_by(|a, b| b.log_likelihood.total_cmp(&a.log_likelihood));
        fits
    }
}

/// Verdict plus the log-likelihood gap separating it from the runner-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub label: TailClass,
    pub margin: f64,
}

/// First four central moments.
///
/// Computed in two passes (mean, then centered power sums) with population
/// normalization; `excess_kurtosis = m4/m2^2 - 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub count: usize,
}

/// Hill tail-index estimate from the top order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub std_err: f64,
    /// Order statistics used.
    pub k: usize,
}

fn ensure_finite(samples: &[f64]) -> Result<(), TailError> {
    if samples.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TailError::NonFinite)
    }
}

/// Linear-interpolated quantile of pre-sorted data (the numpy/R type-7
/// convention).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Empirical complementary CDF evaluated at each distinct sample value.
///
/// `p(x) = #{samples > x}/count`, so the smallest value carries
/// `(count-1)/count` when unique and the largest would carry 0 — that final
/// point is floored to `1/(2·count)` to stay plottable on log axes.
pub fn ccdf(samples: &[f64]) -> Result<Vec<(f64, f64)>, TailError> {
    if samples.len() < 2 {
        return Err(TailError::NotEnoughSamples {
            need: 2,
            got: samples.len(),
        });
    }
    ensure_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let floor = 1.0 / (2.0 * n as f64);
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let x = sorted[i];
        let mut j = i + 1;
        while j < n && sorted[j] == x {
            j += 1;
        }
        let greater = n - j;
        let p = if greater == 0 {
            floor
        } else {
            greater as f64 / n as f64
        };
        out.push((x, p));
        i = j;
    }
    Ok(out)
}

/// Two-pass central moments; rejects fewer than four points (kurtosis
/// undefined) and zero-variance input.
pub fn moments(samples: &[f64]) -> Result<MomentSummary, TailError> {
    if samples.len() < 4 {
        return Err(TailError::NotEnoughSamples {
            need: 4,
            got: samples.len(),
        });
    }
    ensure_finite(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in samples {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(TailError::Degenerate("zero variance"));
    }
    Ok(MomentSummary {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        count: samples.len(),
    })
}

/// Hill estimator over the top `⌈tail_fraction·count⌉` order statistics of a
/// magnitude sample:
/// `α̂ = k / Σ ln(x_(i)/x_(k+1))`, `se = α̂/√k`.
pub fn hill_estimate(samples: &[f64], tail_fraction: f64) -> Result<HillEstimate, TailError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(TailError::BadParameter {
            name: "tail_fraction",
            range: "(0, 0.5]",
            value: tail_fraction,
        });
    }
    ensure_finite(samples)?;
    if samples.iter().any(|&v| v < 0.0) {
        return Err(TailError::NegativeMagnitude);
    }
    let k = (tail_fraction * samples.len() as f64).ceil() as usize;
    if k < MIN_TAIL {
        return Err(TailError::InsufficientTail { got: k });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| f64::total_cmp(b, a));
    let threshold = sorted[k];
    if threshold <= 0.0 {
        return Err(TailError::Degenerate("nonpositive tail threshold"));
    }
    let sum_log: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum_log <= 0.0 {
        return Err(TailError::Degenerate("flat tail"));
    }
    let alpha = k as f64 / sum_log;
    Ok(HillEstimate {
        alpha,
        std_err: alpha / (k as f64).sqrt(),
        k,
    })
}

/// `ln P(Z > t)` for standard normal `Z`, stable far into the tail.
fn normal_ln_sf(t: f64) -> f64 {
    let z = t / std::f64::consts::SQRT_2;
    if t < 12.0 {
        (0.5 * erfc(z)).ln()
    } else {
        // asymptotic erfc(z) ~ e^{-z²}/(z√π)·(1 - 1/(2z²) + 3/(4z⁴)), halved
        let zz = z * z;
        -zz - (z * std::f64::consts::PI.sqrt()).ln() - std::f64::consts::LN_2
            + (-0.5 / zz + 0.75 / (zz * zz)).ln_1p()
    }
}

/// `P(Z > t)` for standard normal `Z`.
fn normal_sf(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Maximize the truncated-Gaussian tail likelihood over σ by golden-section
/// search; the objective is O(1) per evaluation given `Σx²`.
fn fit_gaussian_tail(tail: &[f64], x_min: f64) -> (f64, f64) {
    let k = tail.len() as f64;
    let sum_sq: f64 = tail.iter().map(|x| x * x).sum();
    let ll = |ln_sigma: f64| -> f64 {
        let sigma = ln_sigma.exp();
        -k * ln_sigma
            - k * LN_SQRT_2PI
            - sum_sq / (2.0 * sigma * sigma)
            - k * normal_ln_sf(x_min / sigma)
    };
    // The unconditional MLE σ* = sqrt(Σx²/k) upper-bounds the truncated one;
    // below x_min/25 the tail probability underflows any real fit.
    let mut lo = (x_min / 25.0).max(1e-300).ln();
    let mut hi = ((sum_sq / k).sqrt() * 1.5).ln();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (ll(c), ll(d));
    while hi - lo > 1e-10 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = ll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = ll(d);
        }
    }
    let ln_sigma = 0.5 * (lo + hi);
    (ln_sigma.exp(), ll(ln_sigma))
}

/// KS distance between the sorted tail sample and a fitted conditional CDF.
fn ks_stat(sorted_tail: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let k = sorted_tail.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted_tail.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        d = d.max((f - i as f64 / k).abs());
        d = d.max(((i + 1) as f64 / k - f).abs());
    }
    d
}

/// Fit all three candidate families by maximum likelihood to the tail of
/// `|samples|` above the `q_threshold` quantile.
pub fn fit_tail_family(samples: &[f64], q_threshold: f64) -> Result<TailFits, TailError> {
    if !(q_threshold > 0.5 && q_threshold < 1.0) {
        return Err(TailError::BadParameter {
            name: "q_threshold",
            range: "(0.5, 1)",
            value: q_threshold,
        });
    }
    ensure_finite(samples)?;
    if samples.len() < 2 {
        return Err(TailError::NotEnoughSamples {
            need: 2,
            got: samples.len(),
        });
    }
    let mut mags: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let x_min = quantile_sorted(&mags, q_threshold);
    if x_min <= 0.0 {
        return Err(TailError::Degenerate("tail threshold is zero"));
    }
    let start = mags.partition_point(|&v| v <= x_min);
    let tail = &mags[start..];
    let k = tail.len();
    if k < MIN_TAIL {
        return Err(TailError::InsufficientTail { got: k });
    }
    if tail[k - 1] == tail[0] {
        return Err(TailError::Degenerate("zero variance in tail"));
    }
    let kf = k as f64;

    // Gaussian N(0, σ) conditioned on x > x_min.
    let (sigma, ll_gauss) = fit_gaussian_tail(tail, x_min);
    let gauss_sf_min = normal_sf(x_min / sigma);
    let gaussian = TailFit {
        family: TailFamily::Gaussian,
        exponent_or_scale: sigma,
        x_min,
        log_likelihood: ll_gauss,
        ks_stat: ks_stat(tail, |x| 1.0 - normal_sf(x / sigma) / gauss_sf_min),
        n_tail: k,
    };

    // Shifted exponential: density rate·e^{-rate(x - x_min)}.
    let sum_excess: f64 = tail.iter().map(|x| x - x_min).sum();
    let rate = kf / sum_excess;
    let exponential = TailFit {
        family: TailFamily::Exponential,
        exponent_or_scale: rate,
        x_min,
        log_likelihood: kf * rate.ln() - rate * sum_excess,
        ks_stat: ks_stat(tail, |x| 1.0 - (-rate * (x - x_min)).exp()),
        n_tail: k,
    };

    // Pareto: density (α/x_min)·(x/x_min)^{-α-1}.
    let sum_ln: f64 = tail.iter().map(|x| x.ln()).sum();
    let sum_ln_ratio = sum_ln - kf * x_min.ln();
    let alpha = kf / sum_ln_ratio;
    let powerlaw = TailFit {
        family: TailFamily::PowerLaw,
        exponent_or_scale: alpha,
        x_min,
        log_likelihood: kf * alpha.ln() + kf * alpha * x_min.ln() - (alpha + 1.0) * sum_ln,
        ks_stat: ks_stat(tail, |x| 1.0 - (x / x_min).powf(-alpha)),
        n_tail: k,
    };

    Ok(TailFits {
        gaussian,
        exponential,
        powerlaw,
    })
}

/// Pick the maximum-likelihood family, downgrading to
/// [`TailClass::Indeterminate`] when the winner leads the runner-up by less
/// than `margin_min` log-likelihood units.
pub fn classify_tail(
    samples: &[f64],
    q_threshold: f64,
    margin_min: f64,
) -> Result<RegimeLabel, TailError> {
    let fits = fit_tail_family(samples, q_threshold)?;
    Ok(label_fits(&fits, margin_min))
}

/// Classification step on already-computed fits.
pub fn label_fits(fits: &TailFits, margin_min: f64) -> RegimeLabel {
    let ranked = fits.ranked();
    let margin = ranked[0].log_likelihood - ranked[1].log_likelihood;
    let label = if margin < margin_min {
        TailClass::Indeterminate
    } else {
        ranked[0].family.into()
    };
    RegimeLabel { label, margin }
}

/// Sample autocorrelation of `|series|` at lags `1..=max_lag`,
/// mean-subtracted and normalized by the lag-0 autocovariance.
pub fn acf_abs(series: &[f64], max_lag: usize) -> Result<Vec<f64>, TailError> {
    if max_lag == 0 {
        return Err(TailError::BadParameter {
            name: "max_lag",
            range: "[1, ∞)",
            value: 0.0,
        });
    }
    if series.len() <= 10 * max_lag {
        return Err(TailError::ShortSeries {
            max_lag,
            need: 10 * max_lag,
            got: series.len(),
        });
    }
    ensure_finite(series)?;
    let n = series.len();
    let abs: Vec<f64> = series.iter().map(|v| v.abs()).collect();
    let mean = abs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = abs.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Err(TailError::Degenerate("zero variance"));
    }
    let mut out = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let cov = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        out.push(cov / c0);
    }
    Ok(out)
}

/// Vertical scale of histogram output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YScale {
    Linear,
    Log,
}

/// Equal-width histogram normalized to unit integral, as
/// `(bin_center, density)` pairs. On the log scale empty bins are dropped
/// and the natural log of the density is emitted. A degenerate single-value
/// sample yields one unit-width bin.
pub fn histogram(
    samples: &[f64],
    bins: usize,
    y_scale: YScale,
) -> Result<Vec<(f64, f64)>, TailError> {
    if bins < 2 {
        return Err(TailError::BadParameter {
            name: "bins",
            range: "[2, ∞)",
            value: bins as f64,
        });
    }
    if samples.is_empty() {
        return Err(TailError::NotEnoughSamples { need: 1, got: 0 });
    }
    ensure_finite(samples)?;
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        let density = 1.0;
        return Ok(match y_scale {
            YScale::Linear => vec![(min, density)],
            YScale::Log => vec![(min, density.ln())],
        });
    }
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let idx = (((v - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    let mut out = Vec::with_capacity(bins);
    for (i, &c) in counts.iter().enumerate() {
        let center = min + (i as f64 + 0.5) * width;
        let density = c as f64 / (n * width);
        match y_scale {
            YScale::Linear => out.push((center, density)),
            YScale::Log => {
                if c > 0 {
                    out.push((center, density.ln()));
                }
            }
        }
    }
    Ok(out)
}

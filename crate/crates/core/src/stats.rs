//! Energy sampling schedule, histogramming, weighted log-linear Boltzmann
//! fits and multi-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BathRealization;
use crate::rng::RngStream;

/// Random sampling schedule: gaps uniform on `(0, 2τ)`, so the mean gap is `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub mean_interval: f64,
    pub n_samples: usize,
    pub warmup: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            mean_interval: 10.0,
            n_samples: 4000,
            warmup: 0.0,
        }
    }
}

pub const MIN_SAMPLES: usize = 100;

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_interval > 0.0 && self.mean_interval.is_finite()) {
            return Err(Error::invalid("sample_interval", "must be positive and finite"));
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::invalid(
                "n_samples",
                format!("must be at least {MIN_SAMPLES}"),
            ));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(Error::invalid("warmup", "must be non-negative and finite"));
        }
        Ok(())
    }
}

/// Cumulative sum of `gaps` starting at `warmup`.
pub fn sampling_times_from_gaps(warmup: f64, gaps: &[f64]) -> Vec<f64> {
    gaps.iter()
        .scan(warmup, |t, g| {
            *t += g;
            Some(*t)
        })
        .collect()
}

/// Strictly increasing sampling times after `plan.warmup`.
pub fn make_sampling_times(plan: &SamplingPlan, rng: &mut RngStream) -> Vec<f64> {
    let gaps: Vec<f64> = (0..plan.n_samples)
        .map(|_| 2.0 * plan.mean_interval * rng.uniform_open())
        .collect();
    sampling_times_from_gaps(plan.warmup, &gaps)
}

/// Equal-width histogram on `[0, e_max]`; energies above `e_max` are tallied
/// in `overflow` and never fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

impl EnergyHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn overflow_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.overflow as f64 / self.total as f64
        }
    }

    /// Histogram from explicit edges and counts (e.g. read back from disk).
    pub fn from_parts(bin_edges: Vec<f64>, counts: Vec<u64>, overflow: u64) -> Result<Self> {
        if bin_edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::invalid("bin_edges", "need exactly one more edge than counts"));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("bin_edges", "must be strictly increasing"));
        }
        let total = counts.iter().sum::<u64>() + overflow;
        Ok(EnergyHistogram {
            bin_edges,
            counts,
            overflow,
            total,
        })
    }
}

/// Smallest bin count accepted from configuration.
pub const MIN_BINS: usize = 5;

/// Bins are right-closed, `(lo, hi]`, with zero falling in the first bin.
/// Values within a relative 1e-9 bin width of an edge are treated as lying on it.
pub fn build_histogram(energies: &[f64], n_bins: usize, e_max: f64) -> Result<EnergyHistogram> {
    if energies.is_empty() {
        return Err(Error::EmptyInput("no energies to histogram"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("hist_bins", "must be at least 1"));
    }
    if !(e_max > 0.0 && e_max.is_finite()) {
        if energies.iter().all(|&e| e == 0.0) {
            return Err(Error::DegenerateHistogram("all energies are zero"));
        }
        return Err(Error::invalid("e_max", "must be positive and finite"));
    }
    if let Some(e) = energies.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(Error::invalid("energies", format!("must be finite and non-negative, got {e}")));
    }
    if energies.iter().all(|&e| e == 0.0) {
        return Err(Error::DegenerateHistogram("all energies are zero"));
    }
    let nb = n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| e_max * i as f64 / nb).collect();
    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0;
    for &e in energies {
        let mut x = e * nb / e_max;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            x = r;
        }
        if x > nb {
            overflow += 1;
            continue;
        }
        let idx = (x.ceil() as usize).max(1) - 1;
        counts[idx] += 1;
    }
    Ok(EnergyHistogram {
        bin_edges,
        counts,
        overflow,
        total: energies.len() as u64,
    })
}

/// Default binning: 40 bins on `[0, 8 ⟨E⟩]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub n_bins: usize,
    pub range_factor: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            n_bins: 40,
            range_factor: 8.0,
        }
    }
}

impl Binning {
    /// Binning sized to the sample count: the last bin still expects a few
    /// counts, and large samples get the default.
    pub fn for_count(n: usize) -> Self {
        let n = n.max(1) as f64;
        let d = Binning::default();
        Binning {
            n_bins: ((n.cbrt().round() as usize) + 2).clamp(5, d.n_bins),
            range_factor: (n / 5.0).ln().clamp(3.0, d.range_factor),
        }
    }

    pub fn histogram(&self, energies: &[f64]) -> Result<EnergyHistogram> {
        if energies.is_empty() {
            return Err(Error::EmptyInput("no energies to histogram"));
        }
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        build_histogram(energies, self.n_bins, self.range_factor * mean)
    }
}

/// Boltzmann fit of a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub std_error: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n_bins_used: usize,
    /// Weighted residual sum `Σ N_i (ln N_i − a − b E_i)²`.
    pub goodness: f64,
}

pub const MIN_FIT_BINS: usize = 3;

/// Weighted least squares of `ln N_i` against bin centers with weights `N_i`
/// (Poisson errors `σ_i = √N_i` on the counts). Empty bins are skipped.
pub fn fit_temperature(hist: &EnergyHistogram) -> Result<TemperatureFit> {
    let points: Vec<(f64, f64, f64)> = hist
        .centers()
        .into_iter()
        .zip(&hist.counts)
        .filter(|(_, &n)| n > 0)
        .map(|(x, &n)| (x, (n as f64).ln(), n as f64))
        .collect();
    if points.len() < MIN_FIT_BINS {
        return Err(Error::InsufficientBins {
            used: points.len(),
            needed: MIN_FIT_BINS,
        });
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let xm = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let x_span = points.last().unwrap().0 - points[0].0;
    // a slope that moves ln N by less than 1e-9 across the fitted range is zero
    if !(slope < 0.0) || slope.abs() * x_span < 1e-9 {
        return Err(Error::NonThermal { slope });
    }
    let slope_var = 1.0 / sxx;
    let temperature = -1.0 / slope;
    let std_error = slope_var.sqrt() / (slope * slope);
    let goodness = points
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(TemperatureFit {
        temperature,
        std_error,
        slope,
        intercept,
        n_bins_used: points.len(),
        goodness,
    })
}

/// Inverse-variance weighted mean of per-seed temperatures.
///
/// Order-independent up to floating-point summation order, which is fixed by
/// the caller's (deterministic) ordering.
pub fn aggregate_seeds(fits: &[TemperatureFit]) -> Result<TemperatureFit> {
    match fits {
        [] => Err(Error::EmptyInput("no fits to aggregate")),
        [single] => Ok(single.clone()),
        _ => {
            let exact: Vec<&TemperatureFit> = fits.iter().filter(|f| f.std_error == 0.0).collect();
            let (temperature, std_error) = if !exact.is_empty() {
                let t = exact.iter().map(|f| f.temperature).sum::<f64>() / exact.len() as f64;
                (t, 0.0)
            } else {
                let wsum: f64 = fits.iter().map(|f| f.std_error.powi(-2)).sum();
                let t = fits
                    .iter()
                    .map(|f| f.temperature * f.std_error.powi(-2))
                    .sum::<f64>()
                    / wsum;
                (t, wsum.powf(-0.5))
            };
            Ok(TemperatureFit {
                temperature,
                std_error,
                slope: -1.0 / temperature,
                intercept: f64::NAN,
                n_bins_used: fits.iter().map(|f| f.n_bins_used).sum(),
                goodness: fits.iter().map(|f| f.goodness).sum(),
            })
        }
    }
}

/// Fit of the bath's initial oscillator energies.
pub fn bath_temperature(realization: &BathRealization) -> Result<TemperatureFit> {
    energy_temperature(&realization.energies)
}

/// Fit of arbitrary bath energies with [`Binning::for_count`]; at least 100 values.
pub fn energy_temperature(energies: &[f64]) -> Result<TemperatureFit> {
    if energies.len() < MIN_SAMPLES {
        return Err(Error::invalid(
            "n_oscillators",
            format!("bath temperature needs at least {MIN_SAMPLES} oscillators"),
        ));
    }
    fit_temperature(&Binning::for_count(energies.len()).histogram(energies)?)
}

/// Per-seed bath fits combined by [`aggregate_seeds`].
pub fn bath_temperature_multi(realizations: &[BathRealization]) -> Result<TemperatureFit> {
    let fits = realizations
        .iter()
        .map(bath_temperature)
        .collect::<Result<Vec<_>>>()?;
    aggregate_seeds(&fits)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample skewness `m₃ / m₂^{3/2}`; an exponential law gives 2, a Gaussian 0.
pub fn skewness(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mu).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Kolmogorov–Smirnov test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the p-value.
    pub n_effective: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples for KS test"));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n_effective: n,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("no samples for KS test"));
    }
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        n_effective: n_eff,
    })
}

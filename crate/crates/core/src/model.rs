//! Four-parameter reference model of baseline gameplay.
//!
//! IKI follows a three-parameter Gamma (shape `k`, location `mu`, scale),
//! PTT a zero-origin Exponential (rate `lambda`). Channels are independent,
//! so a session's score is the per-channel mean log-density summed over the
//! two channels, and NLL = (mean baseline LL) / LL.

use serde::{Deserialize, Serialize};

use crate::game::EventLog;
use crate::special::{digamma, ln_gamma, trigamma};
use crate::telemetry::FeatureSeries;

/// Densities below this contribute `ln(PDF_FLOOR)` instead of `-inf`.
pub const PDF_FLOOR: f64 = 1e-12;
/// Location is kept at least this far below the smallest sample.
pub const LOCATION_MARGIN: f64 = 1e-6;
pub const MIN_GAMMA_SAMPLES: usize = 30;
pub const MAX_OUTER_ITERATIONS: u32 = 200;
/// Convergence threshold on the per-sample profile log-likelihood.
pub const LL_TOLERANCE: f64 = 1e-10;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("all samples are equal")]
    DegenerateSample,
    #[error("samples must be finite and non-negative")]
    InvalidSample,
    #[error("all samples are zero")]
    AllZeroSamples,
    #[error("location search did not converge after {0} iterations")]
    NonConvergence(u32),
    #[error("need at least {needed} baseline logs, got {got}")]
    TooFewLogs { needed: usize, got: usize },
    #[error("no baseline log has both IKI and PTT samples")]
    NoScorableLogs,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScoreError {
    #[error("feature channel {0} is empty")]
    EmptyFeatures(&'static str),
    #[error("log-likelihood is zero; NLL undefined")]
    ZeroLL,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub k: f64,
    pub mu: f64,
    pub gamma_scale: f64,
}

impl GammaParams {
    pub fn new(k: f64, mu: f64, gamma_scale: f64) -> Self {
        assert!(k > 0.0 && gamma_scale > 0.0, "invalid Gamma parameters");
        Self { k, mu, gamma_scale }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let y = x - self.mu;
        if y < 0.0 {
            return f64::NEG_INFINITY;
        }
        if y == 0.0 {
            return match self.k.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => -self.gamma_scale.ln(),
                _ => f64::NEG_INFINITY,
            };
        }
        (self.k - 1.0) * y.ln() - y / self.gamma_scale - ln_gamma(self.k) - self.k * self.gamma_scale.ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.k * self.gamma_scale
    }

    pub fn variance(&self) -> f64 {
        self.k * self.gamma_scale * self.gamma_scale
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.k + self.gamma_scale.ln() + ln_gamma(self.k) + (1.0 - self.k) * digamma(self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpParams {
    pub lambda_rate: f64,
}

impl ExpParams {
    pub fn new(lambda_rate: f64) -> Self {
        assert!(lambda_rate > 0.0, "invalid Exponential rate");
        Self { lambda_rate }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            f64::NEG_INFINITY
        } else {
            self.lambda_rate.ln() - self.lambda_rate * x
        }
    }

    pub fn entropy(&self) -> f64 {
        1.0 - self.lambda_rate.ln()
    }
}

/// Result of a three-parameter Gamma fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub params: GammaParams,
    /// Mean log-likelihood per sample at the estimate.
    pub mean_ll: f64,
    pub iterations: u32,
    /// The location profile had no interior maximum; `mu` was pinned.
    pub location_fallback: bool,
}

/// Two-parameter fit at a fixed location. `None` when some sample sits at or below `mu`.
struct Profile {
    k: f64,
    scale: f64,
    mean_ll: f64,
    /// d(mean LL)/d(mu) at the profile optimum.
    slope: f64,
}

fn profile_at(samples: &[f64], mu: f64) -> Option<Profile> {
    let n = samples.len() as f64;
    let (mut sum_y, mut sum_ln, mut sum_inv) = (0.0, 0.0, 0.0);
    for &x in samples {
        let y = x - mu;
        if y <= 0.0 {
            return None;
        }
        sum_y += y;
        sum_ln += y.ln();
        sum_inv += 1.0 / y;
    }
    let mean_y = sum_y / n;
    let mean_ln = sum_ln / n;
    let s = mean_y.ln() - mean_ln;
    if !(s > 0.0) {
        return None;
    }
    let k = solve_shape(s);
    let scale = mean_y / k;
    let mean_ll = (k - 1.0) * mean_ln - k - ln_gamma(k) - k * scale.ln();
    let slope = -(k - 1.0) * sum_inv / n + 1.0 / scale;
    Some(Profile {
        k,
        scale,
        mean_ll,
        slope,
    })
}

/// Solves ln k - ψ(k) = s for k by Newton iteration.
fn solve_shape(s: f64) -> f64 {
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        let mut next = k - f / df;
        if !(next > 0.0) {
            next = k / 2.0;
        }
        let done = (next - k).abs() <= 1e-14 * k;
        k = next;
        if done {
            break;
        }
    }
    k
}

/// Maximum-likelihood fit of the three-parameter Gamma.
///
/// The location is profiled out: for each candidate `mu` the shape solves
/// the digamma equation and the scale is closed-form. The profile slope in
/// `t = ln(min - mu)` is scanned on a log grid for an interior maximum, which
/// is then refined by a safeguarded secant (Illinois) iteration until the
/// profile log-likelihood gains less than [`LL_TOLERANCE`] per step.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaFit, FitError> {
    if samples.len() < MIN_GAMMA_SAMPLES {
        return Err(FitError::InsufficientSamples {
            needed: MIN_GAMMA_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(FitError::InvalidSample);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(FitError::DegenerateSample);
    }
    let range = max - min;

    // h(t) = d(mean LL)/dt with mu = min - e^t; positive means "move mu further down".
    let eval = |t: f64| -> Option<(f64, Profile)> {
        let delta = t.exp();
        let p = profile_at(samples, min - delta)?;
        Some((-delta * p.slope, p))
    };

    let t_lo = LOCATION_MARGIN.ln();
    let t_hi = (100.0 * range).ln();
    const GRID: usize = 64;
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=GRID {
        let t = t_lo + (t_hi - t_lo) * i as f64 / GRID as f64;
        let Some((h, _)) = eval(t) else { continue };
        if let Some((pt, ph)) = prev {
            if ph > 0.0 && h <= 0.0 {
                bracket = Some((pt, ph, t, h));
                break;
            }
        }
        prev = Some((t, h));
    }
    let Some((mut a, mut ha, mut b, mut hb)) = bracket else {
        if matches!(prev, Some((_, h)) if h > 0.0) {
            // still climbing at the far end: no finite location
            return Err(FitError::NonConvergence(GRID as u32));
        }
        return Ok(two_parameter_fallback(samples, min));
    };

    let mut last_ll = f64::NEG_INFINITY;
    let mut last_t = f64::NAN;
    let mut side = 0i8;
    for iter in 1..=MAX_OUTER_ITERATIONS {
        let mut t = b - hb * (b - a) / (hb - ha);
        if !(t > a.min(b) && t < a.max(b)) {
            t = 0.5 * (a + b);
        }
        let (h, p) = eval(t).ok_or(FitError::NonConvergence(iter))?;
        let gain = (p.mean_ll - last_ll).abs();
        let step = (t - last_t).abs();
        last_ll = p.mean_ll;
        last_t = t;
        if h == 0.0 || (gain < LL_TOLERANCE && step < 1e-4) || (a - b).abs() < 1e-12 {
            return Ok(GammaFit {
                params: GammaParams::new(p.k, min - t.exp(), p.scale),
                mean_ll: p.mean_ll,
                iterations: iter,
                location_fallback: false,
            });
        }
        // Illinois: halve the stale endpoint's weight when the same side repeats
        if h > 0.0 {
            a = t;
            ha = h;
            if side == 1 {
                hb *= 0.5;
            }
            side = 1;
        } else {
            b = t;
            hb = h;
            if side == -1 {
                ha *= 0.5;
            }
            side = -1;
        }
    }
    Err(FitError::NonConvergence(MAX_OUTER_ITERATIONS))
}

/// Location pinned at 0 when every sample is positive, else one unit below the minimum.
fn two_parameter_fallback(samples: &[f64], min: f64) -> GammaFit {
    let mu = if min > 0.0 { 0.0 } else { min - 1.0 };
    log::debug!("gamma location profile has no interior maximum; pinning mu = {mu}");
    let p = profile_at(samples, mu).expect("samples lie above the pinned location");
    GammaFit {
        params: GammaParams::new(p.k, mu, p.scale),
        mean_ll: p.mean_ll,
        iterations: 0,
        location_fallback: true,
    }
}

/// Closed-form MLE of the zero-origin Exponential: 1 / mean.
pub fn fit_exp(samples: &[f64]) -> Result<ExpParams, FitError> {
    if samples.is_empty() {
        return Err(FitError::InsufficientSamples { needed: 1, got: 0 });
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(FitError::InvalidSample);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if mean <= 0.0 {
        return Err(FitError::AllZeroSamples);
    }
    Ok(ExpParams::new(1.0 / mean))
}

fn floored(ln_p: f64) -> f64 {
    let floor = PDF_FLOOR.ln();
    if ln_p < floor || ln_p.is_nan() {
        floor
    } else {
        ln_p
    }
}

fn mean_floored(samples: &[u64], ln_pdf: impl Fn(f64) -> f64) -> f64 {
    samples.iter().map(|&x| floored(ln_pdf(x as f64))).sum::<f64>() / samples.len() as f64
}

/// Mean floored log-density of the IKI channel.
pub fn ll_iki(features: &FeatureSeries, gamma: &GammaParams) -> Result<f64, ScoreError> {
    if features.iki.is_empty() {
        return Err(ScoreError::EmptyFeatures("iki"));
    }
    Ok(mean_floored(&features.iki, |x| gamma.ln_pdf(x)))
}

/// Mean floored log-density of the PTT channel.
pub fn ll_ptt(features: &FeatureSeries, exp: &ExpParams) -> Result<f64, ScoreError> {
    if features.ptt.is_empty() {
        return Err(ScoreError::EmptyFeatures("ptt"));
    }
    Ok(mean_floored(&features.ptt, |x| exp.ln_pdf(x)))
}

/// Session log-likelihood: IKI-channel mean plus PTT-channel mean.
pub fn log_likelihood(features: &FeatureSeries, model: &RefModel) -> Result<f64, ScoreError> {
    Ok(ll_iki(features, &model.iki)? + ll_ptt(features, &model.ptt)?)
}

/// Normalised log-likelihood; 1 means baseline-like behaviour.
pub fn nll(ll: f64, model: &RefModel) -> Result<f64, ScoreError> {
    normalise(ll, model.ll_ref_mean)
}

pub fn normalise(ll: f64, reference: f64) -> Result<f64, ScoreError> {
    if ll == 0.0 {
        return Err(ScoreError::ZeroLL);
    }
    Ok(reference / ll)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub n_games: usize,
    pub n_scored_games: usize,
    pub n_iki: usize,
    pub n_ptt: usize,
    pub location_fallback: bool,
    pub iterations: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefModel {
    pub iki: GammaParams,
    pub ptt: ExpParams,
    /// Mean per-game LL over the baseline set.
    pub ll_ref_mean: f64,
    /// Channel-only counterparts, for single-feature ablations.
    pub ll_ref_iki_mean: f64,
    pub ll_ref_ptt_mean: f64,
    pub meta: FitMetadata,
}

/// On-disk form of [`RefModel`].
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    k: f64,
    mu: f64,
    gamma_scale: f64,
    lambda_rate: f64,
    ll_ref_mean: f64,
    ll_ref_iki_mean: f64,
    ll_ref_ptt_mean: f64,
    fit: FitMetadata,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unsupported model schema version {0}")]
    Version(u32),
    #[error("model parameters out of range")]
    Invalid,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RefModel {
    /// Single-feature NLL for the IKI channel.
    pub fn nll_iki(&self, ll_iki: f64) -> Result<f64, ScoreError> {
        normalise(ll_iki, self.ll_ref_iki_mean)
    }

    pub fn nll_ptt(&self, ll_ptt: f64) -> Result<f64, ScoreError> {
        normalise(ll_ptt, self.ll_ref_ptt_mean)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            k: self.iki.k,
            mu: self.iki.mu,
            gamma_scale: self.iki.gamma_scale,
            lambda_rate: self.ptt.lambda_rate,
            ll_ref_mean: self.ll_ref_mean,
            ll_ref_iki_mean: self.ll_ref_iki_mean,
            ll_ref_ptt_mean: self.ll_ref_ptt_mean,
            fit: self.meta.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelFileError::Version(doc.schema_version));
        }
        if !(doc.k > 0.0 && doc.gamma_scale > 0.0 && doc.lambda_rate > 0.0 && doc.ll_ref_mean.is_finite()) {
            return Err(ModelFileError::Invalid);
        }
        Ok(Self {
            iki: GammaParams::new(doc.k, doc.mu, doc.gamma_scale),
            ptt: ExpParams::new(doc.lambda_rate),
            ll_ref_mean: doc.ll_ref_mean,
            ll_ref_iki_mean: doc.ll_ref_iki_mean,
            ll_ref_ptt_mean: doc.ll_ref_ptt_mean,
            meta: doc.fit,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelFileError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelFileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub const MIN_BASELINE_LOGS: usize = 4;

/// Fits the reference model from feature series of baseline games.
pub fn fit_reference_features(games: &[FeatureSeries]) -> Result<RefModel, FitError> {
    if games.len() < MIN_BASELINE_LOGS {
        return Err(FitError::TooFewLogs {
            needed: MIN_BASELINE_LOGS,
            got: games.len(),
        });
    }
    let iki: Vec<f64> = games.iter().flat_map(|g| g.iki_f64()).collect();
    let ptt: Vec<f64> = games.iter().flat_map(|g| g.ptt_f64()).collect();
    let gamma = fit_gamma(&iki)?;
    let exp = fit_exp(&ptt)?;
    let mut sums = (0.0, 0.0);
    let mut scored = 0usize;
    for g in games {
        if let (Ok(a), Ok(b)) = (ll_iki(g, &gamma.params), ll_ptt(g, &exp)) {
            sums.0 += a;
            sums.1 += b;
            scored += 1;
        }
    }
    if scored == 0 {
        return Err(FitError::NoScorableLogs);
    }
    let n = scored as f64;
    Ok(RefModel {
        iki: gamma.params,
        ptt: exp,
        ll_ref_mean: (sums.0 + sums.1) / n,
        ll_ref_iki_mean: sums.0 / n,
        ll_ref_ptt_mean: sums.1 / n,
        meta: FitMetadata {
            n_games: games.len(),
            n_scored_games: scored,
            n_iki: iki.len(),
            n_ptt: ptt.len(),
            location_fallback: gamma.location_fallback,
            iterations: gamma.iterations,
        },
    })
}

/// Fits the reference model from baseline game logs, pooling features.
pub fn fit_reference(baseline_logs: &[EventLog]) -> Result<RefModel, FitError> {
    let games: Vec<FeatureSeries> = baseline_logs.iter().map(FeatureSeries::from_log).collect();
    fit_reference_features(&games)
}

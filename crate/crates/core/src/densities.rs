//! Nominal pixel-intensity models: a Rayleigh density for clutter and a
//! Gaussian mixture for targets, with maximum-likelihood fitting.

use std::f64::consts::PI;

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::numerics::{DensityGrid, IntensityGrid};

/// Smallest admissible mixture-component standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Default number of mixture components.
pub const DEFAULT_COMPONENTS: usize = 3;

/// Mixture weights as published for the reference model (rounded).
pub const REFERENCE_WEIGHTS: [f64; 3] = [0.601, 0.212, 0.186];

const EM_RESTARTS: usize = 10;
const EM_MAX_ITERATIONS: usize = 500;
const EM_TOLERANCE: f64 = 1e-8;

/// A density that can be evaluated pointwise and integrated analytically.
pub trait NominalDensity {
    fn pdf(&self, x: f64) -> f64;
    /// Probability mass on `[lo, hi]`.
    fn mass_between(&self, lo: f64, hi: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRayleigh")]
pub struct RayleighParams {
    sigma0: f64,
}

#[derive(Deserialize)]
struct RawRayleigh {
    sigma0: f64,
}

impl TryFrom<RawRayleigh> for RayleighParams {
    type Error = Error;
    fn try_from(raw: RawRayleigh) -> Result<Self> {
        Self::new(raw.sigma0)
    }
}

impl RayleighParams {
    pub fn new(sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::Input(format!(
                "Rayleigh scale must be positive and finite, got {sigma0}"
            )));
        }
        Ok(Self { sigma0 })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Draws one sample by inverting the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        // 1 - u lies in (0, 1]
        self.sigma0 * (-2.0 * (1.0 - u).ln()).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x * x / (2.0 * self.sigma0 * self.sigma0)).exp()
        }
    }
}

/// Rayleigh density `x/σ0² · exp(−x²/(2σ0²))`.
pub fn rayleigh_pdf(params: &RayleighParams, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!(
            "Rayleigh density undefined at x = {x}"
        )));
    }
    Ok(rayleigh_unchecked(params.sigma0, x))
}

#[inline]
fn rayleigh_unchecked(sigma0: f64, x: f64) -> f64 {
    let s2 = sigma0 * sigma0;
    x / s2 * (-x * x / (2.0 * s2)).exp()
}

impl NominalDensity for RayleighParams {
    fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            rayleigh_unchecked(self.sigma0, x)
        }
    }

    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }
}

/// Gaussian mixture with `K` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct GaussianMixtureParams {
    weights: Vec<f64>,
    means: Vec<f64>,
    sigmas: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sigmas: Vec<f64>,
}

impl TryFrom<RawMixture> for GaussianMixtureParams {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        Self::new(raw.weights, raw.means, raw.sigmas)
    }
}

impl GaussianMixtureParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || sigmas.len() != k {
            return Err(Error::Input(format!(
                "mixture arrays must be non-empty and equally long (weights {}, means {}, sigmas {})",
                weights.len(),
                means.len(),
                sigmas.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Input("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Input("mixture means must be finite".into()));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Input(
                "mixture standard deviations must be positive".into(),
            ));
        }
        Ok(Self {
            weights,
            means,
            sigmas,
        })
    }

    /// Builds a mixture after rescaling the weights to sum to one.
    pub fn normalized(weights: Vec<f64>, means: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        Self::new(weights.iter().map(|w| w / total).collect(), means, sigmas)
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        self.means[k] + self.sigmas[k] * z
    }

    /// Total log-likelihood of `samples`.
    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.components()];
        samples
            .iter()
            .map(|&x| self.log_pdf_into(x, &mut buf))
            .sum()
    }

    // log p(x); leaves the per-component log terms in `buf`.
    fn log_pdf_into(&self, x: f64, buf: &mut [f64]) -> f64 {
        for k in 0..self.components() {
            buf[k] = self.weights[k].ln() + log_normal(x, self.means[k], self.sigmas[k]);
        }
        log_sum_exp(buf)
    }
}

#[inline]
fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

#[inline]
fn log_normal(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + erf((x - mu) / (sigma * std::f64::consts::SQRT_2)))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mixture density `Σ φ_k N(x | μ_k, σ_k²)`.
pub fn gmm_pdf(params: &GaussianMixtureParams, x: f64) -> f64 {
    params
        .weights
        .iter()
        .zip(&params.means)
        .zip(&params.sigmas)
        .map(|((w, m), s)| w * normal_pdf(x, *m, *s))
        .sum()
}

impl NominalDensity for GaussianMixtureParams {
    fn pdf(&self, x: f64) -> f64 {
        gmm_pdf(self, x)
    }

    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sigmas)
            .map(|((w, m), s)| w * (normal_cdf(hi, *m, *s) - normal_cdf(lo, *m, *s)))
            .sum()
    }
}

/// Clutter (H0) and target (H1) nominal models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalModel {
    pub h0: RayleighParams,
    pub h1: GaussianMixtureParams,
}

impl NominalModel {
    /// The fitted model reported for the low-roughness training data.
    ///
    /// The published weights are rounded and sum to 0.999; they are rescaled
    /// here so the mixture is a proper density.
    pub fn reference() -> Self {
        Self {
            h0: RayleighParams { sigma0: 0.025 },
            h1: GaussianMixtureParams::normalized(
                REFERENCE_WEIGHTS.to_vec(),
                vec![0.117, 0.430, 0.833],
                vec![0.050, 0.048, 0.088],
            )
            .expect("reference mixture is valid"),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parameter table in the layout used for reporting fitted models.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("sigma0      {:>8.4}\n", self.h0.sigma0));
        for (k, ((w, m), s)) in self
            .h1
            .weights
            .iter()
            .zip(&self.h1.means)
            .zip(&self.h1.sigmas)
            .enumerate()
        {
            out.push_str(&format!(
                "component {}  phi {:>7.4}  mu {:>7.4}  sigma {:>7.4}\n",
                k + 1,
                w,
                m,
                s
            ));
        }
        out
    }
}

const DENSITY_FLUSH: f64 = 1e-280;

/// A nominal density sampled on a grid, without renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    pub density: DensityGrid,
    /// Analytic probability mass falling outside the grid range.
    pub truncated_mass: f64,
}

pub fn to_grid<D: NominalDensity + ?Sized>(
    model: &D,
    grid: IntensityGrid,
) -> Result<GriddedDensity> {
    // flush values so small that scaling them would leave the normal range
    let density = DensityGrid::from_fn(grid, |x| {
        let v = model.pdf(x);
        if v < DENSITY_FLUSH {
            0.0
        } else {
            v
        }
    })?;
    let truncated_mass = (1.0 - model.mass_between(grid.lo(), grid.hi())).max(0.0);
    Ok(GriddedDensity {
        density,
        truncated_mass,
    })
}

/// Rayleigh maximum-likelihood estimate `σ̂0 = sqrt(Σ x² / (2N))`.
pub fn fit_rayleigh(samples: &[f64]) -> Result<RayleighParams> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!(
            "Rayleigh fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Fit(format!(
            "Rayleigh samples must be positive, found {x}"
        )));
    }
    let sum_sq: f64 = samples.iter().map(|x| x * x).sum();
    RayleighParams::new((sum_sq / (2.0 * samples.len() as f64)).sqrt())
        .map_err(|e| Error::Fit(e.to_string()))
}

/// Result of an EM run, including the per-iteration log-likelihood trace of
/// the selected restart.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: GaussianMixtureParams,
    pub log_likelihood: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Fits a `K`-component mixture by EM with seeded restarts.
pub fn fit_gmm(samples: &[f64], k: usize, seed: u64) -> Result<GaussianMixtureParams> {
    fit_gmm_traced(samples, k, seed).map(|f| f.params)
}

pub fn fit_gmm_traced(samples: &[f64], k: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::Fit("mixture needs at least one component".into()));
    }
    if samples.len() < 10 * k {
        return Err(Error::Fit(format!(
            "{} samples are too few for {k} components (need {})",
            samples.len(),
            10 * k
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Fit("non-finite training sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<GmmFit> = None;
    let mut collapses = 0;
    for restart in 0..EM_RESTARTS {
        let init = init_centers(samples, k, &mut rng);
        match run_em(samples, &init) {
            Some(fit) => {
                debug!(
                    "EM restart {restart}: log-likelihood {:.6} after {} iterations",
                    fit.log_likelihood, fit.iterations
                );
                if best
                    .as_ref()
                    .map_or(true, |b| fit.log_likelihood > b.log_likelihood)
                {
                    best = Some(fit);
                }
            }
            None => {
                collapses += 1;
                debug!("EM restart {restart}: component collapsed");
            }
        }
    }
    best.ok_or_else(|| Error::Fit(format!("all {collapses} EM restarts collapsed a component")))
}

// k-means++ seeding: first centre uniform, later ones with probability ∝ squared distance.
fn init_centers(samples: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = vec![*samples.choose(rng).expect("non-empty")];
    let mut d2: Vec<f64> = samples.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            *samples.choose(rng).expect("non-empty")
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = samples[samples.len() - 1];
            for (x, d) in samples.iter().zip(&d2) {
                if u < *d {
                    pick = *x;
                    break;
                }
                u -= d;
            }
            pick
        };
        centers.push(next);
        for (x, d) in samples.iter().zip(d2.iter_mut()) {
            *d = d.min((x - next).powi(2));
        }
    }
    centers
}

fn run_em(samples: &[f64], centers: &[f64]) -> Option<GmmFit> {
    let k = centers.len();
    let n = samples.len() as f64;

    // Hard assignment to the nearest centre gives the starting parameters.
    let mut counts = vec![0.0; k];
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for &x in samples {
        let j = (0..k)
            .min_by(|a, b| (x - centers[*a]).abs().total_cmp(&(x - centers[*b]).abs()))
            .expect("k >= 1");
        counts[j] += 1.0;
        sums[j] += x;
        sq[j] += x * x;
    }
    let overall_mean = samples.iter().sum::<f64>() / n;
    let overall_sd = (samples
        .iter()
        .map(|x| (x - overall_mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut sigmas = Vec::with_capacity(k);
    for j in 0..k {
        if counts[j] >= 2.0 {
            let m = sums[j] / counts[j];
            let v = (sq[j] / counts[j] - m * m).max(0.0);
            weights.push(counts[j] / n);
            means.push(m);
            sigmas.push(v.sqrt().max(overall_sd * 1e-3).max(SIGMA_FLOOR));
        } else {
            weights.push(1.0 / n);
            means.push(centers[j]);
            sigmas.push(overall_sd.max(SIGMA_FLOOR));
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut params = GaussianMixtureParams {
        weights,
        means,
        sigmas,
    };
    let mut resp = vec![0.0; samples.len() * k];
    let mut buf = vec![0.0; k];
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;

    for iteration in 0..EM_MAX_ITERATIONS {
        // E-step
        let mut ll = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let lse = params.log_pdf_into(x, &mut buf);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (buf[j] - lse).exp();
            }
        }
        trace.push(ll);
        if (ll - prev) / n < EM_TOLERANCE && iteration > 0 {
            return Some(GmmFit {
                log_likelihood: ll,
                params: sorted(params),
                trace,
                iterations: iteration,
            });
        }
        prev = ll;

        // M-step
        let mut nk = vec![0.0; k];
        let mut mk = vec![0.0; k];
        for (i, &x) in samples.iter().enumerate() {
            for j in 0..k {
                let r = resp[i * k + j];
                nk[j] += r;
                mk[j] += r * x;
            }
        }
        if nk.iter().any(|v| *v <= 0.0) {
            return None;
        }
        for j in 0..k {
            mk[j] /= nk[j];
        }
        let mut vk = vec![0.0; k];
        for (i, &x) in samples.iter().enumerate() {
            for j in 0..k {
                vk[j] += resp[i * k + j] * (x - mk[j]).powi(2);
            }
        }
        for j in 0..k {
            let sigma = (vk[j] / nk[j]).sqrt();
            if !(sigma >= SIGMA_FLOOR) {
                return None;
            }
            params.sigmas[j] = sigma;
            params.means[j] = mk[j];
            params.weights[j] = nk[j] / n;
        }
        let total: f64 = params.weights.iter().sum();
        params.weights.iter_mut().for_each(|w| *w /= total);
    }
    let ll = params.log_likelihood(samples);
    trace.push(ll);
    Some(GmmFit {
        log_likelihood: ll,
        params: sorted(params),
        trace,
        iterations: EM_MAX_ITERATIONS,
    })
}

// Components ordered by mean so that fits are comparable across runs.
fn sorted(p: GaussianMixtureParams) -> GaussianMixtureParams {
    let mut idx: Vec<usize> = (0..p.components()).collect();
    idx.sort_by(|a, b| p.means[*a].total_cmp(&p.means[*b]));
    GaussianMixtureParams {
        weights: idx.iter().map(|&i| p.weights[i]).collect(),
        means: idx.iter().map(|&i| p.means[i]).collect(),
        sigmas: idx.iter().map(|&i| p.sigmas[i]).collect(),
    }
}

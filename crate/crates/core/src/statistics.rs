//! Analytic statistics of the transfer efficiency over disorder.
//!
//! With energies scaled by the direct coupling (`Gamma~ = Gamma/2V`,
//! `Delta s~ = Delta s/2V`), the relative doublet shift follows a Cauchy
//! (Lorentzian) law of width `sigma~` and offset `s0~`. Pushing that law
//! through the transfer probability at the doublet energy yields a
//! closed-form density over `p` in (0, 1) with integrable inverse
//! square-root edge divergences, plus a closed-form fraction of
//! realizations whose resonances stay separated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default edge regularization for the efficiency density domain
/// `[delta, 1 - delta]`.
pub const DEFAULT_EDGE_DELTA: f64 = 1e-4;

/// Scaled control parameters: everything the efficiency statistics
/// depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    /// Channel coupling over doublet splitting, `Gamma / 2V`.
    pub gamma_tilde: f64,
    /// Width of the relative shift distribution.
    pub sigma_tilde: f64,
    /// Offset of the relative shift distribution.
    pub s0_tilde: f64,
}

impl ScaledParams {
    pub fn new(gamma_tilde: f64, sigma_tilde: f64, s0_tilde: f64) -> Result<Self> {
        if !(gamma_tilde.is_finite() && sigma_tilde.is_finite() && s0_tilde.is_finite()) {
            return Err(Error::InvalidParameter(
                "scaled parameters must be finite".into(),
            ));
        }
        if gamma_tilde <= 0.0 || sigma_tilde <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_tilde and sigma_tilde must be positive, got {gamma_tilde}, {sigma_tilde}"
            )));
        }
        Ok(ScaledParams {
            gamma_tilde,
            sigma_tilde,
            s0_tilde,
        })
    }

    /// Scaled parameters of the microscopic sampling model at channel
    /// coupling `gamma`.
    pub fn from_model(chi: f64, xi: f64, direct_coupling: f64, n_sites: usize, gamma: f64) -> Result<Self> {
        let (sigma_tilde, s0_tilde) = scaled_params_from_model(chi, xi, direct_coupling, n_sites)?;
        Self::new(gamma / (2.0 * direct_coupling), sigma_tilde, s0_tilde)
    }
}

/// Maps the microscopic scales onto the width and offset of the relative
/// shift distribution: `sigma~ = chi^2/(V xi)`, `s0~ = chi^2/(2 xi^2)`.
pub fn scaled_params_from_model(
    chi: f64,
    xi: f64,
    direct_coupling: f64,
    _n_sites: usize,
) -> Result<(f64, f64)> {
    if xi <= 0.0 || direct_coupling <= 0.0 {
        return Err(Error::InvalidParameter(
            "xi and the direct coupling must be positive".into(),
        ));
    }
    if chi <= 0.0 {
        return Err(Error::InvalidParameter(
            "chi = 0 leaves no shift fluctuations; the scaled law degenerates".into(),
        ));
    }
    Ok((
        chi * chi / (direct_coupling * xi),
        chi * chi / (2.0 * xi * xi),
    ))
}

/// Left side of the dominant-doublet budget `(2/pi)^{3/2} sqrt(N/2 - 1) chi/xi`.
pub fn doublet_bound_lhs(chi: f64, xi: f64, n_sites: usize) -> f64 {
    let m = n_sites as f64 / 2.0 - 1.0;
    (2.0 / std::f64::consts::PI).powf(1.5) * m.sqrt() * chi / xi
}

/// Whether the coupling scales satisfy the dominant-doublet budget.
pub fn dominant_doublet_bound(chi: f64, xi: f64, n_sites: usize, epsilon_budget: f64) -> bool {
    doublet_bound_lhs(chi, xi, n_sites) < epsilon_budget
}

/// Largest `chi` satisfying the budget with equality.
pub fn chi_for_epsilon(xi: f64, n_sites: usize, epsilon_budget: f64) -> f64 {
    let m = n_sites as f64 / 2.0 - 1.0;
    epsilon_budget * xi / ((2.0 / std::f64::consts::PI).powf(1.5) * m.sqrt())
}

// ---------------------------------------------------------------------------
// Cauchy law of the relative shift
// ---------------------------------------------------------------------------

/// Density of the relative doublet shift.
pub fn cauchy_pdf(delta_s_tilde: f64, sigma_tilde: f64, s0_tilde: f64) -> f64 {
    let d = delta_s_tilde - s0_tilde;
    sigma_tilde / (std::f64::consts::PI * (sigma_tilde * sigma_tilde + d * d))
}

pub fn cauchy_cdf(delta_s_tilde: f64, sigma_tilde: f64, s0_tilde: f64) -> f64 {
    0.5 + ((delta_s_tilde - s0_tilde) / sigma_tilde).atan() / std::f64::consts::PI
}

/// Inverse-CDF transform, `u` in the open interval (0, 1).
pub fn cauchy_quantile(u: f64, sigma_tilde: f64, s0_tilde: f64) -> f64 {
    s0_tilde + sigma_tilde * (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Draws one relative shift by the inverse-CDF transform (deterministic
/// under a seeded stream).
pub fn sample_cauchy<R: Rng + ?Sized>(rng: &mut R, sigma_tilde: f64, s0_tilde: f64) -> f64 {
    let u: f64 = rng.sample(rand::distributions::Open01);
    cauchy_quantile(u, sigma_tilde, s0_tilde)
}

// ---------------------------------------------------------------------------
// Separated-resonance fraction and efficiency density
// ---------------------------------------------------------------------------

/// Probability that the resonances stay separated,
/// `Prob(Gamma~ < |1 + Delta s~|)` under the Cauchy shift law.
pub fn efficient_fraction(gamma_tilde: f64, sigma_tilde: f64, s0_tilde: f64) -> f64 {
    let pi = std::f64::consts::PI;
    1.0 - ((gamma_tilde - 1.0 - s0_tilde) / sigma_tilde).atan() / pi
        - ((gamma_tilde + 1.0 + s0_tilde) / sigma_tilde).atan() / pi
}

/// Transfer probability at the doublet energy for a given relative shift:
/// `(1 + ds)^2 / ((1 + ds)^2 + Gamma~^2/4)`.
pub fn approx_p_at_doublet_energy(delta_s_tilde: f64, gamma_tilde: f64) -> f64 {
    let y = 1.0 + delta_s_tilde;
    let y2 = y * y;
    y2 / (y2 + gamma_tilde * gamma_tilde / 4.0)
}

/// Cumulative distribution of the transfer probability inherited from the
/// Cauchy shift law, `Prob(p <= t)`. Exact pushforward of the shift CDF;
/// useful both as an oracle for the density and for per-bin masses.
pub fn efficiency_cdf(t: f64, sp: &ScaledParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let y = 0.5 * sp.gamma_tilde * (t / (1.0 - t)).sqrt();
    cauchy_cdf(y - 1.0, sp.sigma_tilde, sp.s0_tilde)
        - cauchy_cdf(-y - 1.0, sp.sigma_tilde, sp.s0_tilde)
}

/// Density of transfer probabilities on `[delta, 1 - delta]`.
///
/// The edge divergences at 0 and 1 are integrable artefacts of the
/// power-law shift statistics; values outside the regularized domain are
/// rejected.
pub fn efficiency_density(p: f64, sp: &ScaledParams, delta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "edge delta must be in (0, 0.5), got {delta}"
        )));
    }
    if p < delta || p > 1.0 - delta {
        return Err(Error::OutOfDomain(format!(
            "p = {p} outside [{delta}, {}]",
            1.0 - delta
        )));
    }
    let pi = std::f64::consts::PI;
    let g = sp.gamma_tilde;
    let root = (p / (1.0 - p)).sqrt();
    let prefactor = g / (4.0 * pi * (p * (1.0 - p).powi(3)).sqrt());
    let lorentz = |x: f64| sp.sigma_tilde / (sp.sigma_tilde * sp.sigma_tilde + x * x);
    Ok(prefactor
        * (lorentz(1.0 + sp.s0_tilde - 0.5 * g * root) + lorentz(1.0 + sp.s0_tilde + 0.5 * g * root)))
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

/// Fixed-bin histogram with a density normalized over the in-range samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `counts / (total_in_range * bin_width)`.
    pub normalized_density: Vec<f64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    /// Merges counts from a histogram with identical binning (for
    /// combining partial histograms from parallel workers).
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::DimensionMismatch(
                "histograms have different binning".into(),
            ));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.renormalize();
        Ok(())
    }

    fn renormalize(&mut self) {
        let total = self.total_count() as f64;
        let w = self.bin_width();
        self.normalized_density = self
            .counts
            .iter()
            .map(|&c| {
                if total > 0.0 {
                    c as f64 / (total * w)
                } else {
                    0.0
                }
            })
            .collect();
    }
}

/// Bins the in-range samples of `samples` into `n_bins` uniform bins.
pub fn make_histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if samples.is_empty() {
        return Err(Error::EmptyInput("histogram samples".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be >= 1".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::InvalidParameter(format!(
            "invalid histogram range [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        if x < lo || x > hi || !x.is_finite() {
            continue;
        }
        let idx = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyInput("no samples inside the range".into()));
    }
    let mut h = Histogram {
        bin_edges,
        counts,
        normalized_density: vec![],
    };
    h.renormalize();
    Ok(h)
}

/// Linear-interpolation quantile of already-sorted data.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Half the interquartile range: a heavy-tail-robust width estimator that
/// equals `sigma~` exactly for Cauchy samples.
pub fn half_iqr(samples: &[f64]) -> Option<f64> {
    if samples.len() < 4 {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(0.5 * (sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25)))
}

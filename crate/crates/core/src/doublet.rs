//! Dominant-doublet perturbation theory.
//!
//! When the closed network has two eigenstates close to
//! `(|in> +/- |out>)/sqrt(2)`, the scattering amplitude between the
//! channels collapses to a two-pole form
//!
//! ```text
//! S(E) ~ -i(Gamma/2) [ 1/(E - Ep) - 1/(E - Em) ],
//! Ep/m = E' +/- V + s_pm - i Gamma/2,
//! ```
//!
//! with level shifts `s_pm` obtained at lowest order from the coupling of
//! each doublet partner to its symmetry sector's bulk states. Everything
//! downstream — transfer profiles, peak positions, dwell times and the
//! efficiency statistics — follows from the two shifted poles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{decompose_symmetry, NetworkHamiltonian, Sector, SymmetryBlocks};
use crate::numerics::sym_eigen;
use crate::scattering::AMPLITUDE_FLOOR;

/// Relative threshold (in units of the block energy scale) below which a
/// perturbation denominator counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Resonance overlap regime, classified by `Gamma` against the shifted
/// splitting `|2V + Delta s|`: two unit-height peaks when the coupling is
/// weaker than the splitting, one merged peak at the boundary, suppressed
/// transfer beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Separated,
    Merged,
    Overlapping,
}

/// Lowest-order description of one network realization.
#[derive(Debug, Clone, Serialize)]
pub struct DoubletAnalysis {
    /// Doublet quality: overlap deficit of the worst sector, in `[0, 1]`.
    pub epsilon: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    /// `s_plus - s_minus`.
    pub delta_s: f64,
    /// `(s_plus + s_minus) / 2`.
    pub s_bar: f64,
    /// Realized on-site energy `E'`.
    pub e_prime: f64,
    /// Direct input-output coupling `V`.
    pub direct_coupling: f64,
    /// Channel coupling `Gamma` used for classification.
    pub gamma: f64,
    /// Energies maximising the predicted transfer probability
    /// (two when separated, one otherwise), ascending.
    pub resonance_energies: Vec<f64>,
    pub regime: Regime,
}

/// Overlap deficit `1 - |<eta|+->|^2` of the best eigenstate in one
/// sector; the sector matrix is diagonalized directly, so the doublet
/// coordinate is its first component.
fn sector_quality(blocks: &SymmetryBlocks, sector: Sector) -> Result<f64> {
    let m = blocks.sector_matrix(sector);
    let (_, vecs) = sym_eigen(&m)?;
    let dim = m.dim();
    let mut best = 0.0f64;
    for j in 0..dim {
        best = best.max(vecs[[0, j]] * vecs[[0, j]]);
    }
    Ok((1.0 - best).max(0.0))
}

/// Doublet quality `epsilon`: the worst of the two sectors' overlap
/// deficits, so "dominant doublet" means `epsilon` small in both.
pub fn doublet_quality(h: &NetworkHamiltonian) -> Result<f64> {
    let blocks = decompose_symmetry(h)?;
    let plus = sector_quality(&blocks, Sector::Plus)?;
    let minus = sector_quality(&blocks, Sector::Minus)?;
    Ok(plus.max(minus))
}

fn sector_shift(blocks: &SymmetryBlocks, sector: Sector) -> Result<f64> {
    let e0 = blocks.doublet_energy(sector);
    let coupling = blocks.coupling(sector);
    let (levels, vecs) = sym_eigen(blocks.block(sector))?;
    let threshold = DEGENERACY_THRESHOLD * blocks.degeneracy_scale;
    let mut shift = 0.0;
    for (i, &level) in levels.iter().enumerate() {
        let denom = e0 - level;
        if denom.abs() < threshold {
            return Err(Error::NearDegenerate {
                denominator: denom.abs(),
                threshold,
            });
        }
        let overlap: f64 = coupling
            .iter()
            .zip(vecs.column(i).iter())
            .map(|(a, b)| a * b)
            .sum();
        shift += overlap * overlap / denom;
    }
    Ok(shift)
}

/// Lowest-order level shifts `(s_plus, s_minus)` of the doublet energies,
/// summed over the matching sector's bulk eigenpairs. Rejects the
/// realization when a denominator is near-degenerate.
pub fn perturbative_shifts(blocks: &SymmetryBlocks) -> Result<(f64, f64)> {
    Ok((
        sector_shift(blocks, Sector::Plus)?,
        sector_shift(blocks, Sector::Minus)?,
    ))
}

/// Energies maximising the two-pole transfer probability: the midpoint
/// `E' + s_bar` once the poles overlap, otherwise split symmetrically by
/// `sqrt((2V + Delta s)^2 - Gamma^2)`.
pub fn resonance_energies(
    e_prime: f64,
    direct_coupling: f64,
    s_plus: f64,
    s_minus: f64,
    gamma: f64,
) -> Vec<f64> {
    let s_bar = 0.5 * (s_plus + s_minus);
    let splitting = 2.0 * direct_coupling + (s_plus - s_minus);
    let center = e_prime + s_bar;
    if gamma >= splitting.abs() {
        vec![center]
    } else {
        let half = 0.5 * (splitting * splitting - gamma * gamma).sqrt();
        vec![center - half, center + half]
    }
}

pub fn classify_regime(gamma: f64, splitting: f64) -> Regime {
    if gamma < splitting.abs() {
        Regime::Separated
    } else if gamma == splitting.abs() {
        Regime::Merged
    } else {
        Regime::Overlapping
    }
}

/// Full lowest-order analysis of one realization at channel coupling `gamma`.
pub fn analyze(h: &NetworkHamiltonian, gamma: f64) -> Result<DoubletAnalysis> {
    let blocks = decompose_symmetry(h)?;
    let (s_plus, s_minus) = perturbative_shifts(&blocks)?;
    let epsilon = doublet_quality(h)?;
    let e_prime = h.onsite_energy();
    let v = h.direct_coupling();
    let delta_s = s_plus - s_minus;
    Ok(DoubletAnalysis {
        epsilon,
        s_plus,
        s_minus,
        delta_s,
        s_bar: 0.5 * (s_plus + s_minus),
        e_prime,
        direct_coupling: v,
        gamma,
        resonance_energies: resonance_energies(e_prime, v, s_plus, s_minus, gamma),
        regime: classify_regime(gamma, 2.0 * v + delta_s),
    })
}

/// Two-pole approximation of `S_in->out(E)`.
pub fn approx_s_element(
    e_prime: f64,
    direct_coupling: f64,
    s_plus: f64,
    s_minus: f64,
    gamma: f64,
    energy: f64,
) -> Complex64 {
    let pole_plus = Complex64::new(e_prime + direct_coupling + s_plus, -gamma / 2.0);
    let pole_minus = Complex64::new(e_prime - direct_coupling + s_minus, -gamma / 2.0);
    let e = Complex64::new(energy, 0.0);
    Complex64::new(0.0, -gamma / 2.0) * ((e - pole_plus).finv() - (e - pole_minus).finv())
}

/// Two-pole approximation of the transfer probability,
/// `(Gamma^2/4)(2V + Delta s)^2` over the product of the two shifted
/// Lorentzian denominators.
pub fn approx_transfer_probability(
    e_prime: f64,
    direct_coupling: f64,
    s_plus: f64,
    s_minus: f64,
    gamma: f64,
    energy: f64,
) -> f64 {
    let splitting = 2.0 * direct_coupling + (s_plus - s_minus);
    let g2 = gamma * gamma / 4.0;
    let upper = e_prime + direct_coupling + s_plus - energy;
    let lower = e_prime - direct_coupling + s_minus - energy;
    g2 * splitting * splitting / ((lower * lower + g2) * (upper * upper + g2))
}

/// Two-pole approximation of the dwell time. Differentiating the two-pole
/// amplitude collapses the logarithmic derivative to `1/u + 1/w` over the
/// pole distances, giving a sum of two Lorentzians of width `Gamma/2`.
pub fn approx_dwell_time(
    e_prime: f64,
    direct_coupling: f64,
    s_plus: f64,
    s_minus: f64,
    gamma: f64,
    energy: f64,
) -> Result<f64> {
    let amp = approx_s_element(e_prime, direct_coupling, s_plus, s_minus, gamma, energy);
    if amp.norm() <= AMPLITUDE_FLOOR {
        return Err(Error::VanishingAmplitude {
            amplitude: amp.norm(),
        });
    }
    let g2 = gamma * gamma / 4.0;
    let upper = energy - (e_prime + direct_coupling + s_plus);
    let lower = energy - (e_prime - direct_coupling + s_minus);
    Ok(0.5 * gamma * (1.0 / (upper * upper + g2) + 1.0 / (lower * lower + g2)))
}

impl DoubletAnalysis {
    /// Shifted doublet splitting `2V + Delta s`.
    pub fn splitting(&self) -> f64 {
        2.0 * self.direct_coupling + self.delta_s
    }

    pub fn approx_s_element(&self, energy: f64) -> Complex64 {
        approx_s_element(
            self.e_prime,
            self.direct_coupling,
            self.s_plus,
            self.s_minus,
            self.gamma,
            energy,
        )
    }

    pub fn approx_transfer_probability(&self, energy: f64) -> f64 {
        approx_transfer_probability(
            self.e_prime,
            self.direct_coupling,
            self.s_plus,
            self.s_minus,
            self.gamma,
            energy,
        )
    }

    pub fn approx_dwell_time(&self, energy: f64) -> Result<f64> {
        approx_dwell_time(
            self.e_prime,
            self.direct_coupling,
            self.s_plus,
            self.s_minus,
            self.gamma,
            energy,
        )
    }

    /// Predicted transfer probability at the resonance energies: 1 on
    /// split resonances, the merged-peak value otherwise.
    pub fn predicted_peak_probability(&self) -> f64 {
        match self.regime {
            Regime::Separated => 1.0,
            _ => {
                let d = self.splitting();
                let g = self.gamma;
                4.0 * g * g * d * d / ((g * g + d * d) * (g * g + d * d))
            }
        }
    }

    /// Predicted dwell time at the resonance energies: `2/Gamma` on split
    /// resonances, `4 Gamma / (Gamma^2 + (2V + Delta s)^2)` when merged.
    pub fn predicted_peak_dwell(&self) -> f64 {
        match self.regime {
            Regime::Separated => 2.0 / self.gamma,
            _ => {
                let d = self.splitting();
                4.0 * self.gamma / (self.gamma * self.gamma + d * d)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_deterministic, sample_random, NetworkParams};
    use crate::numerics::RealSymMatrix;
    use crate::scattering::{s_matrix, ChannelCoupling};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dimer(e_prime: f64, v: f64) -> NetworkHamiltonian {
        let params = NetworkParams {
            n_sites: 2,
            onsite_energy: e_prime,
            direct_coupling: v,
            bulk_scale: 0.0,
            link_scale: 0.0,
            sample_onsite: false,
        };
        build_deterministic(&params, &[], &RealSymMatrix::zeros(0)).unwrap()
    }

    fn four_site(e_prime: f64, v: f64, a: f64, b: f64, c: f64, d: f64) -> NetworkHamiltonian {
        let params = NetworkParams {
            n_sites: 4,
            onsite_energy: e_prime,
            direct_coupling: v,
            bulk_scale: 0.0,
            link_scale: 0.0,
            sample_onsite: false,
        };
        let bulk = RealSymMatrix::new(array![[c, d], [d, c]]).unwrap();
        build_deterministic(&params, &[a, b], &bulk).unwrap()
    }

    /// Parameters of the narrow-coupling ten-site ensemble used in the
    /// regime studies: V = 0.01, xi = 10, chi = 1.
    fn ten_site_params() -> NetworkParams {
        NetworkParams {
            n_sites: 10,
            onsite_energy: 0.0,
            direct_coupling: 0.01,
            bulk_scale: 10.0,
            link_scale: 1.0,
            sample_onsite: false,
        }
    }

    #[test]
    fn dimer_quality_is_exact() {
        let h = dimer(0.0, 1.0);
        assert_eq!(doublet_quality(&h).unwrap(), 0.0);
    }

    #[test]
    fn decoupled_links_give_perfect_doublet() {
        let h = four_site(0.0, 1.0, 0.0, 0.0, 0.8, 0.3);
        assert!(doublet_quality(&h).unwrap() <= 1e-12);
        let blocks = decompose_symmetry(&h).unwrap();
        let (sp, sm) = perturbative_shifts(&blocks).unwrap();
        assert_eq!(sp, 0.0);
        assert_eq!(sm, 0.0);
    }

    #[test]
    fn dimer_shifts_are_zero() {
        let blocks = decompose_symmetry(&dimer(0.3, 1.2)).unwrap();
        assert_eq!(perturbative_shifts(&blocks).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn single_pair_shift_hand_check() {
        // one bulk pair: s_plus = (a+b)^2 / (E'+V - (c+d)),
        //                s_minus = (a-b)^2 / (E'-V - (c-d))
        let (e_prime, v, a, b, c, d) = (0.1, 1.0, 0.3, -0.2, 2.0, 0.5);
        let h = four_site(e_prime, v, a, b, c, d);
        let blocks = decompose_symmetry(&h).unwrap();
        let (sp, sm) = perturbative_shifts(&blocks).unwrap();
        let sp_hand = (a + b) * (a + b) / (e_prime + v - (c + d));
        let sm_hand = (a - b) * (a - b) / (e_prime - v - (c - d));
        assert_abs_diff_eq!(sp, sp_hand, epsilon = 1e-14);
        assert_abs_diff_eq!(sm, sm_hand, epsilon = 1e-14);
    }

    #[test]
    fn shifts_scale_quadratically_in_links() {
        let h1 = four_site(0.0, 1.0, 0.3, -0.2, 2.0, 0.5);
        let h2 = four_site(0.0, 1.0, 0.6, -0.4, 2.0, 0.5);
        let (sp1, sm1) = perturbative_shifts(&decompose_symmetry(&h1).unwrap()).unwrap();
        let (sp2, sm2) = perturbative_shifts(&decompose_symmetry(&h2).unwrap()).unwrap();
        assert_abs_diff_eq!(sp2, 4.0 * sp1, epsilon = 1e-13);
        assert_abs_diff_eq!(sm2, 4.0 * sm1, epsilon = 1e-13);
    }

    #[test]
    fn near_degenerate_denominator_is_rejected() {
        // c + d == E' + V makes the plus-sector denominator vanish
        let h = four_site(0.0, 1.0, 0.1, 0.2, 0.7, 0.3);
        let blocks = decompose_symmetry(&h).unwrap();
        match perturbative_shifts(&blocks) {
            Err(Error::NearDegenerate { .. }) => {}
            other => panic!("expected NearDegenerate, got {other:?}"),
        }
    }

    #[test]
    fn approx_s_is_zero_without_coupling() {
        assert_eq!(
            approx_s_element(0.0, 1.0, 0.1, -0.1, 0.0, 0.5).norm(),
            0.0
        );
    }

    #[test]
    fn approx_s_decays_far_from_the_poles() {
        let (sp, sm, gamma, v): (f64, f64, f64, f64) = (0.2, -0.1, 0.8, 1.0);
        let width = (2.0 * v + (sp - sm)).abs() + gamma;
        let far = 100.0 * width;
        let elem = approx_s_element(0.0, v, sp, sm, gamma, far).norm();
        assert!(elem <= 0.02, "far-field amplitude {elem}");
    }

    #[test]
    fn split_resonance_probability_is_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let e_prime: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(0.05..2.0);
            let sp: f64 = rng.gen_range(-0.5..0.5);
            let sm: f64 = rng.gen_range(-0.5..0.5);
            let splitting = (2.0 * v + sp - sm).abs();
            let gamma = rng.gen_range(0.01..0.99) * splitting;
            for e in resonance_energies(e_prime, v, sp, sm, gamma) {
                let p = approx_transfer_probability(e_prime, v, sp, sm, gamma, e);
                assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_probability_closed_form() {
        let (e_prime, v, sp, sm, gamma): (f64, f64, f64, f64, f64) = (0.3, 1.0, 0.25, -0.15, 1.2);
        let d = 2.0 * v + sp - sm;
        let e = e_prime + 0.5 * (sp + sm);
        let expected = 4.0 * gamma * gamma * d * d / ((gamma * gamma + d * d).powi(2));
        assert_abs_diff_eq!(
            approx_transfer_probability(e_prime, v, sp, sm, gamma, e),
            expected,
            epsilon = 1e-13
        );
        // dimer at matched coupling: Gamma = 2V gives certain transfer
        assert_abs_diff_eq!(
            approx_transfer_probability(0.0, 1.0, 0.0, 0.0, 2.0, 0.0),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn dwell_time_closed_forms_on_resonance() {
        let (e_prime, v, sp, sm) = (0.1, 1.0, 0.2, -0.3);
        let d = 2.0 * v + sp - sm;
        // split resonances: exactly 2/Gamma
        for gamma in [0.1, 0.5, 0.9 * d] {
            for e in resonance_energies(e_prime, v, sp, sm, gamma) {
                let tau = approx_dwell_time(e_prime, v, sp, sm, gamma, e).unwrap();
                assert_abs_diff_eq!(tau, 2.0 / gamma, epsilon = 1e-12 / gamma);
            }
        }
        // merged: 4 Gamma / (Gamma^2 + D^2)
        for gamma in [d, 1.5 * d, 4.0 * d] {
            let e = e_prime + 0.5 * (sp + sm);
            let tau = approx_dwell_time(e_prime, v, sp, sm, gamma, e).unwrap();
            assert_abs_diff_eq!(tau, 4.0 * gamma / (gamma * gamma + d * d), epsilon = 1e-12);
        }
    }

    #[test]
    fn on_resonance_dwell_stays_in_bracket() {
        // 2/Gamma <= tau <= 4/Gamma at every predicted resonance energy
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let v: f64 = rng.gen_range(0.05..2.0);
            let sp: f64 = rng.gen_range(-0.5..0.5);
            let sm: f64 = rng.gen_range(-0.5..0.5);
            let gamma: f64 = rng.gen_range(0.01..3.0);
            for e in resonance_energies(0.0, v, sp, sm, gamma) {
                let tau = approx_dwell_time(0.0, v, sp, sm, gamma, e).unwrap();
                assert!(tau >= 2.0 / gamma - 1e-9);
                assert!(tau <= 4.0 / gamma + 1e-9);
            }
        }
    }

    #[test]
    fn expanded_rational_form_matches_derivative_form() {
        // The fully expanded rational expression for the two-pole dwell
        // time, kept here as an independent transcription; it agrees with
        // the derivative-based implementation on random parameter sets.
        fn expanded(e_prime: f64, v: f64, sp: f64, sm: f64, g: f64, e: f64) -> f64 {
            let den_m = g * g + 4.0 * (e_prime + sm - v - e).powi(2);
            let den_p = g * g + 4.0 * (e_prime + sp + v - e).powi(2);
            let first = (g * g + 4.0 * e_prime * e_prime + 4.0 * e_prime * (sm + sp - 2.0 * e))
                / den_m
                * (4.0 * g / den_p);
            let second = ((-2.0 * sm * (v + e) + sm * sm + sp * sp) / den_m
                + 2.0 * (v * (sp + v) - sp * e + e * e) / den_m)
                * (8.0 * g / den_p);
            first + second
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let e_prime: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(0.1..2.0);
            let sp: f64 = rng.gen_range(-0.5..0.5);
            let sm: f64 = rng.gen_range(-0.5..0.5);
            let g: f64 = rng.gen_range(0.05..3.0);
            let e: f64 = rng.gen_range(-4.0..4.0);
            let tau = approx_dwell_time(e_prime, v, sp, sm, g, e).unwrap();
            let long = expanded(e_prime, v, sp, sm, g, e);
            assert!(
                (tau - long).abs() <= 1e-10 * tau.abs().max(1.0),
                "mismatch: {tau} vs {long}"
            );
        }
    }

    #[test]
    fn resonance_energy_cases() {
        // dimer, Gamma < 2V: +/- sqrt(4V^2 - Gamma^2)/2
        let es = resonance_energies(0.0, 1.0, 0.0, 0.0, 0.5);
        let half = 0.5 * (4.0f64 - 0.25).sqrt();
        assert_eq!(es.len(), 2);
        assert_abs_diff_eq!(es[0], -half, epsilon = 1e-14);
        assert_abs_diff_eq!(es[1], half, epsilon = 1e-14);
        // boundary: single merged energy at E' + s_bar
        let es = resonance_energies(0.2, 1.0, 0.1, -0.1, 2.2);
        assert_eq!(es, vec![0.2]);
    }

    #[test]
    fn regime_classification() {
        assert_eq!(classify_regime(0.5, 2.0), Regime::Separated);
        assert_eq!(classify_regime(2.0, 2.0), Regime::Merged);
        assert_eq!(classify_regime(2.5, 2.0), Regime::Overlapping);
        assert_eq!(classify_regime(0.5, -2.0), Regime::Separated);
    }

    #[test]
    fn analyze_dimer() {
        let h = dimer(0.0, 1.0);
        let a = analyze(&h, 0.5).unwrap();
        assert_eq!(a.epsilon, 0.0);
        assert_eq!(a.s_plus, 0.0);
        assert_eq!(a.delta_s, 0.0);
        assert_eq!(a.regime, Regime::Separated);
        assert_eq!(a.resonance_energies.len(), 2);
        assert_abs_diff_eq!(a.predicted_peak_probability(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.predicted_peak_dwell(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn approximation_tracks_exact_profile_for_good_doublets() {
        let params = ten_site_params();
        let gamma = 0.2;
        let c = ChannelCoupling::symmetric(gamma).unwrap();
        let mut checked = 0;
        for seed in 0..3000 {
            let h = sample_random(&params, seed).unwrap();
            let analysis = match analyze(&h, gamma) {
                Ok(a) => a,
                Err(_) => continue,
            };
            if analysis.epsilon >= 0.01 {
                continue;
            }
            checked += 1;
            let center = analysis.e_prime + analysis.s_bar;
            let width = 3.0 * (analysis.splitting().abs() + gamma);
            let mut max_dev = 0.0f64;
            for k in 0..200 {
                let e = center - width + 2.0 * width * (k as f64) / 199.0;
                let exact = s_matrix(&h, &c, e).unwrap().as_array()[[0, 1]].norm_sqr();
                let approx = analysis.approx_transfer_probability(e);
                max_dev = max_dev.max((exact - approx).abs());
            }
            assert!(
                max_dev < 10.0 * analysis.epsilon.max(1e-4),
                "seed {seed}: dev {max_dev:.3e} vs eps {:.3e}",
                analysis.epsilon
            );
            if checked >= 25 {
                break;
            }
        }
        assert!(checked >= 20, "only {checked} good-doublet draws found");
    }
}

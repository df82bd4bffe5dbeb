//! Exact open-system scattering quantities.
//!
//! The network is opened by coupling the input and output sites to one
//! scattering channel each, giving the non-Hermitian matrix
//! `H_eff = H - i(Gamma/2)|in><in| - i(Gamma'/2)|out><out|` and the
//! two-channel scattering matrix `S(E) = 1 - 2i W^T (E - H_eff)^{-1} W`.
//! `S` is evaluated by a linear solve per energy rather than by
//! pre-diagonalization; the energy derivative needed for dwell times uses
//! the exact resolvent-squared identity `dS/dE = 2i W^T (E - H_eff)^{-2} W`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::network::NetworkHamiltonian;
use crate::numerics::{eig_complex, lu_factor, ComplexMatrix, LuFactors, Spectrum, Tolerances};

/// Amplitudes below this are treated as a vanishing S-matrix element.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

/// Channel coupling strengths. The centrosymmetric model requires equal
/// input and output couplings; the constructor enforces that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelCoupling {
    gamma_in: f64,
    gamma_out: f64,
}

impl ChannelCoupling {
    /// Equal coupling `Gamma` on both channels.
    pub fn symmetric(gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma)
    }

    pub fn new(gamma_in: f64, gamma_out: f64) -> Result<Self> {
        if !gamma_in.is_finite() || !gamma_out.is_finite() || gamma_in < 0.0 || gamma_out < 0.0 {
            return Err(Error::InvalidParameter(
                "channel couplings must be finite and non-negative".into(),
            ));
        }
        if gamma_in != gamma_out {
            return Err(Error::InvalidParameter(format!(
                "centrosymmetric model requires gamma_in == gamma_out, got {gamma_in} vs {gamma_out}"
            )));
        }
        Ok(ChannelCoupling {
            gamma_in,
            gamma_out,
        })
    }

    pub fn gamma_in(&self) -> f64 {
        self.gamma_in
    }

    pub fn gamma_out(&self) -> f64 {
        self.gamma_out
    }

    /// Site indices carrying the channels: input at 0, output at `N-1`.
    pub fn sites(&self, n_sites: usize) -> (usize, usize) {
        (0, n_sites - 1)
    }
}

/// Channel coupling operator `W` as an `N x 2` real matrix: column 0
/// feeds the input site with `sqrt(Gamma/2)`, column 1 the output site.
pub fn coupling_operator(n_sites: usize, c: &ChannelCoupling) -> Array2<f64> {
    let mut w = Array2::zeros((n_sites, 2));
    w[[0, 0]] = (c.gamma_in / 2.0).sqrt();
    w[[n_sites - 1, 1]] = (c.gamma_out / 2.0).sqrt();
    w
}

/// `H_eff = H - i (Gamma/2) |in><in| - i (Gamma'/2) |out><out|`.
pub fn effective_hamiltonian(h: &NetworkHamiltonian, c: &ChannelCoupling) -> ComplexMatrix {
    let n = h.n_sites();
    let mut m = h.matrix().to_complex().into_array();
    m[[0, 0]] += Complex64::new(0.0, -c.gamma_in / 2.0);
    m[[n - 1, n - 1]] += Complex64::new(0.0, -c.gamma_out / 2.0);
    ComplexMatrix::new(m).expect("finite by construction")
}

fn complex_coupling(n: usize, c: &ChannelCoupling) -> Array2<Complex64> {
    coupling_operator(n, c).mapv(|x| Complex64::new(x, 0.0))
}

/// `E - H_eff`, factorized once so both `S` and `dS/dE` reuse it.
fn resolvent_factors(
    h: &NetworkHamiltonian,
    c: &ChannelCoupling,
    energy: f64,
) -> Result<LuFactors> {
    let n = h.n_sites();
    let heff = effective_hamiltonian(h, c);
    let mut m = heff.into_array();
    m.mapv_inplace(|z| -z);
    for i in 0..n {
        m[[i, i]] += Complex64::new(energy, 0.0);
    }
    lu_factor(m.view(), Tolerances::default().pivot)
}

fn s_from_solution(w: &Array2<Complex64>, x: &Array2<Complex64>) -> Array2<Complex64> {
    let two_i = Complex64::new(0.0, 2.0);
    let mut s = Array2::eye(2).mapv(|v: f64| Complex64::new(v, 0.0));
    let wx = w.t().dot(x);
    s.zip_mut_with(&wx, |sij, &wij| *sij -= two_i * wij);
    s
}

/// Full two-channel scattering matrix at real energy `E`, unitary and
/// symmetric (reciprocal) for any `Gamma >= 0`.
pub fn s_matrix(h: &NetworkHamiltonian, c: &ChannelCoupling, energy: f64) -> Result<ComplexMatrix> {
    let w = complex_coupling(h.n_sites(), c);
    let f = resolvent_factors(h, c, energy)?;
    let x = f.solve(w.view());
    ComplexMatrix::new(s_from_solution(&w, &x))
}

/// `|S_in->out(E)|^2`.
pub fn transfer_probability(
    h: &NetworkHamiltonian,
    c: &ChannelCoupling,
    energy: f64,
) -> Result<f64> {
    let s = s_matrix(h, c, energy)?;
    Ok(s.as_array()[[0, 1]].norm_sqr())
}

/// One evaluated grid point of `S`, its energy derivative, and the
/// derived per-channel quantities.
struct PointEval {
    s: Array2<Complex64>,
    ds: Array2<Complex64>,
}

fn eval_point(h: &NetworkHamiltonian, c: &ChannelCoupling, energy: f64) -> Result<PointEval> {
    let w = complex_coupling(h.n_sites(), c);
    let f = resolvent_factors(h, c, energy)?;
    let x = f.solve(w.view());
    let y = f.solve(x.view());
    let s = s_from_solution(&w, &x);
    let two_i = Complex64::new(0.0, 2.0);
    let ds = w.t().dot(&y).mapv(|z| two_i * z);
    Ok(PointEval { s, ds })
}

fn dwell_from_eval(eval: &PointEval) -> Result<f64> {
    let s01 = eval.s[[0, 1]];
    if s01.norm() <= AMPLITUDE_FLOOR {
        return Err(Error::VanishingAmplitude {
            amplitude: s01.norm(),
        });
    }
    Ok((eval.ds[[0, 1]] / s01).im)
}

/// Dwell time `Im{ S_in->out^{-1} dS_in->out/dE }`. Quantifies a phase
/// shift, so it may be negative near interfering resonances.
pub fn dwell_time(h: &NetworkHamiltonian, c: &ChannelCoupling, energy: f64) -> Result<f64> {
    dwell_from_eval(&eval_point(h, c, energy)?)
}

/// Scattering response over an energy grid.
#[derive(Debug, Clone)]
pub struct ScatteringResponse {
    pub energies: Vec<f64>,
    /// `S_in->out(E)` per grid point.
    pub s_elem: Vec<Complex64>,
    /// Transfer probability per grid point.
    pub p: Vec<f64>,
    /// Dwell time per grid point; `None` where the amplitude vanishes.
    pub tau: Vec<Option<f64>>,
    /// Resonance eigenvalues of `H_eff` (positions and lifetimes).
    pub resonances: Spectrum,
}

/// Uniform inclusive grid with `n_points >= 1` (a single point sits at `e_min`).
pub fn energy_grid(e_min: f64, e_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    if !(e_min.is_finite() && e_max.is_finite()) || (n_points > 1 && e_max <= e_min) {
        return Err(Error::InvalidParameter(format!(
            "invalid energy range [{e_min}, {e_max}]"
        )));
    }
    if n_points == 1 {
        return Ok(vec![e_min]);
    }
    let step = (e_max - e_min) / (n_points - 1) as f64;
    Ok((0..n_points).map(|k| e_min + step * k as f64).collect())
}

/// Evaluates `S`, `p` and `tau` on an ascending grid. Points where the
/// amplitude vanishes are recorded as missing dwell times, not failures.
pub fn scan(
    h: &NetworkHamiltonian,
    c: &ChannelCoupling,
    energies: &[f64],
) -> Result<ScatteringResponse> {
    if energies.is_empty() {
        return Err(Error::EmptyInput("energy grid".into()));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "energy grid must be strictly ascending".into(),
        ));
    }
    let mut s_elem = Vec::with_capacity(energies.len());
    let mut p = Vec::with_capacity(energies.len());
    let mut tau = Vec::with_capacity(energies.len());
    for &e in energies {
        let eval = eval_point(h, c, e)?;
        let s01 = eval.s[[0, 1]];
        s_elem.push(s01);
        p.push(s01.norm_sqr());
        tau.push(dwell_from_eval(&eval).ok());
    }
    let resonances = eig_complex(&effective_hamiltonian(h, c))?;
    Ok(ScatteringResponse {
        energies: energies.to_vec(),
        s_elem,
        p,
        tau,
        resonances,
    })
}

impl ScatteringResponse {
    /// Writes `E,p,tau,Re_S,Im_S` rows; missing dwell times become empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "E,p,tau,Re_S,Im_S")?;
        for i in 0..self.energies.len() {
            let tau = self.tau[i].map(|t| t.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                self.energies[i], self.p[i], tau, self.s_elem[i].re, self.s_elem[i].im
            )?;
        }
        Ok(())
    }

    /// JSON sidecar with the resonance eigenvalues and the input parameters
    /// that produced the scan.
    pub fn sidecar_json(&self, parameters: &serde_json::Value) -> Result<String> {
        #[derive(Serialize)]
        struct ResonanceOut {
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Sidecar<'a> {
            parameters: &'a serde_json::Value,
            resonances: Vec<ResonanceOut>,
        }
        let sidecar = Sidecar {
            parameters,
            resonances: self
                .resonances
                .eigenvalues
                .iter()
                .map(|z| ResonanceOut { re: z.re, im: z.im })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&sidecar)?)
    }

    /// Index and value of the largest transfer probability.
    pub fn argmax_p(&self) -> Option<(usize, f64)> {
        self.p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| (i, v))
    }

    /// Indices of strict local maxima of `p` (interior points only).
    pub fn local_maxima_p(&self) -> Vec<usize> {
        (1..self.p.len().saturating_sub(1))
            .filter(|&i| self.p[i] > self.p[i - 1] && self.p[i] > self.p[i + 1])
            .collect()
    }
}

/// Probability row sums `(p_in->in + p_in->out, p_out->in + p_out->out)`;
/// both equal 1 for a unitary `S`.
pub fn probability_row_sums(s: &ComplexMatrix) -> (f64, f64) {
    let a = s.as_array();
    (
        a[[0, 0]].norm_sqr() + a[[0, 1]].norm_sqr(),
        a[[1, 0]].norm_sqr() + a[[1, 1]].norm_sqr(),
    )
}

/// Max-norm deviation of `S` from unitarity, `max |S^dag S - 1|`.
pub fn unitarity_defect(s: &ComplexMatrix) -> f64 {
    let a = s.as_array();
    let mut defect = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                acc += a[[k, i]].conj() * a[[k, j]];
            }
            let expected = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((acc - expected).norm());
        }
    }
    defect
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_deterministic, sample_random, NetworkParams};
    use crate::numerics::RealSymMatrix;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

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

    fn fig_style_params(n: usize) -> NetworkParams {
        NetworkParams {
            n_sites: n,
            onsite_energy: 0.0,
            direct_coupling: 1.0,
            bulk_scale: 1.0,
            link_scale: 1.0,
            sample_onsite: false,
        }
    }

    /// Closed-form `p(E')` for the dimer: `16 G^2 V^2 / (4V^2 + G^2)^2`.
    fn dimer_p_on_site_energy(v: f64, gamma: f64) -> f64 {
        16.0 * gamma * gamma * v * v / ((4.0 * v * v + gamma * gamma).powi(2))
    }

    #[test]
    fn zero_coupling_gives_identity_s() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(0.0).unwrap();
        let s = s_matrix(&h, &c, 0.37).unwrap();
        assert_abs_diff_eq!(s.as_array()[[0, 0]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.as_array()[[0, 1]].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(transfer_probability(&h, &c, 0.37).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn effective_hamiltonian_dimer_assembly() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(2.0).unwrap();
        let heff = effective_hamiltonian(&h, &c);
        let a = heff.as_array();
        assert_eq!(a[[0, 0]], Complex64::new(0.0, -1.0));
        assert_eq!(a[[0, 1]], Complex64::new(1.0, 0.0));
        assert_eq!(a[[1, 1]], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn effective_hamiltonian_trace_and_centrosymmetry() {
        let params = fig_style_params(8);
        let h = sample_random(&params, 3).unwrap();
        let c = ChannelCoupling::symmetric(5.0).unwrap();
        let heff = effective_hamiltonian(&h, &c);
        let a = heff.as_array();
        let trace_im: f64 = (0..8).map(|i| a[[i, i]].im).sum();
        assert_abs_diff_eq!(trace_im, -5.0, epsilon = 1e-13);
        // commutes with the exchange operator
        for i in 0..8 {
            for j in 0..8 {
                let d = (a[[i, j]] - a[[7 - i, 7 - j]]).norm();
                assert!(d <= 1e-12, "H_eff not centrosymmetric at ({i},{j})");
            }
        }
    }

    #[test]
    fn dimer_transfer_probability_closed_form() {
        for &(v, gamma) in &[(1.0, 2.0), (1.0, 0.5), (0.3, 1.7), (2.0, 0.1)] {
            let h = dimer(0.4, v);
            let c = ChannelCoupling::symmetric(gamma).unwrap();
            let p = transfer_probability(&h, &c, 0.4).unwrap();
            assert_abs_diff_eq!(p, dimer_p_on_site_energy(v, gamma), epsilon = 1e-12);
        }
    }

    #[test]
    fn dimer_matched_coupling_transfers_completely() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(2.0).unwrap();
        assert_abs_diff_eq!(transfer_probability(&h, &c, 0.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unitarity_reciprocity_and_row_sums_on_random_networks() {
        let params = fig_style_params(8);
        let c = ChannelCoupling::symmetric(5.0).unwrap();
        for seed in 0..60 {
            let h = sample_random(&params, seed).unwrap();
            for &e in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
                let s = s_matrix(&h, &c, e).unwrap();
                assert!(unitarity_defect(&s) <= 1e-10, "seed {seed} E {e}");
                let a = s.as_array();
                assert!((a[[0, 1]] - a[[1, 0]]).norm() <= 1e-10, "reciprocity");
                let (r0, r1) = probability_row_sums(&s);
                assert_abs_diff_eq!(r0, 1.0, epsilon = 1e-10);
                assert_abs_diff_eq!(r1, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dwell_time_matches_finite_difference() {
        let params = fig_style_params(8);
        let c = ChannelCoupling::symmetric(5.0).unwrap();
        for seed in 0..10 {
            let h = sample_random(&params, seed).unwrap();
            for &e in &[-2.0, 0.3, 1.9] {
                let s0 = s_matrix(&h, &c, e).unwrap().as_array()[[0, 1]];
                if s0.norm() <= 1e-6 {
                    continue;
                }
                let tau = dwell_time(&h, &c, e).unwrap();
                let de = 1e-6;
                let sp = s_matrix(&h, &c, e + de).unwrap().as_array()[[0, 1]];
                let sm = s_matrix(&h, &c, e - de).unwrap().as_array()[[0, 1]];
                let fd = ((sp - sm) / Complex64::new(2.0 * de, 0.0) / s0).im;
                let denom = tau.abs().max(1e-3);
                assert!(
                    ((tau - fd) / denom).abs() < 1e-5,
                    "seed {seed} E {e}: analytic {tau} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn dimer_split_resonance_dwell_time_is_two_over_gamma() {
        // For Gamma < 2V the transfer peaks sit at E' +/- sqrt(4V^2-G^2)/2
        // and the dwell time there is exactly 2/Gamma.
        for &(v, gamma) in &[(1.0, 0.5), (1.0, 1.9), (0.7, 0.2)] {
            let h = dimer(0.1, v);
            let c = ChannelCoupling::symmetric(gamma).unwrap();
            let e_res = 0.1 + 0.5 * (4.0 * v * v - gamma * gamma).sqrt();
            let tau = dwell_time(&h, &c, e_res).unwrap();
            assert_abs_diff_eq!(tau, 2.0 / gamma, epsilon = 1e-10);
        }
    }

    #[test]
    fn vanishing_amplitude_is_an_error_for_dwell_time() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(0.0).unwrap();
        match dwell_time(&h, &c, 0.5) {
            Err(Error::VanishingAmplitude { .. }) => {}
            other => panic!("expected VanishingAmplitude, got {other:?}"),
        }
    }

    #[test]
    fn scan_dimer_resonances_are_closed_form() {
        let h = dimer(0.2, 1.0);
        let c = ChannelCoupling::symmetric(0.6).unwrap();
        let grid = energy_grid(-3.0, 3.0, 11).unwrap();
        let resp = scan(&h, &c, &grid).unwrap();
        assert_eq!(resp.resonances.len(), 2);
        let lam0 = resp.resonances.eigenvalues[0];
        let lam1 = resp.resonances.eigenvalues[1];
        assert_abs_diff_eq!(lam0.re, -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(lam0.im, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(lam1.re, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(lam1.im, -0.3, epsilon = 1e-12);
    }

    #[test]
    fn scan_single_point_grid() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(2.0).unwrap();
        let resp = scan(&h, &c, &[0.0]).unwrap();
        assert_eq!(resp.energies.len(), 1);
        assert_abs_diff_eq!(resp.p[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scan_records_missing_dwell_times() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(0.0).unwrap();
        let grid = energy_grid(-0.9, 0.9, 5).unwrap();
        let resp = scan(&h, &c, &grid).unwrap();
        assert!(resp.tau.iter().all(Option::is_none));
        assert!(resp.p.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn scan_rejects_unordered_grids() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(1.0).unwrap();
        assert!(scan(&h, &c, &[0.0, 0.0]).is_err());
        assert!(scan(&h, &c, &[1.0, 0.0]).is_err());
        assert!(scan(&h, &c, &[]).is_err());
    }

    #[test]
    fn csv_export_has_documented_schema() {
        let h = dimer(0.0, 1.0);
        let c = ChannelCoupling::symmetric(0.0).unwrap();
        let resp = scan(&h, &c, &[0.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        resp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("E,p,tau,Re_S,Im_S"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[2], ""); // missing tau
        let sidecar = resp.sidecar_json(&serde_json::json!({"gamma": 0.0})).unwrap();
        assert!(sidecar.contains("resonances"));
    }

    #[test]
    fn typical_disordered_scan_reaches_complete_transfer() {
        // A representative 8-site draw whose profile contains peaks at
        // (numerically) full transmission; heights never exceed 1.
        let params = fig_style_params(8);
        let c = ChannelCoupling::symmetric(5.0).unwrap();
        let grid = energy_grid(-4.0, 4.0, 4001).unwrap();
        let mut best = 0.0f64;
        for seed in 0..20 {
            let h = sample_random(&params, seed).unwrap();
            let resp = scan(&h, &c, &grid).unwrap();
            for &p in &resp.p {
                assert!(p <= 1.0 + 1e-10);
            }
            best = best.max(resp.argmax_p().unwrap().1);
        }
        assert!(best > 0.99, "no near-unit peak among draws: best {best}");
    }
}

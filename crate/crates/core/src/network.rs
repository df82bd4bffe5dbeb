//! Centrosymmetric network Hamiltonians.
//!
//! A network of `N` sites couples an input site (index 0) and an output
//! site (index `N-1`) directly with strength `V`, and to `N-2` bulk sites
//! through a coupling vector `v`. The whole matrix commutes with the
//! exchange operator `J` that maps site `i` to site `N-1-i`; this module
//! keeps that invariant bitwise-exact, both for deterministically built
//! and for randomly sampled Hamiltonians.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealSymMatrix;

/// Structural and statistical parameters of a network ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Total number of sites `N` (even, >= 2).
    pub n_sites: usize,
    /// On-site energy of input and output site (fixed value, or the mean
    /// when `sample_onsite` is set).
    pub onsite_energy: f64,
    /// Direct input-output coupling `V`.
    pub direct_coupling: f64,
    /// Typical bulk coupling scale `xi`; bulk entries are drawn with
    /// variance `(1 + delta_ij) xi^2 / N`.
    pub bulk_scale: f64,
    /// Typical input/output-to-bulk coupling scale `chi`; the couplings
    /// `v_i` are drawn i.i.d. with variance `chi^2 / N`.
    pub link_scale: f64,
    /// Draw the on-site energy with variance `2 xi^2 / N` instead of
    /// pinning it to `onsite_energy`.
    pub sample_onsite: bool,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be even and >= 2, got {}",
                self.n_sites
            )));
        }
        if self.n_sites == 2 && (self.bulk_scale > 0.0 || self.link_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "a two-site network has no bulk; bulk_scale and link_scale must be 0".into(),
            ));
        }
        for (name, x) in [
            ("onsite_energy", self.onsite_energy),
            ("direct_coupling", self.direct_coupling),
            ("bulk_scale", self.bulk_scale),
            ("link_scale", self.link_scale),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.bulk_scale < 0.0 || self.link_scale < 0.0 {
            return Err(Error::InvalidParameter(
                "bulk_scale and link_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of bulk sites `N - 2`.
    pub fn n_bulk(&self) -> usize {
        self.n_sites - 2
    }
}

/// The exchange operator `J` with ones on the anti-diagonal.
pub fn exchange_operator(n_sites: usize) -> RealSymMatrix {
    RealSymMatrix::from_fn(n_sites, |i, j| {
        if i + j == n_sites - 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// A single network realization: the full matrix plus the structural
/// pieces it was assembled from.
#[derive(Debug, Clone)]
pub struct NetworkHamiltonian {
    matrix: RealSymMatrix,
    params: NetworkParams,
    v: Array1<f64>,
    bulk: RealSymMatrix,
    seed: Option<u64>,
}

impl NetworkHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    pub fn matrix(&self) -> &RealSymMatrix {
        &self.matrix
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// Input-to-bulk couplings, one per bulk site.
    pub fn v(&self) -> &Array1<f64> {
        &self.v
    }

    pub fn bulk(&self) -> &RealSymMatrix {
        &self.bulk
    }

    /// Seed this realization was drawn from, if it was sampled.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Realized on-site energy of the input/output sites.
    pub fn onsite_energy(&self) -> f64 {
        self.matrix.as_array()[[0, 0]]
    }

    /// Direct input-output coupling `V`.
    pub fn direct_coupling(&self) -> f64 {
        self.matrix.as_array()[[0, self.params.n_sites - 1]]
    }
}

/// Averages the orbit of each bulk entry under transposition and the
/// bulk involution `(i, j) -> (n-1-i, n-1-j)`, making both symmetries
/// bitwise-exact. Rejects input deviating more than `tol` (relative).
fn exactify_centrosymmetric(bulk: &RealSymMatrix, tol: f64) -> Result<RealSymMatrix> {
    let n = bulk.dim();
    let b = bulk.as_array();
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut dev = 0.0f64;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mirrored = b[[n - 1 - i, n - 1 - j]];
            dev = dev.max((b[[i, j]] - mirrored).abs());
            out[[i, j]] = 0.5 * (b[[i, j]] + mirrored);
        }
    }
    if dev > tol * scale {
        return Err(Error::CentrosymmetryViolation {
            deviation: dev,
            tolerance: tol * scale,
        });
    }
    RealSymMatrix::new(out)
}

/// Assembles the full `N x N` matrix from on-site energy, direct
/// coupling, link vector and an exactly centrosymmetric bulk block.
fn assemble(e_prime: f64, v_direct: f64, v: &[f64], bulk: &RealSymMatrix) -> RealSymMatrix {
    let n_bulk = v.len();
    let n = n_bulk + 2;
    let b = bulk.as_array();
    RealSymMatrix::from_fn(n, |i, j| {
        // only called for i <= j
        match (i, j) {
            (0, 0) => e_prime,
            (0, jj) if jj == n - 1 => v_direct,
            (ii, jj) if ii == n - 1 && jj == n - 1 => e_prime,
            (0, jj) => v[jj - 1],
            (ii, jj) if jj == n - 1 => v[n_bulk - ii], // reversed link row
            (ii, jj) => b[[ii - 1, jj - 1]],
        }
    })
}

/// Builds a network from explicit structural data.
///
/// `bulk` must be `(N-2) x (N-2)` and centrosymmetric (checked to
/// relative 1e-12, then made exact); `v` must have length `N-2`.
pub fn build_deterministic(
    params: &NetworkParams,
    v: &[f64],
    bulk: &RealSymMatrix,
) -> Result<NetworkHamiltonian> {
    params.validate()?;
    let n_bulk = params.n_bulk();
    if v.len() != n_bulk {
        return Err(Error::DimensionMismatch(format!(
            "link vector has length {}, expected {}",
            v.len(),
            n_bulk
        )));
    }
    if bulk.dim() != n_bulk {
        return Err(Error::DimensionMismatch(format!(
            "bulk block is {}x{}, expected {}x{}",
            bulk.dim(),
            bulk.dim(),
            n_bulk,
            n_bulk
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("link couplings must be finite".into()));
    }
    let bulk = exactify_centrosymmetric(bulk, 1e-12)?;
    let matrix = assemble(params.onsite_energy, params.direct_coupling, v, &bulk);
    Ok(NetworkHamiltonian {
        matrix,
        params: params.clone(),
        v: Array1::from_vec(v.to_vec()),
        bulk,
        seed: None,
    })
}

/// Derives an independent stream seed from a master seed and a pair of
/// indices (splitmix-style finalizers), so parallel realizations never
/// share generator state.
pub fn derive_seed(master_seed: u64, lane: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(master_seed ^ mix(lane.wrapping_mul(0xa076_1d64_78bd_642f) ^ mix(index)))
}

/// Draws one random centrosymmetric network.
///
/// Bulk entries carry variance `(1 + delta_ij) xi^2 / N`, drawn once per
/// orbit of the bulk involution and mirrored so centrosymmetry is exact;
/// links are i.i.d. with variance `chi^2 / N`; the on-site energy is
/// drawn with variance `2 xi^2 / N` when `sample_onsite` is set. The same
/// seed always yields the same matrix.
pub fn sample_random(params: &NetworkParams, seed: u64) -> Result<NetworkHamiltonian> {
    params.validate()?;
    let n = params.n_sites as f64;
    let n_bulk = params.n_bulk();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let onsite_dist = Normal::new(0.0, (2.0 / n).sqrt() * params.bulk_scale).unwrap();
    let link_dist = Normal::new(0.0, params.link_scale / n.sqrt()).unwrap();
    let off_dist = Normal::new(0.0, params.bulk_scale / n.sqrt()).unwrap();
    let diag_dist = Normal::new(0.0, (2.0 / n).sqrt() * params.bulk_scale).unwrap();

    let e_prime = if params.sample_onsite {
        onsite_dist.sample(&mut rng)
    } else {
        params.onsite_energy
    };
    let v: Vec<f64> = (0..n_bulk).map(|_| link_dist.sample(&mut rng)).collect();

    // Upper triangle in lexicographic order; an entry is drawn fresh iff
    // it is the lexicographically first member of its involution orbit,
    // otherwise it copies the already-drawn mirror.
    let mut bulk = Array2::zeros((n_bulk, n_bulk));
    for i in 0..n_bulk {
        for j in i..n_bulk {
            let (mi, mj) = {
                let (a, b) = (n_bulk - 1 - i, n_bulk - 1 - j);
                (a.min(b), a.max(b))
            };
            let x = if (i, j) <= (mi, mj) {
                if i == j {
                    diag_dist.sample(&mut rng)
                } else {
                    off_dist.sample(&mut rng)
                }
            } else {
                bulk[[mi, mj]]
            };
            bulk[[i, j]] = x;
            bulk[[j, i]] = x;
        }
    }
    let bulk = RealSymMatrix::new(bulk).expect("sampled bulk is exactly symmetric");
    let matrix = assemble(e_prime, params.direct_coupling, &v, &bulk);
    Ok(NetworkHamiltonian {
        matrix,
        params: params.clone(),
        v: Array1::from_vec(v),
        bulk,
        seed: Some(seed),
    })
}

// ---------------------------------------------------------------------------
// Symmetry decomposition
// ---------------------------------------------------------------------------

/// Which exchange-symmetry sector a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    Plus,
    Minus,
}

/// The two blocks of the Hamiltonian in the exchange eigenbasis.
///
/// The symmetric (antisymmetric) sector consists of the doublet state at
/// energy `E' + V` (`E' - V`) coupled through `v_plus` (`v_minus`) to the
/// `(N-2)/2` symmetric (antisymmetric) bulk pair combinations governed by
/// `h_plus` (`h_minus`).
#[derive(Debug, Clone)]
pub struct SymmetryBlocks {
    pub plus_energy: f64,
    pub minus_energy: f64,
    pub v_plus: Array1<f64>,
    pub v_minus: Array1<f64>,
    pub h_plus: RealSymMatrix,
    pub h_minus: RealSymMatrix,
    /// Energy scale used for near-degeneracy thresholds downstream.
    pub degeneracy_scale: f64,
}

impl SymmetryBlocks {
    pub fn doublet_energy(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Plus => self.plus_energy,
            Sector::Minus => self.minus_energy,
        }
    }

    pub fn coupling(&self, sector: Sector) -> &Array1<f64> {
        match sector {
            Sector::Plus => &self.v_plus,
            Sector::Minus => &self.v_minus,
        }
    }

    pub fn block(&self, sector: Sector) -> &RealSymMatrix {
        match sector {
            Sector::Plus => &self.h_plus,
            Sector::Minus => &self.h_minus,
        }
    }

    /// Full sector matrix: doublet energy in the corner bordered by the
    /// coupling vector and the bulk pair block.
    pub fn sector_matrix(&self, sector: Sector) -> RealSymMatrix {
        let e = self.doublet_energy(sector);
        let v = self.coupling(sector);
        let b = self.block(sector).as_array();
        let m = v.len();
        RealSymMatrix::from_fn(m + 1, |i, j| match (i, j) {
            (0, 0) => e,
            (0, jj) => v[jj - 1],
            (ii, jj) => b[[ii - 1, jj - 1]],
        })
    }

    /// Rebuilds the full site-basis matrix from the blocks.
    pub fn reassemble(&self) -> RealSymMatrix {
        let half = self.v_plus.len();
        let n_bulk = 2 * half;
        let e_prime = 0.5 * (self.plus_energy + self.minus_energy);
        let v_direct = 0.5 * (self.plus_energy - self.minus_energy);
        let mut v = vec![0.0; n_bulk];
        for k in 0..half {
            v[k] = 0.5 * (self.v_plus[k] + self.v_minus[k]);
            v[n_bulk - 1 - k] = 0.5 * (self.v_plus[k] - self.v_minus[k]);
        }
        let hp = self.h_plus.as_array();
        let hm = self.h_minus.as_array();
        let mut bulk = Array2::zeros((n_bulk, n_bulk));
        for k in 0..half {
            for l in 0..half {
                let direct = 0.5 * (hp[[k, l]] + hm[[k, l]]);
                let cross = 0.5 * (hp[[k, l]] - hm[[k, l]]);
                bulk[[k, l]] = direct;
                bulk[[n_bulk - 1 - k, n_bulk - 1 - l]] = direct;
                bulk[[k, n_bulk - 1 - l]] = cross;
                bulk[[n_bulk - 1 - k, l]] = cross;
            }
        }
        let bulk = RealSymMatrix::new(bulk).expect("reassembled bulk is symmetric");
        assemble(e_prime, v_direct, &v, &bulk)
    }
}

/// Orthonormal basis of exchange eigenvectors, as columns ordered
/// (doublet `+`, symmetric pairs, doublet `-`, antisymmetric pairs).
/// Conjugating a centrosymmetric matrix with this basis block-diagonalizes it.
pub fn symmetry_basis(n_sites: usize) -> Array2<f64> {
    let n = n_sites;
    let half = (n - 2) / 2;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut q = Array2::zeros((n, n));
    q[[0, 0]] = inv_sqrt2;
    q[[n - 1, 0]] = inv_sqrt2;
    for k in 0..half {
        q[[k + 1, 1 + k]] = inv_sqrt2;
        q[[n - 2 - k, 1 + k]] = inv_sqrt2;
    }
    let minus_col = 1 + half;
    q[[0, minus_col]] = inv_sqrt2;
    q[[n - 1, minus_col]] = -inv_sqrt2;
    for k in 0..half {
        q[[k + 1, minus_col + 1 + k]] = inv_sqrt2;
        q[[n - 2 - k, minus_col + 1 + k]] = -inv_sqrt2;
    }
    q
}

/// Splits a centrosymmetric network into its exchange-symmetry blocks.
pub fn decompose_symmetry(h: &NetworkHamiltonian) -> Result<SymmetryBlocks> {
    let m = h.matrix().as_array();
    let n = h.n_sites();
    // Defensive check; construction keeps this exact.
    let scale = m.iter().fold(0.0f64, |mx, x| mx.max(x.abs())).max(1.0);
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[[i, j]] - m[[n - 1 - i, n - 1 - j]]).abs());
        }
    }
    if dev > 1e-12 * scale {
        return Err(Error::CentrosymmetryViolation {
            deviation: dev,
            tolerance: 1e-12 * scale,
        });
    }

    let e_prime = h.onsite_energy();
    let v_direct = h.direct_coupling();
    let n_bulk = n - 2;
    let half = n_bulk / 2;
    let v = h.v();
    let b = h.bulk().as_array();

    let mut v_plus = Array1::zeros(half);
    let mut v_minus = Array1::zeros(half);
    for k in 0..half {
        v_plus[k] = v[k] + v[n_bulk - 1 - k];
        v_minus[k] = v[k] - v[n_bulk - 1 - k];
    }
    let h_plus = RealSymMatrix::from_fn(half, |k, l| b[[k, l]] + b[[k, n_bulk - 1 - l]]);
    let h_minus = RealSymMatrix::from_fn(half, |k, l| b[[k, l]] - b[[k, n_bulk - 1 - l]]);

    let degeneracy_scale = if h.params().bulk_scale > 0.0 {
        h.params().bulk_scale
    } else {
        1.0 + e_prime.abs() + v_direct.abs()
    };

    Ok(SymmetryBlocks {
        plus_energy: e_prime + v_direct,
        minus_energy: e_prime - v_direct,
        v_plus,
        v_minus,
        h_plus,
        h_minus,
        degeneracy_scale,
    })
}

// ---------------------------------------------------------------------------
// Serialization (archival of single realizations)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    n: usize,
    e_prime: f64,
    direct_coupling: f64,
    v: Vec<f64>,
    bulk_row_major: Vec<f64>,
    bulk_scale: f64,
    link_scale: f64,
    seed: Option<u64>,
}

impl Serialize for NetworkHamiltonian {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkRecord {
            n: self.n_sites(),
            e_prime: self.onsite_energy(),
            direct_coupling: self.direct_coupling(),
            v: self.v.to_vec(),
            bulk_row_major: self.bulk.as_array().iter().copied().collect(),
            bulk_scale: self.params.bulk_scale,
            link_scale: self.params.link_scale,
            seed: self.seed,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NetworkHamiltonian {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let rec = NetworkRecord::deserialize(deserializer)?;
        let n_bulk = rec.n.checked_sub(2).ok_or_else(|| D::Error::custom("n < 2"))?;
        if rec.bulk_row_major.len() != n_bulk * n_bulk {
            return Err(D::Error::custom("bulk length does not match n"));
        }
        let bulk = Array2::from_shape_vec((n_bulk, n_bulk), rec.bulk_row_major)
            .map_err(D::Error::custom)?;
        let bulk = RealSymMatrix::new(bulk).map_err(D::Error::custom)?;
        let params = NetworkParams {
            n_sites: rec.n,
            onsite_energy: rec.e_prime,
            direct_coupling: rec.direct_coupling,
            bulk_scale: rec.bulk_scale,
            link_scale: rec.link_scale,
            sample_onsite: false,
        };
        let mut h = build_deterministic(&params, &rec.v, &bulk).map_err(D::Error::custom)?;
        h.seed = rec.seed;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{eig_sym, sym_eigen};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn dimer_params(e_prime: f64, v_direct: f64) -> NetworkParams {
        NetworkParams {
            n_sites: 2,
            onsite_energy: e_prime,
            direct_coupling: v_direct,
            bulk_scale: 0.0,
            link_scale: 0.0,
            sample_onsite: false,
        }
    }

    fn sampled_params(n: usize, xi: f64, chi: f64) -> NetworkParams {
        NetworkParams {
            n_sites: n,
            onsite_energy: 0.0,
            direct_coupling: 1.0,
            bulk_scale: xi,
            link_scale: chi,
            sample_onsite: false,
        }
    }

    #[test]
    fn exchange_operator_small_cases() {
        assert_eq!(
            exchange_operator(2).as_array(),
            &array![[0.0, 1.0], [1.0, 0.0]]
        );
        let j4 = exchange_operator(4);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i + j == 3 { 1.0 } else { 0.0 };
                assert_eq!(j4.as_array()[[i, j]], expected);
            }
        }
    }

    #[test]
    fn exchange_operator_is_involution() {
        let j = exchange_operator(10);
        let jj = j.as_array().dot(j.as_array());
        assert_eq!(jj, Array2::<f64>::eye(10));
    }

    #[test]
    fn dimer_build() {
        let h = build_deterministic(&dimer_params(0.0, 1.0), &[], &RealSymMatrix::zeros(0))
            .unwrap();
        assert_eq!(h.matrix().as_array(), &array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn four_site_build_and_exact_centrosymmetry() {
        let (a, b, c, d) = (0.3, -0.7, 1.1, 0.4);
        let bulk = RealSymMatrix::new(array![[c, d], [d, c]]).unwrap();
        let params = sampled_params(4, 0.0, 0.0);
        let h = build_deterministic(&params, &[a, b], &bulk).unwrap();
        let expected = array![
            [0.0, a, b, 1.0],
            [a, c, d, b],
            [b, d, c, a],
            [1.0, b, a, 0.0]
        ];
        assert_eq!(h.matrix().as_array(), &expected);

        // J H J == H exactly
        let j = exchange_operator(4);
        let jhj = j.as_array().dot(h.matrix().as_array()).dot(j.as_array());
        assert_eq!(&jhj, h.matrix().as_array());
    }

    #[test]
    fn build_rejects_non_centrosymmetric_bulk() {
        let bulk = RealSymMatrix::new(array![[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let params = sampled_params(4, 0.0, 0.0);
        match build_deterministic(&params, &[0.0, 0.0], &bulk) {
            Err(Error::CentrosymmetryViolation { .. }) => {}
            other => panic!("expected CentrosymmetryViolation, got {other:?}"),
        }
    }

    #[test]
    fn build_rejects_odd_and_mismatched() {
        let mut p = sampled_params(4, 0.0, 0.0);
        p.n_sites = 5;
        assert!(p.validate().is_err());
        let p = sampled_params(4, 0.0, 0.0);
        assert!(build_deterministic(&p, &[0.0], &RealSymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let params = sampled_params(8, 1.0, 1.0);
        let h1 = sample_random(&params, 42).unwrap();
        let h2 = sample_random(&params, 42).unwrap();
        assert_eq!(h1.matrix().as_array(), h2.matrix().as_array());
        let h3 = sample_random(&params, 43).unwrap();
        assert_ne!(h1.matrix().as_array(), h3.matrix().as_array());
    }

    #[test]
    fn sampling_zero_scales_gives_decoupled_dimer_plus_bulk() {
        let params = sampled_params(8, 0.0, 0.0);
        let h = sample_random(&params, 5).unwrap();
        assert!(h.v().iter().all(|&x| x == 0.0));
        assert!(h.bulk().as_array().iter().all(|&x| x == 0.0));
        assert_eq!(h.matrix().as_array()[[0, 7]], 1.0);
    }

    #[test]
    fn sampled_matrices_are_exactly_centrosymmetric() {
        let params = sampled_params(10, 1.5, 0.7);
        for seed in 0..50 {
            let h = sample_random(&params, seed).unwrap();
            let m = h.matrix().as_array();
            for i in 0..10 {
                for j in 0..10 {
                    assert_eq!(m[[i, j]], m[[9 - i, 9 - j]], "seed {seed} at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn sampled_moments_match_the_model() {
        // N = 8, xi = 1: off-diagonal bulk variance 1/8, diagonal 2/8,
        // link variance chi^2/8, onsite variance 2/8.
        let n_draws = 100_000;
        let params = NetworkParams {
            sample_onsite: true,
            ..sampled_params(8, 1.0, 0.5)
        };
        let (mut off_sq, mut diag_sq, mut link_sq, mut onsite_sq) = (0.0, 0.0, 0.0, 0.0);
        for seed in 0..n_draws {
            let h = sample_random(&params, seed).unwrap();
            let b = h.bulk().as_array();
            off_sq += b[[0, 1]] * b[[0, 1]];
            diag_sq += b[[0, 0]] * b[[0, 0]];
            link_sq += h.v()[0] * h.v()[0];
            onsite_sq += h.onsite_energy() * h.onsite_energy();
        }
        let m = n_draws as f64;
        // 3 standard errors of a variance estimate ~ 3 * var * sqrt(2/m)
        let rel_tol = 3.0 * (2.0 / m).sqrt();
        assert_abs_diff_eq!(off_sq / m, 1.0 / 8.0, epsilon = rel_tol / 8.0);
        assert_abs_diff_eq!(diag_sq / m, 2.0 / 8.0, epsilon = 2.0 * rel_tol / 8.0);
        assert_abs_diff_eq!(link_sq / m, 0.25 / 8.0, epsilon = 0.25 * rel_tol / 8.0);
        assert_abs_diff_eq!(onsite_sq / m, 2.0 / 8.0, epsilon = 2.0 * rel_tol / 8.0);
    }

    #[test]
    fn decompose_dimer() {
        let h = build_deterministic(&dimer_params(0.25, 1.5), &[], &RealSymMatrix::zeros(0))
            .unwrap();
        let blocks = decompose_symmetry(&h).unwrap();
        assert_eq!(blocks.plus_energy, 1.75);
        assert_eq!(blocks.minus_energy, -1.25);
        assert_eq!(blocks.v_plus.len(), 0);
        assert_eq!(blocks.h_plus.dim(), 0);
    }

    #[test]
    fn decompose_four_site_hand_check() {
        let (a, b, c, d) = (0.3, -0.7, 1.1, 0.4);
        let bulk = RealSymMatrix::new(array![[c, d], [d, c]]).unwrap();
        let params = NetworkParams {
            onsite_energy: 0.1,
            ..sampled_params(4, 0.0, 0.0)
        };
        let h = build_deterministic(&params, &[a, b], &bulk).unwrap();
        let blocks = decompose_symmetry(&h).unwrap();
        assert_abs_diff_eq!(blocks.plus_energy, 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.minus_energy, -0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.v_plus[0], a + b, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.v_minus[0], a - b, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.h_plus.as_array()[[0, 0]], c + d, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.h_minus.as_array()[[0, 0]], c - d, epsilon = 1e-15);
    }

    #[test]
    fn conjugation_by_symmetry_basis_is_block_diagonal() {
        let params = sampled_params(10, 2.0, 0.8);
        let h = sample_random(&params, 99).unwrap();
        let q = symmetry_basis(10);
        let conj = q.t().dot(h.matrix().as_array()).dot(&q);
        let half = 4;
        let plus_dim = 1 + half;
        for i in 0..10 {
            for j in 0..10 {
                let same_block = (i < plus_dim) == (j < plus_dim);
                if !same_block {
                    assert!(
                        conj[[i, j]].abs() <= 1e-12,
                        "off-block entry ({i},{j}) = {:.3e}",
                        conj[[i, j]]
                    );
                }
            }
        }
        // blocks agree with the direct decomposition
        let blocks = decompose_symmetry(&h).unwrap();
        let sp = blocks.sector_matrix(Sector::Plus);
        let sm = blocks.sector_matrix(Sector::Minus);
        for i in 0..plus_dim {
            for j in 0..plus_dim {
                assert_abs_diff_eq!(conj[[i, j]], sp.as_array()[[i, j]], epsilon = 1e-12);
                assert_abs_diff_eq!(
                    conj[[plus_dim + i, plus_dim + j]],
                    sm.as_array()[[i, j]],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn spectrum_is_union_of_sector_spectra() {
        let params = sampled_params(10, 2.0, 0.8);
        let h = sample_random(&params, 7).unwrap();
        let full = eig_sym(h.matrix()).unwrap().real_eigenvalues();
        let blocks = decompose_symmetry(&h).unwrap();
        let mut sector: Vec<f64> = eig_sym(&blocks.sector_matrix(Sector::Plus))
            .unwrap()
            .real_eigenvalues();
        sector.extend(
            eig_sym(&blocks.sector_matrix(Sector::Minus))
                .unwrap()
                .real_eigenvalues(),
        );
        sector.sort_by(f64::total_cmp);
        for (a, b) in full.iter().zip(sector.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let params = sampled_params(8, 1.0, 1.0);
        let h = sample_random(&params, 123).unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: NetworkHamiltonian = serde_json::from_str(&json).unwrap();
        assert_eq!(h.matrix().as_array(), back.matrix().as_array());
        assert_eq!(back.seed(), Some(123));
    }

    #[test]
    fn derive_seed_is_deterministic_and_spread() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        let mut seen = std::collections::HashSet::new();
        for lane in 0..50u64 {
            for idx in 0..50u64 {
                seen.insert(derive_seed(7, lane, idx));
            }
        }
        assert_eq!(seen.len(), 2500);
    }

    #[test]
    fn eigendecomposition_of_dimer_blocks_matches_closed_form() {
        // zero-size blocks must not upset the eigensolver path
        let h = build_deterministic(&dimer_params(0.0, 1.0), &[], &RealSymMatrix::zeros(0))
            .unwrap();
        let blocks = decompose_symmetry(&h).unwrap();
        let (w, _) = sym_eigen(&blocks.h_plus).unwrap();
        assert_eq!(w.len(), 0);
    }

    proptest! {
        #[test]
        fn prop_round_trip_reassembly(seed in 0u64..1000) {
            let n = 4 + 2 * (seed % 4) as usize;
            let params = sampled_params(n, 1.0, 1.0);
            let h = sample_random(&params, seed).unwrap();
            let blocks = decompose_symmetry(&h).unwrap();
            let back = blocks.reassemble();
            let err = (back.as_array() - h.matrix().as_array())
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(err <= 1e-12, "round trip error {err:.3e}");
        }

        #[test]
        fn prop_sampled_centrosymmetry_exact(seed in 0u64..1000) {
            let params = sampled_params(8, 1.3, 0.9);
            let h = sample_random(&params, seed).unwrap();
            let m = h.matrix().as_array();
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert_eq!(m[[i, j]], m[[7 - i, 7 - j]]);
                }
            }
        }
    }
}

pub mod density;
pub mod doublet;
pub mod ensemble;
pub mod scan;

use std::path::PathBuf;

use crate::config::ConfigFile;
use crate::{usage_error, CliError};
use netscatter::network::{build_deterministic, sample_random, NetworkHamiltonian, NetworkParams};
use netscatter::numerics::RealSymMatrix;

/// Global context shared by all subcommands.
pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dry_run: bool,
    pub config: ConfigFile,
}

/// Network flags common to the single-realization commands.
#[derive(clap::Args, Debug, Clone)]
pub struct NetArgs {
    /// Named parameter set (fig1 | fig3).
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of sites (even; 2 builds the bare dimer).
    #[arg(long)]
    pub n: Option<usize>,
    /// Bulk coupling scale.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Input/output-to-bulk coupling scale.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Channel coupling strength.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// On-site energy of input and output site.
    #[arg(long, allow_negative_numbers = true)]
    pub eprime: Option<f64>,
    /// Direct input-output coupling.
    #[arg(long)]
    pub v: Option<f64>,
    /// Draw the on-site energy from the bulk statistics instead of
    /// pinning it.
    #[arg(long)]
    pub sample_onsite: bool,
}

/// A fully resolved single-realization parameter set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResolvedNet {
    pub n_sites: usize,
    pub onsite_energy: f64,
    pub direct_coupling: f64,
    pub bulk_scale: f64,
    pub link_scale: f64,
    pub sample_onsite: bool,
    pub gamma: f64,
    pub seed: u64,
}

pub struct ScanPreset {
    pub n: usize,
    pub xi: f64,
    pub chi: f64,
    pub gamma: f64,
    pub eprime: f64,
    pub v: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
}

/// Caption parameter sets for the single-realization profiles.
pub fn scan_preset(name: &str) -> Option<ScanPreset> {
    match name {
        "fig1" => Some(ScanPreset {
            n: 8,
            xi: 1.0,
            chi: 1.0,
            gamma: 5.0,
            eprime: 0.0,
            v: 1.0,
            e_min: -4.0,
            e_max: 4.0,
            points: 2000,
        }),
        "fig3" => Some(ScanPreset {
            n: 10,
            xi: 10.0,
            chi: 1.0,
            gamma: 0.2,
            eprime: 0.0,
            v: 0.01,
            e_min: -1.0,
            e_max: 1.0,
            points: 2000,
        }),
        _ => None,
    }
}

impl NetArgs {
    /// Resolves flags over config-file values over preset values.
    pub fn resolve(
        &self,
        ctx: &Ctx,
        section: &'static str,
    ) -> Result<(ResolvedNet, Option<ScanPreset>), CliError> {
        let preset_name = self
            .preset
            .clone()
            .or_else(|| ctx.config.string(section, "preset"));
        let preset = match preset_name.as_deref() {
            Some(name) => Some(
                scan_preset(name)
                    .ok_or_else(|| usage_error(section, format!("unknown preset `{name}`")))?,
            ),
            None => None,
        };
        let cf = |key: &str| ctx.config.f64(section, key);
        let gamma = self
            .gamma
            .or_else(|| cf("gamma"))
            .or(preset.as_ref().map(|p| p.gamma))
            .ok_or_else(|| usage_error(section, "missing required value for --gamma"))?;
        let resolved = ResolvedNet {
            n_sites: self
                .n
                .or_else(|| ctx.config.usize(section, "n"))
                .or(preset.as_ref().map(|p| p.n))
                .unwrap_or(2),
            onsite_energy: self
                .eprime
                .or_else(|| cf("eprime"))
                .or(preset.as_ref().map(|p| p.eprime))
                .unwrap_or(0.0),
            direct_coupling: self
                .v
                .or_else(|| cf("v"))
                .or(preset.as_ref().map(|p| p.v))
                .unwrap_or(1.0),
            bulk_scale: self
                .xi
                .or_else(|| cf("xi"))
                .or(preset.as_ref().map(|p| p.xi))
                .unwrap_or(0.0),
            link_scale: self
                .chi
                .or_else(|| cf("chi"))
                .or(preset.as_ref().map(|p| p.chi))
                .unwrap_or(0.0),
            sample_onsite: self.sample_onsite
                || ctx.config.bool(section, "sample_onsite").unwrap_or(false),
            gamma,
            seed: ctx.seed,
        };
        Ok((resolved, preset))
    }
}

impl ResolvedNet {
    pub fn params(&self) -> NetworkParams {
        NetworkParams {
            n_sites: self.n_sites,
            onsite_energy: self.onsite_energy,
            direct_coupling: self.direct_coupling,
            bulk_scale: self.bulk_scale,
            link_scale: self.link_scale,
            sample_onsite: self.sample_onsite,
        }
    }

    /// Builds the realization: deterministic for the bare dimer, seeded
    /// draw otherwise.
    pub fn build(&self, section: &'static str) -> Result<NetworkHamiltonian, CliError> {
        let params = self.params();
        params
            .validate()
            .map_err(|e| usage_error(section, e.to_string()))?;
        let h = if self.n_sites == 2 {
            build_deterministic(&params, &[], &RealSymMatrix::zeros(0))
        } else {
            sample_random(&params, self.seed)
        };
        h.map_err(|e| CliError::Failure(e.into()))
    }
}

/// Writes a two-column `x,f` CSV.
pub fn write_curve(path: &std::path::Path, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut text = String::from("x,f\n");
    for (x, f) in rows {
        text.push_str(&format!("{x},{f}\n"));
    }
    std::fs::write(path, text).map_err(|e| CliError::Failure(e.into()))
}

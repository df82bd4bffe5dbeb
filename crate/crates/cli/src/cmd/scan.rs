//! `spectrum` and `dwell`: energy-grid profiles of one realization.

use super::{Ctx, NetArgs, ResolvedNet};
use crate::CliError;
use crate::usage_error;
use netscatter::scattering::{energy_grid, scan, ChannelCoupling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Spectrum,
    Dwell,
}

impl Mode {
    fn section(&self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Dwell => "dwell",
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Lower edge of the energy grid.
    #[arg(long, allow_negative_numbers = true)]
    pub emin: Option<f64>,
    /// Upper edge of the energy grid.
    #[arg(long, allow_negative_numbers = true)]
    pub emax: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(serde::Serialize)]
struct ResolvedScan {
    mode: &'static str,
    #[serde(flatten)]
    net: ResolvedNet,
    e_min: f64,
    e_max: f64,
    n_points: usize,
}

pub fn run(args: ScanArgs, ctx: &Ctx, mode: Mode) -> Result<(), CliError> {
    let section = mode.section();
    let (net, preset) = args.net.resolve(ctx, section)?;
    let e_min = args
        .emin
        .or_else(|| ctx.config.f64(section, "emin"))
        .or(preset.as_ref().map(|p| p.e_min))
        .unwrap_or(-4.0);
    let e_max = args
        .emax
        .or_else(|| ctx.config.f64(section, "emax"))
        .or(preset.as_ref().map(|p| p.e_max))
        .unwrap_or(4.0);
    let n_points = args
        .points
        .or_else(|| ctx.config.usize(section, "points"))
        .or(preset.as_ref().map(|p| p.points))
        .unwrap_or(1001);

    let resolved = ResolvedScan {
        mode: section,
        net: net.clone(),
        e_min,
        e_max,
        n_points,
    };
    if ctx.dry_run {
        println!("{}", serde_json::to_string_pretty(&resolved)?);
        return Ok(());
    }

    let grid = energy_grid(e_min, e_max, n_points)
        .map_err(|e| usage_error(section, e.to_string()))?;
    let h = net.build(section)?;
    let coupling = ChannelCoupling::symmetric(net.gamma)
        .map_err(|e| usage_error(section, e.to_string()))?;
    let response = scan(&h, &coupling, &grid)?;

    std::fs::create_dir_all(&ctx.out_dir)?;
    let csv_path = ctx.out_dir.join(format!("{section}.csv"));
    let mut file = std::fs::File::create(&csv_path)?;
    response.write_csv(&mut file)?;
    let sidecar = response.sidecar_json(&serde_json::to_value(&resolved)?)?;
    let json_path = ctx.out_dir.join(format!("{section}.json"));
    std::fs::write(&json_path, sidecar)?;
    println!(
        "wrote {} and {} ({} grid points, max p = {:.6})",
        csv_path.display(),
        json_path.display(),
        n_points,
        response.argmax_p().map(|(_, p)| p).unwrap_or(0.0)
    );
    Ok(())
}

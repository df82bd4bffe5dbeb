//! `density`: tabulates the analytic statistics — the separated-resonance
//! fraction over the scaled coupling and the efficiency density over a
//! `(gamma_tilde, p)` grid.

use super::{write_curve, Ctx};
use crate::{usage_error, CliError};
use netscatter::statistics::{
    efficiency_density, efficient_fraction, ScaledParams, DEFAULT_EDGE_DELTA,
};

#[derive(clap::Args, Debug)]
pub struct DensityArgs {
    /// Named curve set (fig4 | fig5).
    #[arg(long)]
    pub preset: Option<String>,
    /// Width(s) of the relative shift distribution (repeatable).
    #[arg(long = "sigma")]
    pub sigmas: Vec<f64>,
    /// Offset of the relative shift distribution.
    #[arg(long, allow_negative_numbers = true)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub gamma_min: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub gamma_points: Option<usize>,
    /// Points of the p-grid for the density table.
    #[arg(long)]
    pub p_points: Option<usize>,
    #[arg(long)]
    pub edge_delta: Option<f64>,
    /// Also tabulate the density grid when no preset asks for it.
    #[arg(long)]
    pub with_density: bool,
}

const SECTION: &str = "density";

#[derive(serde::Serialize)]
struct ResolvedDensity {
    sigmas: Vec<f64>,
    s0: f64,
    gamma_min: f64,
    gamma_max: f64,
    gamma_points: usize,
    p_points: usize,
    edge_delta: f64,
    tabulate_density: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
}

pub fn run(args: DensityArgs, ctx: &Ctx) -> Result<(), CliError> {
    let preset = args
        .preset
        .clone()
        .or_else(|| ctx.config.string(SECTION, "preset"));
    let (mut sigmas, mut tabulate_density) = match preset.as_deref() {
        Some("fig4") => (vec![0.1, 1.0, 10.0], false),
        Some("fig5") => (vec![10.0], true),
        Some(other) => {
            return Err(usage_error(SECTION, format!("unknown preset `{other}`")));
        }
        None => (Vec::new(), args.with_density),
    };
    if !args.sigmas.is_empty() {
        sigmas = args.sigmas.clone();
    }
    if sigmas.is_empty() {
        return Err(usage_error(
            SECTION,
            "no width given: pass --sigma (repeatable) or --preset fig4|fig5",
        ));
    }
    tabulate_density |= args.with_density;

    let resolved = ResolvedDensity {
        sigmas: sigmas.clone(),
        s0: args.s0.or_else(|| ctx.config.f64(SECTION, "s0")).unwrap_or(0.0),
        gamma_min: args
            .gamma_min
            .or_else(|| ctx.config.f64(SECTION, "gamma_min"))
            .unwrap_or(0.01),
        gamma_max: args
            .gamma_max
            .or_else(|| ctx.config.f64(SECTION, "gamma_max"))
            .unwrap_or(100.0),
        gamma_points: args
            .gamma_points
            .or_else(|| ctx.config.usize(SECTION, "gamma_points"))
            .unwrap_or(241),
        p_points: args
            .p_points
            .or_else(|| ctx.config.usize(SECTION, "p_points"))
            .unwrap_or(201),
        edge_delta: args
            .edge_delta
            .or_else(|| ctx.config.f64(SECTION, "edge_delta"))
            .unwrap_or(DEFAULT_EDGE_DELTA),
        tabulate_density,
    };

    if !(resolved.gamma_min > 0.0 && resolved.gamma_max > resolved.gamma_min) {
        return Err(usage_error(SECTION, "need 0 < gamma-min < gamma-max"));
    }
    if resolved.gamma_points < 2 || resolved.p_points < 2 {
        return Err(usage_error(SECTION, "grids need at least two points"));
    }
    if !(resolved.edge_delta > 0.0 && resolved.edge_delta < 0.5) {
        return Err(usage_error(SECTION, "edge-delta must be in (0, 0.5)"));
    }
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(usage_error(SECTION, "sigma values must be positive"));
    }

    if ctx.dry_run {
        println!("{}", serde_json::to_string_pretty(&resolved)?);
        return Ok(());
    }
    std::fs::create_dir_all(&ctx.out_dir)?;

    let gammas = log_grid(resolved.gamma_min, resolved.gamma_max, resolved.gamma_points);
    for &sigma in &sigmas {
        let rows: Vec<(f64, f64)> = gammas
            .iter()
            .map(|&g| (g, efficient_fraction(g, sigma, resolved.s0)))
            .collect();
        let path = ctx.out_dir.join(format!("efficient_fraction_sigma{sigma}.csv"));
        write_curve(&path, &rows)?;
        println!("wrote {}", path.display());
    }

    if resolved.tabulate_density {
        let delta = resolved.edge_delta;
        let p_step = (1.0 - 2.0 * delta) / (resolved.p_points - 1) as f64;
        for &sigma in &sigmas {
            let path = ctx.out_dir.join(format!("efficiency_density_sigma{sigma}.csv"));
            let mut text = String::from("gamma_tilde,p,density\n");
            for &g in &gammas {
                let sp = ScaledParams::new(g, sigma, resolved.s0)
                    .map_err(|e| usage_error(SECTION, e.to_string()))?;
                for k in 0..resolved.p_points {
                    let p = delta + p_step * k as f64;
                    let d = efficiency_density(p, &sp, delta)?;
                    text.push_str(&format!("{g},{p},{d}\n"));
                }
            }
            std::fs::write(&path, text)?;
            println!("wrote {}", path.display());
        }
    }

    // bare two-site reference at the doublet energy: p = 1/(1 + g^2/4)
    let baseline: Vec<(f64, f64)> = gammas
        .iter()
        .map(|&g| (g, 1.0 / (1.0 + g * g / 4.0)))
        .collect();
    let path = ctx.out_dir.join("dimer_baseline.csv");
    write_curve(&path, &baseline)?;
    println!("wrote {}", path.display());
    Ok(())
}

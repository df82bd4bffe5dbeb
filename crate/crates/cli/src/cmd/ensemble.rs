//! `ensemble`: Monte-Carlo sweeps over the channel coupling, persisted as
//! manifest + per-coupling CSVs.

use super::{write_curve, Ctx};
use crate::{usage_error, CliError};
use netscatter::ensemble::{
    compare_to_theory, dimer_baseline, preset, run_sweep, write_artifacts, EnsembleResult,
    SweepConfig, PRESET_NAMES,
};
use netscatter::network::NetworkParams;
use std::path::Path;

#[derive(clap::Args, Debug)]
pub struct EnsembleArgs {
    /// Named sweep (fig6-top | fig6-middle | fig6-bottom | fig7 |
    /// fig7-sigma1 | fig7-sigma10).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eprime: Option<f64>,
    /// Pin the on-site energy instead of drawing it per realization.
    #[arg(long)]
    pub pin_onsite: bool,
    #[arg(long)]
    pub gamma_start: Option<f64>,
    #[arg(long)]
    pub gamma_factor: Option<f64>,
    #[arg(long)]
    pub gamma_count: Option<usize>,
    /// Realizations per coupling.
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Doublet-quality budget for rejections.
    #[arg(long)]
    pub eps_budget: Option<f64>,
    /// Histogram bins on the regularized domain.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Edge regularization of the domain.
    #[arg(long)]
    pub edge_delta: Option<f64>,
    /// Evaluate at the finite-coupling peak energy.
    #[arg(long)]
    pub detuned: bool,
}

const SECTION: &str = "ensemble";

fn resolve_one(args: &EnsembleArgs, ctx: &Ctx, preset_name: Option<&str>) -> Result<SweepConfig, CliError> {
    let base = match preset_name {
        Some(name) => Some(preset(name, ctx.seed).ok_or_else(|| {
            usage_error(
                SECTION,
                format!("unknown preset `{name}` (known: {}, fig7)", PRESET_NAMES.join(", ")),
            )
        })?),
        None => None,
    };
    let cf = &ctx.config;
    let need = |field: &'static str, v: Option<f64>| {
        v.ok_or_else(|| usage_error(SECTION, format!("missing required value for --{field}")))
    };
    let network = match &base {
        Some(cfg) => {
            let mut net = cfg.network.clone();
            if let Some(n) = args.n {
                net.n_sites = n;
            }
            if let Some(xi) = args.xi {
                net.bulk_scale = xi;
            }
            if let Some(chi) = args.chi {
                net.link_scale = chi;
            }
            if let Some(v) = args.v {
                net.direct_coupling = v;
            }
            if let Some(e) = args.eprime {
                net.onsite_energy = e;
            }
            if args.pin_onsite {
                net.sample_onsite = false;
            }
            net
        }
        None => NetworkParams {
            n_sites: args
                .n
                .or_else(|| cf.usize(SECTION, "n"))
                .ok_or_else(|| usage_error(SECTION, "missing required value for --n"))?,
            onsite_energy: args.eprime.or_else(|| cf.f64(SECTION, "eprime")).unwrap_or(0.0),
            direct_coupling: need("v", args.v.or_else(|| cf.f64(SECTION, "v")))?,
            bulk_scale: need("xi", args.xi.or_else(|| cf.f64(SECTION, "xi")))?,
            link_scale: need("chi", args.chi.or_else(|| cf.f64(SECTION, "chi")))?,
            sample_onsite: !args.pin_onsite,
        },
    };
    let base_ref = base.as_ref();
    let config = SweepConfig {
        gamma_start: args
            .gamma_start
            .or_else(|| cf.f64(SECTION, "gamma_start"))
            .or(base_ref.map(|c| c.gamma_start))
            .map(Ok)
            .unwrap_or_else(|| {
                Err(usage_error(SECTION, "missing required value for --gamma-start"))
            })?,
        gamma_factor: args
            .gamma_factor
            .or_else(|| cf.f64(SECTION, "gamma_factor"))
            .or(base_ref.map(|c| c.gamma_factor))
            .unwrap_or(1.2),
        gamma_count: args
            .gamma_count
            .or_else(|| cf.usize(SECTION, "gamma_count"))
            .or(base_ref.map(|c| c.gamma_count))
            .map(Ok)
            .unwrap_or_else(|| {
                Err(usage_error(SECTION, "missing required value for --gamma-count"))
            })?,
        n_realizations: args
            .realizations
            .or_else(|| cf.usize(SECTION, "realizations"))
            .or(base_ref.map(|c| c.n_realizations))
            .unwrap_or(10_000),
        epsilon_budget: args
            .eps_budget
            .or_else(|| cf.f64(SECTION, "eps_budget"))
            .or(base_ref.map(|c| c.epsilon_budget))
            .unwrap_or(0.05),
        master_seed: ctx.seed,
        n_bins: args
            .bins
            .or_else(|| cf.usize(SECTION, "bins"))
            .or(base_ref.map(|c| c.n_bins))
            .unwrap_or(50),
        edge_delta: args
            .edge_delta
            .or_else(|| cf.f64(SECTION, "edge_delta"))
            .or(base_ref.map(|c| c.edge_delta))
            .unwrap_or(1e-4),
        detuned_energy: args.detuned || base_ref.map(|c| c.detuned_energy).unwrap_or(false),
        network,
    };
    config
        .validate()
        .map_err(|e| usage_error(SECTION, e.to_string()))?;
    Ok(config)
}

fn print_summary(result: &EnsembleResult) {
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let distances = compare_to_theory(result);
    println!(
        "{:>12} {:>10} {:>10} {:>10} {:>12} {:>12}",
        "gamma_tilde", "mean_p", "median_p", "tv_dist", "n_ok", "rejections"
    );
    for rec in &result.records {
        let tv = distances
            .iter()
            .find(|d| d.gamma_tilde == rec.gamma_tilde)
            .map(|d| format!("{:.4}", d.tv_distance))
            .unwrap_or_else(|| "-".into());
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>12.5} {:>10} {:>10} {:>10} {:>12} {:>12}",
            rec.gamma_tilde,
            fmt(rec.mean_p()),
            fmt(rec.median_p()),
            tv,
            rec.n_ok,
            rec.n_rejected_degenerate + rec.n_eps_violation
        );
    }
}

fn run_one(config: &SweepConfig, out_dir: &Path) -> Result<(), CliError> {
    let result = run_sweep(config)?;
    let manifest = write_artifacts(&result, out_dir)?;
    let baseline = dimer_baseline(&config.gamma_grid(), config.network.direct_coupling);
    write_curve(&out_dir.join("dimer_baseline.csv"), &baseline)?;
    print_summary(&result);
    println!("manifest: {}", manifest.display());
    Ok(())
}

pub fn run(args: EnsembleArgs, ctx: &Ctx) -> Result<(), CliError> {
    let preset_name = args
        .preset
        .clone()
        .or_else(|| ctx.config.string(SECTION, "preset"));
    // `fig7` is the pair of rows compared against the analytic law
    let runs: Vec<(Option<String>, Option<String>)> = match preset_name.as_deref() {
        Some("fig7") => vec![
            (Some("fig7-sigma1".into()), Some("fig7-sigma1".into())),
            (Some("fig7-sigma10".into()), Some("fig7-sigma10".into())),
        ],
        other => vec![(other.map(str::to_string), None)],
    };
    let mut configs = Vec::new();
    for (name, subdir) in &runs {
        let config = resolve_one(&args, ctx, name.as_deref())?;
        let dir = match subdir {
            Some(s) => ctx.out_dir.join(s),
            None => ctx.out_dir.clone(),
        };
        configs.push((config, dir));
    }
    if ctx.dry_run {
        let resolved: Vec<&SweepConfig> = configs.iter().map(|(c, _)| c).collect();
        println!("{}", serde_json::to_string_pretty(&resolved)?);
        return Ok(());
    }
    for (config, dir) in &configs {
        run_one(config, dir)?;
    }
    Ok(())
}

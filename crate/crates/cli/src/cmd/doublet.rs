//! `doublet`: shifts, quality, regime and predicted-versus-exact peaks of
//! a single realization, as JSON on stdout.

use super::{Ctx, NetArgs};
use crate::CliError;
use netscatter::doublet::{analyze, doublet_quality, DoubletAnalysis};
use netscatter::error::Error;
use netscatter::network::NetworkHamiltonian;
use netscatter::scattering::{energy_grid, scan, ChannelCoupling};
use netscatter::statistics::{doublet_bound_lhs, dominant_doublet_bound};

#[derive(clap::Args, Debug)]
pub struct DoubletArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Grid points of the exact comparison scan.
    #[arg(long)]
    pub points: Option<usize>,
    /// Quality budget used for the warning threshold.
    #[arg(long, default_value_t = 0.05)]
    pub eps_budget: f64,
}

#[derive(serde::Serialize)]
struct PredictedPeak {
    p: f64,
    tau: f64,
}

#[derive(serde::Serialize)]
struct ExactPeak {
    energy: f64,
    p: f64,
    tau: Option<f64>,
}

#[derive(serde::Serialize)]
struct DoubletReport {
    network: NetworkHamiltonian,
    gamma: f64,
    epsilon: f64,
    analysis: Option<DoubletAnalysis>,
    near_degenerate: Option<String>,
    predicted_peak: Option<PredictedPeak>,
    exact_peaks: Vec<ExactPeak>,
    warnings: Vec<String>,
}

pub fn run(args: DoubletArgs, ctx: &Ctx) -> Result<(), CliError> {
    let (net, _) = args.net.resolve(ctx, "doublet")?;
    if ctx.dry_run {
        println!("{}", serde_json::to_string_pretty(&net)?);
        return Ok(());
    }
    let h = net.build("doublet")?;
    let coupling = ChannelCoupling::symmetric(net.gamma)
        .map_err(|e| crate::usage_error("doublet", e.to_string()))?;

    let mut warnings = Vec::new();
    if net.link_scale > 0.0
        && !dominant_doublet_bound(net.link_scale, net.bulk_scale, net.n_sites, args.eps_budget)
    {
        warnings.push(format!(
            "dominant-doublet budget violated: bound value {:.4} >= {}",
            doublet_bound_lhs(net.link_scale, net.bulk_scale, net.n_sites),
            args.eps_budget
        ));
    }

    let epsilon = doublet_quality(&h)?;
    if epsilon > args.eps_budget {
        warnings.push(format!(
            "doublet quality {epsilon:.4} exceeds the budget {}",
            args.eps_budget
        ));
    }

    let (analysis, near_degenerate) = match analyze(&h, net.gamma) {
        Ok(a) => (Some(a), None),
        Err(e @ Error::NearDegenerate { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    // exact scan around the doublet window for the argmax comparison
    let (center, width) = match &analysis {
        Some(a) => (
            a.e_prime + a.s_bar,
            3.0 * (a.splitting().abs() + net.gamma),
        ),
        None => (
            net.onsite_energy,
            3.0 * (2.0 * net.direct_coupling.abs() + net.gamma),
        ),
    };
    let n_points = args.points.unwrap_or(3001);
    let grid = energy_grid(center - width, center + width, n_points)?;
    let response = scan(&h, &coupling, &grid)?;
    let n_expected = analysis
        .as_ref()
        .map(|a| a.resonance_energies.len())
        .unwrap_or(2);
    let mut maxima = response.local_maxima_p();
    maxima.sort_by(|&a, &b| response.p[b].total_cmp(&response.p[a]));
    let mut exact_peaks: Vec<ExactPeak> = maxima
        .into_iter()
        .take(n_expected)
        .map(|i| ExactPeak {
            energy: response.energies[i],
            p: response.p[i],
            tau: response.tau[i],
        })
        .collect();
    exact_peaks.sort_by(|a, b| a.energy.total_cmp(&b.energy));

    let predicted_peak = analysis.as_ref().map(|a| PredictedPeak {
        p: a.predicted_peak_probability(),
        tau: a.predicted_peak_dwell(),
    });

    let report = DoubletReport {
        network: h,
        gamma: net.gamma,
        epsilon,
        analysis,
        near_degenerate,
        predicted_peak,
        exact_peaks,
        warnings,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

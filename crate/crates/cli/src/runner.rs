//! Orchestration of the engines for one scenario run: executes the
//! requested engines, writes the CSV reports and a human-readable
//! summary, and returns the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use greennet_core::dispatch::{run_year, RunReport};
use greennet_core::econ::{emissions, site_cost_ledger, OperatingSummary};
use greennet_core::radio::{run_drops, RadioReport};
use greennet_core::scenario::Scenario;
use greennet_core::sizing::{optimize, OptimizeOutcome};
use greennet_core::sleep::{
    simulate_iot, simulate_nrt, simulate_nrt_baseline, SleepSimReport, TrafficStream,
};
use greennet_core::units::kwh_to_feedstock_kg;

use crate::report::{self, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Dispatch,
    Optimize,
    Radio,
    Sched,
    All,
}

impl Engine {
    fn runs_dispatch(self) -> bool {
        matches!(self, Engine::Dispatch | Engine::All)
    }
    fn runs_optimize(self) -> bool {
        matches!(self, Engine::Optimize | Engine::All)
    }
    fn runs_radio(self) -> bool {
        matches!(self, Engine::Radio | Engine::All)
    }
    fn runs_sched(self) -> bool {
        matches!(self, Engine::Sched | Engine::All)
    }
    fn name(self) -> &'static str {
        match self {
            Engine::Dispatch => "dispatch",
            Engine::Optimize => "optimize",
            Engine::Radio => "radio",
            Engine::Sched => "sched",
            Engine::All => "all",
        }
    }
}

/// Written as `manifest.json` next to the reports.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub engine_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_ms: u128,
}

pub fn run(
    scenario_path: &Path,
    engine: Engine,
    out_dir: Option<PathBuf>,
    seed_override: Option<u64>,
    site_filter: Option<&str>,
) -> Result<RunManifest> {
    let started = Instant::now();
    let raw = std::fs::read(scenario_path).map_err(|e| {
        anyhow::Error::new(ValidationError(anyhow!(
            "cannot read scenario {}: {e}",
            scenario_path.display()
        )))
    })?;
    let scenario_sha256 = hex::encode(Sha256::digest(&raw));

    let mut scenario = Scenario::load(scenario_path).map_err(ValidationError::wrap)?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }

    let root = out_dir.unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let mut out = OutputDir::new(root)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "scenario: {} ({} MHz)",
        scenario.name, scenario.bandwidth_mhz
    );
    let _ = writeln!(summary, "seed: {}", scenario.seed);

    if engine.runs_dispatch() {
        let report = run_dispatch(&scenario, &mut out, &mut summary)?;
        write_carbon(&scenario, &report, &mut out)?;
        write_costs(&scenario, &report, &mut out)?;
    }
    if engine.runs_optimize() {
        run_optimize(&scenario, site_filter, &mut out, &mut summary)?;
    }
    if engine.runs_radio() {
        run_radio(&scenario, &mut out, &mut summary)?;
    }
    if engine.runs_sched() {
        run_sched(&scenario, &mut out, &mut summary)?;
    }

    out.write("summary.txt", &summary)?;
    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        scenario_sha256,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: engine.name().to_string(),
        seed: scenario.seed,
        outputs: out.written().to_vec(),
        wall_clock_ms: started.elapsed().as_millis(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out.root().join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

fn run_dispatch(
    scenario: &Scenario,
    out: &mut OutputDir,
    summary: &mut String,
) -> Result<RunReport> {
    let (sites, links) = scenario.dispatch_inputs().map_err(ValidationError::wrap)?;
    let report = run_year(&sites, &links, scenario.sharing.mode)
        .map_err(|e| anyhow!("dispatch failed for scenario {}: {e}", scenario.name))?;

    out.write(
        "dispatch_summary.csv",
        &report::dispatch_summary_csv(&report),
    )?;
    out.write("sharing_transfers.csv", &report::transfers_csv(&report))?;
    for (i, site) in report.sites.iter().enumerate() {
        out.write(
            &format!("dispatch_hourly_{}.csv", site.id),
            &report::dispatch_hourly_csv(&report, i),
        )?;
    }

    let _ = writeln!(summary, "\n== dispatch ==");
    for s in &report.sites {
        let _ = writeln!(
            summary,
            "{:<10} load {:>9.1} kWh/yr | pv {:>9.1} | bg {:>7.1} | E_excess {:>8.1} | unmet {:>7.3} | shortage {:.5}",
            s.id, s.load_kwh, s.pv_kwh, s.bg_kwh, s.excess_kwh, s.unmet_kwh, s.e_cs
        );
    }
    for t in &report.transfers {
        let _ = writeln!(
            summary,
            "share {} -> {}: sent {:.2} kWh, loss {:.2} kWh, delivered {:.2} kWh, I {:.2} A",
            t.from_site, t.to_site, t.sent_kwh, t.loss_kwh, t.delivered_kwh, t.avg_current_a
        );
    }
    let _ = writeln!(
        summary,
        "network savings: {:.2} %",
        report.network_savings_pct
    );
    let _ = writeln!(
        summary,
        "conservation residual: {:.3e} kWh",
        report.conservation_residual_kwh
    );
    Ok(report)
}

fn write_carbon(scenario: &Scenario, report: &RunReport, out: &mut OutputDir) -> Result<()> {
    let mut rows = Vec::new();
    for s in &report.sites {
        let feedstock_kg = kwh_to_feedstock_kg(
            s.bg_kwh,
            scenario.resources.bg_cv_kcal_kg,
            scenario.resources.bg_efficiency,
        );
        let e = emissions(s.bg_kwh, feedstock_kg, &scenario.emissions)
            .map_err(|e| anyhow!("emissions for {}: {e}", s.id))?;
        rows.push((s.id.clone(), s.bg_kwh, feedstock_kg, e));
    }
    out.write("carbon_summary.csv", &report::carbon_csv(&rows))?;
    Ok(())
}

fn write_costs(scenario: &Scenario, report: &RunReport, out: &mut OutputDir) -> Result<()> {
    let mut all = String::new();
    let mut first = true;
    for s in &report.sites {
        let section = scenario.site(&s.id).map_err(ValidationError::wrap)?;
        let mut bank = scenario.battery;
        bank.n_batt = section.battery_units;
        let op = OperatingSummary {
            served_kwh_yr: s.served_kwh.max(1e-9),
            bg_kwh_yr: s.bg_kwh,
            bg_hours_yr: s.bg_hours,
            battery_throughput_kwh_yr: s.discharged_kwh,
        };
        let ledger = site_cost_ledger(
            section.pv_kw,
            section.bg_kw,
            &bank,
            section.converter_kw,
            &scenario.prices,
            scenario.resources.bg_cv_kcal_kg,
            scenario.resources.bg_efficiency,
            &op,
        )
        .map_err(|e| anyhow!("cost ledger for {}: {e}", s.id))?;
        let csv = report::costs_csv(&s.id, &ledger, scenario.prices.project_years);
        if first {
            all.push_str(&csv);
            first = false;
        } else {
            // skip the duplicate header
            all.push_str(csv.split_once('\n').map(|(_, rest)| rest).unwrap_or(""));
        }
    }
    out.write("costs_nominal.csv", &all)?;
    Ok(())
}

fn run_optimize(
    scenario: &Scenario,
    site_filter: Option<&str>,
    out: &mut OutputDir,
    summary: &mut String,
) -> Result<()> {
    let _ = writeln!(summary, "\n== optimize ==");
    for site in &scenario.sites {
        if let Some(f) = site_filter {
            if site.id != f {
                continue;
            }
        }
        let ctx = scenario
            .sizing_context(site)
            .map_err(ValidationError::wrap)?;
        let space = scenario.search_space(site.kind);
        let outcome =
            optimize(&ctx, &space).map_err(|e| anyhow!("optimizer failed for {}: {e}", site.id))?;
        match outcome {
            OptimizeOutcome::Ranked(designs) => {
                let best = &designs[0];
                let _ = writeln!(
                    summary,
                    "{:<10} best: pv {:.1} kW, bg {:.0} kW, {} batteries, conv {:.1} kW | NPC ${:.0} | CoE ${:.3}/kWh",
                    site.id, best.pv_kw, best.bg_kw, best.batt_units, best.conv_kw, best.npc, best.coe_per_kwh
                );
                out.write(
                    &format!("optimize_{}.csv", site.id),
                    &report::optimize_csv(&designs),
                )?;
            }
            OptimizeOutcome::InfeasibleSpace {
                candidates_evaluated,
            } => {
                let _ = writeln!(
                    summary,
                    "{:<10} infeasible space ({candidates_evaluated} candidates evaluated)",
                    site.id
                );
                out.write(
                    &format!("optimize_{}.csv", site.id),
                    "rank,pv_kw,bg_kw,battery_units,converter_kw,npc_usd,coe_usd_per_kwh,capacity_shortage_fraction,excess_kwh_yr,bg_kwh_yr\n",
                )?;
            }
        }
    }
    Ok(())
}

fn run_radio(scenario: &Scenario, out: &mut OutputDir, summary: &mut String) -> Result<()> {
    let mut reports: Vec<RadioReport> = Vec::new();
    let _ = writeln!(summary, "\n== radio ==");
    for &bw in &scenario.radio.bandwidths_mhz {
        let sc = scenario.radio_scenario(bw);
        let rep = run_drops(&sc).map_err(|e| anyhow!("radio run at {bw} MHz: {e}"))?;
        let _ = writeln!(
            summary,
            "{bw:>4} MHz: mean throughput {:.2} Mbit/s, network EE {:.0} bit/J",
            rep.mean_r_total_bps / 1e6,
            rep.network_ee_bits_per_joule
        );
        reports.push(rep);
    }
    out.write("radio_summary.csv", &report::radio_csv(&reports))?;
    out.write("radio_drops.csv", &report::radio_drops_csv(&reports))?;
    let json = serde_json::to_string_pretty(&reports)?;
    out.write("radio_summary.json", &json)?;
    Ok(())
}

fn run_sched(scenario: &Scenario, out: &mut OutputDir, summary: &mut String) -> Result<()> {
    let sched = &scenario.sched;
    let base_seed = scenario.sched_seed();

    let mut nrt_rows: Vec<(f64, &str, SleepSimReport)> = Vec::new();
    for (i, &lambda) in sched.nrt_lambda_grid_per_ms.iter().enumerate() {
        let traffic = TrafficStream {
            lambda_per_ms: lambda,
            mu_per_ms: sched.mu_per_ms,
            dl_fraction: sched.dl_fraction,
            service: sched.service,
            seed: base_seed.wrapping_add(i as u64),
        };
        let proposed = simulate_nrt(&sched.nrt, &traffic, sched.nrt_horizon_ms)
            .map_err(|e| anyhow!("nrt sweep at lambda {lambda}: {e}"))?;
        let baseline = simulate_nrt_baseline(&sched.nrt, &traffic, sched.nrt_horizon_ms)
            .map_err(|e| anyhow!("nrt baseline at lambda {lambda}: {e}"))?;
        nrt_rows.push((lambda, "triangular", proposed));
        nrt_rows.push((lambda, "fixed_short_long", baseline));
    }
    out.write("sched_nrt.csv", &report::sched_nrt_csv(&nrt_rows))?;

    let mut iot_rows: Vec<(f64, f64, SleepSimReport)> = Vec::new();
    for (i, &lambda) in sched.iot_lambda_grid_per_ms.iter().enumerate() {
        let traffic = TrafficStream {
            lambda_per_ms: lambda,
            mu_per_ms: sched.mu_per_ms,
            dl_fraction: sched.dl_fraction,
            service: sched.service,
            seed: base_seed.wrapping_add(1000 + i as u64),
        };
        for &t3324_s in &sched.iot_t3324_s {
            let mut params = sched.iot;
            params.edrx_cycle_ms = t3324_s * 1000.0;
            let rep = simulate_iot(&params, &traffic, sched.iot_horizon_ms)
                .map_err(|e| anyhow!("iot sweep at lambda {lambda}, T3324 {t3324_s}s: {e}"))?;
            iot_rows.push((lambda, t3324_s, rep));
        }
    }
    out.write("sched_iot.csv", &report::sched_iot_csv(&iot_rows))?;

    let _ = writeln!(summary, "\n== sched ==");
    if let (Some(first), Some(last)) = (
        nrt_rows.first(),
        nrt_rows.iter().rev().find(|r| r.1 == "triangular"),
    ) {
        let _ = writeln!(
            summary,
            "nrt triangular saving: {:.2} % at lambda {} -> {:.2} % at lambda {}",
            first.2.power_saving_pct, first.0, last.2.power_saving_pct, last.0
        );
    }
    if let Some(best) = iot_rows
        .iter()
        .max_by(|a, b| a.2.power_saving_pct.total_cmp(&b.2.power_saving_pct))
    {
        let _ = writeln!(
            summary,
            "iot best saving: {:.3} % (lambda {}, T3324 {} s, battery {:.1} yr)",
            best.2.power_saving_pct, best.0, best.1, best.2.battery_life_yr
        );
    }
    Ok(())
}

/// Marker for configuration problems so `main` can exit with the
/// validation status code.
#[derive(Debug)]
pub struct ValidationError(pub anyhow::Error);

impl ValidationError {
    fn wrap(e: greennet_core::Error) -> anyhow::Error {
        anyhow::Error::new(ValidationError(anyhow!("{e}")))
    }
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationError {}

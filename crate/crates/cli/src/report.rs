//! CSV and summary writers. Every CSV carries a header row that names the
//! units of each column, and numeric formatting is locale-free so reruns
//! byte-compare equal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use greennet_core::dispatch::RunReport;
use greennet_core::econ::{CostLedger, EmissionReport};
use greennet_core::radio::RadioReport;
use greennet_core::sizing::EnergySystemDesign;
use greennet_core::sleep::SleepSimReport;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

fn num(v: f64) -> String {
    // Stable shortest-roundtrip formatting.
    format!("{v}")
}

pub fn dispatch_summary_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "site,kind,load_kwh,served_kwh,unmet_kwh,pv_kwh,bg_kwh,bg_hours,charged_kwh,\
         discharged_kwh,batt_loss_kwh,conv_loss_kwh,excess_kwh,curtailed_kwh,sent_kwh,\
         received_kwh,line_loss_kwh,delta_soc_kwh,capacity_shortage_fraction\n",
    );
    for s in &report.sites {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.id,
            s.kind.name(),
            num(s.load_kwh),
            num(s.served_kwh),
            num(s.unmet_kwh),
            num(s.pv_kwh),
            num(s.bg_kwh),
            num(s.bg_hours),
            num(s.charged_kwh),
            num(s.discharged_kwh),
            num(s.batt_loss_kwh),
            num(s.conv_loss_kwh),
            num(s.excess_kwh),
            num(s.curtailed_kwh),
            num(s.sent_kwh),
            num(s.received_kwh),
            num(s.line_loss_kwh),
            num(s.delta_soc_kwh),
            num(s.e_cs),
        );
    }
    out
}

pub fn dispatch_hourly_csv(report: &RunReport, site_index: usize) -> String {
    let mut out = String::from(
        "hour,pv_kwh,bg_kwh,load_kwh,served_kwh,soc_kwh,charged_kwh,discharged_kwh,\
         batt_loss_kwh,unmet_kwh,surplus_kwh,shareable_kwh\n",
    );
    for (h, r) in report.hourly[site_index].iter().enumerate() {
        let _ = writeln!(
            out,
            "{h},{},{},{},{},{},{},{},{},{},{},{}",
            num(r.pv_kwh),
            num(r.bg_kwh),
            num(r.load_kwh),
            num(r.served_kwh),
            num(r.soc_kwh),
            num(r.charged_kwh),
            num(r.discharged_kwh),
            num(r.batt_loss_kwh),
            num(r.unmet_kwh),
            num(r.surplus_kwh),
            num(r.shareable_kwh),
        );
    }
    out
}

pub fn transfers_csv(report: &RunReport) -> String {
    let mut out = String::from("from_site,to_site,sent_kwh,loss_kwh,delivered_kwh,avg_current_a\n");
    for t in &report.transfers {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.from_site,
            t.to_site,
            num(t.sent_kwh),
            num(t.loss_kwh),
            num(t.delivered_kwh),
            num(t.avg_current_a),
        );
    }
    out
}

pub fn optimize_csv(designs: &[EnergySystemDesign]) -> String {
    let mut out = String::from(
        "rank,pv_kw,bg_kw,battery_units,converter_kw,npc_usd,coe_usd_per_kwh,\
         capacity_shortage_fraction,excess_kwh_yr,bg_kwh_yr\n",
    );
    for (rank, d) in designs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            rank + 1,
            num(d.pv_kw),
            num(d.bg_kw),
            d.batt_units,
            num(d.conv_kw),
            num(d.npc),
            num(d.coe_per_kwh),
            num(d.e_cs),
            num(d.e_excess_kwh),
            num(d.bg_kwh_yr),
        );
    }
    out
}

pub fn radio_csv(reports: &[RadioReport]) -> String {
    let mut out = String::from(
        "bandwidth_mhz,mean_r_total_bps,p5_r_total_bps,p95_r_total_bps,mean_sinr_db,\
         network_ee_bits_per_joule,tier,tier_mean_rate_bps,tier_power_w,tier_ee_bits_per_joule\n",
    );
    for r in reports {
        for t in &r.tiers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                num(r.nominal_bandwidth_mhz),
                num(r.mean_r_total_bps),
                num(r.p5_r_total_bps),
                num(r.p95_r_total_bps),
                num(r.mean_sinr_db),
                num(r.network_ee_bits_per_joule),
                t.kind.name(),
                num(t.mean_rate_bps),
                num(t.power_w),
                num(t.mean_ee_bits_per_joule),
            );
        }
    }
    out
}

pub fn radio_drops_csv(reports: &[RadioReport]) -> String {
    let mut out = String::from("bandwidth_mhz,drop,r_total_bps\n");
    for r in reports {
        for (d, v) in r.r_total_by_drop_bps.iter().enumerate() {
            let _ = writeln!(out, "{},{d},{}", num(r.nominal_bandwidth_mhz), num(*v));
        }
    }
    out
}

pub fn sched_nrt_csv(rows: &[(f64, &str, SleepSimReport)]) -> String {
    let mut out = String::from(
        "lambda_per_ms,strategy,power_saving_pct,mean_dl_latency_ms,t_data_ms,\
         t_inactive_ms,t_off_ms\n",
    );
    for (lambda, strategy, r) in rows {
        let _ = writeln!(
            out,
            "{},{strategy},{},{},{},{},{}",
            num(*lambda),
            num(r.power_saving_pct),
            num(r.mean_dl_latency_ms),
            num(r.t_data_ms),
            num(r.t_inactive_ms),
            num(r.t_off_ms),
        );
    }
    out
}

pub fn sched_iot_csv(rows: &[(f64, f64, SleepSimReport)]) -> String {
    let mut out = String::from(
        "lambda_per_ms,t3324_s,power_saving_pct,mean_dl_latency_ms,battery_life_yr,\
         t_data_ms,t_inactive_ms,t_edrx_ms,t_psm_ms\n",
    );
    for (lambda, t3324, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(*lambda),
            num(*t3324),
            num(r.power_saving_pct),
            num(r.mean_dl_latency_ms),
            num(r.battery_life_yr),
            num(r.t_data_ms),
            num(r.t_inactive_ms),
            num(r.t_off_ms),
            num(r.t_psm_ms),
        );
    }
    out
}

pub fn costs_csv(site: &str, ledger: &CostLedger, project_years: u32) -> String {
    let mut out = String::from("site,component,category,year,nominal_usd\n");
    for c in &ledger.components {
        let mut row = |category: &str, year: usize, value: f64| {
            if value != 0.0 {
                let _ = writeln!(out, "{site},{},{category},{year},{}", c.name, num(value));
            }
        };
        row("capital", 0, c.capital);
        let mut listed: Vec<usize> = c.replacement_years.clone();
        listed.dedup();
        for y in listed {
            row(
                "replacement",
                y,
                c.nominal_by_year[y] - c.om_per_yr - c.fuel_per_yr,
            );
        }
        for y in 1..=project_years as usize {
            row("om", y, c.om_per_yr);
            row("fuel", y, c.fuel_per_yr);
        }
        row("salvage", project_years as usize, -c.salvage_nominal);
    }
    out
}

pub fn carbon_csv(rows: &[(String, f64, f64, EmissionReport)]) -> String {
    let mut out = String::from(
        "site,bg_kwh_yr,feedstock_kg_yr,co2_kg_yr,co_kg_yr,unburned_hc_kg_yr,\
         particulates_kg_yr,so2_kg_yr,nox_kg_yr,avoided_co2_kg_yr\n",
    );
    for (site, bg_kwh, feedstock_kg, e) in rows {
        let _ = writeln!(
            out,
            "{site},{},{},{},{},{},{},{},{},{}",
            num(*bg_kwh),
            num(*feedstock_kg),
            num(e.co2_kg),
            num(e.co_kg),
            num(e.unburned_hc_kg),
            num(e.particulates_kg),
            num(e.so2_kg),
            num(e.nox_kg),
            num(e.avoided_co2_kg),
        );
    }
    out
}

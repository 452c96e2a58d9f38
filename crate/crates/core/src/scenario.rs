//! Scenario files: one TOML document describes the sites, sharing
//! topology, resource assumptions, prices, radio setup and scheduler
//! sweeps of a study. Unknown keys are rejected and every omitted value
//! falls back to the bundled defaults, so a minimal scenario lists only
//! its sites and links.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispatch::{ShareLink, SharingMode, SiteInput};
use crate::econ::{EmissionFactors, PriceTable};
use crate::power::{annual_energy, bs_power, BsKind, BsPowerParams, TrafficProfile};
use crate::profile;
use crate::radio::RadioScenario;
use crate::renewables::BatteryBank;
use crate::sizing::{SearchSpace, SiteContext};
use crate::sleep::{DrxParams, IotParams, ServiceDistribution};
use crate::units::feedstock_kg_to_kwh;
use crate::{Error, Result, HOURS_PER_YEAR};

/// Load-scale factor applied to the 10 MHz power-parameter table for a
/// given carrier bandwidth. Calibrated so the annual site consumption
/// matches the per-bandwidth demand figures the bundled scenarios target.
pub fn default_load_scale(kind: BsKind, bandwidth_mhz: f64) -> Result<f64> {
    let macro_scale = match bandwidth_mhz.round() as i64 {
        5 => 0.754861,
        10 => 1.0,
        15 => 1.263581,
        20 => 1.565646,
        other => {
            return Err(Error::Validation(format!(
                "bandwidth must be 5, 10, 15 or 20 MHz, got {other}"
            )))
        }
    };
    Ok(match kind {
        BsKind::Macro => macro_scale,
        // Micro demand tracks the macro bandwidth ratio around its own
        // 10 MHz calibration point; pico and femto stay flat.
        BsKind::Micro => 1.077062 * macro_scale,
        BsKind::Pico => 1.017264,
        BsKind::Femto => 1.020329,
    })
}

/// Resource assumptions shared by every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourceSection {
    pub psh: f64,
    pub derating: f64,
    pub dual_axis_tracking: bool,
    /// Optional measured hourly PV profile (CSV, one value per row,
    /// kW per kW rated), resolved relative to the scenario file.
    pub pv_profile_csv: Option<PathBuf>,
    pub converter_efficiency: f64,
    pub bg_cv_kcal_kg: f64,
    pub bg_efficiency: f64,
}

impl Default for ResourceSection {
    fn default() -> Self {
        Self {
            psh: profile::DEFAULT_PSH,
            derating: 0.9,
            dual_axis_tracking: true,
            pv_profile_csv: None,
            converter_efficiency: 0.95,
            bg_cv_kcal_kg: 3411.33,
            bg_efficiency: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharingSection {
    pub mode: SharingMode,
    pub bus_voltage_v: f64,
    pub ohm_per_km: f64,
}

impl Default for SharingSection {
    fn default() -> Self {
        Self {
            mode: SharingMode::AnnualAverage,
            bus_voltage_v: 48.0,
            ohm_per_km: 3.276,
        }
    }
}

/// One site: its class, energy system design and demand modifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSection {
    pub id: String,
    pub kind: BsKind,
    pub pv_kw: f64,
    #[serde(default)]
    pub bg_kw: f64,
    pub battery_units: u32,
    #[serde(default)]
    pub converter_kw: f64,
    #[serde(default)]
    pub ac_load_kwh_yr: f64,
    /// Annual feedstock availability for the generator (t/yr).
    #[serde(default)]
    pub bg_feedstock_cap_tons_yr: f64,
    /// Override for the bandwidth-derived demand scale.
    #[serde(default)]
    pub load_scale: Option<f64>,
    /// Override for the default diurnal demand profile.
    #[serde(default)]
    pub traffic_profile: Option<Vec<f64>>,
    /// Override for the class power parameters (applied before scaling).
    #[serde(default)]
    pub power: Option<BsPowerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub from: String,
    pub to: String,
    pub resistance_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub users: usize,
    pub drops: usize,
    pub bandwidths_mhz: Vec<f64>,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self {
            users: 30,
            drops: 200,
            bandwidths_mhz: vec![5.0, 10.0, 15.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedSection {
    pub nrt_lambda_grid_per_ms: Vec<f64>,
    pub nrt_horizon_ms: f64,
    pub iot_lambda_grid_per_ms: Vec<f64>,
    pub iot_t3324_s: Vec<f64>,
    pub iot_horizon_ms: f64,
    pub mu_per_ms: f64,
    pub dl_fraction: f64,
    pub service: ServiceDistribution,
    pub nrt: DrxParams,
    pub iot: IotParams,
}

impl Default for SchedSection {
    fn default() -> Self {
        Self {
            nrt_lambda_grid_per_ms: (1..=10).map(|k| k as f64 * 0.05).collect(),
            nrt_horizon_ms: 1_000_000.0,
            iot_lambda_grid_per_ms: vec![0.005, 0.01, 0.05, 0.1, 0.5],
            iot_t3324_s: (0..16).map(|k| 5.0 + 2.0 * k as f64).collect(),
            iot_horizon_ms: 3_000_000.0,
            mu_per_ms: 100.0,
            dl_fraction: 0.5,
            service: ServiceDistribution::Deterministic,
            nrt: DrxParams::defaults(),
            iot: IotParams::defaults(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub backup_days: f64,
    pub shortage_tolerance: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            backup_days: 3.0,
            shortage_tolerance: 0.0,
        }
    }
}

fn default_battery_template() -> BatteryBank {
    BatteryBank::default_unit(8)
}

/// A fully parsed scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Master seed; every stochastic engine derives its stream from it.
    pub seed: u64,
    pub bandwidth_mhz: f64,
    #[serde(default)]
    pub resources: ResourceSection,
    #[serde(default)]
    pub sharing: SharingSection,
    #[serde(default = "default_battery_template")]
    pub battery: BatteryBank,
    #[serde(default)]
    pub prices: PriceTable,
    #[serde(default)]
    pub emissions: EmissionFactors,
    pub sites: Vec<SiteSection>,
    #[serde(default)]
    pub links: Vec<LinkSection>,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub sched: SchedSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Validation(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let mut scenario = Self::from_toml_str(&text)?;
        scenario.base_dir = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Validation(format!("scenario parse: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::Validation(
                "scenario must define at least one [[sites]] entry (required fields: \
                 name, seed, bandwidth_mhz, sites)"
                    .into(),
            ));
        }
        default_load_scale(BsKind::Macro, self.bandwidth_mhz)?;
        let mut seen = std::collections::HashSet::new();
        for site in &self.sites {
            if !seen.insert(&site.id) {
                return Err(Error::Validation(format!(
                    "duplicate site id {:?}",
                    site.id
                )));
            }
            let mut bank = self.battery;
            bank.n_batt = site.battery_units;
            bank.validate(self.sharing.bus_voltage_v)
                .map_err(|e| Error::Validation(format!("site {:?}: {e}", site.id)))?;
            if let Some(p) = &site.traffic_profile {
                if p.len() != 24 {
                    return Err(Error::Validation(format!(
                        "site {:?}: traffic_profile must have 24 entries, found {}",
                        site.id,
                        p.len()
                    )));
                }
            }
            if let Some(power) = &site.power {
                power
                    .validate()
                    .map_err(|e| Error::Validation(format!("site {:?}: {e}", site.id)))?;
            }
            if site.pv_kw < 0.0 || site.bg_kw < 0.0 || site.converter_kw < 0.0 {
                return Err(Error::Validation(format!(
                    "site {:?}: component sizes must be >= 0",
                    site.id
                )));
            }
        }
        for link in &self.links {
            for end in [&link.from, &link.to] {
                if !self.sites.iter().any(|s| &s.id == end) {
                    return Err(Error::Topology(format!(
                        "link {} -> {} references unknown site {:?}",
                        link.from, link.to, end
                    )));
                }
            }
            if link.from == link.to {
                return Err(Error::Topology(format!(
                    "link {} -> {} is a self-loop",
                    link.from, link.to
                )));
            }
            if !(link.resistance_ohm > 0.0) {
                return Err(Error::Validation(format!(
                    "link {} -> {}: resistance must be > 0",
                    link.from, link.to
                )));
            }
        }
        if !(self.resources.converter_efficiency > 0.0
            && self.resources.converter_efficiency <= 1.0)
        {
            return Err(Error::Validation(
                "converter_efficiency must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// The hourly PV shape (kW per kW rated): measured CSV when given,
    /// otherwise the built-in synthetic year.
    pub fn pv_profile(&self) -> Result<Vec<f64>> {
        match &self.resources.pv_profile_csv {
            Some(rel) => {
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    self.base_dir.join(rel)
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Validation(format!("cannot read PV profile {}: {e}", path.display()))
                })?;
                profile::parse_profile_csv(&text)
            }
            None => Ok(profile::default_hourly_profile()),
        }
    }

    pub fn tracking_gain(&self) -> f64 {
        if self.resources.dual_axis_tracking {
            1.434
        } else {
            1.0
        }
    }

    pub fn site(&self, id: &str) -> Result<&SiteSection> {
        self.sites
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Topology(format!("unknown site {id:?}")))
    }

    /// Effective power parameters for a site at this scenario's bandwidth.
    pub fn bs_params(&self, site: &SiteSection) -> Result<BsPowerParams> {
        let base = site
            .power
            .unwrap_or_else(|| BsPowerParams::defaults(site.kind));
        let scale = match site.load_scale {
            Some(s) => s,
            None => default_load_scale(site.kind, self.bandwidth_mhz)?,
        };
        Ok(base.scaled(scale))
    }

    pub fn traffic_profile(&self, site: &SiteSection) -> Result<TrafficProfile> {
        match &site.traffic_profile {
            Some(v) => {
                if v.len() != 24 {
                    return Err(Error::Validation(format!(
                        "site {:?}: traffic_profile must have 24 entries",
                        site.id
                    )));
                }
                let mut arr = [0.0; 24];
                arr.copy_from_slice(v);
                TrafficProfile::new(arr)
            }
            None => Ok(TrafficProfile::default()),
        }
    }

    /// Hourly demand at the DC bus: the load-model draw plus the AC load
    /// inflated by the converter efficiency.
    pub fn load_series(&self, site: &SiteSection) -> Result<Vec<f64>> {
        let params = self.bs_params(site)?;
        let traffic = self.traffic_profile(site)?;
        let ac_per_hour =
            site.ac_load_kwh_yr / HOURS_PER_YEAR as f64 / self.resources.converter_efficiency;
        let mut series = Vec::with_capacity(HOURS_PER_YEAR);
        for hour in 0..HOURS_PER_YEAR {
            let chi = traffic.fraction_at(hour % 24);
            series.push(bs_power(&params, chi)? / 1000.0 + ac_per_hour);
        }
        Ok(series)
    }

    /// Annual converter loss booked for a site.
    pub fn converter_loss_kwh(&self, site: &SiteSection) -> f64 {
        site.ac_load_kwh_yr * (1.0 / self.resources.converter_efficiency - 1.0)
    }

    /// Annual site consumption at the bus (kWh/yr).
    pub fn annual_load_kwh(&self, site: &SiteSection) -> Result<f64> {
        let params = self.bs_params(site)?;
        let traffic = self.traffic_profile(site)?;
        let dc_plus_ac = annual_energy(&params, &traffic, site.ac_load_kwh_yr)?;
        Ok(dc_plus_ac + self.converter_loss_kwh(site))
    }

    fn feedstock_cap_kwh(&self, site: &SiteSection) -> f64 {
        feedstock_kg_to_kwh(
            site.bg_feedstock_cap_tons_yr * 1000.0,
            self.resources.bg_cv_kcal_kg,
            self.resources.bg_efficiency,
        )
    }

    /// Dispatch inputs for every site plus the link list.
    pub fn dispatch_inputs(&self) -> Result<(Vec<SiteInput>, Vec<ShareLink>)> {
        let pv_shape = self.pv_profile()?;
        let gain = self.tracking_gain();
        let mut inputs = Vec::with_capacity(self.sites.len());
        for site in &self.sites {
            let load = self.load_series(site)?;
            let pv: Vec<f64> = pv_shape
                .iter()
                .map(|p| site.pv_kw * p * self.resources.derating * gain)
                .collect();
            let mut bank = self.battery;
            bank.n_batt = site.battery_units;
            let capacity = bank.capacity_kwh();
            inputs.push(SiteInput {
                id: site.id.clone(),
                kind: site.kind,
                load_kwh: load,
                pv_kwh: pv,
                battery_capacity_kwh: capacity,
                battery_floor_kwh: capacity * bank.soc_min_pct / 100.0,
                battery_initial_kwh: capacity,
                round_trip_eff: bank.round_trip_eff,
                bg_rated_kw: site.bg_kw,
                bg_feedstock_cap_kwh: if site.bg_kw > 0.0 {
                    self.feedstock_cap_kwh(site)
                } else {
                    0.0
                },
                conv_loss_kwh: self.converter_loss_kwh(site),
            });
        }
        let links = self
            .links
            .iter()
            .map(|l| ShareLink {
                from_site: l.from.clone(),
                to_site: l.to.clone(),
                resistance_ohm: l.resistance_ohm,
                bus_voltage_v: self.sharing.bus_voltage_v,
            })
            .collect();
        Ok((inputs, links))
    }

    /// Grid-search context for one site.
    pub fn sizing_context(&self, site: &SiteSection) -> Result<SiteContext> {
        let ac_peak_kw = if site.ac_load_kwh_yr > 0.0 {
            // Flat AC draw: the converter must pass the mean rate.
            site.ac_load_kwh_yr / HOURS_PER_YEAR as f64 / self.resources.converter_efficiency
        } else {
            0.0
        };
        Ok(SiteContext {
            kind: site.kind,
            load_kwh: self.load_series(site)?,
            ac_peak_kw,
            conv_loss_kwh: self.converter_loss_kwh(site),
            pv_profile: self.pv_profile()?,
            pv_derating: self.resources.derating,
            pv_tracking_gain: self.tracking_gain(),
            battery_template: self.battery,
            bus_voltage_v: self.sharing.bus_voltage_v,
            bg_feedstock_cap_kwh: self.feedstock_cap_kwh(site),
            bg_cv_kcal_kg: self.resources.bg_cv_kcal_kg,
            bg_efficiency: self.resources.bg_efficiency,
            backup_days: self.optimize.backup_days,
            shortage_tolerance: self.optimize.shortage_tolerance,
            prices: self.prices.clone(),
        })
    }

    /// Default search space for a site class.
    pub fn search_space(&self, kind: BsKind) -> SearchSpace {
        SearchSpace::default_for(kind)
    }

    /// Radio setup at one of the scenario's nominal bandwidths (MHz).
    pub fn radio_scenario(&self, bandwidth_mhz: f64) -> RadioScenario {
        RadioScenario::two_tier(
            bandwidth_mhz,
            self.radio.users,
            self.radio.drops,
            self.seed ^ 0x7261_6469_6f00_0001, // radio stream
        )
    }

    /// Seed for the scheduler engines.
    pub fn sched_seed(&self) -> u64 {
        self.seed ^ 0x7363_6865_6400_0001
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_toml() -> String {
        r#"
name = "mini"
seed = 7
bandwidth_mhz = 10.0

[[sites]]
id = "macro-a"
kind = "macro"
pv_kw = 3.5
bg_kw = 1.0
battery_units = 32
converter_kw = 0.1
ac_load_kwh_yr = 130.0
bg_feedstock_cap_tons_yr = 0.16
"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let sc = Scenario::from_toml_str(&minimal_toml()).unwrap();
        assert_eq!(sc.sites.len(), 1);
        assert_relative_eq!(sc.prices.interest_rate, 0.0675);
        assert_relative_eq!(sc.resources.psh, 4.59);
        let site = sc.site("macro-a").unwrap();
        let params = sc.bs_params(site).unwrap();
        assert_relative_eq!(params.p0_w, 84.0);
    }

    #[test]
    fn empty_scenario_lists_required_fields() {
        let err = Scenario::from_toml_str("").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("name") || msg.contains("missing field"),
            "{msg}"
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = minimal_toml() + "\nnot_a_field = 3\n";
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn battery_multiplicity_enforced() {
        let bad = minimal_toml().replace("battery_units = 32", "battery_units = 30");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("multiple"), "{err}");
    }

    #[test]
    fn annual_load_matches_reference_site() {
        let sc = Scenario::from_toml_str(&minimal_toml()).unwrap();
        let site = sc.site("macro-a").unwrap();
        let annual = sc.annual_load_kwh(site).unwrap();
        // 4989 DC + 130 AC + converter loss
        assert!((annual - 5125.8).abs() < 1.0, "annual {annual}");
        let series = sc.load_series(site).unwrap();
        let sum: f64 = series.iter().sum();
        assert_relative_eq!(sum, annual, epsilon = 1e-6);
    }

    #[test]
    fn per_bandwidth_scale_applies() {
        let five = minimal_toml().replace("bandwidth_mhz = 10.0", "bandwidth_mhz = 5.0");
        let sc = Scenario::from_toml_str(&five).unwrap();
        let site = sc.site("macro-a").unwrap();
        let annual = sc.annual_load_kwh(site).unwrap();
        assert!(
            (annual - 3896.0 - sc.converter_loss_kwh(site)).abs() < 2.0,
            "annual {annual}"
        );
    }

    #[test]
    fn unknown_bandwidth_rejected() {
        let bad = minimal_toml().replace("bandwidth_mhz = 10.0", "bandwidth_mhz = 12.0");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn link_to_unknown_site_rejected() {
        let bad = minimal_toml()
            + r#"
[[links]]
from = "macro-a"
to = "ghost"
resistance_ohm = 5.67
"#;
        assert!(matches!(
            Scenario::from_toml_str(&bad),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn dispatch_inputs_shapes() {
        let sc = Scenario::from_toml_str(&minimal_toml()).unwrap();
        let (inputs, links) = sc.dispatch_inputs().unwrap();
        assert_eq!(inputs.len(), 1);
        assert!(links.is_empty());
        assert_eq!(inputs[0].load_kwh.len(), HOURS_PER_YEAR);
        assert_eq!(inputs[0].pv_kwh.len(), HOURS_PER_YEAR);
        assert_relative_eq!(inputs[0].battery_capacity_kwh, 69.12, epsilon = 1e-9);
        assert_relative_eq!(inputs[0].battery_floor_kwh, 69.12 * 0.3, epsilon = 1e-9);
        // feedstock cap: 160 kg * 3411.33 kcal/kg * 0.3 / 860
        assert_relative_eq!(inputs[0].bg_feedstock_cap_kwh, 190.398, epsilon = 0.01);
    }
}

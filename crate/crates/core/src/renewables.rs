//! Renewable generation and storage arithmetic: solar PV output, biomass
//! generator output, battery-bank sizing and lifetime, and the annual
//! reliability bookkeeping (capacity shortage / excess energy).

use serde::{Deserialize, Serialize};

use crate::units::{DAYS_PER_YEAR, KCAL_PER_KWH};
use crate::{profile, Error, Result, HOURS_PER_YEAR};

/// Solar PV array configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvConfig {
    /// Rated peak capacity (kW).
    pub rated_kw: f64,
    /// Derating factor in (0, 1].
    pub derating: f64,
    /// Peak solar hours (h/day equivalent of 1 kW/m²).
    pub psh: f64,
    /// Multiplicative tracking gain (1.0 = fixed mount, 1.434 = dual-axis).
    pub tracking_gain: f64,
    /// Optional measured hourly output (kW per kW rated, 8760 values).
    /// When absent a synthetic profile is used.
    pub hourly_profile: Option<Vec<f64>>,
}

impl PvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rated_kw > 0.0) {
            return Err(Error::Validation(format!(
                "rated_kw must be > 0, got {}",
                self.rated_kw
            )));
        }
        if !(self.derating > 0.0 && self.derating <= 1.0) {
            return Err(Error::Validation(format!(
                "derating must be in (0, 1], got {}",
                self.derating
            )));
        }
        if !(self.psh > 0.0 && self.psh < 24.0) {
            return Err(Error::Validation(format!(
                "psh must be in (0, 24), got {}",
                self.psh
            )));
        }
        if !(self.tracking_gain >= 1.0) {
            return Err(Error::Validation(format!(
                "tracking_gain must be >= 1, got {}",
                self.tracking_gain
            )));
        }
        if let Some(p) = &self.hourly_profile {
            if p.len() != HOURS_PER_YEAR {
                return Err(Error::Validation(format!(
                    "hourly_profile must have {HOURS_PER_YEAR} values, found {}",
                    p.len()
                )));
            }
        }
        Ok(())
    }
}

/// Biomass generator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgConfig {
    /// Feedstock throughput (t/yr) the rated power is derived from.
    pub biomass_tons_yr: f64,
    /// Calorific value of the feedstock (kcal/kg).
    pub cv_kcal_kg: f64,
    /// Electrical conversion efficiency in (0, 1].
    pub efficiency: f64,
    /// Running-hours factor.
    pub t_op: f64,
    /// Capacity factor in [0, 1].
    pub capacity_factor: f64,
}

impl BgConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("biomass_tons_yr", self.biomass_tons_yr),
            ("cv_kcal_kg", self.cv_kcal_kg),
            ("t_op", self.t_op),
        ] {
            if v < 0.0 {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Validation(format!(
                "efficiency must be in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(0.0..=1.0).contains(&self.capacity_factor) {
            return Err(Error::Validation(format!(
                "capacity_factor must be in [0, 1], got {}",
                self.capacity_factor
            )));
        }
        Ok(())
    }
}

/// Battery bank configuration. The bank is wired in series strings, so the
/// unit count must be a multiple of `bus_voltage / v_nom`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryBank {
    /// Unit count.
    pub n_batt: u32,
    /// Per-unit nominal voltage (V).
    pub v_nom: f64,
    /// Per-unit nominal capacity (Ah).
    pub q_nom_ah: f64,
    /// Lower discharge threshold (% of capacity).
    pub soc_min_pct: f64,
    /// Depth of discharge fraction for sizing.
    pub dod: f64,
    /// Capacity coefficient for sizing.
    pub kb: f64,
    /// Lifetime energy throughput of a single unit (kWh).
    pub lifetime_throughput_kwh: f64,
    /// Float life (years).
    pub float_life_yr: f64,
    /// Round-trip efficiency in (0, 1].
    pub round_trip_eff: f64,
}

impl BatteryBank {
    /// Trojan L16P style defaults (6 V / 360 Ah units on a 48 V bus).
    /// The lifetime throughput is a vendor-typical figure, not a published
    /// one; it only affects replacement scheduling.
    pub fn default_unit(n_batt: u32) -> Self {
        Self {
            n_batt,
            v_nom: 6.0,
            q_nom_ah: 360.0,
            soc_min_pct: 30.0,
            dod: 0.7,
            kb: 1.0,
            lifetime_throughput_kwh: 1075.0,
            float_life_yr: 10.0,
            round_trip_eff: 0.85,
        }
    }

    /// Nominal bank capacity (kWh).
    pub fn capacity_kwh(&self) -> f64 {
        f64::from(self.n_batt) * self.v_nom * self.q_nom_ah / 1000.0
    }

    /// Usable bank energy above the discharge floor (kWh).
    pub fn usable_kwh(&self) -> f64 {
        self.capacity_kwh() * (1.0 - self.soc_min_pct / 100.0)
    }

    pub fn validate(&self, bus_voltage_v: f64) -> Result<()> {
        if self.n_batt == 0 {
            return Err(Error::Validation(
                "battery bank must have at least one string".into(),
            ));
        }
        let per_string = bus_voltage_v / self.v_nom;
        if (per_string - per_string.round()).abs() > 1e-9 || per_string < 1.0 {
            return Err(Error::Validation(format!(
                "bus voltage {bus_voltage_v} V is not an integer multiple of unit voltage {} V",
                self.v_nom
            )));
        }
        let per_string = per_string.round() as u32;
        if self.n_batt % per_string != 0 {
            return Err(Error::Validation(format!(
                "battery count {} is not a multiple of {per_string} (units per {bus_voltage_v} V string)",
                self.n_batt
            )));
        }
        if !(0.0..100.0).contains(&self.soc_min_pct) {
            return Err(Error::Validation(format!(
                "soc_min_pct must be in [0, 100), got {}",
                self.soc_min_pct
            )));
        }
        if !(self.round_trip_eff > 0.0 && self.round_trip_eff <= 1.0) {
            return Err(Error::Validation(format!(
                "round_trip_eff must be in (0, 1], got {}",
                self.round_trip_eff
            )));
        }
        Ok(())
    }
}

/// Annual generation/consumption balance of one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilityReport {
    /// Total generated electricity (kWh/yr).
    pub e_gen_kwh: f64,
    /// Annual site consumption (kWh/yr).
    pub e_bs_kwh: f64,
    /// Yearly energy deficiency (kWh/yr).
    pub e_ed_kwh: f64,
    /// Capacity shortage fraction (deficiency over consumption).
    pub e_cs: f64,
    /// Excess electricity after losses (kWh/yr).
    pub e_excess_kwh: f64,
}

/// Annual PV energy (kWh/yr): `rated × PSH × derating × 365 × gain`.
pub fn pv_annual(cfg: &PvConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.rated_kw * cfg.psh * cfg.derating * DAYS_PER_YEAR * cfg.tracking_gain)
}

/// PV energy in one hour of the year (kWh).
///
/// Uses the configured hourly profile when present, otherwise a flat
/// synthetic window of `psh` hours centred on noon. The tracking gain
/// applies uniformly so the yearly sum stays consistent with
/// [`pv_annual`] for any gain.
pub fn pv_hour(cfg: &PvConfig, hour: usize) -> Result<f64> {
    if hour >= HOURS_PER_YEAR {
        return Err(Error::Range(format!(
            "hour {hour} outside 0..{HOURS_PER_YEAR}"
        )));
    }
    let per_rated = match &cfg.hourly_profile {
        Some(p) => p[hour],
        None => synthetic_flat_window(cfg.psh, hour % 24),
    };
    Ok(cfg.rated_kw * per_rated * cfg.derating * cfg.tracking_gain)
}

/// Fallback daily shape when no measured profile is available: constant
/// 1 kW/kW over a `psh`-hour window centred on noon (fractional edges).
fn synthetic_flat_window(psh: f64, hour_of_day: usize) -> f64 {
    let start = 12.0 - psh / 2.0;
    let end = 12.0 + psh / 2.0;
    let h0 = hour_of_day as f64;
    let h1 = h0 + 1.0;
    (end.min(h1) - start.max(h0)).clamp(0.0, 1.0)
}

/// Rated output power of the biomass generator (kW):
/// `T_BM · CV_BM · η_BM · 1000 / (365 · 860 · t_op)`.
pub fn bg_power(cfg: &BgConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.t_op == 0.0 {
        return Err(Error::Domain("bg running-hours factor t_op is zero".into()));
    }
    Ok(
        cfg.biomass_tons_yr * cfg.cv_kcal_kg * cfg.efficiency * 1000.0
            / (DAYS_PER_YEAR * KCAL_PER_KWH * cfg.t_op),
    )
}

/// Annual biomass energy (kWh/yr) at a capacity factor.
pub fn bg_annual(p_bg_kw: f64, capacity_factor: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&capacity_factor) {
        return Err(Error::Range(format!(
            "capacity factor {capacity_factor} outside [0, 1]"
        )));
    }
    Ok(p_bg_kw * DAYS_PER_YEAR * 24.0 * capacity_factor)
}

/// Hours the bank alone can carry the load from full usable charge.
pub fn battery_autonomy(bank: &BatteryBank, daily_load_kwh: f64) -> Result<f64> {
    if !(daily_load_kwh > 0.0) {
        return Err(Error::Domain(format!(
            "daily load must be > 0 for autonomy, got {daily_load_kwh}"
        )));
    }
    Ok(f64::from(bank.n_batt)
        * bank.v_nom
        * bank.q_nom_ah
        * (1.0 - bank.soc_min_pct / 100.0)
        * 24.0
        / (1000.0 * daily_load_kwh))
}

/// Required bank capacity (Ah) for a given backup requirement:
/// `P_BS · D · t / (DOD · V · K_b)`.
pub fn battery_capacity_required(
    p_bs_kw: f64,
    backup_days: f64,
    hours_per_day: f64,
    dod: f64,
    bus_voltage_v: f64,
    kb: f64,
) -> Result<f64> {
    if !(dod > 0.0 && dod <= 1.0) || !(kb > 0.0 && kb <= 1.0) || !(bus_voltage_v > 0.0) {
        return Err(Error::Domain(format!(
            "battery sizing denominator degenerate: dod={dod} kb={kb} bus={bus_voltage_v}"
        )));
    }
    if p_bs_kw < 0.0 || backup_days < 0.0 || hours_per_day < 0.0 {
        return Err(Error::Validation(
            "battery sizing inputs must be nonnegative".into(),
        ));
    }
    Ok(p_bs_kw * 1000.0 * backup_days * hours_per_day / (dod * bus_voltage_v * kb))
}

/// Bank lifetime (years): throughput life `N·T_batt / T_a` capped by the
/// float life. A zero annual throughput leaves only the float life.
pub fn battery_lifetime(bank: &BatteryBank, annual_throughput_kwh: f64) -> Result<f64> {
    if annual_throughput_kwh < 0.0 {
        return Err(Error::Validation(format!(
            "annual throughput must be >= 0, got {annual_throughput_kwh}"
        )));
    }
    if annual_throughput_kwh == 0.0 {
        return Ok(bank.float_life_yr);
    }
    let throughput_life =
        f64::from(bank.n_batt) * bank.lifetime_throughput_kwh / annual_throughput_kwh;
    Ok(throughput_life.min(bank.float_life_yr))
}

/// Annual reliability balance: generation vs consumption with converter
/// and battery losses. `E_ED` and `E_excess` are floored at zero and are
/// never simultaneously positive.
pub fn reliability(
    e_bs_kwh: f64,
    e_pv_kwh: f64,
    e_bg_kwh: f64,
    conv_loss_kwh: f64,
    batt_loss_kwh: f64,
) -> Result<ReliabilityReport> {
    for (name, v) in [
        ("e_bs", e_bs_kwh),
        ("e_pv", e_pv_kwh),
        ("e_bg", e_bg_kwh),
        ("conv_loss", conv_loss_kwh),
        ("batt_loss", batt_loss_kwh),
    ] {
        if v < 0.0 {
            return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
        }
    }
    let e_gen = e_pv_kwh + e_bg_kwh;
    let e_ed = (e_bs_kwh - e_gen).max(0.0);
    let e_cs = if e_bs_kwh > 0.0 { e_ed / e_bs_kwh } else { 0.0 };
    let e_excess = (e_gen - e_bs_kwh - conv_loss_kwh - batt_loss_kwh).max(0.0);
    Ok(ReliabilityReport {
        e_gen_kwh: e_gen,
        e_bs_kwh,
        e_ed_kwh: e_ed,
        e_cs,
        e_excess_kwh: e_excess,
    })
}

/// The default PV resource bundle used by the bundled scenarios.
pub fn default_pv(rated_kw: f64, dual_axis: bool) -> PvConfig {
    PvConfig {
        rated_kw,
        derating: 0.9,
        psh: profile::DEFAULT_PSH,
        tracking_gain: if dual_axis { 1.434 } else { 1.0 },
        hourly_profile: Some(profile::default_hourly_profile()),
    }
}

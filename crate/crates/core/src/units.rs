//! Unit conversions used across the engines, kept in one place so the
//! worked fixtures stay bit-for-bit reproducible.

/// Thermal kilocalories per electrical kilowatt-hour.
pub const KCAL_PER_KWH: f64 = 860.0;

/// Days per simulated year.
pub const DAYS_PER_YEAR: f64 = 365.0;

pub fn watts_to_kw(w: f64) -> f64 {
    w / 1000.0
}

pub fn kw_to_watts(kw: f64) -> f64 {
    kw * 1000.0
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Electrical energy recoverable from biomass feedstock at a given
/// calorific value and conversion efficiency.
pub fn feedstock_kg_to_kwh(kg: f64, cv_kcal_kg: f64, efficiency: f64) -> f64 {
    kg * cv_kcal_kg * efficiency / KCAL_PER_KWH
}

/// Inverse of [`feedstock_kg_to_kwh`]: feedstock consumed per unit of
/// generated electricity.
pub fn kwh_to_feedstock_kg(kwh: f64, cv_kcal_kg: f64, efficiency: f64) -> f64 {
    kwh * KCAL_PER_KWH / (cv_kcal_kg * efficiency)
}

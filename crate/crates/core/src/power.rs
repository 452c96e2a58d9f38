//! Base-station electrical load models.
//!
//! Two views of BS consumption are provided. The load-dependent model
//! ([`bs_power`]) drives every simulation: consumption rises linearly with
//! the traffic load fraction `chi` and collapses to a sleep floor at
//! `chi = 0`. The component model ([`p1_static`]) reconstructs the
//! maximum-load site total from baseband/RF/PA consumption and the loss
//! chain of the DC regulator, mains supply and cooling; it exists for
//! cross-validation of parameter sets, not for simulation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, HOURS_PER_YEAR};

/// Base-station class in a heterogeneous layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsKind {
    Macro,
    Micro,
    Pico,
    Femto,
}

impl BsKind {
    pub const ALL: [BsKind; 4] = [BsKind::Macro, BsKind::Micro, BsKind::Pico, BsKind::Femto];

    pub fn name(self) -> &'static str {
        match self {
            BsKind::Macro => "macro",
            BsKind::Micro => "micro",
            BsKind::Pico => "pico",
            BsKind::Femto => "femto",
        }
    }
}

/// Parameters of the load-dependent consumption model for one BS class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsPowerParams {
    /// Number of transceiver chains.
    pub n_trx: u32,
    /// Maximum transmit power per chain (W).
    pub p_max_w: f64,
    /// Idle-state consumption per chain (W).
    pub p0_w: f64,
    /// Load-dependency power gradient (dimensionless).
    pub delta_p: f64,
    /// Sleep-mode consumption per chain (W).
    pub p_sleep_w: f64,
}

impl BsPowerParams {
    /// Default parameter set per BS class for a 10 MHz carrier.
    pub fn defaults(kind: BsKind) -> Self {
        match kind {
            BsKind::Macro => Self {
                n_trx: 6,
                p_max_w: 20.0,
                p0_w: 84.0,
                delta_p: 2.8,
                p_sleep_w: 56.0,
            },
            BsKind::Micro => Self {
                n_trx: 2,
                p_max_w: 6.3,
                p0_w: 56.0,
                delta_p: 2.6,
                p_sleep_w: 39.0,
            },
            BsKind::Pico => Self {
                n_trx: 2,
                p_max_w: 0.13,
                p0_w: 6.8,
                delta_p: 4.0,
                p_sleep_w: 4.3,
            },
            BsKind::Femto => Self {
                n_trx: 2,
                p_max_w: 0.05,
                p0_w: 4.8,
                delta_p: 8.0,
                p_sleep_w: 2.9,
            },
        }
    }

    /// Uniformly rescale the electrical magnitudes, keeping the gradient.
    /// Used to derive per-bandwidth parameter sets from the 10 MHz table.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_trx: self.n_trx,
            p_max_w: self.p_max_w * factor,
            p0_w: self.p0_w * factor,
            delta_p: self.delta_p,
            p_sleep_w: self.p_sleep_w * factor,
        }
    }

    /// Full-load consumption per chain: `P1 = P0 + Δp·P_TX`.
    pub fn p1_w(&self) -> f64 {
        self.p0_w + self.delta_p * self.p_max_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trx == 0 {
            return Err(Error::Validation("n_trx must be >= 1".into()));
        }
        for (name, v) in [
            ("p_max_w", self.p_max_w),
            ("p0_w", self.p0_w),
            ("delta_p", self.delta_p),
            ("p_sleep_w", self.p_sleep_w),
        ] {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.p_sleep_w >= self.p0_w {
            return Err(Error::Validation(format!(
                "p_sleep_w ({}) must be below p0_w ({})",
                self.p_sleep_w, self.p0_w
            )));
        }
        Ok(())
    }
}

/// Maximum-load component breakdown of one BS class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsComponentBreakdown {
    /// Baseband consumption (W).
    pub p_bb_w: f64,
    /// RF consumption (W).
    pub p_rf_w: f64,
    /// Power-amplifier consumption (W).
    pub p_pa_w: f64,
    /// DC-DC regulator loss fraction.
    pub sigma_dc: f64,
    /// Mains-supply loss fraction.
    pub sigma_ms: f64,
    /// Cooling loss fraction.
    pub sigma_cool: f64,
    pub sectors: u32,
    pub antennas: u32,
}

impl BsComponentBreakdown {
    /// Default component table per BS class (10 MHz, maximum load).
    pub fn defaults(kind: BsKind) -> Self {
        match kind {
            BsKind::Macro => Self {
                p_bb_w: 29.6,
                p_rf_w: 12.9,
                p_pa_w: 64.4,
                sigma_dc: 0.075,
                sigma_ms: 0.09,
                sigma_cool: 0.0,
                sectors: 3,
                antennas: 2,
            },
            BsKind::Micro => Self {
                p_bb_w: 27.3,
                p_rf_w: 6.5,
                p_pa_w: 27.7,
                sigma_dc: 0.075,
                sigma_ms: 0.09,
                sigma_cool: 0.0,
                sectors: 1,
                antennas: 2,
            },
            BsKind::Pico => Self {
                p_bb_w: 3.0,
                p_rf_w: 1.0,
                p_pa_w: 1.9,
                sigma_dc: 0.09,
                sigma_ms: 0.11,
                sigma_cool: 0.0,
                sectors: 1,
                antennas: 2,
            },
            BsKind::Femto => Self {
                p_bb_w: 2.5,
                p_rf_w: 0.6,
                p_pa_w: 1.1,
                sigma_dc: 0.09,
                sigma_ms: 0.11,
                sigma_cool: 0.0,
                sectors: 1,
                antennas: 2,
            },
        }
    }

    /// Site total at maximum load: per-chain value times sectors and antennas.
    pub fn site_total_w(&self) -> Result<f64> {
        Ok(p1_static(self)? * f64::from(self.sectors) * f64::from(self.antennas))
    }
}

/// Normalised traffic demand per hour of day, `chi[h] ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    hourly_load_fraction: [f64; 24],
}

/// Default diurnal demand profile. Calibrated so that a macro site running
/// the default 10 MHz parameter set consumes ~4989 kWh/yr of DC energy
/// (profile sum 4.68).
pub const DEFAULT_DIURNAL_PROFILE: [f64; 24] = [
    0.04, 0.03, 0.02, 0.02, 0.03, 0.04, 0.07, 0.10, 0.15, 0.21, 0.26, 0.28, 0.27, 0.25, 0.23, 0.22,
    0.24, 0.29, 0.38, 0.46, 0.44, 0.34, 0.22, 0.09,
];

impl TrafficProfile {
    pub fn new(hourly_load_fraction: [f64; 24]) -> Result<Self> {
        for (h, &v) in hourly_load_fraction.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "traffic fraction at hour {h} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            hourly_load_fraction,
        })
    }

    pub fn fraction_at(&self, hour_of_day: usize) -> f64 {
        self.hourly_load_fraction[hour_of_day % 24]
    }

    pub fn fractions(&self) -> &[f64; 24] {
        &self.hourly_load_fraction
    }
}

impl Default for TrafficProfile {
    fn default() -> Self {
        Self {
            hourly_load_fraction: DEFAULT_DIURNAL_PROFILE,
        }
    }
}

/// Per-chain consumption at maximum load from the component breakdown:
/// `(P_BB + P_RF + P_PA) / ((1−σ_DC)(1−σ_MS)(1−σ_cool))`.
pub fn p1_static(b: &BsComponentBreakdown) -> Result<f64> {
    for (name, s) in [
        ("sigma_dc", b.sigma_dc),
        ("sigma_ms", b.sigma_ms),
        ("sigma_cool", b.sigma_cool),
    ] {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain(format!(
                "degenerate loss chain: {name} = {s} not in [0, 1)"
            )));
        }
    }
    let chain = (1.0 - b.sigma_dc) * (1.0 - b.sigma_ms) * (1.0 - b.sigma_cool);
    Ok((b.p_bb_w + b.p_rf_w + b.p_pa_w) / chain)
}

/// Instantaneous site consumption (W) at load fraction `chi`.
///
/// `chi = 0` is the sleep state (`N_TRX · P_sleep`); on `(0, 1]` the model
/// is `N_TRX · [P1 + Δp·P_TX·(chi − 1)]`, linear and nondecreasing.
pub fn bs_power(params: &BsPowerParams, chi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::Range(format!(
            "load fraction chi = {chi} outside [0, 1]"
        )));
    }
    let n = f64::from(params.n_trx);
    if chi == 0.0 {
        Ok(n * params.p_sleep_w)
    } else {
        Ok(n * (params.p1_w() + params.delta_p * params.p_max_w * (chi - 1.0)))
    }
}

/// Annual site energy (kWh/yr): the load-dependent model integrated hourly
/// over 365 days of the diurnal profile, plus a flat AC ancillary load.
pub fn annual_energy(
    params: &BsPowerParams,
    profile: &TrafficProfile,
    ac_load_kwh_yr: f64,
) -> Result<f64> {
    let mut dc_kwh = 0.0;
    for hour in 0..HOURS_PER_YEAR {
        dc_kwh += bs_power(params, profile.fraction_at(hour % 24))? / 1000.0;
    }
    Ok(dc_kwh + ac_load_kwh_yr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn p1_static_macro_matches_component_table() {
        let b = BsComponentBreakdown::defaults(BsKind::Macro);
        let per_trx = p1_static(&b).unwrap();
        assert_relative_eq!(per_trx, 127.0, epsilon = 0.2);
        let total = b.site_total_w().unwrap();
        assert!((total - 754.8).abs() / 754.8 < 0.015, "site total {total}");
    }

    #[test]
    fn p1_static_lossless_unit_case() {
        let b = BsComponentBreakdown {
            p_bb_w: 1.0,
            p_rf_w: 1.0,
            p_pa_w: 1.0,
            sigma_dc: 0.0,
            sigma_ms: 0.0,
            sigma_cool: 0.0,
            sectors: 1,
            antennas: 1,
        };
        assert_relative_eq!(p1_static(&b).unwrap(), 3.0);
    }

    #[test]
    fn p1_static_pico_site_total() {
        let total = BsComponentBreakdown::defaults(BsKind::Pico)
            .site_total_w()
            .unwrap();
        assert!((total - 14.7).abs() / 14.7 < 0.015, "pico total {total}");
    }

    #[test]
    fn p1_static_rejects_degenerate_loss() {
        let mut b = BsComponentBreakdown::defaults(BsKind::Macro);
        b.sigma_ms = 1.0;
        assert!(matches!(p1_static(&b), Err(Error::Domain(_))));
    }

    #[test]
    fn bs_power_macro_full_load_and_sleep() {
        let p = BsPowerParams::defaults(BsKind::Macro);
        assert_relative_eq!(bs_power(&p, 1.0).unwrap(), 840.0, epsilon = 1e-9);
        assert_relative_eq!(bs_power(&p, 0.0).unwrap(), 336.0, epsilon = 1e-9);
    }

    #[test]
    fn bs_power_zero_gradient_is_load_independent() {
        let p = BsPowerParams {
            n_trx: 4,
            p_max_w: 10.0,
            p0_w: 50.0,
            delta_p: f64::MIN_POSITIVE,
            p_sleep_w: 30.0,
        };
        // delta_p -> 0 limit: N_TRX * P0 at any chi > 0
        assert_relative_eq!(bs_power(&p, 0.5).unwrap(), 200.0, epsilon = 1e-6);
    }

    #[test]
    fn bs_power_rejects_out_of_range_chi() {
        let p = BsPowerParams::defaults(BsKind::Macro);
        assert!(matches!(bs_power(&p, -0.1), Err(Error::Range(_))));
        assert!(matches!(bs_power(&p, 1.1), Err(Error::Range(_))));
    }

    #[test]
    fn sleep_jump_equals_idle_minus_sleep() {
        // The discontinuity at chi -> 0+ is N_TRX * (P0 - P_sleep).
        for kind in BsKind::ALL {
            let p = BsPowerParams::defaults(kind);
            let eps = 1e-12;
            let jump = bs_power(&p, eps).unwrap() - bs_power(&p, 0.0).unwrap();
            let expected = f64::from(p.n_trx) * (p.p0_w - p.p_sleep_w);
            assert_relative_eq!(jump, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn full_load_matches_key_parameter_identity() {
        for kind in BsKind::ALL {
            let p = BsPowerParams::defaults(kind);
            let expected = f64::from(p.n_trx) * (p.p0_w + p.delta_p * p.p_max_w);
            assert_relative_eq!(bs_power(&p, 1.0).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn annual_energy_default_profile_hits_calibrated_macro_load() {
        let p = BsPowerParams::defaults(BsKind::Macro);
        let annual = annual_energy(&p, &TrafficProfile::default(), 130.0).unwrap();
        // 4989 kWh DC + 130 kWh AC
        assert!((annual - 5119.0).abs() / 5119.0 < 0.05, "annual {annual}");
        assert_relative_eq!(annual, 5118.9952, epsilon = 0.01);
    }

    #[test]
    fn annual_energy_constant_profiles_closed_form() {
        let p = BsPowerParams::defaults(BsKind::Macro);
        let asleep = TrafficProfile::new([0.0; 24]).unwrap();
        assert_relative_eq!(
            annual_energy(&p, &asleep, 0.0).unwrap(),
            365.0 * 24.0 * 6.0 * 56.0 / 1000.0,
            epsilon = 1e-9
        );
        let full = TrafficProfile::new([1.0; 24]).unwrap();
        assert_relative_eq!(
            annual_energy(&p, &full, 0.0).unwrap(),
            8760.0 * 0.840,
            epsilon = 1e-9
        );
    }

    #[test]
    fn traffic_profile_rejects_out_of_range() {
        let mut f = [0.5; 24];
        f[7] = 1.2;
        assert!(TrafficProfile::new(f).is_err());
    }

    proptest! {
        #[test]
        fn bs_power_monotone_on_positive_load(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let p = BsPowerParams::defaults(BsKind::Macro);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(bs_power(&p, lo).unwrap() <= bs_power(&p, hi).unwrap() + 1e-12);
        }

        #[test]
        fn annual_energy_linear_in_uniform_scaling(scale in 0.1f64..3.0) {
            let p = BsPowerParams::defaults(BsKind::Micro);
            let scaled = p.scaled(scale);
            let base = annual_energy(&p, &TrafficProfile::default(), 0.0).unwrap();
            let result = annual_energy(&scaled, &TrafficProfile::default(), 0.0).unwrap();
            prop_assert!((result - scale * base).abs() < 1e-6 * base.max(1.0));
        }
    }
}

//! Seeded Monte-Carlo evaluation of downlink SINR, network throughput and
//! energy efficiency for a multi-tier cellular layout.
//!
//! The propagation model is log-distance path loss with a free-space
//! intercept at 1 m plus lognormal shadowing; OFDMA downlink means zero
//! intra-cell interference, so a user's SINR pits its serving cell against
//! every other transmitter plus thermal noise over the user's bandwidth
//! slice. Users associate with the strongest received power and each cell
//! splits its bandwidth equally among its users (full-buffer traffic).
//! Absolute SINR levels depend on the intercept choice, so reported
//! figures are meaningful as trends and comparisons, not as field
//! measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::power::{bs_power, BsKind, BsPowerParams};
use crate::units::dbm_to_mw;
use crate::{Error, Result};

/// Speed of light (m/s).
const C_M_S: f64 = 299_792_458.0;

/// Reference distance for the path-loss intercept (m).
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// One transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BsSite {
    pub kind: BsKind,
    pub position_m: (f64, f64),
    pub tx_power_w: f64,
}

/// One tier of identical transmitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub kind: BsKind,
    pub cell_radius_m: f64,
    pub tx_power_w: f64,
    pub positions_m: Vec<(f64, f64)>,
}

/// Full Monte-Carlo setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioScenario {
    /// Carrier label (e.g. 10.0 for a "10 MHz" carrier); the usable
    /// transmission bandwidth below is the RB-aligned 90% of it.
    pub nominal_bandwidth_mhz: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    /// Resource-block bandwidth (Hz); the system bandwidth must be a
    /// positive multiple of it.
    pub rb_hz: f64,
    pub tiers: Vec<TierConfig>,
    pub path_loss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub noise_density_dbm_hz: f64,
    pub users: usize,
    pub drops: usize,
    pub seed: u64,
    /// Pin user positions for deterministic geometry tests.
    pub fixed_user_positions_m: Option<Vec<(f64, f64)>>,
}

impl RadioScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !(self.rb_hz > 0.0) {
            return Err(Error::Validation(
                "bandwidth and RB size must be > 0".into(),
            ));
        }
        let blocks = self.bandwidth_hz / self.rb_hz;
        if (blocks - blocks.round()).abs() > 1e-6 || blocks < 1.0 {
            return Err(Error::Validation(format!(
                "bandwidth {} Hz is not a positive multiple of the {} Hz resource block",
                self.bandwidth_hz, self.rb_hz
            )));
        }
        if !(self.path_loss_exponent > 2.0) {
            return Err(Error::Validation(format!(
                "path loss exponent must exceed 2, got {}",
                self.path_loss_exponent
            )));
        }
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::Validation("shadowing sigma must be >= 0".into()));
        }
        if self.tiers.is_empty() || self.tiers.iter().all(|t| t.positions_m.is_empty()) {
            return Err(Error::Validation(
                "scenario needs at least one transmitter".into(),
            ));
        }
        if let Some(pos) = &self.fixed_user_positions_m {
            if pos.len() != self.users {
                return Err(Error::Validation(format!(
                    "fixed user positions ({}) must match user count ({})",
                    pos.len(),
                    self.users
                )));
            }
        }
        Ok(())
    }

    /// The bundled two-tier layout: one macro cell with four embedded pico
    /// cells halfway out on the axes. `nominal_mhz` is the carrier label;
    /// the usable bandwidth is the standard whole-RB allocation (5 RBs of
    /// 180 kHz per nominal MHz: 25/50/75/100 RBs).
    pub fn two_tier(nominal_mhz: f64, users: usize, drops: usize, seed: u64) -> Self {
        let rb_count = (nominal_mhz * 5.0).round();
        Self {
            nominal_bandwidth_mhz: nominal_mhz,
            bandwidth_hz: rb_count * 180e3,
            carrier_hz: 2.0e9,
            rb_hz: 180e3,
            tiers: vec![
                TierConfig {
                    kind: BsKind::Macro,
                    cell_radius_m: 1000.0,
                    tx_power_w: 20.0,
                    positions_m: vec![(0.0, 0.0)],
                },
                TierConfig {
                    kind: BsKind::Pico,
                    cell_radius_m: 200.0,
                    tx_power_w: 0.13,
                    positions_m: vec![(500.0, 0.0), (-500.0, 0.0), (0.0, 500.0), (0.0, -500.0)],
                },
            ],
            path_loss_exponent: 3.574,
            shadow_sigma_db: 8.0,
            noise_density_dbm_hz: -174.0,
            users,
            drops,
            seed,
            fixed_user_positions_m: None,
        }
    }

    fn all_sites(&self) -> Vec<BsSite> {
        self.tiers
            .iter()
            .flat_map(|t| {
                t.positions_m.iter().map(move |&position_m| BsSite {
                    kind: t.kind,
                    position_m,
                    tx_power_w: t.tx_power_w,
                })
            })
            .collect()
    }
}

/// Thermal noise over a bandwidth: `−174 + 10·log10(BW)` dBm at the
/// standard density.
pub fn noise_power_dbm(bandwidth_hz: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10()
}

/// Log-distance path loss with a free-space intercept at the reference
/// distance. Distances inside the reference clamp to it; the caller can
/// count clamps via the return flag.
pub fn path_loss_db(distance_m: f64, exponent: f64, carrier_hz: f64) -> (f64, bool) {
    let clamped = distance_m < REFERENCE_DISTANCE_M;
    let d = distance_m.max(REFERENCE_DISTANCE_M);
    let intercept =
        20.0 * (4.0 * std::f64::consts::PI * REFERENCE_DISTANCE_M * carrier_hz / C_M_S).log10();
    (
        intercept + 10.0 * exponent * (d / REFERENCE_DISTANCE_M).log10(),
        clamped,
    )
}

fn rx_power_mw(
    ue: (f64, f64),
    site: &BsSite,
    fading_db: f64,
    exponent: f64,
    carrier_hz: f64,
) -> (f64, bool) {
    if site.tx_power_w <= 0.0 {
        return (0.0, false);
    }
    let dx = ue.0 - site.position_m.0;
    let dy = ue.1 - site.position_m.1;
    let dist = (dx * dx + dy * dy).sqrt();
    let (pl, clamped) = path_loss_db(dist, exponent, carrier_hz);
    let tx_dbm = 10.0 * (site.tx_power_w * 1000.0).log10();
    (dbm_to_mw(tx_dbm - pl + fading_db), clamped)
}

/// Linear SINR of one downlink. `fading_db[0]` belongs to the serving
/// site, the rest pair up with `interferers` in order.
pub fn sinr(
    ue_position_m: (f64, f64),
    serving: &BsSite,
    interferers: &[BsSite],
    fading_db: &[f64],
    noise_dbm: f64,
    exponent: f64,
    carrier_hz: f64,
) -> Result<f64> {
    if fading_db.len() != interferers.len() + 1 {
        return Err(Error::Validation(format!(
            "need {} fading draws, got {}",
            interferers.len() + 1,
            fading_db.len()
        )));
    }
    if interferers
        .iter()
        .any(|i| i.position_m == serving.position_m)
    {
        return Err(Error::Validation(
            "serving site must be excluded from the interferer set".into(),
        ));
    }
    let (signal_mw, _) = rx_power_mw(ue_position_m, serving, fading_db[0], exponent, carrier_hz);
    let interference_mw: f64 = interferers
        .iter()
        .zip(&fading_db[1..])
        .map(|(s, &f)| rx_power_mw(ue_position_m, s, f, exponent, carrier_hz).0)
        .sum();
    let noise_mw = dbm_to_mw(noise_dbm);
    Ok(signal_mw / (interference_mw + noise_mw))
}

/// Shannon capacity `BW · log2(1 + SINR)` in bit/s.
pub fn shannon_rate(bandwidth_hz: f64, sinr_linear: f64) -> Result<f64> {
    if bandwidth_hz < 0.0 || sinr_linear < 0.0 {
        return Err(Error::Validation("bandwidth and SINR must be >= 0".into()));
    }
    Ok(bandwidth_hz * (1.0 + sinr_linear).log2())
}

/// Bits per joule.
pub fn energy_efficiency(r_total_bps: f64, p_bs_w: f64) -> Result<f64> {
    if !(p_bs_w > 0.0) {
        return Err(Error::Domain(format!("power must be > 0, got {p_bs_w}")));
    }
    Ok(r_total_bps / p_bs_w)
}

/// Per-tier aggregate over all drops.
#[derive(Debug, Clone, Serialize)]
pub struct TierStats {
    pub kind: BsKind,
    pub sites: usize,
    pub mean_users: f64,
    pub mean_rate_bps: f64,
    /// Full-buffer electrical power of the tier (W).
    pub power_w: f64,
    pub mean_ee_bits_per_joule: f64,
}

/// Aggregate statistics of a Monte-Carlo run.
#[derive(Debug, Clone, Serialize)]
pub struct RadioReport {
    pub drops: usize,
    pub users: usize,
    pub nominal_bandwidth_mhz: f64,
    pub bandwidth_hz: f64,
    pub mean_r_total_bps: f64,
    pub p5_r_total_bps: f64,
    pub p95_r_total_bps: f64,
    pub mean_sinr_db: f64,
    pub network_ee_bits_per_joule: f64,
    pub tiers: Vec<TierStats>,
    /// UE positions that fell inside the reference distance of a site.
    pub clamp_warnings: usize,
    /// Per-drop network throughput, in drop order.
    pub r_total_by_drop_bps: Vec<f64>,
}

/// Run the full drop loop. Each drop draws from an independent RNG stream
/// derived from the scenario seed and the drop index, so results do not
/// depend on evaluation order.
pub fn run_drops(scenario: &RadioScenario) -> Result<RadioReport> {
    scenario.validate()?;
    let sites = scenario.all_sites();
    let n_sites = sites.len();
    let tier_of_site: Vec<usize> = scenario
        .tiers
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| std::iter::repeat(ti).take(t.positions_m.len()))
        .collect();
    let site_power_w: Vec<f64> = sites
        .iter()
        .map(|s| bs_power(&BsPowerParams::defaults(s.kind), 1.0))
        .collect::<Result<_>>()?;

    let macro_radius = scenario
        .tiers
        .iter()
        .map(|t| t.cell_radius_m)
        .fold(0.0f64, f64::max);

    let mut r_totals = Vec::with_capacity(scenario.drops);
    let mut sinr_db_sum = 0.0;
    let mut sinr_count = 0usize;
    let mut clamp_warnings = 0usize;
    let mut tier_rate_sum = vec![0.0f64; scenario.tiers.len()];
    let mut tier_user_sum = vec![0usize; scenario.tiers.len()];

    for drop in 0..scenario.drops {
        let mut rng = ChaCha8Rng::seed_from_u64(
            scenario.seed ^ (drop as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );

        let positions: Vec<(f64, f64)> = match &scenario.fixed_user_positions_m {
            Some(p) => p.clone(),
            None => (0..scenario.users)
                .map(|_| {
                    let r = macro_radius * rng.gen::<f64>().sqrt();
                    let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                    (r * theta.cos(), r * theta.sin())
                })
                .collect(),
        };

        // Shadowing per (user, site).
        let fading: Vec<Vec<f64>> = (0..positions.len())
            .map(|_| {
                (0..n_sites)
                    .map(|_| {
                        if scenario.shadow_sigma_db > 0.0 {
                            let n: f64 = rng.sample(rand_distr::StandardNormal);
                            n * scenario.shadow_sigma_db
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        // Association by strongest received power.
        let mut serving: Vec<usize> = Vec::with_capacity(positions.len());
        let mut rx_mw: Vec<Vec<f64>> = Vec::with_capacity(positions.len());
        for (u, &pos) in positions.iter().enumerate() {
            let mut best = 0usize;
            let mut best_mw = f64::NEG_INFINITY;
            let mut row = Vec::with_capacity(n_sites);
            for (s, site) in sites.iter().enumerate() {
                let (mw, clamped) = rx_power_mw(
                    pos,
                    site,
                    fading[u][s],
                    scenario.path_loss_exponent,
                    scenario.carrier_hz,
                );
                if clamped {
                    clamp_warnings += 1;
                }
                if mw > best_mw {
                    best_mw = mw;
                    best = s;
                }
                row.push(mw);
            }
            serving.push(best);
            rx_mw.push(row);
        }

        let mut users_per_site = vec![0usize; n_sites];
        for &s in &serving {
            users_per_site[s] += 1;
        }

        let mut r_total = 0.0;
        for (u, &s) in serving.iter().enumerate() {
            let bw_user = scenario.bandwidth_hz / users_per_site[s] as f64;
            let noise_mw =
                dbm_to_mw(noise_power_dbm(bw_user) + (scenario.noise_density_dbm_hz + 174.0));
            let interference_mw: f64 = rx_mw[u]
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != s)
                .map(|(_, &mw)| mw)
                .sum();
            let sinr_linear = rx_mw[u][s] / (interference_mw + noise_mw);
            let rate = shannon_rate(bw_user, sinr_linear)?;
            r_total += rate;
            tier_rate_sum[tier_of_site[s]] += rate;
            if sinr_linear > 0.0 {
                sinr_db_sum += 10.0 * sinr_linear.log10();
                sinr_count += 1;
            }
        }
        for (s, &count) in users_per_site.iter().enumerate() {
            tier_user_sum[tier_of_site[s]] += count;
        }
        r_totals.push(r_total);
    }

    let drops_f = scenario.drops.max(1) as f64;
    let mut sorted = r_totals.clone();
    sorted.sort_by(f64::total_cmp);
    let pct = |p: f64| -> f64 {
        if sorted.is_empty() {
            0.0
        } else {
            sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)]
        }
    };
    let mean_r_total = r_totals.iter().sum::<f64>() / drops_f;

    let total_power: f64 = site_power_w.iter().sum();
    let tiers = scenario
        .tiers
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            let sites_in_tier = t.positions_m.len();
            let power: f64 = site_power_w
                .iter()
                .zip(&tier_of_site)
                .filter(|&(_, &tier)| tier == ti)
                .map(|(p, _)| p)
                .sum();
            let mean_rate = tier_rate_sum[ti] / drops_f;
            TierStats {
                kind: t.kind,
                sites: sites_in_tier,
                mean_users: tier_user_sum[ti] as f64 / drops_f,
                mean_rate_bps: mean_rate,
                power_w: power,
                mean_ee_bits_per_joule: if power > 0.0 { mean_rate / power } else { 0.0 },
            }
        })
        .collect();

    Ok(RadioReport {
        drops: scenario.drops,
        users: scenario.users,
        nominal_bandwidth_mhz: scenario.nominal_bandwidth_mhz,
        bandwidth_hz: scenario.bandwidth_hz,
        mean_r_total_bps: mean_r_total,
        p5_r_total_bps: pct(0.05),
        p95_r_total_bps: pct(0.95),
        mean_sinr_db: if sinr_count > 0 {
            sinr_db_sum / sinr_count as f64
        } else {
            0.0
        },
        network_ee_bits_per_joule: if total_power > 0.0 {
            mean_r_total / total_power
        } else {
            0.0
        },
        tiers,
        clamp_warnings,
        r_total_by_drop_bps: r_totals,
    })
}

//! Hourly energy balance per site and inter-site excess-energy sharing
//! over resistive DC lines.
//!
//! Service order inside one hour: PV feeds the load directly; PV surplus
//! charges the battery (round-trip loss booked on the charge side) up to
//! the ceiling; the battery discharges down to its floor to cover any
//! deficit; the biomass generator, where fitted, covers what remains up to
//! its rating and remaining feedstock budget; anything still missing is
//! unmet energy. Surplus that does not fit the battery joins the site's
//! excess pool, and the slice of it above the reserve reference
//! (`1.1 × load`) is immediately shareable.
//!
//! Sharing settles in one of two modes:
//!
//! * [`SharingMode::AnnualAverage`] (default) — each site pushes its whole
//!   excess pool through its outgoing links at the year-average power. The
//!   line current is quantised to 10 mA (metering granularity) before the
//!   `I²R` loss is charged; this granularity is what published sharing
//!   tables for systems of this class carry.
//! * [`SharingMode::Hourly`] — deficits are settled hour by hour: child
//!   sites draw from their parent macro first, macros then draw from their
//!   children and finally from neighbour macros, largest deficit first.
//!   Only generation surplus is exported; storage is never drawn below the
//!   floor plus the 10% reserve, because stored energy is simply not
//!   offered for export at all.

use serde::{Deserialize, Serialize};

use crate::power::BsKind;
use crate::{Error, Result};

/// Line current quantisation step (A) applied by [`share_energy`].
pub const CURRENT_QUANTUM_A: f64 = 0.01;

/// Factor on the hourly load that defines the local excess reserve.
pub const EXCESS_RESERVE_FACTOR: f64 = 1.1;

/// Battery limits and state carried through the hour loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteState {
    /// Stored energy (kWh), always within `[floor_kwh, capacity_kwh]`.
    pub soc_kwh: f64,
    /// Discharge floor (kWh).
    pub floor_kwh: f64,
    /// Storage ceiling (kWh).
    pub capacity_kwh: f64,
    /// Round-trip efficiency, applied on charge.
    pub round_trip_eff: f64,
}

impl SiteState {
    pub fn new(
        capacity_kwh: f64,
        floor_kwh: f64,
        round_trip_eff: f64,
        initial_soc_kwh: f64,
    ) -> Result<Self> {
        if !(floor_kwh >= 0.0 && floor_kwh <= capacity_kwh) {
            return Err(Error::Validation(format!(
                "battery floor {floor_kwh} outside [0, {capacity_kwh}]"
            )));
        }
        if !(initial_soc_kwh >= floor_kwh && initial_soc_kwh <= capacity_kwh) {
            return Err(Error::Validation(format!(
                "initial SOC {initial_soc_kwh} outside [{floor_kwh}, {capacity_kwh}]"
            )));
        }
        if !(round_trip_eff > 0.0 && round_trip_eff <= 1.0) {
            return Err(Error::Validation(format!(
                "round-trip efficiency {round_trip_eff} outside (0, 1]"
            )));
        }
        Ok(Self {
            soc_kwh: initial_soc_kwh,
            floor_kwh,
            capacity_kwh,
            round_trip_eff,
        })
    }
}

/// What happened at one site during one hour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HourRecord {
    pub pv_kwh: f64,
    pub bg_kwh: f64,
    pub load_kwh: f64,
    pub served_kwh: f64,
    pub charged_kwh: f64,
    pub discharged_kwh: f64,
    pub batt_loss_kwh: f64,
    pub unmet_kwh: f64,
    /// Surplus generation the battery could not absorb.
    pub surplus_kwh: f64,
    /// Portion of the surplus above the `1.1 × load` reserve.
    pub shareable_kwh: f64,
    pub soc_kwh: f64,
}

/// One hour of the site energy balance. `e_ref_kwh` is the reserve
/// reference; surplus above it is flagged shareable.
pub fn dispatch_hour(
    state: &mut SiteState,
    pv_kwh: f64,
    bg_available_kwh: f64,
    load_kwh: f64,
    e_ref_kwh: f64,
) -> Result<HourRecord> {
    for (name, v) in [
        ("pv", pv_kwh),
        ("bg_available", bg_available_kwh),
        ("load", load_kwh),
        ("e_ref", e_ref_kwh),
    ] {
        if !(v >= 0.0) {
            return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
        }
    }

    let pv_to_load = pv_kwh.min(load_kwh);
    let mut deficit = load_kwh - pv_to_load;
    let mut surplus = pv_kwh - pv_to_load;

    // Charge: the battery absorbs surplus; the round-trip loss is booked here.
    let eta = state.round_trip_eff;
    let room_in = (state.capacity_kwh - state.soc_kwh) / eta;
    let charged = surplus.min(room_in);
    state.soc_kwh += charged * eta;
    let batt_loss = charged * (1.0 - eta);
    surplus -= charged;

    // Discharge down to the floor.
    let discharged = deficit.min(state.soc_kwh - state.floor_kwh);
    state.soc_kwh -= discharged;
    deficit -= discharged;

    // Biomass backstop.
    let bg = deficit.min(bg_available_kwh);
    deficit -= bg;

    // Numerical dust guard so the SOC invariant holds bit-exactly.
    state.soc_kwh = state.soc_kwh.clamp(state.floor_kwh, state.capacity_kwh);

    Ok(HourRecord {
        pv_kwh,
        bg_kwh: bg,
        load_kwh,
        served_kwh: load_kwh - deficit,
        charged_kwh: charged,
        discharged_kwh: discharged,
        batt_loss_kwh: batt_loss,
        unmet_kwh: deficit,
        surplus_kwh: surplus,
        shareable_kwh: (surplus - e_ref_kwh).max(0.0),
        soc_kwh: state.soc_kwh,
    })
}

/// `√3 × radius × Ω/km`: line resistance between adjacent sites whose
/// spacing is √3 cell radii.
pub fn line_resistance(cell_radius_km: f64, ohm_per_km: f64) -> f64 {
    3f64.sqrt() * cell_radius_km * ohm_per_km
}

/// Result of pushing an excess pool through one resistive link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ShareResult {
    /// Energy offered at the sending end (kWh).
    pub e_excess_kwh: f64,
    /// `I²R` conduction loss (kWh).
    pub e_loss_kwh: f64,
    /// Energy delivered at the receiving end (kWh).
    pub e_share_kwh: f64,
    /// Delivered energy as a percentage of consumption; filled in by the
    /// caller once the consumption context is known.
    pub e_save_pct: f64,
    /// Quantised average line current (A).
    pub avg_current_a: f64,
}

/// Transfer an energy pool over a resistive line at the average power for
/// the stated duration. Current is quantised to [`CURRENT_QUANTUM_A`].
pub fn share_energy(
    e_excess_kwh: f64,
    r_ohm: f64,
    bus_voltage_v: f64,
    hours: f64,
) -> Result<ShareResult> {
    if !(hours > 0.0) {
        return Err(Error::Validation(format!(
            "transfer duration must be > 0, got {hours}"
        )));
    }
    if e_excess_kwh < 0.0 || r_ohm < 0.0 {
        return Err(Error::Validation(
            "excess energy and resistance must be >= 0".into(),
        ));
    }
    if bus_voltage_v == 0.0 {
        return Err(Error::Domain("bus voltage must be nonzero".into()));
    }
    let avg_power_w = e_excess_kwh * 1000.0 / hours;
    let current_a = avg_power_w / bus_voltage_v;
    let current_a = (current_a / CURRENT_QUANTUM_A).round() * CURRENT_QUANTUM_A;
    let e_loss = (current_a * current_a * r_ohm * hours / 1000.0).min(e_excess_kwh);
    Ok(ShareResult {
        e_excess_kwh,
        e_loss_kwh: e_loss,
        e_share_kwh: e_excess_kwh - e_loss,
        e_save_pct: 0.0,
        avg_current_a: current_a,
    })
}

/// Percentage of consumption covered by delivered shared energy.
pub fn savings_pct(shared_kwh: &[f64], loads_kwh: &[f64]) -> Result<f64> {
    let total_load: f64 = loads_kwh.iter().sum();
    if !(total_load > 0.0) {
        return Err(Error::Domain(
            "total load must be > 0 for savings percentage".into(),
        ));
    }
    let total_shared: f64 = shared_kwh.iter().sum();
    Ok(100.0 * total_shared / total_load)
}

/// A physical energy-sharing line between two sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareLink {
    pub from_site: String,
    pub to_site: String,
    pub resistance_ohm: f64,
    pub bus_voltage_v: f64,
}

/// Everything the year engine needs to know about one site.
#[derive(Debug, Clone)]
pub struct SiteInput {
    pub id: String,
    pub kind: BsKind,
    /// Hourly demand at the DC bus (AC demand already inflated by the
    /// converter efficiency).
    pub load_kwh: Vec<f64>,
    /// Hourly PV production.
    pub pv_kwh: Vec<f64>,
    pub battery_capacity_kwh: f64,
    pub battery_floor_kwh: f64,
    pub battery_initial_kwh: f64,
    pub round_trip_eff: f64,
    /// Generator rating (kW); zero means no generator.
    pub bg_rated_kw: f64,
    /// Annual feedstock budget, expressed as generatable energy (kWh).
    pub bg_feedstock_cap_kwh: f64,
    /// Annual converter conversion loss (kWh), for the loss ledger.
    pub conv_loss_kwh: f64,
}

/// How the inter-site settlement runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    AnnualAverage,
    Hourly,
}

/// Per-site annual totals from a year run.
#[derive(Debug, Clone, Serialize)]
pub struct SiteSummary {
    pub id: String,
    pub kind: BsKind,
    pub load_kwh: f64,
    pub served_kwh: f64,
    pub unmet_kwh: f64,
    pub pv_kwh: f64,
    pub bg_kwh: f64,
    /// Hours during which the generator ran.
    pub bg_hours: f64,
    pub charged_kwh: f64,
    pub discharged_kwh: f64,
    pub batt_loss_kwh: f64,
    pub conv_loss_kwh: f64,
    /// Surplus generation the battery could not absorb (the excess pool).
    pub excess_kwh: f64,
    /// Excess remaining after sharing settlements.
    pub curtailed_kwh: f64,
    /// Energy sent into links (before line loss).
    pub sent_kwh: f64,
    /// Energy received from links (after line loss).
    pub received_kwh: f64,
    /// Line loss attributed to this site's exports.
    pub line_loss_kwh: f64,
    pub delta_soc_kwh: f64,
    /// Capacity shortage fraction after sharing.
    pub e_cs: f64,
}

impl SiteSummary {
    /// The annual generation/consumption balance view of this site,
    /// computed through the reliability bookkeeping. The bus-side load
    /// series already carries the converter loss, so the primary load is
    /// the bus total minus that loss; the loss-adjusted excess differs
    /// from the measured surplus pool only by the year's net change in
    /// stored energy.
    pub fn reliability(&self) -> crate::Result<crate::renewables::ReliabilityReport> {
        crate::renewables::reliability(
            (self.load_kwh - self.conv_loss_kwh).max(0.0),
            self.pv_kwh,
            self.bg_kwh,
            self.conv_loss_kwh,
            self.batt_loss_kwh,
        )
    }
}

/// One settled transfer.
#[derive(Debug, Clone, Serialize)]
pub struct TransferSummary {
    pub from_site: String,
    pub to_site: String,
    pub sent_kwh: f64,
    pub loss_kwh: f64,
    pub delivered_kwh: f64,
    pub avg_current_a: f64,
}

/// Output of [`run_year`].
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub sites: Vec<SiteSummary>,
    pub transfers: Vec<TransferSummary>,
    /// Network-level savings: delivered shared energy over total load (%).
    pub network_savings_pct: f64,
    /// Σgen − (Σserved_from_gen + Σcurtailed + Σlosses + ΔSOC + Σdelivered);
    /// zero up to float rounding on every run.
    pub conservation_residual_kwh: f64,
    /// Hour-by-hour ledger per site (same order as `sites`).
    pub hourly: Vec<Vec<HourRecord>>,
}

struct LiveSite<'a> {
    input: &'a SiteInput,
    state: SiteState,
    bg_budget_kwh: f64,
    records: Vec<HourRecord>,
    excess_pool: f64,
    shareable_pool: f64,
    sent: f64,
    received: f64,
    line_loss: f64,
    unmet_after_sharing: f64,
    bg_hours: f64,
}

/// Run the hourly engine over every site and settle sharing.
///
/// The horizon is the common length of the per-site load series (8760 for
/// a year run; tests use shorter series).
pub fn run_year(sites: &[SiteInput], links: &[ShareLink], mode: SharingMode) -> Result<RunReport> {
    if sites.is_empty() {
        return Err(Error::Validation("run requires at least one site".into()));
    }
    let horizon = sites[0].load_kwh.len();
    for s in sites {
        if s.load_kwh.len() != horizon || s.pv_kwh.len() != horizon {
            return Err(Error::Validation(format!(
                "site {}: load/pv series must all have length {horizon}",
                s.id
            )));
        }
    }
    let index_of = |id: &str| -> Result<usize> {
        sites
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::Topology(format!("link references unknown site {id:?}")))
    };
    let link_pairs: Vec<(usize, usize, &ShareLink)> = links
        .iter()
        .map(|l| Ok((index_of(&l.from_site)?, index_of(&l.to_site)?, l)))
        .collect::<Result<_>>()?;

    let mut live: Vec<LiveSite> = sites
        .iter()
        .map(|s| {
            Ok(LiveSite {
                input: s,
                state: SiteState::new(
                    s.battery_capacity_kwh,
                    s.battery_floor_kwh,
                    s.round_trip_eff,
                    s.battery_initial_kwh,
                )?,
                bg_budget_kwh: s.bg_feedstock_cap_kwh,
                records: Vec::with_capacity(horizon),
                excess_pool: 0.0,
                shareable_pool: 0.0,
                sent: 0.0,
                received: 0.0,
                line_loss: 0.0,
                unmet_after_sharing: 0.0,
                bg_hours: 0.0,
            })
        })
        .collect::<Result<_>>()?;

    let mut hourly_transfers: Vec<TransferSummary> = Vec::new();

    for h in 0..horizon {
        let mut hour_unmet = vec![0.0; live.len()];
        let mut hour_shareable = vec![0.0; live.len()];
        for (i, site) in live.iter_mut().enumerate() {
            let load = site.input.load_kwh[h];
            let bg_avail = site.input.bg_rated_kw.min(site.bg_budget_kwh).max(0.0);
            let rec = dispatch_hour(
                &mut site.state,
                site.input.pv_kwh[h],
                bg_avail,
                load,
                EXCESS_RESERVE_FACTOR * load,
            )?;
            site.bg_budget_kwh -= rec.bg_kwh;
            if rec.bg_kwh > 1e-12 {
                site.bg_hours += 1.0;
            }
            site.excess_pool += rec.surplus_kwh;
            site.shareable_pool += rec.shareable_kwh;
            hour_unmet[i] = rec.unmet_kwh;
            hour_shareable[i] = rec.shareable_kwh;
            site.records.push(rec);
        }
        if mode == SharingMode::Hourly {
            settle_hour(
                &mut live,
                &link_pairs,
                &mut hour_unmet,
                &mut hour_shareable,
                &mut hourly_transfers,
            );
        }
        for (i, site) in live.iter_mut().enumerate() {
            site.unmet_after_sharing += hour_unmet[i];
        }
    }

    let mut transfers = hourly_transfers;
    if mode == SharingMode::AnnualAverage {
        settle_annual(&mut live, &link_pairs, horizon as f64, &mut transfers)?;
    }

    // Assemble summaries and the conservation ledger.
    let mut summaries = Vec::with_capacity(live.len());
    let mut total_gen = 0.0;
    let mut total_sink = 0.0;
    let mut total_shared = 0.0;
    let mut total_load = 0.0;
    for site in &live {
        let sum = |f: fn(&HourRecord) -> f64| -> f64 { site.records.iter().map(f).sum() };
        let load: f64 = sum(|r| r.load_kwh);
        let pv: f64 = sum(|r| r.pv_kwh);
        let bg: f64 = sum(|r| r.bg_kwh);
        let charged: f64 = sum(|r| r.charged_kwh);
        let discharged: f64 = sum(|r| r.discharged_kwh);
        let batt_loss: f64 = sum(|r| r.batt_loss_kwh);
        let served_by_gen: f64 = sum(|r| r.served_kwh);
        let delta_soc = site.state.soc_kwh - site.input.battery_initial_kwh;
        let curtailed = site.excess_pool - site.sent;
        let unmet = site.unmet_after_sharing;

        total_gen += pv + bg;
        // A site's generation ends up as: locally served load, battery loss,
        // SOC gain, export (split into delivered + line loss by the link), or
        // curtailment.
        total_sink += served_by_gen + batt_loss + delta_soc + curtailed + site.sent;
        total_shared += site.received;
        total_load += load;

        summaries.push(SiteSummary {
            id: site.input.id.clone(),
            kind: site.input.kind,
            load_kwh: load,
            served_kwh: load - unmet,
            unmet_kwh: unmet,
            pv_kwh: pv,
            bg_kwh: bg,
            bg_hours: site.bg_hours,
            charged_kwh: charged,
            discharged_kwh: discharged,
            batt_loss_kwh: batt_loss,
            conv_loss_kwh: site.input.conv_loss_kwh,
            excess_kwh: site.excess_pool,
            curtailed_kwh: curtailed,
            sent_kwh: site.sent,
            received_kwh: site.received,
            line_loss_kwh: site.line_loss,
            delta_soc_kwh: delta_soc,
            e_cs: if load > 0.0 { unmet / load } else { 0.0 },
        });
    }
    let residual = total_gen - total_sink;
    let network_savings_pct = if total_load > 0.0 {
        100.0 * total_shared / total_load
    } else {
        0.0
    };

    Ok(RunReport {
        sites: summaries,
        transfers,
        network_savings_pct,
        conservation_residual_kwh: residual,
        hourly: live.into_iter().map(|s| s.records).collect(),
    })
}

/// Hourly settlement: children first, then macros; largest deficit first.
fn settle_hour(
    live: &mut [LiveSite],
    link_pairs: &[(usize, usize, &ShareLink)],
    unmet: &mut [f64],
    shareable: &mut [f64],
    transfers: &mut Vec<TransferSummary>,
) {
    let n = live.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| unmet[i] > 1e-15).collect();
    order.sort_by(|&a, &b| {
        let child_a = live[a].input.kind != BsKind::Macro;
        let child_b = live[b].input.kind != BsKind::Macro;
        child_b
            .cmp(&child_a) // children first
            .then(unmet[b].total_cmp(&unmet[a]))
            .then(a.cmp(&b))
    });

    for &recv in &order {
        // Candidate sources: linked partners; children before macros.
        let mut sources: Vec<(usize, &ShareLink)> = link_pairs
            .iter()
            .filter_map(|&(a, b, l)| {
                if a == recv {
                    Some((b, l))
                } else if b == recv {
                    Some((a, l))
                } else {
                    None
                }
            })
            .collect();
        sources.sort_by(|x, y| {
            let child_x = live[x.0].input.kind != BsKind::Macro;
            let child_y = live[y.0].input.kind != BsKind::Macro;
            child_y.cmp(&child_x).then(x.0.cmp(&y.0))
        });

        for (src, link) in sources {
            if unmet[recv] <= 1e-15 {
                break;
            }
            let pool = shareable[src];
            if pool <= 1e-15 {
                continue;
            }
            let v = link.bus_voltage_v;
            let k = 1000.0 * link.resistance_ohm / (v * v); // loss = k * sent^2 for 1 h
            let need = unmet[recv];
            // Smallest sent with sent - k*sent^2 = need, capped at the
            // line's peak-transfer point and at the available pool.
            let sent_for_need = if k <= 0.0 {
                need
            } else {
                let disc = 1.0 - 4.0 * k * need;
                if disc <= 0.0 {
                    1.0 / (2.0 * k)
                } else {
                    (1.0 - disc.sqrt()) / (2.0 * k)
                }
            };
            let cap = if k > 0.0 {
                1.0 / (2.0 * k)
            } else {
                f64::INFINITY
            };
            let sent = sent_for_need.min(cap).min(pool);
            if sent <= 1e-15 {
                continue;
            }
            let loss = k * sent * sent;
            let delivered = sent - loss;
            shareable[src] -= sent;
            unmet[recv] -= delivered.min(unmet[recv]);
            live[src].sent += sent;
            live[src].line_loss += loss;
            live[recv].received += delivered;
            transfers.push(TransferSummary {
                from_site: live[src].input.id.clone(),
                to_site: live[recv].input.id.clone(),
                sent_kwh: sent,
                loss_kwh: loss,
                delivered_kwh: delivered,
                avg_current_a: 1000.0 * sent / v,
            });
        }
    }
}

/// Annual settlement: each site pushes its whole excess pool through its
/// outgoing links (children towards their macro, macros split across their
/// macro neighbours), at year-average power with quantised current.
fn settle_annual(
    live: &mut [LiveSite],
    link_pairs: &[(usize, usize, &ShareLink)],
    hours: f64,
    transfers: &mut Vec<TransferSummary>,
) -> Result<()> {
    let n = live.len();
    for src in 0..n {
        let pool = live[src].excess_pool;
        if pool <= 0.0 {
            continue;
        }
        let is_child = live[src].input.kind != BsKind::Macro;
        let mut outgoing: Vec<(usize, &ShareLink)> = link_pairs
            .iter()
            .filter_map(|&(a, b, l)| {
                let other = if a == src {
                    b
                } else if b == src {
                    a
                } else {
                    return None;
                };
                // Children export only towards a macro; macros export over
                // macro-macro lines.
                let other_is_macro = live[other].input.kind == BsKind::Macro;
                if other_is_macro && (is_child || live[src].input.kind == BsKind::Macro) {
                    Some((other, l))
                } else {
                    None
                }
            })
            .collect();
        outgoing.sort_by_key(|&(other, _)| other);
        outgoing.dedup_by_key(|pair| pair.0);
        if outgoing.is_empty() {
            continue;
        }
        let part = pool / outgoing.len() as f64;
        for (dst, link) in outgoing {
            let res = share_energy(part, link.resistance_ohm, link.bus_voltage_v, hours)?;
            live[src].sent += part;
            live[src].line_loss += res.e_loss_kwh;
            live[dst].received += res.e_share_kwh;
            transfers.push(TransferSummary {
                from_site: live[src].input.id.clone(),
                to_site: live[dst].input.id.clone(),
                sent_kwh: part,
                loss_kwh: res.e_loss_kwh,
                delivered_kwh: res.e_share_kwh,
                avg_current_a: res.avg_current_a,
            });
        }
    }
    Ok(())
}

//! Independently coded dispatch oracle shared by the engine test and the
//! acceptance suite: a literal branch-by-branch walk of the service order
//! (PV to load, surplus to battery, battery to deficit, generator
//! backstop, reserve-gated shareable surplus) plus hour-by-hour deficit
//! settlement over the resistive links.

#![allow(dead_code)]

use greennet_core::dispatch::{run_year, ShareLink, SharingMode, SiteInput};
use greennet_core::power::BsKind;

// ---------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------

#[derive(Clone)]
pub struct OracleSite {
    pub kind: BsKind,
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub cap: f64,
    pub floor: f64,
    pub soc: f64,
    pub eta: f64,
    pub bg_rate: f64,
    pub bg_budget: f64,
    // totals
    pub t_pv: f64,
    pub t_bg: f64,
    pub t_load: f64,
    pub t_charged: f64,
    pub t_discharged: f64,
    pub t_batt_loss: f64,
    pub t_unmet: f64,
    pub t_excess: f64,
    pub t_sent: f64,
    pub t_received: f64,
    pub t_line_loss: f64,
}

pub struct OracleLink {
    a: usize,
    b: usize,
    r_ohm: f64,
    v: f64,
}

pub fn oracle_run(sites: &mut [OracleSite], links: &[OracleLink], horizon: usize) {
    for h in 0..horizon {
        let n = sites.len();
        let mut unmet = vec![0.0f64; n];
        let mut shareable = vec![0.0f64; n];

        for (i, s) in sites.iter_mut().enumerate() {
            let pv = s.pv[h];
            let load = s.load[h];
            s.t_pv += pv;
            s.t_load += load;

            // branch 1: generation meets demand directly
            let direct = if pv >= load { load } else { pv };
            let mut need = load - direct;
            let mut spare = pv - direct;

            // branch 2: spare energy charges storage until full
            if spare > 0.0 {
                let headroom = (s.cap - s.soc) / s.eta;
                let charge = if spare < headroom { spare } else { headroom };
                s.soc += charge * s.eta;
                s.t_batt_loss += charge * (1.0 - s.eta);
                s.t_charged += charge;
                spare -= charge;
            }

            // branch 3: storage covers the remaining demand down to the floor
            if need > 0.0 {
                let avail = s.soc - s.floor;
                let draw = if need < avail { need } else { avail };
                s.soc -= draw;
                s.t_discharged += draw;
                need -= draw;
            }

            // branch 4: generator backstop within rating and budget
            if need > 0.0 && s.bg_rate > 0.0 {
                let lim = if s.bg_rate < s.bg_budget {
                    s.bg_rate
                } else {
                    s.bg_budget
                };
                let gen = if need < lim { need } else { lim };
                s.bg_budget -= gen;
                s.t_bg += gen;
                need -= gen;
            }

            if s.soc < s.floor {
                s.soc = s.floor;
            }
            if s.soc > s.cap {
                s.soc = s.cap;
            }

            // branch 5: what remains is unmet; spare above the 10% reserve
            // is offered for sharing
            unmet[i] = need;
            s.t_excess += spare;
            let reserve = 1.1 * load;
            shareable[i] = if spare > reserve {
                spare - reserve
            } else {
                0.0
            };
        }

        // settlement: children first, then largest deficit, then index
        let mut order: Vec<usize> = (0..n).filter(|&i| unmet[i] > 1e-15).collect();
        order.sort_by(|&x, &y| {
            let cx = sites[x].kind != BsKind::Macro;
            let cy = sites[y].kind != BsKind::Macro;
            cy.cmp(&cx)
                .then(unmet[y].total_cmp(&unmet[x]))
                .then(x.cmp(&y))
        });
        for &recv in &order {
            let mut partners: Vec<(usize, f64, f64)> = links
                .iter()
                .filter_map(|l| {
                    if l.a == recv {
                        Some((l.b, l.r_ohm, l.v))
                    } else if l.b == recv {
                        Some((l.a, l.r_ohm, l.v))
                    } else {
                        None
                    }
                })
                .collect();
            partners.sort_by(|x, y| {
                let cx = sites[x.0].kind != BsKind::Macro;
                let cy = sites[y.0].kind != BsKind::Macro;
                cy.cmp(&cx).then(x.0.cmp(&y.0))
            });
            for (src, r_ohm, v) in partners {
                if unmet[recv] <= 1e-15 || shareable[src] <= 1e-15 {
                    continue;
                }
                let k = 1000.0 * r_ohm / (v * v);
                let need = unmet[recv];
                let disc = 1.0 - 4.0 * k * need;
                let want = if k <= 0.0 {
                    need
                } else if disc <= 0.0 {
                    1.0 / (2.0 * k)
                } else {
                    (1.0 - disc.sqrt()) / (2.0 * k)
                };
                let cap = if k > 0.0 {
                    1.0 / (2.0 * k)
                } else {
                    f64::INFINITY
                };
                let mut sent = want;
                if sent > cap {
                    sent = cap;
                }
                if sent > shareable[src] {
                    sent = shareable[src];
                }
                if sent <= 1e-15 {
                    continue;
                }
                let loss = k * sent * sent;
                let delivered = sent - loss;
                shareable[src] -= sent;
                let served = if delivered < unmet[recv] {
                    delivered
                } else {
                    unmet[recv]
                };
                unmet[recv] -= served;
                sites[src].t_sent += sent;
                sites[src].t_line_loss += loss;
                sites[recv].t_received += delivered;
            }
        }
        for (i, s) in sites.iter_mut().enumerate() {
            s.t_unmet += unmet[i];
        }
    }
}

// ---------------------------------------------------------------------
// Instance generation (deterministic)
// ---------------------------------------------------------------------

struct TestRng(u64);

impl TestRng {
    fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub struct Instance {
    pub engine: Vec<SiteInput>,
    pub oracle: Vec<OracleSite>,
    pub links: Vec<ShareLink>,
    pub oracle_links: Vec<OracleLink>,
    pub horizon: usize,
}

pub fn build_instance(seed: u64, horizon: usize) -> Instance {
    let mut rng = TestRng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1);
    let kinds = if seed % 2 == 0 {
        [BsKind::Macro, BsKind::Macro]
    } else {
        [BsKind::Macro, BsKind::Micro]
    };
    let mut engine = Vec::new();
    let mut oracle = Vec::new();
    for (i, kind) in kinds.into_iter().enumerate() {
        let base_load = 0.3 + rng.next() * 0.8;
        let load: Vec<f64> = (0..horizon)
            .map(|_| base_load * (0.4 + rng.next()))
            .collect();
        let pv_peak = 0.5 + rng.next() * 2.5;
        let pv: Vec<f64> = (0..horizon)
            .map(|h| {
                let hod = h % 24;
                if (6..18).contains(&hod) {
                    pv_peak
                        * (std::f64::consts::PI * (hod as f64 - 6.0) / 12.0)
                            .sin()
                            .max(0.0)
                        * (0.3 + rng.next())
                } else {
                    0.0
                }
            })
            .collect();
        let cap = 2.0 + rng.next() * 6.0;
        let floor = cap * 0.3;
        let initial = floor + (cap - floor) * rng.next();
        let bg_rate = if rng.next() < 0.7 {
            0.5 + rng.next()
        } else {
            0.0
        };
        let bg_budget = rng.next() * 15.0;
        engine.push(SiteInput {
            id: format!("site-{i}"),
            kind,
            load_kwh: load.clone(),
            pv_kwh: pv.clone(),
            battery_capacity_kwh: cap,
            battery_floor_kwh: floor,
            battery_initial_kwh: initial,
            round_trip_eff: 0.85,
            bg_rated_kw: bg_rate,
            bg_feedstock_cap_kwh: bg_budget,
            conv_loss_kwh: 0.0,
        });
        oracle.push(OracleSite {
            kind,
            load,
            pv,
            cap,
            floor,
            soc: initial,
            eta: 0.85,
            bg_rate,
            bg_budget,
            t_pv: 0.0,
            t_bg: 0.0,
            t_load: 0.0,
            t_charged: 0.0,
            t_discharged: 0.0,
            t_batt_loss: 0.0,
            t_unmet: 0.0,
            t_excess: 0.0,
            t_sent: 0.0,
            t_received: 0.0,
            t_line_loss: 0.0,
        });
    }
    let r_ohm = 1.0 + rng.next() * 6.0;
    let links = vec![ShareLink {
        from_site: "site-0".into(),
        to_site: "site-1".into(),
        resistance_ohm: r_ohm,
        bus_voltage_v: 48.0,
    }];
    let oracle_links = vec![OracleLink {
        a: 0,
        b: 1,
        r_ohm,
        v: 48.0,
    }];
    Instance {
        engine,
        oracle,
        links,
        oracle_links,
        horizon,
    }
}

pub fn assert_instance_matches(mut inst: Instance) {
    let report = run_year(&inst.engine, &inst.links, SharingMode::Hourly).unwrap();
    assert!(
        report.conservation_residual_kwh.abs() < 1e-9,
        "conservation residual {}",
        report.conservation_residual_kwh
    );
    oracle_run(&mut inst.oracle, &inst.oracle_links, inst.horizon);
    for (o, s) in inst.oracle.iter().zip(&report.sites) {
        let checks = [
            ("load", o.t_load, s.load_kwh),
            ("pv", o.t_pv, s.pv_kwh),
            ("bg", o.t_bg, s.bg_kwh),
            ("charged", o.t_charged, s.charged_kwh),
            ("discharged", o.t_discharged, s.discharged_kwh),
            ("batt_loss", o.t_batt_loss, s.batt_loss_kwh),
            ("unmet", o.t_unmet, s.unmet_kwh),
            ("excess", o.t_excess, s.excess_kwh),
            ("sent", o.t_sent, s.sent_kwh),
            ("received", o.t_received, s.received_kwh),
            ("line_loss", o.t_line_loss, s.line_loss_kwh),
        ];
        for (name, ov, ev) in checks {
            assert!(
                (ov - ev).abs() <= 1e-9,
                "site {}: {name} oracle {ov} vs engine {ev}",
                s.id
            );
        }
    }
}

//! Event-driven UE power-saving simulation over M/G/1 traffic.
//!
//! Two device state machines are modelled, both driven by the same
//! pre-generated packet stream so that parameter sweeps compare like for
//! like:
//!
//! * **NRT DRX** — after the inactivity timer expires the device sleeps in
//!   cycles. The proposed discipline grows the sleep interval from the
//!   short timer to the long timer in fixed steps and shrinks it back
//!   symmetrically, repeating in a triangular pattern; the conventional
//!   baseline runs N fixed short cycles and then fixed long cycles.
//!   Uplink packets wake the device immediately; downlink packets are
//!   buffered and delivered at the end of the current sleep interval
//!   (the paging instant). Every paging check that finds nothing costs an
//!   on-duration at data power.
//! * **NB-IoT eDRX + PSM** — after inactivity the device pages through a
//!   window of N short cycles followed by a configured number of long
//!   cycles whose length is the T3324 timer, then drops into PSM until
//!   the T3412 periodic-update deadline. During eDRX the radio is off
//!   between paging instants, so both directions are checked only at
//!   interval boundaries; during PSM only uplink traffic (or the T3412
//!   expiry itself, which triggers a tracking-area update burst) wakes
//!   the device, and buffered downlink waits for that wake.
//!
//! Power saving is the residency-weighted complement of mean power draw
//! against the data-state draw, with expectations taken as long-run time
//! averages over the horizon.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// State powers for the NRT machine (mW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NrtPowers {
    pub p_data_mw: f64,
    pub p_inactive_mw: f64,
    pub p_off_mw: f64,
}

impl Default for NrtPowers {
    fn default() -> Self {
        Self {
            p_data_mw: 500.0,
            p_inactive_mw: 255.0,
            p_off_mw: 11.0,
        }
    }
}

/// Triangular-DRX parameters (all timers in ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrxParams {
    /// Short cycle timer.
    pub tau_s_ms: f64,
    /// Long cycle timer.
    pub tau_l_ms: f64,
    /// Step between successive sleep intervals.
    pub tau_st_ms: f64,
    /// Inactivity timer.
    pub tau_i_ms: f64,
    /// Short cycles the fixed baseline runs before switching to long.
    pub n_short_cycles: u32,
    /// Optional cap on one DRX episode; the cycle restarts from the short
    /// timer when it trips. Unbounded when absent.
    pub drx_total_ms: Option<f64>,
    /// Paging window charged at data power at every empty wake.
    pub on_duration_ms: f64,
    pub powers: NrtPowers,
}

impl DrxParams {
    /// The NRT simulation parameter table.
    pub fn defaults() -> Self {
        Self {
            tau_s_ms: 20.0,
            tau_l_ms: 320.0,
            tau_st_ms: 20.0,
            tau_i_ms: 10.0,
            n_short_cycles: 16,
            drx_total_ms: None,
            on_duration_ms: 0.5,
            powers: NrtPowers::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s_ms > 0.0) || self.tau_l_ms < self.tau_s_ms {
            return Err(Error::Validation(format!(
                "cycle timers must satisfy 0 < tau_s <= tau_l, got {} / {}",
                self.tau_s_ms, self.tau_l_ms
            )));
        }
        if !(self.tau_st_ms > 0.0) {
            return Err(Error::Validation("step timer must be > 0".into()));
        }
        let steps = (self.tau_l_ms - self.tau_s_ms) / self.tau_st_ms;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "tau_l - tau_s ({}) must be divisible by the step {}",
                self.tau_l_ms - self.tau_s_ms,
                self.tau_st_ms
            )));
        }
        if self.tau_i_ms < 0.0 || self.on_duration_ms < 0.0 {
            return Err(Error::Validation("timers must be >= 0".into()));
        }
        Ok(())
    }
}

/// State powers for the NB-IoT machine (mW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IotPowers {
    pub p_data_mw: f64,
    pub p_inactive_mw: f64,
    pub p_edrx_mw: f64,
    pub p_psm_mw: f64,
}

impl Default for IotPowers {
    fn default() -> Self {
        Self {
            p_data_mw: 500.0,
            p_inactive_mw: 255.0,
            p_edrx_mw: 11.0,
            // 0.0108 uW deep-sleep draw
            p_psm_mw: 1.08e-5,
        }
    }
}

/// eDRX/PSM machine parameters (timers in ms unless noted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IotParams {
    /// T3324: the eDRX long-cycle timer (ms). Configured in seconds at the
    /// scenario level; sub-second values are accepted for tests.
    pub edrx_cycle_ms: f64,
    /// T3412: the periodic tracking-area-update deadline, measured from
    /// PSM entry (ms). Default 3 h.
    pub psm_timer_ms: f64,
    pub tau_i_ms: f64,
    /// Short paging cycles at the head of the eDRX window.
    pub n_short_cycles: u32,
    pub short_cycle_ms: f64,
    /// Long paging intervals in the eDRX window before PSM.
    pub n_long_cycles: u32,
    pub on_duration_ms: f64,
    /// Length of the tracking-area-update burst at the T3412 expiry.
    pub tau_update_ms: f64,
    /// Battery energy budget for the lifetime estimate (Wh).
    pub battery_wh: f64,
    pub powers: IotPowers,
}

impl IotParams {
    /// The NB-IoT simulation parameter table (T3324 = 5 s, T3412 = 3 h).
    pub fn defaults() -> Self {
        Self {
            edrx_cycle_ms: 5_000.0,
            psm_timer_ms: 3.0 * 3600.0 * 1000.0,
            tau_i_ms: 10.0,
            n_short_cycles: 1,
            short_cycle_ms: 320.0,
            n_long_cycles: 4,
            on_duration_ms: 0.5,
            tau_update_ms: 50.0,
            battery_wh: 5.0,
            powers: IotPowers::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("edrx_cycle_ms", self.edrx_cycle_ms),
            ("psm_timer_ms", self.psm_timer_ms),
            ("short_cycle_ms", self.short_cycle_ms),
        ] {
            if !(v > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        let p = self.powers;
        if !(p.p_data_mw > p.p_inactive_mw
            && p.p_inactive_mw > p.p_edrx_mw
            && p.p_edrx_mw > p.p_psm_mw)
        {
            return Err(Error::Validation(
                "state powers must be strictly ordered data > inactive > edrx > psm".into(),
            ));
        }
        Ok(())
    }
}

/// Service-time distribution of the M/G/1 stream (mean fixed at `1/mu`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ServiceDistribution {
    Deterministic,
    Exponential,
    /// Lognormal with the given sigma of the underlying normal; the scale
    /// is set so the mean stays `1/mu`.
    LogNormal {
        sigma: f64,
    },
}

/// Poisson packet stream with tagged directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficStream {
    pub lambda_per_ms: f64,
    pub mu_per_ms: f64,
    /// Fraction of packets that are downlink.
    pub dl_fraction: f64,
    pub service: ServiceDistribution,
    pub seed: u64,
}

impl TrafficStream {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_per_ms < 0.0 {
            return Err(Error::Validation("arrival rate must be >= 0".into()));
        }
        if !(self.mu_per_ms > 0.0) {
            return Err(Error::Validation("service rate must be > 0".into()));
        }
        if self.lambda_per_ms >= self.mu_per_ms {
            return Err(Error::Validation(format!(
                "unstable traffic: rho = {} >= 1",
                self.lambda_per_ms / self.mu_per_ms
            )));
        }
        if !(0.0..=1.0).contains(&self.dl_fraction) {
            return Err(Error::Validation("dl_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Ul,
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Packet {
    pub arrival_ms: f64,
    pub service_ms: f64,
    pub direction: Direction,
}

/// Generate the Poisson arrival list for a horizon.
pub fn mg1_arrivals(stream: &TrafficStream, horizon_ms: f64) -> Result<Vec<Packet>> {
    stream.validate()?;
    if !(horizon_ms > 0.0) {
        return Err(Error::Validation("horizon must be > 0".into()));
    }
    let mut packets = Vec::new();
    if stream.lambda_per_ms == 0.0 {
        return Ok(packets);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream.seed);
    let inter = Exp::new(stream.lambda_per_ms)
        .map_err(|e| Error::Validation(format!("bad arrival rate: {e}")))?;
    let mean_service = 1.0 / stream.mu_per_ms;
    let mut t = 0.0;
    loop {
        t += inter.sample(&mut rng);
        if t >= horizon_ms {
            break;
        }
        let service_ms = match stream.service {
            ServiceDistribution::Deterministic => mean_service,
            ServiceDistribution::Exponential => {
                let e = Exp::new(stream.mu_per_ms).expect("mu validated > 0");
                e.sample(&mut rng)
            }
            ServiceDistribution::LogNormal { sigma } => {
                let mu_ln = mean_service.ln() - sigma * sigma / 2.0;
                let d = LogNormal::new(mu_ln, sigma)
                    .map_err(|e| Error::Validation(format!("bad lognormal: {e}")))?;
                d.sample(&mut rng)
            }
        };
        let direction = if rng.gen::<f64>() < stream.dl_fraction {
            Direction::Dl
        } else {
            Direction::Ul
        };
        packets.push(Packet {
            arrival_ms: t,
            service_ms,
            direction,
        });
    }
    Ok(packets)
}

/// Outcome of one device simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SleepSimReport {
    pub power_saving_pct: f64,
    /// Mean downlink delivery latency (ms); zero when no DL packet
    /// completed inside the horizon.
    pub mean_dl_latency_ms: f64,
    pub dl_delivered: usize,
    pub t_data_ms: f64,
    /// Inactivity-timer residency.
    pub t_inactive_ms: f64,
    /// DRX/eDRX sleep residency.
    pub t_off_ms: f64,
    /// PSM residency (zero for the NRT machine).
    pub t_psm_ms: f64,
    pub horizon_ms: f64,
    pub mean_power_mw: f64,
    /// Battery endurance at the mean draw (years); meaningful for the IoT
    /// machine, zero otherwise.
    pub battery_life_yr: f64,
}

/// Scheduling weight: `A·Q·T_inac × PF`.
pub fn wpf_metric(
    pf_metric: f64,
    app_priority: f64,
    queue_bytes: f64,
    inactivity_weight: f64,
) -> Result<f64> {
    for (name, v) in [
        ("pf_metric", pf_metric),
        ("app_priority", app_priority),
        ("queue_bytes", queue_bytes),
        ("inactivity_weight", inactivity_weight),
    ] {
        if v < 0.0 {
            return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(app_priority * queue_bytes * inactivity_weight * pf_metric)
}

/// Buffer estimate from a buffer-status-report range: the midpoint.
pub fn queue_estimate(bsr_min_bytes: f64, bsr_max_bytes: f64) -> Result<f64> {
    if bsr_min_bytes > bsr_max_bytes {
        return Err(Error::Validation(format!(
            "BSR bounds inverted: {bsr_min_bytes} > {bsr_max_bytes}"
        )));
    }
    Ok((bsr_min_bytes + bsr_max_bytes) / 2.0)
}

/// The proposed sleep-interval sequence: rise from the short timer to the
/// long timer by the step, fall back symmetrically, repeat.
pub fn drx_sleep_sequence(params: &DrxParams) -> impl Iterator<Item = f64> {
    let lo = params.tau_s_ms;
    let hi = params.tau_l_ms;
    let st = params.tau_st_ms;
    let mut current = lo;
    let mut rising = true;
    std::iter::from_fn(move || {
        let out = current;
        if hi - lo < st {
            return Some(out); // degenerate triangle: constant sequence
        }
        if rising {
            if current + st > hi + 1e-9 {
                rising = false;
                current -= st;
            } else {
                current += st;
            }
        } else if current - st < lo - 1e-9 {
            rising = true;
            current += st;
        } else {
            current -= st;
        }
        Some(out)
    })
}

/// The conventional discipline: N short cycles, then long cycles.
fn fixed_short_long_sequence(params: &DrxParams) -> impl Iterator<Item = f64> {
    let n = params.n_short_cycles as usize;
    let lo = params.tau_s_ms;
    let hi = params.tau_l_ms;
    let mut emitted = 0usize;
    std::iter::from_fn(move || {
        let out = if emitted < n { lo } else { hi };
        emitted += 1;
        Some(out)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DrxDiscipline {
    Triangular,
    FixedShortLong,
}

#[derive(Default)]
struct Residencies {
    data: f64,
    inactive: f64,
    off: f64,
    psm: f64,
}

impl Residencies {
    fn total(&self) -> f64 {
        self.data + self.inactive + self.off + self.psm
    }
}

struct Timeline<'a> {
    packets: &'a [Packet],
    next: usize,
    now: f64,
    horizon: f64,
}

impl<'a> Timeline<'a> {
    fn new(packets: &'a [Packet], horizon: f64) -> Self {
        Self {
            packets,
            next: 0,
            now: 0.0,
            horizon,
        }
    }

    fn done(&self) -> bool {
        self.now >= self.horizon - 1e-12
    }

    fn remaining(&self) -> f64 {
        self.horizon - self.now
    }

    /// Next packet strictly before `t`.
    fn peek_before(&self, t: f64) -> Option<&'a Packet> {
        self.packets.get(self.next).filter(|p| p.arrival_ms < t)
    }

    /// First uplink packet arriving in `[now, t)`, if any.
    fn first_ul_before(&self, t: f64) -> Option<f64> {
        self.packets[self.next..]
            .iter()
            .take_while(|p| p.arrival_ms < t)
            .find(|p| p.direction == Direction::Ul)
            .map(|p| p.arrival_ms)
    }

    fn any_before(&self, t: f64) -> bool {
        self.peek_before(t).is_some()
    }

    /// Consume every packet that has arrived by the current time.
    fn absorb_arrived(&mut self, queue: &mut Vec<Packet>) {
        while let Some(p) = self.packets.get(self.next) {
            if p.arrival_ms <= self.now {
                queue.push(*p);
                self.next += 1;
            } else {
                break;
            }
        }
    }
}

/// Serve the queue work-conservingly from `tl.now`, absorbing arrivals
/// that land during service. Ends with an empty queue (or at the horizon).
fn data_phase(
    tl: &mut Timeline,
    queue: &mut Vec<Packet>,
    res: &mut Residencies,
    dl_latency: &mut Vec<f64>,
) {
    let mut head = 0usize;
    while head < queue.len() {
        if tl.done() {
            break;
        }
        let p = queue[head];
        head += 1;
        let service = p.service_ms.min(tl.remaining());
        let finish = tl.now + service;
        res.data += service;
        tl.now = finish;
        if p.direction == Direction::Dl && service >= p.service_ms {
            dl_latency.push(finish - p.arrival_ms);
        }
        tl.absorb_arrived(queue);
    }
    queue.clear();
}

fn finish_report(
    res: Residencies,
    horizon: f64,
    dl_latency: &[f64],
    p_data: f64,
    p_inactive: f64,
    p_off: f64,
    p_psm: f64,
    battery_wh: f64,
) -> SleepSimReport {
    let total = res.total().max(1e-12);
    let mean_power =
        (p_data * res.data + p_inactive * res.inactive + p_off * res.off + p_psm * res.psm) / total;
    let saving = 100.0
        * (1.0
            - (res.data / total
                + p_inactive * res.inactive / (p_data * total)
                + p_off * res.off / (p_data * total)
                + p_psm * res.psm / (p_data * total)));
    let mean_dl = if dl_latency.is_empty() {
        0.0
    } else {
        dl_latency.iter().sum::<f64>() / dl_latency.len() as f64
    };
    let battery_life_yr = if battery_wh > 0.0 && mean_power > 0.0 {
        battery_wh * 1000.0 / mean_power / 8760.0
    } else {
        0.0
    };
    SleepSimReport {
        power_saving_pct: saving,
        mean_dl_latency_ms: mean_dl,
        dl_delivered: dl_latency.len(),
        t_data_ms: res.data,
        t_inactive_ms: res.inactive,
        t_off_ms: res.off,
        t_psm_ms: res.psm,
        horizon_ms: horizon,
        mean_power_mw: mean_power,
        battery_life_yr,
    }
}

fn run_nrt(
    params: &DrxParams,
    packets: &[Packet],
    horizon_ms: f64,
    discipline: DrxDiscipline,
) -> Result<SleepSimReport> {
    params.validate()?;
    let mut tl = Timeline::new(packets, horizon_ms);
    let mut res = Residencies::default();
    let mut queue: Vec<Packet> = Vec::new();
    let mut dl_latency: Vec<f64> = Vec::new();

    'outer: while !tl.done() {
        // Inactivity window.
        let end = (tl.now + params.tau_i_ms).min(tl.horizon);
        if let Some(p) = tl.peek_before(end) {
            let arr = p.arrival_ms.max(tl.now);
            res.inactive += arr - tl.now;
            tl.now = arr;
            tl.absorb_arrived(&mut queue);
            data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
            continue 'outer;
        }
        res.inactive += end - tl.now;
        tl.now = end;
        if tl.done() {
            break;
        }

        // DRX episode.
        let mut seq: Box<dyn Iterator<Item = f64>> = match discipline {
            DrxDiscipline::Triangular => Box::new(drx_sleep_sequence(params)),
            DrxDiscipline::FixedShortLong => Box::new(fixed_short_long_sequence(params)),
        };
        let mut episode_elapsed = 0.0;
        loop {
            if tl.done() {
                break 'outer;
            }
            if let Some(cap) = params.drx_total_ms {
                if episode_elapsed >= cap {
                    // Episode budget exhausted: restart the cycle pattern.
                    seq = match discipline {
                        DrxDiscipline::Triangular => Box::new(drx_sleep_sequence(params)),
                        DrxDiscipline::FixedShortLong => {
                            Box::new(fixed_short_long_sequence(params))
                        }
                    };
                    episode_elapsed = 0.0;
                }
            }
            let tau = seq.next().expect("cycle sequences are infinite");
            let sleep_end = (tl.now + tau).min(tl.horizon);

            if let Some(ul_at) = tl.first_ul_before(sleep_end) {
                // Uplink wakes the device immediately; buffered DL from
                // earlier in this interval is delivered in the same burst.
                res.off += ul_at - tl.now;
                tl.now = ul_at;
                tl.absorb_arrived(&mut queue);
                data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
                continue 'outer;
            }

            let had_dl = tl.any_before(sleep_end);
            res.off += sleep_end - tl.now;
            tl.now = sleep_end;
            episode_elapsed += tau;
            if tl.done() {
                break 'outer;
            }
            if had_dl {
                // Paging instant delivers the buffered downlink.
                tl.absorb_arrived(&mut queue);
                data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
                continue 'outer;
            }
            // Empty paging window.
            let on_end = (tl.now + params.on_duration_ms).min(tl.horizon);
            let woke = tl.any_before(on_end);
            res.data += on_end - tl.now;
            tl.now = on_end;
            if woke {
                tl.absorb_arrived(&mut queue);
                data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
                continue 'outer;
            }
        }
    }

    let p = params.powers;
    Ok(finish_report(
        res,
        horizon_ms,
        &dl_latency,
        p.p_data_mw,
        p.p_inactive_mw,
        p.p_off_mw,
        0.0,
        0.0,
    ))
}

/// Proposed triangular-DRX simulation for one NRT device.
pub fn simulate_nrt(
    params: &DrxParams,
    traffic: &TrafficStream,
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    let packets = mg1_arrivals(traffic, horizon_ms)?;
    run_nrt(params, &packets, horizon_ms, DrxDiscipline::Triangular)
}

/// Conventional short-then-long DRX, for comparison runs.
pub fn simulate_nrt_baseline(
    params: &DrxParams,
    traffic: &TrafficStream,
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    let packets = mg1_arrivals(traffic, horizon_ms)?;
    run_nrt(params, &packets, horizon_ms, DrxDiscipline::FixedShortLong)
}

/// Triangular-DRX run over an explicit packet list (trace tests, fleets
/// with externally generated traffic).
pub fn simulate_nrt_with_packets(
    params: &DrxParams,
    packets: &[Packet],
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    run_nrt(params, packets, horizon_ms, DrxDiscipline::Triangular)
}

/// Baseline run over an explicit packet list.
pub fn simulate_nrt_baseline_with_packets(
    params: &DrxParams,
    packets: &[Packet],
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    run_nrt(params, packets, horizon_ms, DrxDiscipline::FixedShortLong)
}

/// eDRX + PSM run over an explicit packet list.
pub fn simulate_iot_with_packets(
    params: &IotParams,
    packets: &[Packet],
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    params.validate()?;
    let mut tl = Timeline::new(packets, horizon_ms);
    let mut res = Residencies::default();
    let mut queue: Vec<Packet> = Vec::new();
    let mut dl_latency: Vec<f64> = Vec::new();

    'outer: while !tl.done() {
        // Inactivity window: any packet wakes the connected device.
        let end = (tl.now + params.tau_i_ms).min(tl.horizon);
        if let Some(p) = tl.peek_before(end) {
            let arr = p.arrival_ms.max(tl.now);
            res.inactive += arr - tl.now;
            tl.now = arr;
            tl.absorb_arrived(&mut queue);
            data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
            continue 'outer;
        }
        res.inactive += end - tl.now;
        tl.now = end;
        if tl.done() {
            break;
        }

        // eDRX window: N short cycles then the long paging cycles, both
        // directions checked only at interval boundaries.
        let intervals = (0..params.n_short_cycles)
            .map(|_| params.short_cycle_ms)
            .chain((0..params.n_long_cycles).map(|_| params.edrx_cycle_ms));
        for tau in intervals {
            if tl.done() {
                break 'outer;
            }
            let sleep_end = (tl.now + tau).min(tl.horizon);
            let pending = tl.any_before(sleep_end);
            res.off += sleep_end - tl.now;
            tl.now = sleep_end;
            if tl.done() {
                break 'outer;
            }
            if pending {
                tl.absorb_arrived(&mut queue);
                data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
                continue 'outer;
            }
            let on_end = (tl.now + params.on_duration_ms).min(tl.horizon);
            let woke = tl.any_before(on_end);
            res.data += on_end - tl.now;
            tl.now = on_end;
            if woke {
                tl.absorb_arrived(&mut queue);
                data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
                continue 'outer;
            }
        }
        if tl.done() {
            break;
        }

        // PSM: uplink wakes immediately, downlink buffers until the T3412
        // tracking-area-update burst.
        let psm_deadline = (tl.now + params.psm_timer_ms).min(tl.horizon);
        if let Some(ul_at) = tl.first_ul_before(psm_deadline) {
            res.psm += ul_at - tl.now;
            tl.now = ul_at;
            tl.absorb_arrived(&mut queue);
            data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
            continue 'outer;
        }
        res.psm += psm_deadline - tl.now;
        tl.now = psm_deadline;
        if tl.done() {
            break;
        }
        // Periodic TAU burst; buffered DL rides along with it.
        let tau_end = (tl.now + params.tau_update_ms).min(tl.horizon);
        res.data += tau_end - tl.now;
        tl.now = tau_end;
        tl.absorb_arrived(&mut queue);
        data_phase(&mut tl, &mut queue, &mut res, &mut dl_latency);
    }

    let p = params.powers;
    Ok(finish_report(
        res,
        horizon_ms,
        &dl_latency,
        p.p_data_mw,
        p.p_inactive_mw,
        p.p_edrx_mw,
        p.p_psm_mw,
        params.battery_wh,
    ))
}

/// eDRX + PSM simulation for one NB-IoT device.
pub fn simulate_iot(
    params: &IotParams,
    traffic: &TrafficStream,
    horizon_ms: f64,
) -> Result<SleepSimReport> {
    let packets = mg1_arrivals(traffic, horizon_ms)?;
    simulate_iot_with_packets(params, &packets, horizon_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stream(lambda: f64, seed: u64) -> TrafficStream {
        TrafficStream {
            lambda_per_ms: lambda,
            mu_per_ms: 100.0,
            dl_fraction: 0.5,
            service: ServiceDistribution::Deterministic,
            seed,
        }
    }

    #[test]
    fn triangle_sequence_reference() {
        let params = DrxParams::defaults();
        let seq: Vec<f64> = drx_sleep_sequence(&params).take(33).collect();
        // rise 20..320, fall 300..20, rise again
        let mut expected: Vec<f64> = (1..=16).map(|k| 20.0 * k as f64).collect();
        expected.extend((1..=15).rev().map(|k| 20.0 * k as f64));
        expected.extend([40.0, 60.0]);
        assert_eq!(seq, expected);
    }

    #[test]
    fn triangle_sequence_degenerate_and_small() {
        let mut p = DrxParams::defaults();
        p.tau_s_ms = 50.0;
        p.tau_l_ms = 50.0;
        let seq: Vec<f64> = drx_sleep_sequence(&p).take(4).collect();
        assert_eq!(seq, vec![50.0; 4]);

        let mut p2 = DrxParams::defaults();
        p2.tau_s_ms = 10.0;
        p2.tau_l_ms = 30.0;
        p2.tau_st_ms = 10.0;
        let seq2: Vec<f64> = drx_sleep_sequence(&p2).take(3).collect();
        assert_eq!(seq2, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn mg1_arrivals_properties() {
        let s = stream(0.0, 7);
        assert!(mg1_arrivals(&s, 1000.0).unwrap().is_empty());

        let s = stream(0.1, 42);
        let a = mg1_arrivals(&s, 1_000_000.0).unwrap();
        let b = mg1_arrivals(&s, 1_000_000.0).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(a[10].arrival_ms, b[10].arrival_ms);
        // Poisson count within 3 sigma of lambda * horizon.
        let expected: f64 = 0.1 * 1_000_000.0;
        let sigma = expected.sqrt();
        assert!(
            (a.len() as f64 - expected).abs() < 3.0 * sigma,
            "count {} vs {expected}",
            a.len()
        );
    }

    #[test]
    fn mg1_rejects_unstable() {
        let mut s = stream(0.1, 1);
        s.lambda_per_ms = 150.0;
        assert!(matches!(mg1_arrivals(&s, 100.0), Err(Error::Validation(_))));
    }

    #[test]
    fn wpf_metric_examples() {
        assert_relative_eq!(wpf_metric(0.7, 1.0, 1.0, 1.0).unwrap(), 0.7);
        let single = wpf_metric(0.5, 2.0, 100.0, 1.5).unwrap();
        let doubled = wpf_metric(0.5, 2.0, 200.0, 1.5).unwrap();
        assert_relative_eq!(doubled, 2.0 * single);
        // Priority doubles the metric, so argmax picks the prioritised user.
        let u1 = wpf_metric(0.4, 2.0, 50.0, 1.0).unwrap();
        let u2 = wpf_metric(0.4, 1.0, 50.0, 1.0).unwrap();
        assert!(u1 > u2);
        assert_relative_eq!(u1, 2.0 * u2);
    }

    #[test]
    fn queue_estimate_examples() {
        assert_relative_eq!(queue_estimate(0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(queue_estimate(100.0, 300.0).unwrap(), 200.0);
        assert!(queue_estimate(10.0, 5.0).is_err());
        // BSR table lookup: index bounds map to their midpoint.
        let bsr_bounds = [(0.0, 10.0), (10.0, 12.0), (12.0, 14.0), (14.0, 17.0)];
        for (lo, hi) in bsr_bounds {
            assert_relative_eq!(queue_estimate(lo, hi).unwrap(), (lo + hi) / 2.0);
        }
    }

    #[test]
    fn residencies_partition_horizon() {
        let params = DrxParams::defaults();
        for lambda in [0.01, 0.05, 0.2] {
            let r = simulate_nrt(&params, &stream(lambda, 11), 200_000.0).unwrap();
            let sum = r.t_data_ms + r.t_inactive_ms + r.t_off_ms + r.t_psm_ms;
            assert_relative_eq!(sum, 200_000.0, epsilon = 1e-6);
        }
        let iot = IotParams::defaults();
        let r = simulate_iot(&iot, &stream(0.01, 3), 500_000.0).unwrap();
        let sum = r.t_data_ms + r.t_inactive_ms + r.t_off_ms + r.t_psm_ms;
        assert_relative_eq!(sum, 500_000.0, epsilon = 1e-6);
    }

    #[test]
    fn saturation_kills_saving_and_latency_approaches_service() {
        let params = DrxParams::defaults();
        let mut s = stream(95.0, 5);
        s.mu_per_ms = 100.0;
        let r = simulate_nrt(&params, &s, 50_000.0).unwrap();
        assert!(r.power_saving_pct < 5.0, "saving {}", r.power_saving_pct);
        assert!(
            r.mean_dl_latency_ms < 5.0,
            "latency {}",
            r.mean_dl_latency_ms
        );
    }

    #[test]
    fn low_rate_saving_approaches_off_bound() {
        let params = DrxParams::defaults();
        let r = simulate_nrt(&params, &stream(1e-6, 2), 2_000_000.0).unwrap();
        assert!(r.power_saving_pct > 95.0, "saving {}", r.power_saving_pct);
        assert!(r.power_saving_pct < 97.8);
    }

    #[test]
    fn dl_latency_monotone_in_long_cycle() {
        // Deeper triangles hold downlink packets longer on average.
        let traffic = stream(0.01, 31);
        let mut last = 0.0;
        for tau_l in [40.0, 160.0, 320.0] {
            let mut p = DrxParams::defaults();
            p.tau_l_ms = tau_l;
            let r = simulate_nrt(&p, &traffic, 2_000_000.0).unwrap();
            assert!(
                r.mean_dl_latency_ms >= last,
                "latency {} at tau_l {tau_l} below {last}",
                r.mean_dl_latency_ms
            );
            last = r.mean_dl_latency_ms;
        }
    }

    #[test]
    fn equal_powers_zero_saving() {
        let mut params = DrxParams::defaults();
        params.powers = NrtPowers {
            p_data_mw: 500.0,
            p_inactive_mw: 500.0,
            p_off_mw: 500.0,
        };
        let r = simulate_nrt(&params, &stream(0.05, 9), 100_000.0).unwrap();
        assert!(r.power_saving_pct.abs() < 1e-9);
    }

    #[test]
    fn iot_single_packet_hand_trace() {
        // Manual timeline for one DL packet at t = 5000 ms, horizon 20 s:
        //   [0,10) inactive | [10,330) short sleep | [330,330.5) page
        //   [330.5,5330.5) long sleep (packet buffers at 5000)
        //   [5330.5,5330.51) serve: DL latency 330.51
        //   [5330.51,5340.51) inactive | [5340.51,5660.51) short | page
        //   [5661.01,10661.01) long | page | [10661.51,15661.51) long
        //   page -> PSM at 15662.01, clipped at the horizon.
        let mut params = IotParams::defaults();
        params.n_long_cycles = 2;
        params.psm_timer_ms = 100_000.0;
        let packets = [Packet {
            arrival_ms: 5000.0,
            service_ms: 0.01,
            direction: Direction::Dl,
        }];
        let r = simulate_iot_with_packets(&params, &packets, 20_000.0).unwrap();
        assert_relative_eq!(r.t_inactive_ms, 20.0, epsilon = 1e-9);
        assert_relative_eq!(r.t_data_ms, 4.0 * 0.5 + 0.01, epsilon = 1e-9);
        assert_relative_eq!(
            r.t_off_ms,
            320.0 + 5000.0 + 320.0 + 5000.0 + 5000.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(r.t_psm_ms, 20_000.0 - 15_662.01, epsilon = 1e-6);
        assert_eq!(r.dl_delivered, 1);
        assert_relative_eq!(r.mean_dl_latency_ms, 330.51, epsilon = 1e-9);
    }

    #[test]
    fn iot_saving_antitone_in_arrival_rate() {
        let params = IotParams::defaults();
        let mut last = f64::INFINITY;
        for (i, lambda) in [0.005, 0.01, 0.05, 0.1, 0.5].into_iter().enumerate() {
            let r = simulate_iot(&params, &stream(lambda, 60 + i as u64), 1_000_000.0).unwrap();
            assert!(
                r.power_saving_pct < last,
                "saving {} at lambda {lambda} not below {last}",
                r.power_saving_pct
            );
            last = r.power_saving_pct;
        }
    }

    #[test]
    fn iot_no_traffic_reaches_psm() {
        let params = IotParams::defaults();
        let r = simulate_iot_with_packets(&params, &[], 3.0 * 3600.0 * 1000.0).unwrap();
        assert!(
            r.t_psm_ms > 0.9 * r.horizon_ms,
            "psm {} of {}",
            r.t_psm_ms,
            r.horizon_ms
        );
        assert!(r.power_saving_pct > 99.99, "saving {}", r.power_saving_pct);
    }

    #[test]
    fn ul_wakes_nrt_immediately_mid_sleep() {
        let params = DrxParams::defaults();
        // One UL packet deep inside the first sleep interval.
        let packets = [Packet {
            arrival_ms: 25.0,
            service_ms: 0.01,
            direction: Direction::Ul,
        }];
        let r = simulate_nrt_with_packets(&params, &packets, 40.0).unwrap();
        // inactive [0,10), sleep [10,25), data [25,25.01), inactive to 35.01,
        // then a fresh 20 ms sleep clipped at 40.
        assert_relative_eq!(r.t_off_ms, 15.0 + (40.0 - 35.01), epsilon = 1e-9);
        assert_relative_eq!(r.t_data_ms, 0.01, epsilon = 1e-9);
    }

    #[test]
    fn dl_waits_for_paging_boundary() {
        let params = DrxParams::defaults();
        let packets = [Packet {
            arrival_ms: 25.0,
            service_ms: 0.01,
            direction: Direction::Dl,
        }];
        let r = simulate_nrt_with_packets(&params, &packets, 60.0).unwrap();
        // Delivered at the end of the [10,30) interval: latency 5.01 ms.
        assert_eq!(r.dl_delivered, 1);
        assert_relative_eq!(r.mean_dl_latency_ms, 30.01 - 25.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn wpf_argmax_invariant_under_common_scaling(
            pf in 0.01f64..10.0, a1 in 0.1f64..10.0, a2 in 0.1f64..10.0, k in 0.1f64..100.0
        ) {
            let m1 = wpf_metric(pf, a1, 50.0, 1.0).unwrap();
            let m2 = wpf_metric(pf, a2, 50.0, 1.0).unwrap();
            let s1 = wpf_metric(pf * k, a1, 50.0, 1.0).unwrap();
            let s2 = wpf_metric(pf * k, a2, 50.0, 1.0).unwrap();
            prop_assert_eq!(m1 > m2, s1 > s2);
        }

        #[test]
        fn partition_invariant_random_traffic(lambda in 0.001f64..0.4, seed in 0u64..50) {
            let params = DrxParams::defaults();
            let r = simulate_nrt(&params, &stream(lambda, seed), 50_000.0).unwrap();
            let sum = r.t_data_ms + r.t_inactive_ms + r.t_off_ms + r.t_psm_ms;
            prop_assert!((sum - 50_000.0).abs() < 1e-6);
            prop_assert!(r.power_saving_pct >= 0.0 && r.power_saving_pct <= 100.0);
        }
    }
}

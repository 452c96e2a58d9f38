//! Built-in hourly solar production profile.
//!
//! The default profile is a deterministic synthetic year for a South-Asian
//! rural site: a sinusoidal daylight bell (06:00–18:00), a seasonal
//! amplitude swing with its trough in the monsoon (mid-July), and a
//! reproducible daily clearness sequence that inserts 2–4 day deep-cloud
//! episodes during the monsoon months. The year is renormalised so the
//! mean daily total equals 4.59 kWh per kW of rated capacity, matching the
//! peak-solar-hour resource figure used everywhere else, which keeps the
//! hourly and annualised PV estimates consistent.
//!
//! Values are kW of output per kW rated, before the derating factor and
//! tracking gain are applied.

use crate::HOURS_PER_YEAR;

/// Mean peak solar hours per day the default profile integrates to.
pub const DEFAULT_PSH: f64 = 4.59;

const SEASONAL_AMPLITUDE: f64 = 0.26;
const TROUGH_DAY: f64 = 199.0; // mid-July
const SEED: u64 = 0x9E37_79B9_7F4A_7C15;

fn xorshift(mut s: u64) -> u64 {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    s
}

struct Rng(u64);

impl Rng {
    fn next_unit(&mut self) -> f64 {
        self.0 = xorshift(self.0);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Daily clearness factors: monsoon days (152–273) carry occasional deep
/// multi-day cloud episodes, dry-season days stay close to clear sky.
fn clearness_sequence() -> [f64; 365] {
    let mut rng = Rng(SEED);
    let mut out = [0.0f64; 365];
    let mut d = 0usize;
    while d < 365 {
        let u = rng.next_unit();
        let monsoon = (152..=273).contains(&d);
        if monsoon {
            let v = rng.next_unit();
            if u < 0.08 {
                let run = 2 + (v * 3.0) as usize;
                for _ in 0..run {
                    if d >= 365 {
                        break;
                    }
                    let w = rng.next_unit();
                    out[d] = 0.30 + 0.15 * w;
                    d += 1;
                }
                continue;
            } else if u < 0.40 {
                out[d] = 0.78 + 0.15 * v;
            } else {
                out[d] = 0.88 + 0.17 * v;
            }
        } else if u < 0.06 {
            out[d] = 0.60 + 0.25 * u / 0.06;
        } else {
            out[d] = 0.90 + 0.18 * (u - 0.06) / 0.94;
        }
        d += 1;
    }
    out
}

/// Build the default 8760-hour profile (kW per kW rated).
pub fn default_hourly_profile() -> Vec<f64> {
    let bell_sum: f64 = (0..12)
        .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / 12.0).sin())
        .sum();
    let base_amplitude = DEFAULT_PSH / bell_sum;
    let clearness = clearness_sequence();

    let mut prof = Vec::with_capacity(HOURS_PER_YEAR);
    for d in 0..365 {
        let season = 1.0
            - SEASONAL_AMPLITUDE
                * (2.0 * std::f64::consts::PI * (d as f64 - TROUGH_DAY) / 365.0).cos();
        let amp = base_amplitude * season * clearness[d];
        for h in 0..24 {
            if (6..18).contains(&h) {
                prof.push(amp * (std::f64::consts::PI * (h as f64 + 0.5 - 6.0) / 12.0).sin());
            } else {
                prof.push(0.0);
            }
        }
    }

    // Renormalise so the annual total is exactly 365 * PSH.
    let total: f64 = prof.iter().sum();
    let scale = DEFAULT_PSH * 365.0 / total;
    for v in &mut prof {
        *v *= scale;
    }
    prof
}

/// Parse an hourly profile from CSV text: one numeric value per row, an
/// optional header row, 8760 rows of data.
pub fn parse_profile_csv(text: &str) -> crate::Result<Vec<f64>> {
    let mut values = Vec::with_capacity(HOURS_PER_YEAR);
    for (lineno, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) => {
                if v < 0.0 {
                    return Err(crate::Error::Validation(format!(
                        "profile row {}: negative output {v}",
                        lineno + 1
                    )));
                }
                values.push(v);
            }
            Err(_) if lineno == 0 => continue, // header row
            Err(_) => {
                return Err(crate::Error::Validation(format!(
                    "profile row {}: not a number: {cell:?}",
                    lineno + 1
                )))
            }
        }
    }
    if values.len() != HOURS_PER_YEAR {
        return Err(crate::Error::Validation(format!(
            "profile must have {HOURS_PER_YEAR} rows, found {}",
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_profile_integrates_to_psh() {
        let p = default_hourly_profile();
        assert_eq!(p.len(), HOURS_PER_YEAR);
        assert_relative_eq!(p.iter().sum::<f64>(), DEFAULT_PSH * 365.0, epsilon = 1e-6);
    }

    #[test]
    fn default_profile_is_dark_at_night() {
        let p = default_hourly_profile();
        for d in 0..365 {
            assert_eq!(p[d * 24], 0.0);
            assert_eq!(p[d * 24 + 5], 0.0);
            assert_eq!(p[d * 24 + 18], 0.0);
            assert!(p[d * 24 + 12] > 0.0);
        }
    }

    #[test]
    fn default_profile_has_monsoon_trough() {
        let p = default_hourly_profile();
        let daily: Vec<f64> = (0..365)
            .map(|d| p[d * 24..(d + 1) * 24].iter().sum())
            .collect();
        let monsoon: f64 = daily[152..=273].iter().sum::<f64>() / 122.0;
        let dry: f64 =
            (daily[..152].iter().sum::<f64>() + daily[274..].iter().sum::<f64>()) / 243.0;
        assert!(monsoon < 0.75 * dry, "monsoon {monsoon} dry {dry}");
        // deep-cloud episodes exist
        assert!(daily[152..=273].iter().any(|&d| d < 2.0));
    }

    #[test]
    fn csv_parse_round_trip() {
        let p = default_hourly_profile();
        let mut text = String::from("kw_per_kw_rated\n");
        for v in &p {
            text.push_str(&format!("{v}\n"));
        }
        let parsed = parse_profile_csv(&text).unwrap();
        assert_eq!(parsed.len(), p.len());
        assert_relative_eq!(parsed[4000], p[4000]);
    }

    #[test]
    fn csv_parse_rejects_short_and_negative() {
        assert!(parse_profile_csv("1.0\n2.0\n").is_err());
        let mut text = String::new();
        for _ in 0..HOURS_PER_YEAR {
            text.push_str("-0.5\n");
        }
        assert!(parse_profile_csv(&text).is_err());
    }
}

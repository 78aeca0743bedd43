//! Simulation knobs that are not part of the radio configuration.

use crate::channel::{ChannelModel, ForwardNormalization};
use crate::detection::Interpolation;
use crate::error::{Error, Result};
use crate::params::{db_to_lin, lin_to_db, ParamMap, SystemConfig, SYSTEM_KEYS};
use crate::sensing::RangeMode;

/// Keys understood by [`Scenario`].
pub const SCENARIO_KEYS: &[&str] = &[
    "z",
    "direct_taps",
    "forward_taps",
    "decay_db",
    "forward_normalization",
    "beta_db",
    "interpolation",
    "range_mode",
    "eta_db",
    "total_energy",
    "ofdm",
    "sensing",
    "analytic",
];

/// Channel statistics, device population and which receiver chains run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Requested number of devices (the plan may schedule fewer).
    pub devices: usize,
    pub direct_taps: usize,
    pub forward_taps: usize,
    pub decay_db: f64,
    pub forward_normalization: ForwardNormalization,
    /// Cascaded path loss of the backscatter link (power, dB).
    pub beta_db: f64,
    pub interpolation: Interpolation,
    pub range_mode: RangeMode,
    /// Pilot-to-data power ratio; when set, pilot and data powers are
    /// re-derived under a fixed block energy and fixed noise variance.
    pub eta_db: Option<f64>,
    /// Block energy `P_pilot + (N - M) P_data` used with `eta_db`; defaults
    /// to that of the base configuration.
    pub total_energy: Option<f64>,
    pub ofdm: bool,
    pub sensing: bool,
    pub analytic: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            devices: 3,
            direct_taps: 3,
            forward_taps: 2,
            decay_db: 3.0,
            forward_normalization: ForwardNormalization::Average,
            beta_db: -15.0,
            interpolation: Interpolation::Dft,
            range_mode: RangeMode::Monostatic,
            eta_db: None,
            total_energy: None,
            ofdm: true,
            sensing: true,
            analytic: true,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::invalid(key, format!("expected true/false, got `{v}`"))),
    }
}

impl Scenario {
    /// Overrides fields from the scenario keys present in `map`.
    pub fn apply_map(&mut self, map: &ParamMap) -> Result<()> {
        for key in map.keys() {
            let v = map.raw(key).unwrap_or_default();
            if SCENARIO_KEYS.contains(&key) {
                self.set(key, v)?;
            }
        }
        Ok(())
    }

    /// Sets one scenario key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let num = || -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(key, format!("cannot parse `{v}`")))
        };
        let count = || -> Result<usize> {
            let x = num()?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::invalid(key, "must be a non-negative integer"));
            }
            Ok(x as usize)
        };
        match key {
            "z" => self.devices = count()?,
            "direct_taps" => self.direct_taps = count()?,
            "forward_taps" => self.forward_taps = count()?,
            "decay_db" => self.decay_db = num()?,
            "beta_db" => self.beta_db = num()?,
            "eta_db" => self.eta_db = Some(num()?),
            "total_energy" => self.total_energy = Some(num()?),
            "ofdm" => self.ofdm = parse_bool(key, v)?,
            "sensing" => self.sensing = parse_bool(key, v)?,
            "analytic" => self.analytic = parse_bool(key, v)?,
            "forward_normalization" => {
                self.forward_normalization = match v {
                    "average" => ForwardNormalization::Average,
                    "per_realization" => ForwardNormalization::PerRealization,
                    _ => return Err(Error::invalid(key, "expected average or per_realization")),
                }
            }
            "interpolation" => {
                self.interpolation = match v {
                    "dft" => Interpolation::Dft,
                    "linear" => Interpolation::Linear,
                    _ => return Err(Error::invalid(key, "expected dft or linear")),
                }
            }
            "range_mode" => {
                self.range_mode = match v {
                    "monostatic" => RangeMode::Monostatic,
                    "bistatic" => RangeMode::Bistatic,
                    _ => return Err(Error::invalid(key, "expected monostatic or bistatic")),
                }
            }
            _ => return Err(Error::invalid(key, "unknown key")),
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            direct_taps: self.direct_taps,
            forward_taps: self.forward_taps,
            devices: self.devices,
            decay_db_per_tap: self.decay_db,
            forward_normalization: self.forward_normalization,
        }
    }

    /// Configuration actually simulated: `cfg` with the pilot/data split
    /// implied by `eta_db` (if any).
    pub fn resolve(&self, cfg: &SystemConfig) -> Result<SystemConfig> {
        let Some(eta_db) = self.eta_db else {
            return Ok(cfg.clone());
        };
        let data_bins = (cfg.n() - cfg.m()) as f64;
        let total = self
            .total_energy
            .unwrap_or(cfg.p_pilot() + data_bins * cfg.p_data());
        if !(total > 0.0) {
            return Err(Error::invalid("total_energy", "must be positive"));
        }
        let eta = db_to_lin(eta_db);
        let p_data = total / (eta + data_bins);
        let p_pilot = eta * p_data;
        cfg.with(&[
            ("p_pilot_db", lin_to_db(p_pilot)),
            ("p_data_db", lin_to_db(p_data)),
            ("noise_var", cfg.noise_var()),
        ])
    }
}

/// `true` for keys of either [`SystemConfig`] or [`Scenario`].
pub fn is_known_key(key: &str) -> bool {
    SYSTEM_KEYS.contains(&key) || SCENARIO_KEYS.contains(&key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_keeps_total_energy_and_noise() {
        let cfg = SystemConfig::table1();
        let mut sc = Scenario::default();
        let total = cfg.p_pilot() + 224.0 * cfg.p_data();
        for eta in [0.0, 13.5, 24.0] {
            sc.eta_db = Some(eta);
            let r = sc.resolve(&cfg).unwrap();
            assert!((r.p_pilot() + 224.0 * r.p_data() - total).abs() < 1e-9 * total);
            assert!((lin_to_db(r.p_pilot() / r.p_data()) - eta).abs() < 1e-9);
            assert_eq!(r.noise_var(), cfg.noise_var());
        }
    }

    #[test]
    fn keys_parse() {
        let mut sc = Scenario::default();
        let map = ParamMap::parse("z = 6\ninterpolation = linear\nsensing = false\nn = 128").unwrap();
        sc.apply_map(&map).unwrap();
        assert_eq!(sc.devices, 6);
        assert_eq!(sc.interpolation, Interpolation::Linear);
        assert!(!sc.sensing);
        assert!(sc.set("z", "1.5").is_err());
        assert!(sc.set("bogus", "1").is_err());
        assert!(is_known_key("n") && is_known_key("beta_db") && !is_known_key("trials"));
    }
}

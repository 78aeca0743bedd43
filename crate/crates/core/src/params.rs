//! System parameters: validation, derived quantities and the flat
//! `key = value` configuration format.
//!
//! Grammar of a configuration file:
//!
//! ```text
//! # comment until end of line
//! key = value        # trailing comments are allowed
//! ```
//!
//! Keys are case-sensitive, values are plain numbers (or `true`/`false`).
//! Power levels carry a `_db` suffix. Either `noise_var` or `snr_db` may be
//! given; the latter is interpreted relative to the per-data-symbol power.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered raw `key -> value` map, as read from a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamMap(BTreeMap<String, String>);

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::invalid("config", format!("line {}: empty key", lineno + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::invalid(key, "duplicate key"));
            }
        }
        Ok(Self(map))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<V>()
                .map(Some)
                .map_err(|_| Error::invalid(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn require<V: FromStr>(&self, key: &str) -> Result<V> {
        self.get(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Renders the map in the configuration grammar, one key per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Keys understood by [`SystemConfig`].
pub const SYSTEM_KEYS: &[&str] = &[
    "n",
    "c1_prime",
    "c2",
    "pilot_index",
    "cp_len",
    "mod_order",
    "p_pilot_db",
    "p_data_db",
    "alpha",
    "p_fa_target",
    "noise_var",
    "snr_db",
    "sample_rate_hz",
    "bandwidth_hz",
    "delta_tau",
    "strict_pow2",
];

/// Default subcarrier spacing used to derive the rate bandwidth.
pub const DEFAULT_SUBCARRIER_SPACING_HZ: f64 = 30e3;
/// Default baseband sample rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 7.68e6;

/// Immutable, validated system configuration.
///
/// Power conventions: `p_pilot` is the energy of the whole pilot block,
/// `p_data` the average energy of one QAM symbol on one active subcarrier,
/// and `noise_var` the variance of one complex noise sample (`E|w|^2`).
/// With unitary transforms the noise variance is the same per time sample,
/// per subcarrier and per affine bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    n: usize,
    c1_prime: usize,
    c2: f64,
    pilot_index: usize,
    cp_len: usize,
    mod_order: usize,
    p_pilot_db: f64,
    p_data_db: f64,
    alpha: f64,
    p_fa_target: f64,
    noise_var: f64,
    sample_rate_hz: f64,
    bandwidth_hz: f64,
    delta_tau: usize,
    strict_pow2: bool,
    // derived
    m: usize,
}

impl SystemConfig {
    /// Reference configuration: N = 256, c1' = 8, i = 1, CP = N/4, 4-QAM,
    /// alpha = 1, P_FA = 1e-3, pilot at 21.1 dB and an SNR of 25 dB.
    pub fn table1() -> Self {
        Self::from_map(&Self::table1_map()).expect("reference configuration is valid")
    }

    pub fn table1_map() -> ParamMap {
        let mut m = ParamMap::new();
        m.set("n", 256)
            .set("c1_prime", 8)
            .set("pilot_index", 1)
            .set("cp_len", 64)
            .set("mod_order", 4)
            .set("alpha", 1.0)
            .set("p_fa_target", 1e-3)
            .set("p_pilot_db", 21.1)
            .set("snr_db", 25.0);
        m
    }

    /// Validates a raw map and freezes it into a configuration.
    pub fn from_map(raw: &ParamMap) -> Result<Self> {
        let n: usize = raw.require("n")?;
        let c1_prime: usize = raw.require("c1_prime")?;
        let pilot_index: usize = raw.require("pilot_index")?;
        let cp_len: usize = raw.require("cp_len")?;
        let mod_order: usize = raw.require("mod_order")?;
        let alpha: f64 = raw.require("alpha")?;
        let p_fa_target: f64 = raw.require("p_fa_target")?;
        let c2: f64 = raw.get_or("c2", 0.0)?;
        let p_pilot_db: f64 = raw.get_or("p_pilot_db", 21.1)?;
        let p_data_db: f64 = raw.get_or("p_data_db", 0.0)?;
        let sample_rate_hz: f64 = raw.get_or("sample_rate_hz", DEFAULT_SAMPLE_RATE_HZ)?;
        let bandwidth_hz: f64 =
            raw.get_or("bandwidth_hz", n as f64 * DEFAULT_SUBCARRIER_SPACING_HZ)?;
        let delta_tau: usize = raw.get_or("delta_tau", 1)?;
        let strict_pow2: bool = raw.get_or("strict_pow2", false)?;

        let noise_var = match (raw.get::<f64>("noise_var")?, raw.get::<f64>("snr_db")?) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("noise_var", "give either noise_var or snr_db, not both"))
            }
            (Some(v), None) => v,
            (None, Some(snr)) => db_to_lin(p_data_db - snr),
            (None, None) => return Err(Error::MissingKey("noise_var".into())),
        };

        if n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        if c1_prime == 0 || !c1_prime.is_multiple_of(2) {
            return Err(Error::invalid("c1_prime", "must be even"));
        }
        if !n.is_multiple_of(c1_prime) {
            return Err(Error::invalid("n", "not a multiple of c1_prime"));
        }
        let m = n / c1_prime;
        if strict_pow2 && !(c1_prime.is_power_of_two() && m.is_power_of_two()) {
            return Err(Error::invalid("c1_prime", "strict mode needs c1_prime and N/c1_prime to be powers of two"));
        }
        if pilot_index >= n {
            return Err(Error::invalid("pilot_index", "must be below n"));
        }
        if cp_len == 0 || cp_len >= n {
            return Err(Error::invalid("cp_len", "must satisfy 0 < cp_len < n"));
        }
        if !(mod_order >= 4 && is_power_of_four(mod_order)) {
            return Err(Error::invalid("mod_order", "square QAM needs a power of four"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", "must lie in [0, 1]"));
        }
        if !(p_fa_target > 0.0 && p_fa_target < 1.0) {
            return Err(Error::invalid("p_fa_target", "must lie in (0, 1)"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid("noise_var", "must be positive and finite"));
        }
        for (name, v) in [("c2", c2), ("p_pilot_db", p_pilot_db), ("p_data_db", p_data_db)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("sample_rate_hz", sample_rate_hz), ("bandwidth_hz", bandwidth_hz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if delta_tau == 0 {
            return Err(Error::invalid("delta_tau", "must be at least one sample"));
        }

        Ok(Self {
            n,
            c1_prime,
            c2,
            pilot_index,
            cp_len,
            mod_order,
            p_pilot_db,
            p_data_db,
            alpha,
            p_fa_target,
            noise_var,
            sample_rate_hz,
            bandwidth_hz,
            delta_tau,
            strict_pow2,
            m,
        })
    }

    /// Serializes every field (never `snr_db`, so the round trip is exact).
    pub fn to_map(&self) -> ParamMap {
        let mut m = ParamMap::new();
        m.set("n", self.n)
            .set("c1_prime", self.c1_prime)
            .set("c2", self.c2)
            .set("pilot_index", self.pilot_index)
            .set("cp_len", self.cp_len)
            .set("mod_order", self.mod_order)
            .set("p_pilot_db", self.p_pilot_db)
            .set("p_data_db", self.p_data_db)
            .set("alpha", self.alpha)
            .set("p_fa_target", self.p_fa_target)
            .set("noise_var", self.noise_var)
            .set("sample_rate_hz", self.sample_rate_hz)
            .set("bandwidth_hz", self.bandwidth_hz)
            .set("delta_tau", self.delta_tau)
            .set("strict_pow2", self.strict_pow2);
        m
    }

    pub fn to_text(&self) -> String {
        self.to_map().to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&ParamMap::parse(text)?)
    }

    /// Returns a copy with some keys overridden, re-validated.
    pub fn with(&self, overrides: &[(&str, f64)]) -> Result<Self> {
        let mut map = self.to_map();
        let default_bw = self.bandwidth_hz == self.n as f64 * DEFAULT_SUBCARRIER_SPACING_HZ;
        if default_bw && overrides.iter().any(|(k, _)| *k == "n") {
            map.0.remove("bandwidth_hz");
        }
        for (k, v) in overrides {
            if *k == "snr_db" {
                map.0.remove("noise_var");
            }
            if *k == "noise_var" {
                map.0.remove("snr_db");
            }
            if matches!(*k, "n" | "c1_prime" | "pilot_index" | "cp_len" | "mod_order" | "delta_tau") {
                map.set(k, v.round() as i64);
            } else {
                map.set(k, v);
            }
        }
        Self::from_map(&map)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn c1_prime(&self) -> usize {
        self.c1_prime
    }
    /// Chirp length `M = N / c1'`, also the number of pilot-carrying bins.
    pub fn m(&self) -> usize {
        self.m
    }
    /// Number of identical chirp segments in one block (`c1'`).
    pub fn chirp_repetitions(&self) -> usize {
        self.c1_prime
    }
    /// Nearest `f64` to `c1' / 2N`; see [`Self::c1_ratio`] for the exact value.
    pub fn c1(&self) -> f64 {
        self.c1_prime as f64 / (2.0 * self.n as f64)
    }
    /// `c1` as the exact fraction `(c1', 2N)`.
    pub fn c1_ratio(&self) -> (usize, usize) {
        (self.c1_prime, 2 * self.n)
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn pilot_index(&self) -> usize {
        self.pilot_index
    }
    pub fn cp_len(&self) -> usize {
        self.cp_len
    }
    pub fn mod_order(&self) -> usize {
        self.mod_order
    }
    pub fn p_pilot_db(&self) -> f64 {
        self.p_pilot_db
    }
    pub fn p_data_db(&self) -> f64 {
        self.p_data_db
    }
    pub fn p_pilot(&self) -> f64 {
        db_to_lin(self.p_pilot_db)
    }
    pub fn p_data(&self) -> f64 {
        db_to_lin(self.p_data_db)
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p_fa_target(&self) -> f64 {
        self.p_fa_target
    }
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
    /// `10 log10(P_data / sigma^2)`.
    pub fn snr_db(&self) -> f64 {
        self.p_data_db - lin_to_db(self.noise_var)
    }
    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }
    pub fn delta_tau(&self) -> usize {
        self.delta_tau
    }
    pub fn strict_pow2(&self) -> bool {
        self.strict_pow2
    }
}

/// Discrete chirp rate in cycles per sample^2.
///
/// The quadratic phase `c1 n^2` has instantaneous frequency `2 c1 n`, so the
/// frequency advances by `2 c1 = c1' / N` cycles per sample.
pub fn derived_chirp_rate(cfg: &SystemConfig) -> f64 {
    2.0 * cfg.c1()
}

/// Chirp rate in Hz/s at the configured sample rate.
pub fn derived_chirp_rate_hz_per_s(cfg: &SystemConfig) -> f64 {
    derived_chirp_rate(cfg) * cfg.sample_rate_hz() * cfg.sample_rate_hz()
}

pub fn validate_config(raw: &ParamMap) -> Result<SystemConfig> {
    SystemConfig::from_map(raw)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn is_power_of_four(x: usize) -> bool {
    x.is_power_of_two() && x.trailing_zeros().is_multiple_of(2)
}

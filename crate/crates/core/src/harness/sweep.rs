//! Parameter sweeps and their CSV output.
//!
//! A sweep file uses the configuration grammar:
//!
//! ```text
//! trials = 10000
//! seed = 7                       # optional, the CLI may override it
//! sweep.snr_db = 0, 5, 10        # one axis per `sweep.` key
//! sweep.alpha = 0.25, 1
//! z = 3                          # any other key overrides the base
//! ```
//!
//! Points enumerate the Cartesian product of the axes, the first axis (in
//! key order) varying slowest.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{ParamMap, SystemConfig, SYSTEM_KEYS};

use super::point::{run_point, PointResult, LAST_METRIC};
use super::scenario::{is_known_key, Scenario};
use super::trial::PointContext;

/// Column header of every results file.
pub const CSV_HEADER: &str =
    "point_id,param_name,param_value,snr_db,alpha,p_pilot_db,n,z,metric,value,ci99,trials,seed";

/// A grid of operating points.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// System and scenario keys shared by every point.
    pub base: ParamMap,
    pub axes: Vec<(String, Vec<f64>)>,
    pub trials: usize,
    pub seed: u64,
}

/// One resolved grid point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub id: u64,
    pub overrides: Vec<(String, f64)>,
    pub cfg: SystemConfig,
    pub scenario: Scenario,
}

impl SweepPoint {
    pub fn param_name(&self) -> String {
        if self.overrides.is_empty() {
            return "none".into();
        }
        self.overrides.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(";")
    }

    pub fn param_value(&self) -> String {
        self.overrides.iter().map(|(_, v)| v.to_string()).collect::<Vec<_>>().join(";")
    }
}

fn check_keys(map: &ParamMap, what: &str) -> Result<()> {
    for k in map.keys() {
        if !is_known_key(k) {
            return Err(Error::invalid(k, format!("unknown {what} key")));
        }
    }
    Ok(())
}

fn overlay(base: &mut ParamMap, key: &str, value: &str) {
    match key {
        "snr_db" => {
            base.remove("noise_var");
        }
        "noise_var" => {
            base.remove("snr_db");
        }
        _ => {}
    }
    base.set(key, value);
}

impl SweepSpec {
    /// Builds a spec from a configuration file body and a sweep file body.
    /// Keys missing from the configuration take their reference values.
    pub fn parse(config_text: &str, sweep_text: &str) -> Result<Self> {
        let config = ParamMap::parse(config_text)?;
        check_keys(&config, "configuration")?;
        let mut base = SystemConfig::table1_map();
        for k in config.keys() {
            overlay(&mut base, k, config.raw(k).unwrap_or_default());
        }
        let sweep = ParamMap::parse(sweep_text)?;
        let trials: usize = sweep.require("trials")?;
        let seed: u64 = sweep.get_or("seed", 0)?;
        let mut axes = Vec::new();
        for k in sweep.keys() {
            let v = sweep.raw(k).unwrap_or_default();
            if let Some(name) = k.strip_prefix("sweep.") {
                if !is_known_key(name) {
                    return Err(Error::invalid(k, "unknown swept key"));
                }
                let values = v
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::invalid(k, format!("cannot parse `{}`", x.trim())))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if values.is_empty() {
                    return Err(Error::invalid(k, "empty value list"));
                }
                axes.push((name.to_string(), values));
            } else if k != "trials" && k != "seed" {
                if !is_known_key(k) {
                    return Err(Error::invalid(k, "unknown sweep key"));
                }
                overlay(&mut base, k, v);
            }
        }
        let spec = Self { base, axes, trials, seed };
        spec.points()?;
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves every grid point, validating it.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let total = self.len();
        let mut out = Vec::with_capacity(total);
        for id in 0..total {
            let mut rem = id;
            let mut overrides = Vec::with_capacity(self.axes.len());
            for (name, values) in self.axes.iter().rev() {
                overrides.push((name.clone(), values[rem % values.len()]));
                rem /= values.len();
            }
            overrides.reverse();
            out.push(self.resolve(id as u64, overrides)?);
        }
        Ok(out)
    }

    fn resolve(&self, id: u64, overrides: Vec<(String, f64)>) -> Result<SweepPoint> {
        let mut map = self.base.clone();
        let swept = |k: &str| overrides.iter().any(|(n, _)| n == k);
        if let Some((_, n)) = overrides.iter().find(|(k, _)| k == "n") {
            // keep the prefix ratio and the default bandwidth tied to N
            let base_n: f64 = self.base.require("n")?;
            let base_cp: f64 = self.base.require("cp_len")?;
            if !swept("cp_len") {
                map.set("cp_len", (base_cp * n / base_n).round() as i64);
            }
            if !swept("bandwidth_hz") && !self.base.contains("bandwidth_hz") {
                map.remove("bandwidth_hz");
            }
        }
        for (k, v) in &overrides {
            let text = if matches!(k.as_str(), "n" | "c1_prime" | "pilot_index" | "cp_len" | "mod_order" | "delta_tau") {
                (v.round() as i64).to_string()
            } else {
                v.to_string()
            };
            overlay(&mut map, k, &text);
        }
        let mut sys = ParamMap::new();
        for k in map.keys().filter(|k| SYSTEM_KEYS.contains(k)) {
            sys.set(k, map.raw(k).unwrap_or_default());
        }
        let cfg = SystemConfig::from_map(&sys)?;
        let mut scenario = Scenario::default();
        scenario.apply_map(&map)?;
        Ok(SweepPoint {
            id,
            overrides,
            cfg,
            scenario,
        })
    }
}

/// CSV rows of one point, each terminated by a newline.
pub fn format_rows(point: &SweepPoint, result: &PointResult, seed: u64) -> String {
    let cfg = &point.cfg;
    let mut eff = cfg.clone();
    if let Ok(resolved) = point.scenario.resolve(cfg) {
        eff = resolved;
    }
    let mut out = String::new();
    for m in &result.metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            point.id,
            point.param_name(),
            point.param_value(),
            eff.snr_db(),
            eff.alpha(),
            eff.p_pilot_db(),
            eff.n(),
            result.z,
            m.name,
            m.value,
            m.ci99,
            result.trials,
            seed
        );
    }
    out
}

/// Outcome of [`run_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSummary {
    pub points_run: usize,
    pub points_skipped: usize,
}

/// Completed points of an existing results file. Rows of an unfinished
/// trailing point are dropped. Fails when the header differs or when a
/// completed point disagrees with `points`.
fn existing_points(path: &Path, points: &[SweepPoint], spec: &SweepSpec) -> Result<(Vec<u64>, String)> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        None => return Ok((Vec::new(), String::new())),
        Some(h) => h?,
    };
    if header != CSV_HEADER {
        return Err(Error::ResumeMismatch(format!("unexpected header `{header}`")));
    }
    let mut done = Vec::new();
    let mut kept = String::new();
    let mut pending = String::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            // torn final write
            break;
        }
        let id: u64 = f[0]
            .parse()
            .map_err(|_| Error::ResumeMismatch(format!("bad point id `{}`", f[0])))?;
        let p = points
            .get(id as usize)
            .ok_or_else(|| Error::ResumeMismatch(format!("point {id} is not part of this sweep")))?;
        if f[1] != p.param_name()
            || f[2] != p.param_value()
            || f[11] != spec.trials.to_string()
            || f[12] != spec.seed.to_string()
        {
            return Err(Error::ResumeMismatch(format!("point {id} was produced by a different sweep")));
        }
        pending.push_str(&line);
        pending.push('\n');
        if f[8] == LAST_METRIC {
            done.push(id);
            kept.push_str(&pending);
            pending.clear();
        }
    }
    Ok((done, kept))
}

/// Runs every point of `spec` not already present in `out`, appending each
/// point's rows with a single flushed write.
pub fn run_sweep(spec: &SweepSpec, out: &Path, workers: usize) -> Result<SweepSummary> {
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let (done, kept) = if out.exists() {
        existing_points(out, &points, spec)?
    } else {
        (Vec::new(), String::new())
    };
    // rewrite so that a torn trailing point disappears
    let mut file = File::create(out)?;
    file.write_all(format!("{CSV_HEADER}\n{kept}").as_bytes())?;
    file.flush()?;
    drop(file);
    let mut file = OpenOptions::new().append(true).open(out)?;
    let mut summary = SweepSummary {
        points_run: 0,
        points_skipped: 0,
    };
    for p in &points {
        if done.contains(&p.id) {
            summary.points_skipped += 1;
            continue;
        }
        let ctx = PointContext::new(&p.cfg, &p.scenario)?;
        let result = run_point(&ctx, spec.trials, spec.seed, p.id, Some(&pool))?;
        file.write_all(format_rows(p, &result, spec.seed).as_bytes())?;
        file.flush()?;
        summary.points_run += 1;
    }
    Ok(summary)
}

//! INI-style run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! nx = 16
//! ny = 16
//! nz = 16
//! ```
//!
//! Sections: `[grid] [physics] [time] [noise] [output] [initial] [monitors]`.
//! All problems are collected in one pass and reported with line numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ebm::TransportVariant;
use crate::monitors::MmsLadder;
use crate::error::Result;
use crate::timestep::{InitialCondition, RunConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line, `None` for missing keys.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "ny", "nz"]),
    (
        "physics",
        &["beta1", "beta2", "rho_ref", "q0", "q1", "transport", "radiation", "frozen_velocity"],
    ),
    ("time", &["dt", "t_end"]),
    ("noise", &["sigma", "decay", "seed"]),
    ("output", &["cadence", "snapshot_every"]),
    (
        "initial",
        &[
            "kind",
            "value",
            "k1",
            "k2",
            "amplitude",
            "mean",
            "seed",
            "decay",
            "temp_amplitude",
            "velocity_amplitude",
        ],
    ),
    ("monitors", &["enabled", "c_led", "energy_tol", "h1_factor", "h1_rate"]),
    ("mms", &["kind", "nz", "dt"]),
];

struct Entries {
    values: BTreeMap<(String, String), (String, usize)>,
    errors: Vec<ConfigError>,
}

impl Entries {
    fn err(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(|v| v.1)
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, what: &str) -> Option<T> {
        let (raw, line) = self.values.get(&(section.to_string(), key.to_string()))?.clone();
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(Some(line), format!("[{section}] {key}: expected {what}, got '{raw}'"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.get::<f64>(section, key, "a number").unwrap_or(default)
    }

    fn uint(&mut self, section: &str, key: &str, default: u64) -> u64 {
        self.get::<u64>(section, key, "a nonnegative integer").unwrap_or(default)
    }

    fn int(&mut self, section: &str, key: &str, default: i64) -> i64 {
        self.get::<i64>(section, key, "an integer").unwrap_or(default)
    }

    fn boolean(&mut self, section: &str, key: &str, default: bool) -> bool {
        self.get::<bool>(section, key, "true or false").unwrap_or(default)
    }
}

fn tokenize(text: &str) -> Entries {
    let mut entries = Entries {
        values: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if KEYS.iter().any(|(s, _)| *s == name.trim()) => {
                    section = Some(name.trim().to_string());
                }
                Some(name) => {
                    entries.err(Some(line_no), format!("unknown section [{}]", name.trim()));
                    section = None;
                }
                None => entries.err(Some(line_no), format!("malformed section header '{line}'")),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            entries.err(Some(line_no), format!("expected key = value, got '{line}'"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let Some(sec) = &section else {
            entries.err(Some(line_no), format!("key '{key}' outside of a known section"));
            continue;
        };
        let known = KEYS
            .iter()
            .find(|(s, _)| s == sec)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            entries.err(Some(line_no), format!("unknown key '{key}' in [{sec}]"));
            continue;
        }
        let slot = (sec.clone(), key.to_string());
        if let Some((_, first)) = entries.values.get(&slot) {
            let first = *first;
            entries.err(Some(line_no), format!("duplicate key '{key}' in [{sec}] (first on line {first})"));
            continue;
        }
        entries.values.insert(slot, (value.to_string(), line_no));
    }
    entries
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut e = tokenize(text);

    let mut dims = [0usize; 3];
    for (idx, key) in ["nx", "ny", "nz"].into_iter().enumerate() {
        let line = e.line("grid", key);
        match e.get::<usize>("grid", key, "a positive integer") {
            Some(n) => {
                dims[idx] = n;
                if key == "nz" && n < 4 {
                    e.err(line, format!("[grid] nz must be at least 4 (got {n})"));
                } else if key != "nz" && (n < 4 || n % 2 != 0) {
                    e.err(line, format!("[grid] {key} must be even and at least 4 (got {n})"));
                }
            }
            None if line.is_none() => e.err(None, format!("missing required key [grid] {key}")),
            None => {}
        }
    }
    let mut c = RunConfig::new(dims[0], dims[1], dims[2]);

    let p = &mut c.physics;
    p.beta1 = e.float("physics", "beta1", p.beta1);
    p.beta2 = e.float("physics", "beta2", p.beta2);
    p.rho_ref = e.float("physics", "rho_ref", p.rho_ref);
    p.q0 = e.float("physics", "q0", p.q0);
    p.q1 = e.float("physics", "q1", p.q1);
    if let Some((raw, line)) = e.values.get(&("physics".into(), "transport".into())).cloned() {
        match raw.parse::<TransportVariant>() {
            Ok(t) => p.transport = t,
            Err(msg) => e.err(Some(line), format!("[physics] transport: {msg}")),
        }
    }
    p.radiation_on = e.boolean("physics", "radiation", p.radiation_on);
    p.frozen_velocity = e.boolean("physics", "frozen_velocity", p.frozen_velocity);
    if !(p.beta1 > 0.0 && p.beta1 < p.beta2) {
        let l = e.line("physics", "beta1").or(e.line("physics", "beta2"));
        e.err(
            l,
            format!(
                "co-albedo bounds must satisfy 0<β₁<β₂ (got β₁={}, β₂={})",
                p.beta1, p.beta2
            ),
        );
    }
    if !(p.q0 >= 0.0) || !p.q0.is_finite() {
        let l = e.line("physics", "q0");
        e.err(l, format!("[physics] q0 must be nonnegative (got {})", p.q0));
    }
    if !(p.q1.abs() < 1.0) {
        let l = e.line("physics", "q1");
        e.err(l, format!("[physics] |q1| must be below 1 to keep Q positive (got {})", p.q1));
    }

    c.dt = e.float("time", "dt", c.dt);
    c.t_end = e.float("time", "t_end", c.t_end);
    if !(c.dt > 0.0) || !c.dt.is_finite() {
        let l = e.line("time", "dt");
        e.err(l, format!("[time] dt must be positive (got {})", c.dt));
    } else if !(c.t_end >= 0.0) || (c.t_end > 0.0 && c.t_end < c.dt * (1.0 - 1e-12)) {
        let l = e.line("time", "t_end");
        e.err(l, format!("[time] t_end must be 0 or at least dt (got {})", c.t_end));
    }

    c.noise.sigma = e.float("noise", "sigma", c.noise.sigma);
    c.noise.decay = e.float("noise", "decay", c.noise.decay);
    c.noise.seed = e.uint("noise", "seed", c.noise.seed);
    if !(c.noise.sigma >= 0.0) || !c.noise.sigma.is_finite() {
        let l = e.line("noise", "sigma");
        e.err(l, format!("[noise] sigma must be nonnegative (got {})", c.noise.sigma));
    }
    if !(c.noise.decay >= 2.0) {
        let l = e.line("noise", "decay");
        e.err(l, format!("[noise] decay must be at least 2 (got {})", c.noise.decay));
    }
    if c.noise.sigma > 0.0 && c.physics.transport == TransportVariant::SurfaceTrace {
        let l = e.line("physics", "transport").or(e.line("noise", "sigma"));
        e.err(
            l,
            "noise with sigma > 0 requires transport = vertical_average (surface_trace is deterministic only)",
        );
    }

    c.output.cadence = e.uint("output", "cadence", c.output.cadence);
    c.output.snapshot_every = e.uint("output", "snapshot_every", c.output.snapshot_every);
    if c.output.cadence == 0 {
        let l = e.line("output", "cadence");
        e.err(l, "[output] cadence must be at least 1");
    }

    let kind_line = e.line("initial", "kind");
    let kind: String = e.get("initial", "kind", "a name").unwrap_or_else(|| "zero".into());
    c.initial = match kind.as_str() {
        "zero" => InitialCondition::Zero,
        "uniform" => InitialCondition::Uniform {
            value: e.float("initial", "value", 0.0),
        },
        "single_mode" => InitialCondition::SingleMode {
            k1: e.int("initial", "k1", 1),
            k2: e.int("initial", "k2", 0),
            amplitude: e.float("initial", "amplitude", 0.5),
            mean: e.float("initial", "mean", 0.0),
        },
        "random_smooth" => {
            let decay = e.float("initial", "decay", 2.0);
            let temp_amplitude = e.float("initial", "temp_amplitude", 0.5);
            let velocity_amplitude = e.float("initial", "velocity_amplitude", 0.5);
            if !(decay > 0.0) || !(temp_amplitude >= 0.0) || !(velocity_amplitude >= 0.0) {
                e.err(kind_line, "[initial] random_smooth needs decay > 0 and nonnegative amplitudes");
            }
            InitialCondition::RandomSmooth {
                seed: e.uint("initial", "seed", 0),
                decay,
                temp_amplitude,
                velocity_amplitude,
            }
        }
        other => {
            e.err(
                kind_line,
                format!("[initial] unknown kind '{other}' (expected zero, uniform, single_mode, random_smooth)"),
            );
            InitialCondition::Zero
        }
    };

    let m = &mut c.monitors;
    m.enabled = e.boolean("monitors", "enabled", m.enabled);
    m.c_led = e.float("monitors", "c_led", m.c_led);
    m.energy_tol = e.float("monitors", "energy_tol", m.energy_tol);
    m.h1_factor = e.float("monitors", "h1_factor", m.h1_factor);
    m.h1_rate = e.float("monitors", "h1_rate", m.h1_rate);
    if !(m.c_led >= 0.0) || !(m.energy_tol >= 0.0) || !(m.h1_factor > 0.0) || !(m.h1_rate >= 0.0) {
        let l = e.line("monitors", "c_led");
        e.err(l, "[monitors] constants must be nonnegative (h1_factor positive)");
    }

    if e.errors.is_empty() {
        Ok(c)
    } else {
        e.errors.sort_by_key(|x| x.line.unwrap_or(usize::MAX));
        Err(ConfigErrors(e.errors).into())
    }
}

fn list<T: FromStr>(e: &mut Entries, key: &str) -> Option<Vec<T>> {
    let (raw, line) = e.values.get(&("mms".to_string(), key.to_string()))?.clone();
    let parsed: std::result::Result<Vec<T>, _> = raw.split(',').map(|t| t.trim().parse::<T>()).collect();
    match parsed {
        Ok(v) if v.len() >= 2 => Some(v),
        _ => {
            e.err(Some(line), format!("[mms] {key}: expected a comma-separated list of at least two values, got '{raw}'"));
            None
        }
    }
}

/// Convergence ladder from the `[mms]` section. `kind = spatial` reads an
/// `nz` list and uses `[time] dt, t_end`; `kind = temporal` reads a `dt`
/// list and uses `[grid] nz`.
pub fn parse_mms_ladder(text: &str) -> Result<MmsLadder> {
    let base = parse_config(text)?;
    let mut e = tokenize(text);
    let kind_line = e.line("mms", "kind");
    let kind: Option<String> = e.get("mms", "kind", "spatial or temporal");
    let ladder = match kind.as_deref() {
        Some("spatial") => list::<usize>(&mut e, "nz").map(|nz| {
            if nz.iter().any(|&n| n < 4) {
                e.err(e.line("mms", "nz"), "[mms] nz values must be at least 4");
            }
            MmsLadder::Spatial {
                nx: base.nx,
                ny: base.ny,
                nz,
                dt: base.dt,
                t_end: base.t_end,
            }
        }),
        Some("temporal") => list::<f64>(&mut e, "dt").map(|dt| {
            if dt.iter().any(|&d| !(d > 0.0) || d > base.t_end) {
                e.err(e.line("mms", "dt"), "[mms] dt values must be positive and at most t_end");
            }
            MmsLadder::Temporal {
                nx: base.nx,
                ny: base.ny,
                nz: base.nz,
                dt,
                t_end: base.t_end,
            }
        }),
        Some(other) => {
            e.err(kind_line, format!("[mms] unknown kind '{other}' (expected spatial or temporal)"));
            None
        }
        None => {
            e.err(None, "missing required key [mms] kind");
            None
        }
    };
    match ladder {
        Some(l) if e.errors.is_empty() => Ok(l),
        _ => {
            if e.errors.is_empty() {
                let key = if kind.as_deref() == Some("spatial") { "nz" } else { "dt" };
                e.err(None, format!("missing required key [mms] {key}"));
            }
            Err(ConfigErrors(e.errors).into())
        }
    }
}

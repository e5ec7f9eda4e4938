//! Key-value sweep configuration.
//!
//! Format: one `key = value` pair per line, `#` starts a comment. Sweep axes
//! are declared as `sweep = <var> <lin|log> <start> <stop> <count>`; several
//! sweep lines form a cartesian product. Sweepable variables: beta, delta,
//! eta_c, L_tot, tau_e, tau_n. Everything else is fixed, with the nominal
//! defaults filled in for omitted keys. `L_tot` and `eta_c` must be given
//! (fixed or swept).

use std::fmt;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use nvqr::protocols::{Decoder, Engine, SystemParams};
use nvqr::timing::{AttemptsPolicy, Protocol};

/// A configuration problem with its source position.
#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: key `{}`: {}", self.line, self.key, self.message)
        } else {
            write!(f, "config: key `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.to_string(), message: message.into() }
}

/// Variables that may be swept.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SweepVar {
    Beta,
    Delta,
    EtaC,
    LTot,
    TauE,
    TauN,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Beta => "beta",
            SweepVar::Delta => "delta",
            SweepVar::EtaC => "eta_c",
            SweepVar::LTot => "L_tot",
            SweepVar::TauE => "tau_e",
            SweepVar::TauN => "tau_n",
        }
    }

    fn parse(s: &str) -> Option<SweepVar> {
        match s {
            "beta" => Some(SweepVar::Beta),
            "delta" => Some(SweepVar::Delta),
            "eta_c" => Some(SweepVar::EtaC),
            "L_tot" | "l_tot" => Some(SweepVar::LTot),
            "tau_e" => Some(SweepVar::TauE),
            "tau_n" => Some(SweepVar::TauN),
            _ => None,
        }
    }

    /// Write the value into a parameter bundle.
    pub fn apply(self, params: &mut SystemParams<f64>, value: f64) {
        match self {
            SweepVar::Beta => params.beta = value,
            SweepVar::Delta => params.delta = value,
            SweepVar::EtaC => params.link.eta_c = value,
            SweepVar::LTot => params.link.l_tot = value,
            SweepVar::TauE => params.decoherence.tau_e = value,
            SweepVar::TauN => params.decoherence.tau_n = value,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepAxis {
    pub var: SweepVar,
    pub grid: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A validated sweep: the grid, fixed parameters, run configuration and
/// output destination.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub base: SystemParams<f64>,
    pub protocols: Vec<Protocol>,
    pub engine: Engine,
    pub decoder: Decoder,
    pub samples: u64,
    pub seed: u64,
    pub n_range: RangeInclusive<u32>,
    pub attempts: AttemptsPolicy,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl SweepSpec {
    /// Cartesian product of the sweep axes (row-major, last axis fastest).
    /// A sweep with no axes is the single base point.
    pub fn grid_points(&self) -> Vec<Vec<(SweepVar, f64)>> {
        let mut points: Vec<Vec<(SweepVar, f64)>> = vec![Vec::new()];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(points.len() * axis.grid.len());
            for p in &points {
                for &v in &axis.grid {
                    let mut p = p.clone();
                    p.push((axis.var, v));
                    next.push(p);
                }
            }
            points = next;
        }
        points
    }

    pub fn params_at(&self, point: &[(SweepVar, f64)]) -> SystemParams<f64> {
        let mut params = self.base;
        for &(var, value) in point {
            var.apply(&mut params, value);
        }
        params
    }
}

fn parse_float(line: usize, key: &str, s: &str) -> Result<f64, ConfigError> {
    s.trim().parse::<f64>().map_err(|_| err(line, key, format!("`{s}` is not a number")))
}

fn parse_grid(line: usize, rest: &[&str]) -> Result<SweepAxis, ConfigError> {
    if rest.len() != 5 {
        return Err(err(line, "sweep", "expected `sweep = <var> <lin|log> <start> <stop> <count>`"));
    }
    let var = SweepVar::parse(rest[0])
        .ok_or_else(|| err(line, "sweep", format!("unknown sweep variable `{}`", rest[0])))?;
    let scale = rest[1];
    let start = parse_float(line, "sweep", rest[2])?;
    let stop = parse_float(line, "sweep", rest[3])?;
    let count: usize = rest[4]
        .parse()
        .map_err(|_| err(line, "sweep", format!("`{}` is not a count", rest[4])))?;
    if count == 0 {
        return Err(err(line, "sweep", "grid must have at least one point"));
    }
    let grid = match scale {
        "lin" | "linear" => {
            if count == 1 {
                vec![start]
            } else {
                (0..count)
                    .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                    .collect()
            }
        }
        "log" => {
            if start <= 0.0 || stop <= 0.0 {
                return Err(err(line, "sweep", "log grids require positive endpoints"));
            }
            if count == 1 {
                vec![start]
            } else {
                let (ls, le) = (start.ln(), stop.ln());
                (0..count)
                    .map(|i| (ls + (le - ls) * i as f64 / (count - 1) as f64).exp())
                    .collect()
            }
        }
        other => return Err(err(line, "sweep", format!("unknown grid scale `{other}`"))),
    };
    Ok(SweepAxis { var, grid })
}

/// Parse and validate the documented key-value format.
pub fn parse_config(text: &str) -> Result<SweepSpec, ConfigError> {
    // Nominal defaults; L_tot and eta_c are placeholders until seen.
    let mut base = SystemParams::nominal(1.0, 0.5);
    let mut saw_l_tot = false;
    let mut saw_eta_c = false;
    let mut axes: Vec<SweepAxis> = Vec::new();
    let mut protocols: Vec<Protocol> = Protocol::ALL.to_vec();
    let mut engine = Engine::Dense;
    let mut decoder = Decoder::BestOfBoth;
    let mut samples: u64 = 10_000;
    let mut seed: u64 = 1;
    let mut n_min: u32 = 1;
    let mut n_max: u32 = 6;
    let mut attempts = AttemptsPolicy::default();
    let mut format = OutputFormat::Csv;
    let mut out: Option<PathBuf> = None;
    let mut workers: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, content, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "sweep" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let axis = parse_grid(line, &parts)?;
                if axes.iter().any(|a| a.var == axis.var) {
                    return Err(err(line, "sweep", format!("`{}` swept twice", axis.var.name())));
                }
                match axis.var {
                    SweepVar::LTot => saw_l_tot = true,
                    SweepVar::EtaC => saw_eta_c = true,
                    _ => {}
                }
                axes.push(axis);
            }
            "beta" => base.beta = parse_float(line, key, value)?,
            "delta" => base.delta = parse_float(line, key, value)?,
            "eta_c" => {
                base.link.eta_c = parse_float(line, key, value)?;
                saw_eta_c = true;
            }
            "eta_d" => base.link.eta_d = parse_float(line, key, value)?,
            "L_tot" | "l_tot" => {
                base.link.l_tot = parse_float(line, key, value)?;
                saw_l_tot = true;
            }
            "L_att" | "l_att" => base.link.l_att = parse_float(line, key, value)?,
            "c" => base.link.c = parse_float(line, key, value)?,
            "T_s" | "t_s" => base.link.t_s = parse_float(line, key, value)?,
            "tau_e" => base.decoherence.tau_e = parse_float(line, key, value)?,
            "tau_n" => base.decoherence.tau_n = parse_float(line, key, value)?,
            "protocols" | "protocol" => {
                let list: Result<Vec<Protocol>, ConfigError> = value
                    .split(',')
                    .map(|s| {
                        Protocol::parse(s)
                            .ok_or_else(|| err(line, key, format!("unknown protocol `{s}`")))
                    })
                    .collect();
                protocols = list?;
                if protocols.is_empty() {
                    return Err(err(line, key, "empty protocol list"));
                }
            }
            "engine" => {
                engine = Engine::parse(value)
                    .ok_or_else(|| err(line, key, format!("unknown engine `{value}`")))?;
            }
            "decoder" => {
                decoder = Decoder::parse(value)
                    .ok_or_else(|| err(line, key, format!("unknown decoder `{value}`")))?;
            }
            "samples" => {
                samples = value
                    .parse()
                    .map_err(|_| err(line, key, format!("`{value}` is not a count")))?;
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| err(line, key, format!("`{value}` is not a seed")))?;
            }
            "n_min" => {
                n_min = value
                    .parse()
                    .map_err(|_| err(line, key, format!("`{value}` is not a nesting level")))?;
            }
            "n_max" => {
                n_max = value
                    .parse()
                    .map_err(|_| err(line, key, format!("`{value}` is not a nesting level")))?;
            }
            "max_exact_attempts" => {
                attempts.max_exact_m = value
                    .parse()
                    .map_err(|_| err(line, key, format!("`{value}` is not a count")))?;
            }
            "workers" => {
                workers = Some(
                    value
                        .parse()
                        .map_err(|_| err(line, key, format!("`{value}` is not a count")))?,
                );
            }
            "format" => {
                format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => return Err(err(line, key, format!("unknown format `{other}`"))),
                };
            }
            "out" => out = Some(PathBuf::from(value)),
            other => return Err(err(line, other, "unknown key")),
        }
    }

    if !saw_l_tot {
        return Err(err(0, "L_tot", "required (fixed value or sweep axis)"));
    }
    if !saw_eta_c {
        return Err(err(0, "eta_c", "required (fixed value or sweep axis)"));
    }
    if n_min == 0 || n_min > n_max {
        return Err(err(0, "n_min", format!("invalid nesting range {n_min}..{n_max}")));
    }
    // Range checks on fixed values (swept values are validated per point).
    for (key, v, lo, hi) in [
        ("beta", base.beta, 0.0, 1.0),
        ("delta", base.delta, 0.0, 0.5),
        ("eta_c", base.link.eta_c, 0.0, 1.0),
        ("eta_d", base.link.eta_d, 0.0, 1.0),
    ] {
        if !(lo..=hi).contains(&v) {
            return Err(err(0, key, format!("{v} outside [{lo}, {hi}]")));
        }
    }
    for (key, v) in [
        ("L_tot", base.link.l_tot),
        ("L_att", base.link.l_att),
        ("c", base.link.c),
        ("T_s", base.link.t_s),
        ("tau_e", base.decoherence.tau_e),
        ("tau_n", base.decoherence.tau_n),
    ] {
        if v <= 0.0 {
            return Err(err(0, key, format!("{v} must be positive")));
        }
    }

    Ok(SweepSpec {
        axes,
        base,
        protocols,
        engine,
        decoder,
        samples,
        seed,
        n_range: n_min..=n_max,
        attempts,
        format,
        out,
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_nominal() {
        let spec = parse_config("L_tot = 100\neta_c = 0.3\n").unwrap();
        assert_eq!(spec.base.delta, 1e-4);
        assert_eq!(spec.base.decoherence.tau_e, 1e-2);
        assert_eq!(spec.base.decoherence.tau_n, 1.0);
        assert_eq!(spec.base.link.eta_d, 0.9);
        assert_eq!(spec.base.link.t_s, 1e-6);
        assert_eq!(spec.base.link.c, 2e5);
        assert_eq!(spec.base.link.l_att, 22.0);
        assert_eq!(spec.base.beta, 1e-3);
        assert_eq!(spec.protocols.len(), 4);
    }

    #[test]
    fn rejects_out_of_range_and_unknown() {
        let e = parse_config("L_tot = 100\neta_c = 1.5\n").unwrap_err();
        assert_eq!(e.key, "eta_c");
        let e = parse_config("L_tot = 100\neta_c = 0.3\nbogus = 1\n").unwrap_err();
        assert_eq!(e.key, "bogus");
        assert_eq!(e.line, 3);
        let e = parse_config("eta_c = 0.3\n").unwrap_err();
        assert_eq!(e.key, "L_tot");
    }

    #[test]
    fn log_grid_has_geometric_spacing() {
        let spec =
            parse_config("L_tot = 100\neta_c = 0.3\nsweep = beta log 1e-4 1e-1 16\n").unwrap();
        let grid = &spec.axes[0].grid;
        assert_eq!(grid.len(), 16);
        assert!((grid[0] - 1e-4).abs() < 1e-18);
        assert!((grid[15] - 1e-1).abs() < 1e-12);
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
        let e = parse_config("L_tot = 1\neta_c = 0.3\nsweep = beta log 0 1 4\n").unwrap_err();
        assert!(e.message.contains("positive"));
    }

    #[test]
    fn cartesian_product_of_axes() {
        let spec = parse_config(
            "eta_c = 0.3\nsweep = L_tot lin 100 300 3\nsweep = beta log 1e-4 1e-2 2\n",
        )
        .unwrap();
        let points = spec.grid_points();
        assert_eq!(points.len(), 6);
        // row-major: the last axis varies fastest
        let p = spec.params_at(&points[2]);
        assert!((p.link.l_tot - 200.0).abs() < 1e-12);
        assert!((p.beta - 1e-4).abs() < 1e-18);
        let p = spec.params_at(&points[3]);
        assert!((p.link.l_tot - 200.0).abs() < 1e-12);
        assert!((p.beta - 1e-2).abs() < 1e-14);
    }
}

//! Run configuration: a TOML file with `[protocol]`, `[grid]` and `[output]`
//! sections, every key overridable from the command line.

use std::path::{Path, PathBuf};

use clap::Args;
use kzwork::dynamics::{Method, Registry};
use kzwork::ising::{ChainSize, QuenchProtocol};
use serde::{Deserialize, Serialize, Serializer};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub protocol: ProtocolFile,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub output: OutputFile,
}

/// `beta = 2.0` or `beta = "inf"`; `N = 1000` or `N = "continuum"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumOrWord {
    Num(f64),
    Word(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub v: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub beta: Option<NumOrWord>,
    #[serde(rename = "N")]
    pub n: Option<NumOrWord>,
    pub method: Option<String>,
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub v_points: Option<usize>,
    pub v_log: Option<bool>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    pub u_points: Option<usize>,
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub w_points: Option<usize>,
    pub fit_min: Option<f64>,
    pub fit_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Flags shared by every subcommand; each one overrides the file value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda1: Option<f64>,
    /// Quench rate for single-rate commands
    #[arg(long, global = true)]
    pub v: Option<f64>,
    #[arg(long = "v-min", global = true)]
    pub v_min: Option<f64>,
    #[arg(long = "v-max", global = true)]
    pub v_max: Option<f64>,
    #[arg(long = "v-points", global = true)]
    pub v_points: Option<usize>,
    /// Log-spaced rate grid (default true)
    #[arg(long = "v-log", global = true, num_args = 0..=1, default_missing_value = "true")]
    pub v_log: Option<bool>,
    /// Chain length, or "continuum"
    #[arg(id = "chain_size", long = "N", global = true)]
    pub n: Option<String>,
    #[arg(long = "J", global = true)]
    pub j: Option<f64>,
    /// Inverse temperature, or "inf" for the ground state
    #[arg(long, global = true)]
    pub beta: Option<String>,
    /// ode, lz_full, lz_half or apt
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long = "n-max", global = true)]
    pub n_max: Option<usize>,
    #[arg(long = "u-min", global = true, allow_hyphen_values = true)]
    pub u_min: Option<f64>,
    #[arg(long = "u-max", global = true, allow_hyphen_values = true)]
    pub u_max: Option<f64>,
    #[arg(long = "u-points", global = true)]
    pub u_points: Option<usize>,
    #[arg(long = "w-min", global = true, allow_hyphen_values = true)]
    pub w_min: Option<f64>,
    #[arg(long = "w-max", global = true, allow_hyphen_values = true)]
    pub w_max: Option<f64>,
    #[arg(long = "w-points", global = true)]
    pub w_points: Option<usize>,
    /// Lower end of the fit window in v
    #[arg(long = "fit-min", global = true)]
    pub fit_min: Option<f64>,
    #[arg(long = "fit-max", global = true)]
    pub fit_max: Option<f64>,
    /// CSV table path (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// SVG plot path
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// JSON summary path
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
}

fn ser_beta<S: Serializer>(beta: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match beta {
        Some(b) => s.serialize_f64(*b),
        None => s.serialize_str("inf"),
    }
}

fn ser_size<S: Serializer>(size: &ChainSize, s: S) -> Result<S::Ok, S::Error> {
    match size {
        ChainSize::Finite(n) => s.serialize_u64(*n as u64),
        ChainSize::Continuum => s.serialize_str("continuum"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub lambda0: f64,
    pub lambda1: f64,
    pub v: Option<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(serialize_with = "ser_beta")]
    pub beta: Option<f64>,
    #[serde(rename = "N", serialize_with = "ser_size")]
    pub n: ChainSize,
    pub method: Method,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub v_points: Option<usize>,
    pub v_log: bool,
    pub u_min: f64,
    pub u_max: f64,
    pub u_points: usize,
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub w_points: usize,
    pub fit_min: f64,
    pub fit_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

/// Fully resolved and validated configuration; emitted with every result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub protocol: ProtocolConfig,
    pub grid: GridConfig,
    pub output: OutputConfig,
}

fn invalid(field: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {why}"))
}

fn parse_beta(field: &str, spec: &NumOrWord) -> Result<Option<f64>, CliError> {
    match spec {
        NumOrWord::Word(w) if w.eq_ignore_ascii_case("inf") => Ok(None),
        NumOrWord::Word(w) => match w.parse::<f64>() {
            Ok(b) => parse_beta(field, &NumOrWord::Num(b)),
            Err(_) => Err(invalid(field, format!("expected a number or \"inf\", got {w:?}"))),
        },
        NumOrWord::Num(b) if b.is_infinite() && *b > 0.0 => Ok(None),
        NumOrWord::Num(b) if *b > 0.0 && b.is_finite() => Ok(Some(*b)),
        NumOrWord::Num(b) => Err(invalid(field, format!("must be positive, got {b}"))),
    }
}

fn parse_size(field: &str, spec: &NumOrWord) -> Result<ChainSize, CliError> {
    match spec {
        NumOrWord::Word(w) if w.eq_ignore_ascii_case("continuum") => Ok(ChainSize::Continuum),
        NumOrWord::Word(w) => match w.parse::<f64>() {
            Ok(n) => parse_size(field, &NumOrWord::Num(n)),
            Err(_) => Err(invalid(field, format!("expected an even integer or \"continuum\", got {w:?}"))),
        },
        NumOrWord::Num(n) => {
            if n.fract() != 0.0 || *n < 2.0 || (*n as u64) % 2 != 0 {
                return Err(invalid(field, format!("must be a positive even integer, got {n}")));
            }
            Ok(ChainSize::Finite(*n as usize))
        }
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| invalid("config", format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Merges file values with flags (flags win) and applies defaults.
    pub fn resolve(command: &str, file: FileConfig, o: &Overrides) -> Result<Self, CliError> {
        let p = file.protocol;
        let g = file.grid;
        let out = file.output;
        let beta = match (&o.beta, &p.beta) {
            (Some(b), _) => parse_beta("--beta", &NumOrWord::Word(b.clone()))?,
            (None, Some(b)) => parse_beta("protocol.beta", b)?,
            (None, None) => None,
        };
        let n = match (&o.n, &p.n) {
            (Some(n), _) => parse_size("--N", &NumOrWord::Word(n.clone()))?,
            (None, Some(n)) => parse_size("protocol.N", n)?,
            (None, None) => ChainSize::Continuum,
        };
        let method_name = o.method.clone().or(p.method).unwrap_or_else(|| "lz_full".into());
        let method: Method = method_name
            .parse()
            .map_err(|_| invalid("protocol.method", format!("unknown method {method_name:?} (ode, lz_full, lz_half, apt)")))?;
        let cfg = RunConfig {
            command: command.to_string(),
            protocol: ProtocolConfig {
                lambda0: o.lambda0.or(p.lambda0).unwrap_or(-4.0),
                lambda1: o.lambda1.or(p.lambda1).unwrap_or(1.0),
                v: o.v.or(p.v),
                j: o.j.or(p.j).unwrap_or(1.0),
                beta,
                n,
                method,
                n_max: o.n_max.or(p.n_max).unwrap_or(3),
            },
            grid: GridConfig {
                v_min: o.v_min.or(g.v_min),
                v_max: o.v_max.or(g.v_max),
                v_points: o.v_points.or(g.v_points),
                v_log: o.v_log.or(g.v_log).unwrap_or(true),
                u_min: o.u_min.or(g.u_min).unwrap_or(-2.0),
                u_max: o.u_max.or(g.u_max).unwrap_or(2.0),
                u_points: o.u_points.or(g.u_points).unwrap_or(41),
                w_min: o.w_min.or(g.w_min),
                w_max: o.w_max.or(g.w_max),
                w_points: o.w_points.or(g.w_points).unwrap_or(41),
                fit_min: o.fit_min.or(g.fit_min).unwrap_or(1e-2),
                fit_max: o.fit_max.or(g.fit_max).unwrap_or(1e-1),
            },
            output: OutputConfig {
                out: o.out.clone().or(out.out),
                svg: o.svg.clone().or(out.svg),
                json: o.json.clone().or(out.json),
            },
        };
        cfg.validate_common()?;
        Ok(cfg)
    }

    fn validate_common(&self) -> Result<(), CliError> {
        let p = &self.protocol;
        for (name, x) in [("protocol.lambda0", p.lambda0), ("protocol.lambda1", p.lambda1)] {
            if !x.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(p.j > 0.0 && p.j.is_finite()) {
            return Err(invalid("protocol.J", "must be positive"));
        }
        if p.lambda0 > p.lambda1 {
            return Err(invalid("protocol.lambda0", "must not exceed protocol.lambda1"));
        }
        if let Some(v) = p.v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("protocol.v", "must be positive"));
            }
        }
        if p.n_max == 0 {
            return Err(invalid("protocol.n_max", "must be at least 1"));
        }
        let g = &self.grid;
        if !(g.fit_min > 0.0 && g.fit_max > g.fit_min) {
            return Err(invalid("grid.fit_min", "need 0 < fit_min < fit_max"));
        }
        Ok(())
    }

    /// The protocol at the configured single rate.
    pub fn protocol(&self) -> Result<QuenchProtocol, CliError> {
        let v = self.protocol.v.ok_or_else(|| invalid("protocol.v", "required for this command"))?;
        self.protocol_at(v)
    }

    pub fn protocol_at(&self, v: f64) -> Result<QuenchProtocol, CliError> {
        let p = &self.protocol;
        let protocol = QuenchProtocol::new(p.lambda0, p.lambda1, v, p.j)
            .and_then(|q| q.with_beta(p.beta))
            .map_err(|e| invalid("protocol", e))?;
        let model = Registry::standard().get(p.method.name()).map_err(|e| invalid("protocol.method", e))?;
        model.check(&protocol).map_err(|e| invalid("protocol.method", e))?;
        Ok(protocol)
    }

    /// Rates of the sweep grid.
    pub fn v_grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        let (lo, hi, n) = match (g.v_min, g.v_max, g.v_points) {
            (Some(lo), Some(hi), Some(n)) => (lo, hi, n),
            _ => return Err(invalid("grid.v_min", "sweep needs v_min, v_max and v_points")),
        };
        if n == 0 {
            return Err(invalid("grid.v_points", "empty v grid"));
        }
        if n < kzwork::scaling::MIN_FIT_POINTS {
            return Err(invalid(
                "grid.v_points",
                format!("need at least {} points, got {n}", kzwork::scaling::MIN_FIT_POINTS),
            ));
        }
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(invalid("grid.v_min", "need 0 < v_min < v_max"));
        }
        Ok((0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if g.v_log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect())
    }

    /// Uniform u grid; includes 0 whenever it lands on a grid point.
    pub fn u_grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if g.u_points == 0 {
            return Err(invalid("grid.u_points", "empty u grid"));
        }
        if !(g.u_min.is_finite() && g.u_max.is_finite()) || g.u_min > g.u_max {
            return Err(invalid("grid.u_min", "need finite u_min <= u_max"));
        }
        if g.u_points == 1 {
            return Ok(vec![g.u_min]);
        }
        if g.u_min == g.u_max {
            return Err(invalid("grid.u_points", "several points need u_min < u_max"));
        }
        let n = g.u_points - 1;
        Ok((0..=n)
            .map(|i| {
                // Symmetric ranges land exactly on 0 and on mirrored values.
                let x = (g.u_min * (n - i) as f64 + g.u_max * i as f64) / n as f64;
                if (2 * i == n) && g.u_min == -g.u_max {
                    0.0
                } else {
                    x
                }
            })
            .collect())
    }
}

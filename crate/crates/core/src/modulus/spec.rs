//! Textual modulus specifications (`invlog:p=1.0`, `iterlog:p=1,depth=2`,
//! `custom:<file>`) and two-column tables for custom moduli.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{Modulus, ModulusKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModulusSpec {
    Power { p: f64 },
    LogPlus { p: f64 },
    InvLog { p: f64 },
    IterLog { p: f64, depth: u32 },
    Custom { path: String },
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

impl FromStr for ModulusSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| parse_err(format!("expected `kind:params`, got `{s}`")))?;
        let kind = kind.trim().to_ascii_lowercase();
        if kind == "custom" {
            let path = rest.trim();
            if path.is_empty() {
                return Err(parse_err("custom modulus needs a table file path"));
            }
            return Ok(ModulusSpec::Custom {
                path: path.to_string(),
            });
        }

        let mut p = None;
        let mut depth = None;
        for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key=value`, got `{item}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{}` is not a number", value.trim())))?;
            let slot = match key.trim() {
                "p" => &mut p,
                "depth" | "k" => &mut depth,
                other => return Err(parse_err(format!("unknown parameter `{other}`"))),
            };
            if slot.replace(value).is_some() {
                return Err(parse_err(format!("parameter `{}` given twice", key.trim())));
            }
        }
        let p = p.ok_or_else(|| parse_err("missing parameter `p`"))?;
        if kind != "iterlog" && depth.is_some() {
            return Err(parse_err(format!("`depth` does not apply to {kind}")));
        }
        match kind.as_str() {
            "power" => Ok(ModulusSpec::Power { p }),
            "logplus" => Ok(ModulusSpec::LogPlus { p }),
            "invlog" => Ok(ModulusSpec::InvLog { p }),
            "iterlog" => {
                let d = depth.unwrap_or(1.0);
                if !(d >= 1.0 && d <= 64.0 && d.fract() == 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "iterlog depth must be a positive integer, got {d}"
                    )));
                }
                Ok(ModulusSpec::IterLog {
                    p,
                    depth: d as u32,
                })
            }
            other => Err(parse_err(format!("unknown modulus kind `{other}`"))),
        }
    }
}

impl fmt::Display for ModulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusSpec::Power { p } => write!(f, "power:p={p}"),
            ModulusSpec::LogPlus { p } => write!(f, "logplus:p={p}"),
            ModulusSpec::InvLog { p } => write!(f, "invlog:p={p}"),
            ModulusSpec::IterLog { p, depth } => write!(f, "iterlog:p={p},depth={depth}"),
            ModulusSpec::Custom { path } => write!(f, "custom:{path}"),
        }
    }
}

impl ModulusSpec {
    pub fn kind(&self) -> ModulusKind {
        match self {
            ModulusSpec::Power { .. } => ModulusKind::Power,
            ModulusSpec::LogPlus { .. } => ModulusKind::LogPlus,
            ModulusSpec::InvLog { .. } => ModulusKind::InvLog,
            ModulusSpec::IterLog { .. } => ModulusKind::IterLog,
            ModulusSpec::Custom { .. } => ModulusKind::Custom,
        }
    }

    /// Builds the modulus; custom tables are read relative to `base_dir`
    /// when the path is relative.
    pub fn build_in(&self, base_dir: Option<&Path>) -> Result<Modulus> {
        match *self {
            ModulusSpec::Power { p } => Modulus::power(p),
            ModulusSpec::LogPlus { p } => Modulus::log_plus(p),
            ModulusSpec::InvLog { p } => Modulus::inv_log(p),
            ModulusSpec::IterLog { p, depth } => Modulus::iter_log(p, depth),
            ModulusSpec::Custom { ref path } => {
                let mut full = Path::new(path).to_path_buf();
                if let (Some(base), true) = (base_dir, full.is_relative()) {
                    full = base.join(full);
                }
                let text = std::fs::read_to_string(&full)?;
                let mut table = Table::parse(&text)?;
                table.source = Some(path.clone());
                Modulus::from_table(table)
            }
        }
    }

    pub fn build(&self) -> Result<Modulus> {
        self.build_in(None)
    }
}

/// Monotone samples `(s_i, μ_i)`, starting at `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    s: Vec<f64>,
    mu: Vec<f64>,
    source: Option<String>,
}

impl Table {
    /// Parses whitespace- or comma-separated `s μ(s)` rows. Blank lines and
    /// `#` comments are skipped. Abscissae must increase strictly, values
    /// must be non-decreasing and non-negative; `(0, 0)` is prepended when
    /// missing.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Vec::new();
        let mut mu = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(parse_err(format!(
                    "line {}: expected two columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let mut row = [0.0f64; 2];
            for (slot, col) in row.iter_mut().zip(&cols) {
                *slot = col.parse().map_err(|_| {
                    parse_err(format!("line {}: `{col}` is not a number", lineno + 1))
                })?;
                if !slot.is_finite() {
                    return Err(parse_err(format!("line {}: non-finite entry", lineno + 1)));
                }
            }
            s.push(row[0]);
            mu.push(row[1]);
        }
        Self::from_points(s, mu)
    }

    pub fn from_points(mut s: Vec<f64>, mut mu: Vec<f64>) -> Result<Self> {
        if s.len() != mu.len() {
            return Err(parse_err("column lengths differ"));
        }
        if s.is_empty() {
            return Err(parse_err("table has no rows"));
        }
        if s.iter().chain(&mu).any(|v| !v.is_finite()) {
            return Err(parse_err("non-finite table entry"));
        }
        if s[0] < 0.0 {
            return Err(parse_err("abscissae must be non-negative"));
        }
        if s[0] == 0.0 {
            if mu[0] != 0.0 {
                return Err(parse_err("a modulus vanishes at 0"));
            }
        } else {
            s.insert(0, 0.0);
            mu.insert(0, 0.0);
        }
        if s.len() < 2 {
            return Err(parse_err("table needs at least one point with s > 0"));
        }
        for i in 1..s.len() {
            if s[i] <= s[i - 1] {
                return Err(parse_err(format!("abscissae not increasing at row {i}")));
            }
            if mu[i] < mu[i - 1] {
                return Err(parse_err(format!("values decrease at row {i}")));
            }
        }
        Ok(Self { s, mu, source: None })
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn points(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.mu)
    }

    pub(super) fn last_point(&self) -> f64 {
        self.s[self.s.len() - 1]
    }

    pub(super) fn last_slope(&self) -> f64 {
        let n = self.s.len();
        (self.mu[n - 1] - self.mu[n - 2]) / (self.s[n - 1] - self.s[n - 2])
    }

    /// Piecewise-linear interpolant on `[0, s_last]`.
    pub(super) fn interpolate(&self, x: f64) -> f64 {
        let i = self.s.partition_point(|&v| v < x);
        if i == 0 {
            return self.mu[0];
        }
        if i >= self.s.len() {
            return self.mu[self.mu.len() - 1];
        }
        let (x0, x1) = (self.s[i - 1], self.s[i]);
        let w = (x - x0) / (x1 - x0);
        self.mu[i - 1] + w * (self.mu[i] - self.mu[i - 1])
    }
}

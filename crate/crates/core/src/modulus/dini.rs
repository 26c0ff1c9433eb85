//! Heuristic classification of `∫_0^a μ(t)/t dt` from dyadic shells.
//!
//! With `u = log(1/t)` shell `k` covers `u ∈ [u_k, u_k + log 2]`,
//! `u_k = log(1/a) + k log 2`. The shell average `f_k = S_k / log 2` is
//! compared against a ladder of scales: geometric decay in `u`, then power
//! laws in `u`, `log u` and `log log u` after multiplying by the preceding
//! logarithms. The first level whose exponent is stable across the tail and
//! clearly away from the borderline value decides.

use super::{DiniLabel, Modulus};
use crate::error::{invalid, Result};
use crate::quadrature::{fit_line, integrate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiniVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl DiniVerdict {
    pub fn label(self) -> Option<DiniLabel> {
        match self {
            DiniVerdict::Convergent => Some(DiniLabel::Convergent),
            DiniVerdict::Divergent => Some(DiniLabel::Divergent),
            DiniVerdict::Inconclusive => None,
        }
    }
}

impl std::fmt::Display for DiniVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiniVerdict::Convergent => "Convergent",
            DiniVerdict::Divergent => "Divergent",
            DiniVerdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiniSettings {
    pub shells: usize,
    /// Upper limit `a = 1/C_0`.
    pub base: f64,
    pub tolerance: Tolerance,
    /// Minimum distance of a fitted exponent from the borderline value 1.
    pub margin: f64,
    /// Maximum exponent drift between the two halves of the tail window.
    pub drift: f64,
    /// Maximum relative change of the extrapolated total when the tail is
    /// started at half the shell count.
    pub stability: f64,
}

impl Default for DiniSettings {
    fn default() -> Self {
        Self {
            shells: 1000,
            base: 0.01,
            tolerance: Tolerance {
                abs: 1e-10,
                rel: 1e-12,
                max_subdivisions: 200,
            },
            margin: 0.25,
            drift: 0.005,
            stability: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiniReport {
    pub verdict: DiniVerdict,
    pub analytic_label: Option<DiniLabel>,
    /// Shell contributions `S_k`.
    pub partial_sums: Vec<f64>,
    /// 0 for geometric decay, `j` for a power law in the `j`-th iterated log.
    pub level: Option<usize>,
    pub exponent: f64,
    pub drift: f64,
    /// Estimated `∫_0^a μ(t)/t dt` when convergent.
    pub total_estimate: Option<f64>,
    pub diagnostic: String,
}

impl DiniReport {
    /// `None` without an analytic label.
    pub fn matches_label(&self) -> Option<bool> {
        self.analytic_label.map(|l| self.verdict.label() == Some(l))
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.partial_sums
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }
}

/// Tail model fitted on one scale level.
struct LevelFit {
    level: usize,
    exponent: f64,
    drift: f64,
    intercept: f64,
}

fn abscissa(level: usize, u: f64) -> f64 {
    match level {
        1 => u,
        2 => u.ln(),
        _ => u.ln().ln(),
    }
}

/// `log` of the weight `Π_{i<level} ℓ_i(u)` applied to `f`.
fn log_weight(level: usize, u: f64) -> f64 {
    (1..level).map(|i| abscissa(i, u).ln()).sum()
}

fn fit_level(level: usize, mids: &[f64], log_f: &[f64]) -> Option<LevelFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = if level == 0 {
        (mids.to_vec(), log_f.to_vec())
    } else {
        mids.iter()
            .zip(log_f)
            .map(|(&u, &lf)| (abscissa(level, u).ln(), lf + log_weight(level, u)))
            .unzip()
    };
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return None;
    }
    let n = x.len();
    let half = n / 2;
    let full = fit_line(&x, &y)?;
    let lo = fit_line(&x[..half], &y[..half])?;
    let hi = fit_line(&x[half..], &y[half..])?;
    let exponent = -full.slope;
    let drift = if level == 0 {
        (hi.slope - lo.slope).abs() / full.slope.abs().max(f64::MIN_POSITIVE)
    } else {
        (hi.slope - lo.slope).abs()
    };
    Some(LevelFit {
        level,
        exponent,
        drift,
        intercept: full.intercept,
    })
}

impl LevelFit {
    /// Modelled `∫_{u}^{∞} f`.
    fn tail_from(&self, u: f64) -> f64 {
        if self.level == 0 {
            (self.intercept - self.exponent * u).exp() / self.exponent
        } else {
            let l = abscissa(self.level, u);
            let g = (self.intercept - self.exponent * l.ln()).exp();
            g * l / (self.exponent - 1.0)
        }
    }
}

pub fn classify_dini(m: &Modulus, settings: &DiniSettings) -> Result<DiniReport> {
    if settings.shells < 40 {
        return Err(invalid(format!(
            "at least 40 shells are needed, got {}",
            settings.shells
        )));
    }
    let a = settings.base;
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("base must lie in (0, 1), got {a}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let u0 = -a.ln();
    let mut report = DiniReport {
        verdict: DiniVerdict::Inconclusive,
        analytic_label: m.analytic_dini_label(),
        partial_sums: Vec::with_capacity(settings.shells),
        level: None,
        exponent: f64::NAN,
        drift: f64::NAN,
        total_estimate: None,
        diagnostic: String::new(),
    };

    for k in 0..settings.shells {
        let lo = u0 + k as f64 * ln2;
        let q = integrate(|u| m.eval_log(u), lo, lo + ln2, settings.tolerance);
        if !q.is_finite() || q.value < 0.0 {
            report.diagnostic = format!("quadrature failed on shell {k}: {}", q.value);
            return Ok(report);
        }
        report.partial_sums.push(q.value);
    }

    let sums = &report.partial_sums;
    if sums[0] == 0.0 {
        report.verdict = DiniVerdict::Convergent;
        report.total_estimate = Some(0.0);
        report.diagnostic = "integrand vanishes identically".into();
        return Ok(report);
    }
    // Shells that underflow carry no information; fit on the resolved part.
    let resolved = sums.iter().take_while(|&&s| s > 1e-290).count();
    if resolved < 40 {
        // Super-exponential decay: only a handful of representable shells.
        if sums[..resolved].windows(2).all(|w| w[1] < 0.5 * w[0]) {
            report.verdict = DiniVerdict::Convergent;
            report.total_estimate = Some(sums.iter().sum());
            report.level = Some(0);
            report.diagnostic = "shells underflow after super-geometric decay".into();
        } else {
            report.diagnostic = format!("only {resolved} shells above underflow");
        }
        return Ok(report);
    }

    let tail_start = resolved / 2;
    let mids: Vec<f64> = (tail_start..resolved)
        .map(|k| u0 + (k as f64 + 0.5) * ln2)
        .collect();
    let log_f: Vec<f64> = sums[tail_start..resolved]
        .iter()
        .map(|s| (s / ln2).ln())
        .collect();

    let mut decided = None;
    let mut last = None;
    for level in 0..=3 {
        let Some(fit) = fit_level(level, &mids, &log_f) else {
            continue;
        };
        let clear = if level == 0 {
            fit.exponent > 1e-6 && fit.drift <= 0.01
        } else {
            (fit.exponent - 1.0).abs() > settings.margin && fit.drift <= settings.drift
        };
        if clear {
            decided = Some(fit);
            break;
        }
        last = Some(fit);
    }

    let Some(fit) = decided else {
        if let Some(f) = last {
            report.exponent = f.exponent;
            report.drift = f.drift;
            report.level = Some(f.level);
        }
        report.diagnostic = "no scale level gave a stable exponent away from 1".into();
        return Ok(report);
    };
    report.level = Some(fit.level);
    report.exponent = fit.exponent;
    report.drift = fit.drift;

    let convergent = fit.level == 0 || fit.exponent > 1.0;
    if !convergent {
        report.verdict = DiniVerdict::Divergent;
        report.diagnostic = format!(
            "level {} exponent {:.4} < 1: shell sums decay too slowly",
            fit.level, fit.exponent
        );
        return Ok(report);
    }

    let head = |upto: usize| -> f64 { sums[..upto].iter().sum() };
    let edge = |k: usize| u0 + k as f64 * ln2;
    let total = head(resolved) + fit.tail_from(edge(resolved));
    let alt = head(tail_start) + fit.tail_from(edge(tail_start));
    let change = (total - alt).abs() / total.abs();
    if !total.is_finite() || change >= settings.stability {
        report.diagnostic = format!(
            "tail extrapolation unstable: relative change {change:.3e} between shell counts"
        );
        return Ok(report);
    }
    report.verdict = DiniVerdict::Convergent;
    report.total_estimate = Some(total);
    report.diagnostic = format!(
        "level {} exponent {:.4}; extrapolated total {total:.6e} (change {change:.1e})",
        fit.level, fit.exponent
    );
    Ok(report)
}

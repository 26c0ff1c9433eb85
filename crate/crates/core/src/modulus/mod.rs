//! Moduli of continuity `μ`, the induced nonlinearity
//! `h(s) = |s|^{1+2/n} μ(|s|)` and numerical checks of their structural
//! conditions.
//!
//! Catalog moduli are evaluated in closed form near zero. The logarithmic
//! families only make sense on a small interval `(0, s*]`; beyond the
//! continuation point `s*` every modulus is continued by its tangent line
//! `μ(s*) + μ'(s*)(s - s*)`, which keeps it `C¹`, concave and increasing.

mod conditions;
mod dini;
mod spec;

use std::fmt;
use std::sync::Arc;

pub use conditions::{
    check_h_convexity, check_slow_variation, condition_report, default_s0, ConditionReport,
    ConvexityReport, SlowVariationReport,
};
pub use dini::{classify_dini, DiniReport, DiniSettings, DiniVerdict};
pub use spec::{ModulusSpec, Table};

use crate::error::{invalid, Error, Result};
use crate::grid::Dim;

/// Deepest iterated logarithm supported; deeper nests put `s*` below the
/// smallest positive double anyway.
const MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulusKind {
    /// `μ(s) = s^p`
    Power,
    /// `μ(s) = log(1 + s)^p`
    LogPlus,
    /// `μ(s) = log(1/s)^{-p}`
    InvLog,
    /// `μ(s) = log(1/s)^{-1} ⋯ log^{(k)}(1/s)^{-1} · log^{(k+1)}(1/s)^{-p}`
    IterLog,
    /// Monotone table, linearly interpolated.
    Custom,
}

impl ModulusKind {
    pub fn name(self) -> &'static str {
        match self {
            ModulusKind::Power => "power",
            ModulusKind::LogPlus => "logplus",
            ModulusKind::InvLog => "invlog",
            ModulusKind::IterLog => "iterlog",
            ModulusKind::Custom => "custom",
        }
    }
}

/// Convergence of `∫_{C_0}^∞ μ(1/s)/s ds`, where known analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiniLabel {
    Convergent,
    Divergent,
}

impl fmt::Display for DiniLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiniLabel::Convergent => "Convergent",
            DiniLabel::Divergent => "Divergent",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Modulus {
    kind: ModulusKind,
    p: f64,
    depth: u32,
    /// `s*`; `+∞` when the closed form is used on all of `[0, ∞)`.
    continuation_point: f64,
    /// `log(1/s*)`, `-∞` when `s* = +∞`.
    log_star: f64,
    value_at_star: f64,
    slope_at_star: f64,
    table: Option<Arc<Table>>,
    label: Option<DiniLabel>,
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.p == other.p
            && self.depth == other.depth
            && self.continuation_point == other.continuation_point
            && self.table == other.table
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent p must be finite and > 0, got {p}")))
    }
}

impl Modulus {
    pub fn power(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self::closed_form(ModulusKind::Power, p, 0, Some(DiniLabel::Convergent)))
    }

    pub fn log_plus(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self::closed_form(ModulusKind::LogPlus, p, 0, Some(DiniLabel::Convergent)))
    }

    /// `log(1/s)^{-p}` continued linearly beyond `s* = e^{-max(2, p+1)}`,
    /// the largest point below which the closed form is concave.
    pub fn inv_log(p: f64) -> Result<Self> {
        check_p(p)?;
        let label = if p > 1.0 {
            DiniLabel::Convergent
        } else {
            DiniLabel::Divergent
        };
        let m = Self::closed_form(ModulusKind::InvLog, p, 0, Some(label));
        m.continued_at_log((p + 1.0).max(2.0))
    }

    /// Iterated-logarithm modulus with `depth` extra logarithmic factors.
    /// `depth = 1` gives `log(1/s)^{-1} log(log(1/s))^{-p}`.
    pub fn iter_log(p: f64, depth: u32) -> Result<Self> {
        check_p(p)?;
        if depth == 0 || depth as usize > MAX_DEPTH {
            return Err(invalid(format!(
                "iterlog depth must be in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        let label = if p > 1.0 {
            DiniLabel::Convergent
        } else {
            DiniLabel::Divergent
        };
        let m = Self::closed_form(ModulusKind::IterLog, p, depth, Some(label));
        let l_star = m.concavity_threshold();
        m.continued_at_log(l_star)
    }

    pub fn from_table(table: Table) -> Result<Self> {
        let last = table.last_point();
        let mut m = Self::closed_form(ModulusKind::Custom, 1.0, 0, None);
        m.table = Some(Arc::new(table));
        m.continuation_point = last;
        m.log_star = -last.ln();
        m.value_at_star = m.formula(last);
        m.slope_at_star = m.table.as_ref().map(|t| t.last_slope()).unwrap_or(0.0);
        Ok(m)
    }

    /// Builds a catalog modulus from a kind tag and its numeric parameters:
    /// `[p]` for Power/LogPlus/InvLog, `[p, depth]` for IterLog.
    pub fn catalog(kind: ModulusKind, params: &[f64]) -> Result<Self> {
        let want = match kind {
            ModulusKind::IterLog => 2,
            ModulusKind::Custom => {
                return Err(invalid("custom moduli are built from a table"));
            }
            _ => 1,
        };
        if params.len() != want {
            return Err(invalid(format!(
                "{} expects {want} parameter(s), got {}",
                kind.name(),
                params.len()
            )));
        }
        match kind {
            ModulusKind::Power => Self::power(params[0]),
            ModulusKind::LogPlus => Self::log_plus(params[0]),
            ModulusKind::InvLog => Self::inv_log(params[0]),
            ModulusKind::IterLog => {
                let d = params[1];
                if !(d.is_finite() && d >= 1.0 && d.fract() == 0.0) {
                    return Err(invalid(format!("iterlog depth must be a positive integer, got {d}")));
                }
                Self::iter_log(params[0], d as u32)
            }
            ModulusKind::Custom => unreachable!(),
        }
    }

    fn closed_form(kind: ModulusKind, p: f64, depth: u32, label: Option<DiniLabel>) -> Self {
        Self {
            kind,
            p,
            depth,
            continuation_point: f64::INFINITY,
            log_star: f64::NEG_INFINITY,
            value_at_star: f64::NAN,
            slope_at_star: f64::NAN,
            table: None,
            label,
        }
    }

    fn continued_at_log(mut self, log_star: f64) -> Result<Self> {
        let s_star = (-log_star).exp();
        if !(s_star > 1e-300) {
            return Err(invalid(format!(
                "continuation point e^-{log_star} underflows double precision"
            )));
        }
        self.log_star = log_star;
        self.continuation_point = s_star;
        self.value_at_star = self.formula(s_star);
        self.slope_at_star = self.formula_deriv(s_star, 1);
        Ok(self)
    }

    /// Moves the continuation point. For the logarithmic families `s*` must
    /// keep every nested logarithm of `1/s*` positive. Concavity on `(0, s*]`
    /// is not re-checked; see [`Modulus::is_concave_on`].
    pub fn with_continuation_point(self, s_star: f64) -> Result<Self> {
        if !(s_star.is_finite() && s_star > 0.0) {
            return Err(invalid(format!("continuation point must be > 0, got {s_star}")));
        }
        match self.kind {
            ModulusKind::Custom => return Err(invalid("custom moduli continue past their last row")),
            ModulusKind::InvLog | ModulusKind::IterLog => {
                let l1 = -s_star.ln();
                match nested_logs(l1, self.depth as usize) {
                    Some(_) => {}
                    None => {
                        return Err(invalid(format!(
                            "continuation point {s_star} leaves the domain of the closed form"
                        )))
                    }
                }
            }
            _ => {}
        }
        let l = -s_star.ln();
        self.continued_at_log(l)
    }

    pub fn kind(&self) -> ModulusKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            ModulusKind::IterLog => vec![self.p, f64::from(self.depth)],
            ModulusKind::Custom => vec![],
            _ => vec![self.p],
        }
    }

    pub fn continuation_point(&self) -> f64 {
        self.continuation_point
    }

    pub fn analytic_dini_label(&self) -> Option<DiniLabel> {
        self.label
    }

    pub fn table(&self) -> Option<&Table> {
        self.table.as_deref()
    }

    /// `μ(s)`; zero for `s <= 0`.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        if s.is_nan() {
            return f64::NAN;
        }
        if s <= 0.0 {
            return 0.0;
        }
        if s > self.continuation_point {
            return self.value_at_star + self.slope_at_star * (s - self.continuation_point);
        }
        self.formula(s)
    }

    /// `μ(e^{-l})`, evaluated without forming `e^{-l}` where the closed form
    /// allows it, so arbitrarily large `l` stay representable.
    pub fn eval_log(&self, l: f64) -> f64 {
        if l.is_nan() {
            return f64::NAN;
        }
        if l <= self.log_star || l < 700.0 {
            return self.eval((-l).exp());
        }
        match self.kind {
            ModulusKind::Power => (-self.p * l).exp(),
            ModulusKind::LogPlus => (-l).exp().ln_1p().powf(self.p),
            ModulusKind::InvLog | ModulusKind::IterLog => self.log_formula(l),
            ModulusKind::Custom => self.eval((-l).exp()),
        }
    }

    fn formula(&self, s: f64) -> f64 {
        match self.kind {
            ModulusKind::Power => {
                if self.p == 1.0 {
                    s
                } else {
                    s.powf(self.p)
                }
            }
            ModulusKind::LogPlus => s.ln_1p().powf(self.p),
            ModulusKind::InvLog | ModulusKind::IterLog => self.log_formula(-s.ln()),
            ModulusKind::Custom => self.table.as_ref().map_or(f64::NAN, |t| t.interpolate(s)),
        }
    }

    /// Closed form of the logarithmic families as a function of `l = log(1/s)`.
    fn log_formula(&self, l1: f64) -> f64 {
        let k = self.depth as usize;
        if self.kind == ModulusKind::InvLog {
            return l1.powf(-self.p);
        }
        let Some(logs) = nested_logs(l1, k) else {
            return f64::NAN;
        };
        let mut v = 1.0;
        for &lj in &logs[..k] {
            v /= lj;
        }
        v * logs[k].powf(-self.p)
    }

    /// `(A, s·A')` with `μ' = μA/s`, shared by the two logarithmic families
    /// (`InvLog` is depth 0).
    fn log_derivative_terms(&self, l1: f64) -> Option<(f64, f64)> {
        let k = if self.kind == ModulusKind::InvLog {
            0
        } else {
            self.depth as usize
        };
        let logs = nested_logs(l1, k)?;
        let mut prod = 1.0;
        let mut partial = 0.0;
        let mut a = 0.0;
        let mut sa = 0.0;
        for (j, &lj) in logs[..=k].iter().enumerate() {
            prod *= lj;
            let inv = 1.0 / prod;
            partial += inv;
            let weight = if j == k { self.p } else { 1.0 };
            a += weight * inv;
            sa += weight * partial * inv;
        }
        Some((a, sa))
    }

    /// Smallest `log(1/s)` beyond which the iterated-log closed form is
    /// concave, increasing and has all nested logarithms at least one.
    fn concavity_threshold(&self) -> f64 {
        let k = self.depth as usize;
        let mut start = 1.0f64;
        for _ in 0..k {
            start = start.exp();
        }
        let start = start.max(2.0);
        let ratio: f64 = 1.001;
        let steps = (1e4f64.ln() / ratio.ln()).ceil() as usize;
        let mut threshold = start;
        for i in 0..=steps {
            let l = start * ratio.powi(i as i32);
            let bad = match self.log_derivative_terms(l) {
                Some((a, sa)) => a <= 0.0 || a * a + sa - a > 0.0,
                None => true,
            };
            if bad {
                threshold = l * ratio;
            }
        }
        threshold
    }

    fn formula_deriv(&self, s: f64, k: u8) -> f64 {
        let p = self.p;
        match self.kind {
            ModulusKind::Power => match k {
                1 => p * s.powf(p - 1.0),
                _ => p * (p - 1.0) * s.powf(p - 2.0),
            },
            ModulusKind::LogPlus => {
                let l = s.ln_1p();
                let q = 1.0 + s;
                match k {
                    1 => p * l.powf(p - 1.0) / q,
                    _ => p * l.powf(p - 2.0) * (p - 1.0 - l) / (q * q),
                }
            }
            ModulusKind::InvLog | ModulusKind::IterLog => {
                let l1 = -s.ln();
                let mu = self.log_formula(l1);
                let Some((a, sa)) = self.log_derivative_terms(l1) else {
                    return f64::NAN;
                };
                match k {
                    1 => mu * a / s,
                    _ => mu * (a * a + sa - a) / (s * s),
                }
            }
            ModulusKind::Custom => self.deriv_fd(s, k),
        }
    }

    /// Analytic `μ^{(k)}(s)` for `k ∈ {1, 2}`; finite differences for tables.
    pub fn deriv(&self, s: f64, k: u8) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!(
                "derivatives are evaluated on (0, s0] only, got s = {s}"
            )));
        }
        if k != 1 && k != 2 {
            return Err(invalid(format!("derivative order must be 1 or 2, got {k}")));
        }
        if s > self.continuation_point {
            return Ok(if k == 1 { self.slope_at_star } else { 0.0 });
        }
        Ok(self.formula_deriv(s, k))
    }

    /// `s^k μ^{(k)}(s)`, evaluated without forming `s^k` separately so that
    /// it stays finite for `s` near the bottom of the double range.
    pub fn scaled_deriv(&self, s: f64, k: u8) -> Result<f64> {
        let d = self.deriv(s, k)?;
        if s > self.continuation_point {
            return Ok(s.powi(i32::from(k)) * d);
        }
        Ok(match self.kind {
            ModulusKind::InvLog | ModulusKind::IterLog => {
                let l1 = -s.ln();
                let mu = self.log_formula(l1);
                let (a, sa) = self
                    .log_derivative_terms(l1)
                    .ok_or_else(|| Error::Domain(format!("s = {s} outside the closed form")))?;
                if k == 1 {
                    mu * a
                } else {
                    mu * (a * a + sa - a)
                }
            }
            ModulusKind::Power => {
                let p = self.p;
                let c = if k == 1 { p } else { p * (p - 1.0) };
                c * self.formula(s)
            }
            _ => s.powi(i32::from(k)) * d,
        })
    }

    /// Central finite difference of [`Modulus::eval`]. First derivatives use
    /// `h = max(1e-6 s, 1e-12)`; second derivatives use `h = max(1e-4 s, 1e-12)`
    /// so that cancellation stays below truncation error.
    pub fn deriv_fd(&self, s: f64, k: u8) -> f64 {
        let rel = if k == 1 { 1e-6 } else { 1e-4 };
        let h = (rel * s).max(1e-12).min(0.5 * s);
        let fp = self.eval(s + h);
        let fm = self.eval(s - h);
        if k == 1 {
            (fp - fm) / (2.0 * h)
        } else {
            (fp - 2.0 * self.eval(s) + fm) / (h * h)
        }
    }

    /// Monotone non-decreasing on the (sorted) sample points.
    pub fn is_monotone_on(&self, grid: &[f64]) -> bool {
        grid.windows(2)
            .all(|w| self.eval(w[0]) <= self.eval(w[1]))
    }

    /// Midpoint concavity `μ((a+b)/2) >= (μ(a)+μ(b))/2` on adjacent pairs,
    /// with a relative roundoff slack.
    pub fn is_concave_on(&self, grid: &[f64]) -> bool {
        grid.windows(2).all(|w| {
            let mid = self.eval(0.5 * (w[0] + w[1]));
            let avg = 0.5 * (self.eval(w[0]) + self.eval(w[1]));
            mid >= avg - 1e-13 * avg.abs()
        })
    }

    /// `∫_lo^hi μ(σ)/σ dσ` for `0 <= lo <= hi`, closed form on the formula
    /// branch where one exists and adaptive quadrature elsewhere.
    pub fn dini_integral(&self, lo: f64, hi: f64) -> f64 {
        let l_lo = if lo > 0.0 { -lo.ln() } else { f64::INFINITY };
        self.dini_integral_log(l_lo, -hi.ln())
    }

    /// Same integral parametrised by `l = log(1/σ)`: `∫_{l_hi}^{l_lo} μ(e^{-l}) dl`
    /// with `l_hi <= l_lo` (`l_lo` may be `+∞`).
    pub fn dini_integral_log(&self, l_lo: f64, l_hi: f64) -> f64 {
        if l_lo <= l_hi {
            return 0.0;
        }
        let mut total = 0.0;
        let mut start = l_hi;
        if start < self.log_star {
            let end = self.log_star.min(l_lo);
            total += self.quad_log(start, end);
            start = end;
        }
        if start >= l_lo {
            return total;
        }
        if let Some(v) = self.closed_dini_antiderivative_diff(start, l_lo) {
            return total + v;
        }
        if l_lo.is_infinite() {
            // The remaining kinds are power-like at zero: e^{-pl} decay.
            let mut a = start;
            let mut width = 8.0;
            loop {
                let piece = self.quad_log(a, a + width);
                total += piece;
                a += width;
                width *= 2.0;
                if piece.abs() <= 1e-16 * total.abs() || a > 1e6 {
                    break;
                }
            }
            total
        } else {
            total + self.quad_log(start, l_lo)
        }
    }

    fn quad_log(&self, a: f64, b: f64) -> f64 {
        let tol = crate::quadrature::Tolerance {
            abs: 1e-14,
            rel: 1e-12,
            max_subdivisions: 400,
        };
        crate::quadrature::integrate(|l| self.eval_log(l), a, b, tol).value
    }

    /// `F(b) - F(a)` for an antiderivative of `μ(e^{-l})` in `l`, on the
    /// closed-form branch. `b` may be `+∞`.
    fn closed_dini_antiderivative_diff(&self, a: f64, b: f64) -> Option<f64> {
        let p = self.p;
        match self.kind {
            ModulusKind::Power => {
                let fa = (-p * a).exp() / p;
                let fb = if b.is_infinite() { 0.0 } else { (-p * b).exp() / p };
                Some(fa - fb)
            }
            ModulusKind::InvLog | ModulusKind::IterLog => {
                let k = if self.kind == ModulusKind::InvLog {
                    0
                } else {
                    self.depth as usize
                };
                let top = |l: f64| -> Option<f64> {
                    if l.is_infinite() {
                        return Some(f64::INFINITY);
                    }
                    nested_logs(l, k).map(|v| v[k])
                };
                let xa = top(a)?;
                let xb = top(b)?;
                Some(power_antiderivative_diff(p, xa, xb))
            }
            _ => None,
        }
    }

    /// Inverse of [`Modulus::dini_integral_log`] in its lower limit: the
    /// `l_lo` at which the integral from `l_hi` reaches `target`, expressed as
    /// `(levels, value)` with `l_lo = exp^{(levels)}(value)` so that witnesses
    /// far beyond double range stay finite. `None` when the integral is
    /// bounded below `target`.
    pub fn dini_inverse(&self, l_hi: f64, target: f64) -> Option<(u32, f64)> {
        if target <= 0.0 {
            return Some((0, l_hi));
        }
        let mut remaining = target;
        let mut start = l_hi;
        if start < self.log_star {
            let head = self.quad_log(start, self.log_star);
            if head >= remaining {
                return Some((0, bisect(|l| self.quad_log(start, l) - remaining, start, self.log_star)));
            }
            remaining -= head;
            start = self.log_star;
        }
        match self.kind {
            ModulusKind::InvLog | ModulusKind::IterLog => {
                let k = if self.kind == ModulusKind::InvLog {
                    0
                } else {
                    self.depth as usize
                };
                let x0 = nested_logs(start, k)?[k];
                let p = self.p;
                // Solve G(x1) - G(x0) = remaining with G(x) = x^{1-p}/(1-p) or ln x.
                let (levels, value) = if (p - 1.0).abs() < 1e-15 {
                    // ln x1 = ln x0 + remaining
                    (1u32, x0.ln() + remaining)
                } else if p < 1.0 {
                    let v = x0.powf(1.0 - p) + (1.0 - p) * remaining;
                    (0u32, v.powf(1.0 / (1.0 - p)))
                } else {
                    let v = x0.powf(1.0 - p) - (p - 1.0) * remaining;
                    if v <= 0.0 {
                        return None;
                    }
                    (0u32, v.powf(1.0 / (1.0 - p)))
                };
                // x1 = exp^{levels}(value) is the k-th nested log of l_lo.
                Some(normalize_levels(levels + k as u32, value))
            }
            _ => {
                let total = self.dini_integral_log(f64::INFINITY, start);
                if total < remaining {
                    return None;
                }
                let mut hi = start + 1.0;
                while self.dini_integral_log(hi, start) < remaining {
                    hi = start + 2.0 * (hi - start);
                    if hi > 1e300 {
                        return None;
                    }
                }
                Some((0, bisect(|l| self.dini_integral_log(l, start) - remaining, start, hi)))
            }
        }
    }
}

/// `exp^{(levels)}(value)`, collapsed while the result stays finite.
fn normalize_levels(mut levels: u32, mut value: f64) -> (u32, f64) {
    while levels > 0 && value < 700.0 {
        value = value.exp();
        levels -= 1;
    }
    (levels, value)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `∫_{xa}^{xb} x^{-p} dx` for `1 <= xa <= xb <= ∞`.
fn power_antiderivative_diff(p: f64, xa: f64, xb: f64) -> f64 {
    if (p - 1.0).abs() < 1e-15 {
        xb.ln() - xa.ln()
    } else {
        let g = |x: f64| {
            if x.is_infinite() {
                if p > 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                x.powf(1.0 - p) / (1.0 - p)
            }
        };
        g(xb) - g(xa)
    }
}

/// `[L_1, …, L_{k+1}]` with `L_{j+1} = ln L_j`, all positive; `None` otherwise.
fn nested_logs(l1: f64, k: usize) -> Option<[f64; MAX_DEPTH + 1]> {
    if k > MAX_DEPTH || !(l1 > 0.0) {
        return None;
    }
    let mut out = [0.0; MAX_DEPTH + 1];
    out[0] = l1;
    for j in 1..=k {
        let next = out[j - 1].ln();
        if !(next > 0.0) {
            return None;
        }
        out[j] = next;
    }
    Some(out)
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModulusKind::IterLog => write!(f, "iterlog:p={},depth={}", self.p, self.depth),
            ModulusKind::Custom => write!(
                f,
                "custom:{}",
                self.table.as_ref().and_then(|t| t.source()).unwrap_or("<table>")
            ),
            kind => write!(f, "{}:p={}", kind.name(), self.p),
        }
    }
}

/// `h(s) = |s|^{1+2/n} μ(|s|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    modulus: Modulus,
    dim: Dim,
    exponent: f64,
}

impl Nonlinearity {
    pub fn new(modulus: Modulus, dim: Dim) -> Self {
        let exponent = 1.0 + 2.0 / dim.as_f64();
        Self {
            modulus,
            dim,
            exponent,
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// The Fujita exponent `1 + 2/n`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    #[inline]
    fn power(&self, a: f64) -> f64 {
        match self.dim {
            Dim::One => a * a * a,
            Dim::Two => a * a,
        }
    }

    #[inline]
    pub fn h(&self, s: f64) -> f64 {
        let a = s.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.power(a) * self.modulus.eval(a)
    }

    /// `d h / d|s|` at `|s|`; zero at the origin.
    pub fn h_deriv(&self, s: f64) -> Result<f64> {
        let a = s.abs();
        if a == 0.0 {
            return Ok(0.0);
        }
        let q = 2.0 / self.dim.as_f64();
        let mu = self.modulus.eval(a);
        let dmu = self.modulus.deriv(a, 1)?;
        Ok(self.exponent * a.powf(q) * mu + self.power(a) * dmu)
    }

    /// `h''(s)` for `s > 0`.
    pub fn h_second_deriv(&self, s: f64) -> Result<f64> {
        let a = s.abs();
        let q = 2.0 / self.dim.as_f64();
        Ok(a.powf(q - 1.0) * conditions::bracket(self, a)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn catalog_labels_follow_the_examples() {
        use DiniLabel::*;
        let cases = [
            (Modulus::power(1.0).unwrap(), Convergent),
            (Modulus::power(0.5).unwrap(), Convergent),
            (Modulus::log_plus(1.0).unwrap(), Convergent),
            (Modulus::inv_log(2.0).unwrap(), Convergent),
            (Modulus::inv_log(1.0).unwrap(), Divergent),
            (Modulus::inv_log(0.5).unwrap(), Divergent),
            (Modulus::iter_log(2.0, 1).unwrap(), Convergent),
            (Modulus::iter_log(1.0, 1).unwrap(), Divergent),
        ];
        for (m, label) in cases {
            assert_eq!(m.analytic_dini_label(), Some(label), "{m}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Modulus::power(0.0).is_err());
        assert!(Modulus::inv_log(-1.0).is_err());
        assert!(Modulus::log_plus(f64::NAN).is_err());
        assert!(Modulus::iter_log(1.0, 0).is_err());
        assert!(Modulus::catalog(ModulusKind::IterLog, &[1.0, 1.5]).is_err());
        assert!(Modulus::catalog(ModulusKind::InvLog, &[1.0, 2.0]).is_err());
        assert!(Modulus::catalog(ModulusKind::IterLog, &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn power_values_and_derivatives() {
        let m = Modulus::catalog(ModulusKind::Power, &[2.0]).unwrap();
        assert_eq!(m.eval(0.5), 0.25);
        assert!((m.deriv(0.1, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!((m.deriv(0.1, 2).unwrap() - 2.0).abs() < 1e-14);
        let id = Modulus::power(1.0).unwrap();
        assert_eq!(id.eval(0.37), 0.37);
        assert_eq!(id.eval(0.0), 0.0);
    }

    #[test]
    fn logplus_at_e_minus_one_is_one() {
        let m = Modulus::log_plus(1.0).unwrap();
        assert!((m.eval(E - 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invlog_direct_substitution() {
        // log(1/s) = 2 at s = e^{-2}; pin s* there so the closed form applies.
        let m = Modulus::inv_log(2.0)
            .unwrap()
            .with_continuation_point((-2.0f64).exp())
            .unwrap();
        assert!((m.eval((-2.0f64).exp()) - 0.25).abs() < 1e-15);
        // With the default (concavity-safe) s* = e^{-3} the closed form still
        // holds below s*.
        let d = Modulus::inv_log(2.0).unwrap();
        assert!((d.continuation_point() - (-3.0f64).exp()).abs() < 1e-16);
        assert!((d.eval((-4.0f64).exp()) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn iterlog_at_e_to_minus_e() {
        // (log 1/s)^{-1} (log log 1/s)^{-1} at s = e^{-e}: e^{-1} * 1.
        let s = (-E).exp();
        let m = Modulus::iter_log(1.0, 1)
            .unwrap()
            .with_continuation_point(s)
            .unwrap();
        let expected = 0.367_879_441_171_442_3; // e^{-1}
        assert!(rel(m.eval(s), expected) < 1e-14, "{}", m.eval(s));
    }

    #[test]
    fn invlog_first_derivative_at_e_minus_two() {
        // (1/s)(log 1/s)^{-2} = e²/4
        let m = Modulus::inv_log(1.0).unwrap();
        let s = (-2.0f64).exp();
        let d = m.deriv(s, 1).unwrap();
        assert!(rel(d, 1.847_264_024_732_662_4) < 1e-14, "{d}");
        assert!(rel(m.deriv_fd(s * 0.999_999, 1), d) < 1e-5);
    }

    #[test]
    fn derivative_at_zero_is_rejected() {
        let m = Modulus::power(1.0).unwrap();
        assert!(m.deriv(0.0, 1).is_err());
        assert!(m.deriv(0.1, 3).is_err());
    }

    #[test]
    fn continuation_is_c1() {
        for m in [
            Modulus::inv_log(0.5).unwrap(),
            Modulus::inv_log(1.0).unwrap(),
            Modulus::inv_log(2.0).unwrap(),
            Modulus::iter_log(1.0, 1).unwrap(),
            Modulus::iter_log(2.0, 1).unwrap(),
            Modulus::iter_log(1.0, 2).unwrap(),
        ] {
            let s = m.continuation_point();
            let left = m.formula(s);
            let right = m.eval(s * (1.0 + 1e-15));
            assert!(rel(right, left) < 1e-12, "{m}: {left} vs {right}");
            let dl = m.formula_deriv(s, 1);
            let dr = m.deriv(s * 1.5, 1).unwrap();
            assert!(rel(dr, dl) < 1e-10, "{m}: {dl} vs {dr}");
        }
    }

    #[test]
    fn catalog_shapes_on_sample_grid() {
        for m in [
            Modulus::power(0.5).unwrap(),
            Modulus::power(1.0).unwrap(),
            Modulus::log_plus(1.0).unwrap(),
            Modulus::inv_log(0.5).unwrap(),
            Modulus::inv_log(1.0).unwrap(),
            Modulus::inv_log(2.0).unwrap(),
            Modulus::iter_log(1.0, 1).unwrap(),
            Modulus::iter_log(2.0, 1).unwrap(),
        ] {
            let grid: Vec<f64> = (0..=400)
                .map(|i| 10f64.powf(-12.0 + 13.0 * f64::from(i) / 400.0))
                .collect();
            assert!(m.is_monotone_on(&grid), "{m} not monotone");
            assert!(m.is_concave_on(&grid), "{m} not concave");
            assert_eq!(m.eval(0.0), 0.0);
        }
    }

    #[test]
    fn analytic_and_fd_derivatives_agree() {
        for m in [
            Modulus::power(0.5).unwrap(),
            Modulus::power(2.0).unwrap(),
            Modulus::log_plus(1.0).unwrap(),
            Modulus::log_plus(2.5).unwrap(),
            Modulus::inv_log(0.5).unwrap(),
            Modulus::inv_log(2.0).unwrap(),
            Modulus::iter_log(1.0, 1).unwrap(),
            Modulus::iter_log(2.0, 2).unwrap(),
        ] {
            let top = m.continuation_point().min(1.0) * (1.0 - 1e-3);
            let lo = 1e-6f64.min(top * 0.5);
            for i in 0..=200 {
                let s = lo * (top / lo).powf(f64::from(i) / 200.0);
                for k in [1u8, 2] {
                    let a = m.deriv(s, k).unwrap();
                    let b = m.deriv_fd(s, k);
                    let scale = a.abs().max(m.eval(s) / s.powi(i32::from(k)));
                    assert!(
                        (a - b).abs() <= 1e-6 * scale,
                        "{m} k={k} s={s}: analytic {a} fd {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn eval_log_matches_eval() {
        for m in [
            Modulus::power(0.5).unwrap(),
            Modulus::inv_log(1.0).unwrap(),
            Modulus::iter_log(2.0, 1).unwrap(),
        ] {
            for l in [0.5, 3.0, 50.0, 600.0] {
                let a = m.eval_log(l);
                let b = m.eval((-l as f64).exp());
                assert!(rel(a, b) < 1e-13, "{m} l={l}");
            }
            // Past the double range the closed form keeps going.
            assert!(m.eval_log(5000.0) > 0.0 || m.kind() == ModulusKind::Power);
        }
    }

    #[test]
    fn dini_integral_closed_forms() {
        // ∫_0^a μ(t)/t dt = (log 1/a)^{1-p}/(p-1) for InvLog, p = 2.
        let m = Modulus::inv_log(2.0).unwrap();
        let a = 0.01f64;
        let v = m.dini_integral(0.0, a);
        assert!(rel(v, 1.0 / (1.0 / a).ln()) < 1e-12);
        // Quadrature route on a finite interval agrees with the closed form.
        let q = crate::quadrature::integrate(
            |t| m.eval(t) / t,
            1e-6,
            a,
            crate::quadrature::Tolerance {
                abs: 1e-14,
                rel: 1e-12,
                max_subdivisions: 500,
            },
        );
        assert!(rel(m.dini_integral(1e-6, a), q.value) < 1e-9);
        // Power p = 1: ∫_0^a dt = a.
        let pw = Modulus::power(1.0).unwrap();
        assert!(rel(pw.dini_integral(0.0, a), a) < 1e-12);
        // LogPlus has no closed form: compare to quadrature.
        let lp = Modulus::log_plus(1.0).unwrap();
        let q = crate::quadrature::integrate(|t| lp.eval(t) / t, 0.0, a, Default::default());
        assert!(rel(lp.dini_integral(0.0, a), q.value) < 1e-9);
    }

    #[test]
    fn dini_inverse_round_trips() {
        let m = Modulus::inv_log(1.0).unwrap();
        let l_hi = 5.0;
        let (levels, v) = m.dini_inverse(l_hi, 1.3).unwrap();
        assert_eq!(levels, 0);
        let back = m.dini_integral_log(v, l_hi);
        assert!(rel(back, 1.3) < 1e-10);
        // Convergent class: the integral is bounded by 1/l_hi.
        let c = Modulus::inv_log(2.0).unwrap();
        assert!(c.dini_inverse(l_hi, 0.5).is_none());
        assert!(c.dini_inverse(l_hi, 0.1).is_some());
        // Huge targets on the divergent class stay finite through levels.
        let (levels, v) = m.dini_inverse(l_hi, 1e4).unwrap();
        assert!(levels >= 1 && v.is_finite());
    }

    #[test]
    fn nonlinearity_values() {
        let h = Nonlinearity::new(Modulus::power(1.0).unwrap(), Dim::Two);
        assert!((h.h(0.5) - 0.125).abs() < 1e-16);
        assert_eq!(h.exponent(), 2.0);
        let h1 = Nonlinearity::new(Modulus::inv_log(1.0).unwrap(), Dim::One);
        assert_eq!(h1.h(0.0), 0.0);
        let s = (-2.0f64).exp();
        let h2 = Nonlinearity::new(
            Modulus::inv_log(2.0).unwrap().with_continuation_point(s).unwrap(),
            Dim::Two,
        );
        // e^{-4} · 0.25
        assert!(rel(h2.h(s), 4.578_909_722_183_545e-3) < 1e-12, "{}", h2.h(s));
        assert_eq!(h2.h(-s), h2.h(s));
    }

    #[test]
    fn h_deriv_matches_finite_difference() {
        let h = Nonlinearity::new(Modulus::inv_log(1.0).unwrap(), Dim::One);
        for s in [1e-4, 1e-2, 0.1, 0.5] {
            let a = h.h_deriv(s).unwrap();
            let step = 1e-6 * s;
            let b = (h.h(s + step) - h.h(s - step)) / (2.0 * step);
            assert!(rel(a, b) < 1e-6, "s={s}: {a} vs {b}");
        }
        assert_eq!(h.h_deriv(0.0).unwrap(), 0.0);
    }
}

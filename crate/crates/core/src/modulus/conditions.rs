use super::dini::{classify_dini, DiniReport, DiniSettings};
use super::{Modulus, Nonlinearity};
use crate::error::{invalid, Error, Result};

/// `min(s*, 0.1)`.
pub fn default_s0(m: &Modulus) -> f64 {
    m.continuation_point().min(0.1)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowVariationReport {
    pub s0: f64,
    pub grid: Vec<f64>,
    /// `s^k |μ^{(k)}(s)| / μ(s)` on the grid, for `k = 1, 2`.
    pub ratios: [Vec<f64>; 2],
    pub max_ratio: [f64; 2],
}

impl SlowVariationReport {
    pub fn passes(&self) -> bool {
        self.max_ratio.iter().all(|r| r.is_finite())
    }
}

/// Samples the slow-variation ratios on `grid_size` log-spaced points of
/// `(s0·1e-8, s0]`.
pub fn check_slow_variation(m: &Modulus, s0: f64, grid_size: usize) -> Result<SlowVariationReport> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(invalid(format!("s0 must be positive, got {s0}")));
    }
    if grid_size < 100 {
        return Err(invalid(format!("grid_size must be at least 100, got {grid_size}")));
    }
    let grid = log_grid(s0 * 1e-8, s0, grid_size);
    let mut ratios = [Vec::with_capacity(grid_size), Vec::with_capacity(grid_size)];
    for &s in &grid {
        let mu = m.eval(s);
        if !(mu > 0.0) {
            return Err(Error::Domain(format!(
                "μ({s}) = {mu}: a modulus must be positive away from 0"
            )));
        }
        for k in 1..=2u8 {
            let d = m.scaled_deriv(s, k)?;
            ratios[usize::from(k - 1)].push(d.abs() / mu);
        }
    }
    let max_ratio = [
        ratios[0].iter().copied().fold(0.0, f64::max),
        ratios[1].iter().copied().fold(0.0, f64::max),
    ];
    Ok(SlowVariationReport {
        s0,
        grid,
        ratios,
        max_ratio,
    })
}

/// `(2/n)(1+2/n)μ + 2(1+2/n)sμ' + s²μ''`, so that `h'' = s^{2/n-1}·bracket`.
pub(super) fn bracket(nl: &Nonlinearity, s: f64) -> Result<f64> {
    let m = nl.modulus();
    let q = 2.0 / nl.dim().as_f64();
    let e = nl.exponent();
    Ok(q * e * m.eval(s) + 2.0 * e * m.scaled_deriv(s, 1)? + m.scaled_deriv(s, 2)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub interval: (f64, f64),
    pub grid: Vec<f64>,
    pub bracket: Vec<f64>,
    /// `(bracket - leading)/leading` with `leading = (2/n)(1+2/n)μ`; tends
    /// to zero when `s^k μ^{(k)} = o(μ)`.
    pub correction_ratio: Vec<f64>,
    pub convexity_min: f64,
}

impl ConvexityReport {
    pub fn passes(&self) -> bool {
        self.convexity_min >= -1e-10
    }
}

pub fn check_h_convexity(
    nl: &Nonlinearity,
    interval: (f64, f64),
    grid_size: usize,
) -> Result<ConvexityReport> {
    let (a, b) = interval;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(invalid(format!("interval must satisfy 0 < a < b, got ({a}, {b})")));
    }
    if grid_size < 2 {
        return Err(invalid("grid_size must be at least 2"));
    }
    let grid = log_grid(a, b, grid_size);
    let q = 2.0 / nl.dim().as_f64();
    let mut values = Vec::with_capacity(grid_size);
    let mut corrections = Vec::with_capacity(grid_size);
    for &s in &grid {
        let v = bracket(nl, s)?;
        let leading = q * nl.exponent() * nl.modulus().eval(s);
        values.push(v);
        corrections.push((v - leading) / leading);
    }
    let convexity_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport {
        interval,
        grid,
        bracket: values,
        correction_ratio: corrections,
        convexity_min,
    })
}

/// Slow-variation ratios, Dini classification and convexity of `h`, on the
/// default `s0`.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub slow_variation: SlowVariationReport,
    pub dini: DiniReport,
    pub convexity: ConvexityReport,
}

impl ConditionReport {
    pub fn max_ratio(&self) -> [f64; 2] {
        self.slow_variation.max_ratio
    }

    pub fn convexity_min(&self) -> f64 {
        self.convexity.convexity_min
    }

    pub fn dini_partial_sums(&self) -> &[f64] {
        &self.dini.partial_sums
    }
}

pub fn condition_report(nl: &Nonlinearity, dini: &DiniSettings) -> Result<ConditionReport> {
    let m = nl.modulus();
    let s0 = default_s0(m);
    Ok(ConditionReport {
        slow_variation: check_slow_variation(m, s0, 200)?,
        dini: classify_dini(m, dini)?,
        convexity: check_h_convexity(nl, (s0 * 1e-8, s0), 200)?,
    })
}

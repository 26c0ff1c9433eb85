//! Smooth cut-off weights `ψ_R = η((|x|²+t)/R)^{n+2}`, the space-time
//! functionals `I_R`, `y(r)`, `Y(R)` evaluated on stored trajectories, the
//! finite-`R` blow-up certificate and a weighted Jensen check.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{Dim, GridField, GridSpec};
use crate::modulus::{Modulus, Nonlinearity};
use crate::quadrature::{integrate, trapezoid_weights, Tolerance};
use crate::trajectory::Trajectory;

/// Default lower scale of the certificate.
pub const DEFAULT_R0: f64 = 16.0;

const W_TABLE_PANELS: usize = 4096;
const CALIBRATION_POINTS: usize = 1 << 16;

/// `(η, η', η'')` of the exponential smooth step
/// `η(s) = f(1-s) / (f(1-s) + f(s-1/2))`, `f(τ) = e^{-1/τ}`.
pub fn eta_derivs(s: f64) -> [f64; 3] {
    if s <= 0.5 {
        return [1.0, 0.0, 0.0];
    }
    if s >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let a = 1.0 - s;
    let b = s - 0.5;
    // η = 1/(1 + e^φ)
    let phi = 1.0 / a - 1.0 / b;
    let eta = 1.0 / (1.0 + phi.exp());
    let one_minus = 1.0 / (1.0 + (-phi).exp());
    // η(1-η) without cancellation
    let c = (0.5 * phi).cosh();
    let g = 0.25 / (c * c);
    if g == 0.0 {
        return [eta, 0.0, 0.0];
    }
    let d1 = 1.0 / (a * a) + 1.0 / (b * b);
    let d2 = 2.0 / (a * a * a) - 2.0 / (b * b * b);
    let e1 = -g * d1;
    let e2 = -(e1 * (one_minus - eta) * d1 + g * d2);
    [eta, e1, e2]
}

pub fn eta(s: f64) -> f64 {
    eta_derivs(s)[0]
}

/// `η*`: zero on `[0, 1/2]`, `η` beyond.
pub fn eta_star(s: f64) -> f64 {
    if s <= 0.5 {
        0.0
    } else {
        eta(s)
    }
}

/// Values of the cut-off family at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiWeights {
    pub psi: f64,
    pub psi_star: f64,
    pub dt: f64,
    pub dtt: f64,
    pub lap: f64,
}

impl PsiWeights {
    /// `∂_t²ψ - Δψ - ∂_tψ`.
    pub fn residual(&self) -> f64 {
        self.dtt - self.lap - self.dt
    }
}

/// `ψ_R`, `ψ*_R`, `∂_tψ_R`, `∂_t²ψ_R`, `Δψ_R` at time `t` and `|x|² = r2`.
pub fn psi_weights(t: f64, r2: f64, r: f64, dim: Dim) -> PsiWeights {
    let n = dim.as_usize() as i32;
    let nf = dim.as_f64();
    let z = (r2 + t) / r;
    let [e, e1, e2] = eta_derivs(z);
    let psi = e.powi(n + 2);
    let psi_star = if z <= 0.5 { 0.0 } else { psi };
    if e1 == 0.0 && e2 == 0.0 {
        return PsiWeights {
            psi,
            psi_star,
            dt: 0.0,
            dtt: 0.0,
            lap: 0.0,
        };
    }
    let k = nf + 2.0;
    let en = e.powi(n);
    let en1 = en * e;
    let second = (nf + 1.0) * en * e1 * e1 + en1 * e2;
    let dt = k / r * en1 * e1;
    let dtt = k / (r * r) * second;
    let lap = k * (4.0 * r2 / (r * r) * second + 2.0 * nf / r * en1 * e1);
    PsiWeights {
        psi,
        psi_star,
        dt,
        dtt,
        lap,
    }
}

/// Constants of the cut-off measured on its transition region.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    pub dim: Dim,
    /// Smallest scale the pointwise bound is calibrated for.
    pub r0: f64,
    /// `C` with `|∂_t²ψ_R - Δψ_R - ∂_tψ_R| <= (C/R) (ψ*_R)^{n/(n+2)}` for `R >= r0`.
    pub c: f64,
    pub eta1_max: f64,
    pub eta2_max: f64,
    w_nodes: Vec<f64>,
    w_values: Vec<f64>,
    w_slopes: Vec<f64>,
}

impl CutoffProfile {
    pub fn new(dim: Dim, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(invalid(format!("R0 must be positive, got {r0}")));
        }
        let (c, eta1_max, eta2_max) = calibrate(dim, r0);
        let (w_nodes, w_values, w_slopes) = w_table(dim);
        Ok(Self {
            dim,
            r0,
            c,
            eta1_max,
            eta2_max,
            w_nodes,
            w_values,
            w_slopes,
        })
    }

    /// `W(z) = ∫_z^∞ η*(s)^{n+2} s^{-1} ds`, from a Hermite table.
    pub fn inner_integral(&self, z: f64) -> f64 {
        if z >= 1.0 {
            return 0.0;
        }
        if z <= 0.5 {
            return self.w_values[0];
        }
        let h = self.w_nodes[1] - self.w_nodes[0];
        let j = (((z - 0.5) / h) as usize).min(W_TABLE_PANELS - 1);
        let x0 = self.w_nodes[j];
        let u = (z - x0) / h;
        let (y0, y1) = (self.w_values[j], self.w_values[j + 1]);
        let (m0, m1) = (self.w_slopes[j] * h, self.w_slopes[j + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1
    }

    /// Scans the space-time points `(t, x)` of a grid and a time list and
    /// compares the weight residual against `(C/R)(ψ*_R)^{n/(n+2)}`.
    pub fn pointwise_check(&self, spec: &GridSpec, times: &[f64], r: f64) -> Result<PointwiseCheck> {
        if spec.dim() != self.dim {
            return Err(Error::GridMismatch("grid dimension differs from the profile".into()));
        }
        if r < self.r0 {
            return Err(invalid(format!("R = {r} is below R0 = {}", self.r0)));
        }
        let n = self.dim.as_usize() as i32;
        let r2 = spec.radius_squared();
        let mut out = PointwiseCheck {
            r,
            c: self.c,
            points: 0,
            transition_points: 0,
            max_ratio: 0.0,
            violations: 0,
        };
        for &t in times {
            for &q in &r2 {
                let w = psi_weights(t, q, r, self.dim);
                out.points += 1;
                let res = w.residual().abs();
                let z = (q + t) / r;
                if z <= 0.5 || z >= 1.0 {
                    if res != 0.0 {
                        out.violations += 1;
                    }
                    continue;
                }
                // (ψ*)^{n/(n+2)} = η^n, taken directly so that η^{n+2}
                // underflowing near z = 1 does not matter.
                let bound_base = eta(z).powi(n) / r;
                out.transition_points += 1;
                if bound_base > 0.0 {
                    out.max_ratio = out.max_ratio.max(res / bound_base);
                }
                if res > self.c * bound_base * (1.0 + 1e-9) {
                    out.violations += 1;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseCheck {
    pub r: f64,
    pub c: f64,
    pub points: usize,
    pub transition_points: usize,
    /// Largest observed `R·|residual| / (ψ*_R)^{n/(n+2)}`.
    pub max_ratio: f64,
    pub violations: usize,
}

impl PointwiseCheck {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

/// `R·|residual|/η^n` at `z` is `|A(1/R - 4w) - B|` with `w = |x|²/R ∈ [0, z]`;
/// being affine in `(1/R, w)` its maximum sits at a corner of the box.
fn corner_max(dim: Dim, r0: f64, z: f64) -> f64 {
    let nf = dim.as_f64();
    let [e, e1, e2] = eta_derivs(z);
    let a = (nf + 2.0) * ((nf + 1.0) * e1 * e1 + e * e2);
    let b = (2.0 * nf + 1.0) * (nf + 2.0) * e * e1;
    let inv = 1.0 / r0;
    [
        (-b).abs(),
        (a * inv - b).abs(),
        (-4.0 * a * z - b).abs(),
        (a * (inv - 4.0 * z) - b).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn calibrate(dim: Dim, r0: f64) -> (f64, f64, f64) {
    let m = CALIBRATION_POINTS;
    let z = |i: usize| 0.5 + 0.5 * (i as f64 + 0.5) / m as f64;
    let values: Vec<f64> = (0..m).into_par_iter().map(|i| corner_max(dim, r0, z(i))).collect();
    let (mut e1_max, mut e2_max) = (0.0f64, 0.0f64);
    for i in 0..m {
        let d = eta_derivs(z(i));
        e1_max = e1_max.max(d[1].abs());
        e2_max = e2_max.max(d[2].abs());
    }
    let top = values.iter().copied().fold(0.0, f64::max);
    let mut c = top;
    // Refine every near-maximal local peak by golden-section search.
    for i in 0..m {
        let left = if i == 0 { 0.0 } else { values[i - 1] };
        let right = if i + 1 == m { 0.0 } else { values[i + 1] };
        if values[i] >= 0.9 * top && values[i] >= left && values[i] >= right {
            let lo = if i == 0 { 0.5 } else { z(i - 1) };
            let hi = if i + 1 == m { 1.0 } else { z(i + 1) };
            c = c.max(golden_max(|x| corner_max(dim, r0, x), lo, hi));
        }
    }
    (c, e1_max, e2_max)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2);
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
    }
    best
}

fn w_integrand(dim: Dim) -> impl Fn(f64) -> f64 {
    let n = dim.as_usize() as i32;
    move |s: f64| eta(s).powi(n + 2) / s
}

fn w_table(dim: Dim) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = W_TABLE_PANELS;
    let nodes: Vec<f64> = (0..=m).map(|j| 0.5 + 0.5 * j as f64 / m as f64).collect();
    let f = w_integrand(dim);
    let tol = Tolerance {
        abs: 1e-17,
        rel: 1e-14,
        max_subdivisions: 50,
    };
    let pieces: Vec<f64> = nodes
        .par_windows(2)
        .map(|w| integrate(&f, w[0], w[1], tol).value)
        .collect();
    let mut values = vec![0.0; m + 1];
    for j in (0..m).rev() {
        values[j] = values[j + 1] + pieces[j];
    }
    let slopes = nodes.iter().map(|&z| -f(z)).collect();
    (nodes, values, slopes)
}

/// `W(z)` by adaptive quadrature, independent of the table.
pub fn inner_integral_quad(z: f64, dim: Dim) -> f64 {
    if z >= 1.0 {
        return 0.0;
    }
    let lo = z.max(0.5);
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-13,
        max_subdivisions: 400,
    };
    integrate(w_integrand(dim), lo, 1.0, tol).value
}

/// Measure of `{(τ, ξ) : τ >= 0, 1/2 < |ξ|² + τ < 1}`, so that the support of
/// `ψ*_R` has measure `κ_n R^{(n+2)/2}`.
pub fn kappa(dim: Dim) -> f64 {
    match dim {
        Dim::One => (4.0 - 2f64.sqrt()) / 3.0,
        Dim::Two => 3.0 * std::f64::consts::PI / 8.0,
    }
}

/// Measure of `Q_R = [0, R] × B_{√R}`.
pub fn q_measure(dim: Dim, r: f64) -> f64 {
    let ball = match dim {
        Dim::One => 2.0,
        Dim::Two => std::f64::consts::PI,
    };
    ball * r.powf(0.5 * dim.as_f64() + 1.0)
}

/// Space-time quadrature nodes `(ρ = |x|² + t, m = w·h(|u|))` of a stored
/// trajectory, sorted by `ρ` and truncated at `ρ < r_max`. Time weights are
/// trapezoidal over the stored samples, space weights are the cell volume.
#[derive(Debug, Clone)]
pub struct SpaceTimeMass {
    dim: Dim,
    r_max: f64,
    rho: Vec<f64>,
    mass: Vec<f64>,
    prefix: Vec<f64>,
}

impl SpaceTimeMass {
    pub fn new(traj: &Trajectory, nl: &Nonlinearity, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(invalid(format!("R must be positive, got {r_max}")));
        }
        if nl.dim() != traj.dim() {
            return Err(Error::GridMismatch("nonlinearity and trajectory dimensions differ".into()));
        }
        let states: Vec<_> = traj.states().collect();
        let first = states
            .first()
            .ok_or_else(|| invalid("trajectory carries no stored states"))?;
        if first.t.abs() > 1e-12 {
            return Err(invalid(format!("first stored state is at t = {}, not 0", first.t)));
        }
        let last = states[states.len() - 1].t;
        if last < r_max {
            return Err(Error::Domain(format!(
                "trajectory too short: stored states end at t = {last}, R = {r_max}"
            )));
        }
        let spec = *first.spec();
        if spec.half_length() < r_max.sqrt() {
            return Err(Error::Domain(format!(
                "grid half-length {} does not cover the ball of radius {}",
                spec.half_length(),
                r_max.sqrt()
            )));
        }
        for s in &states {
            spec.check_same(s.spec())?;
        }
        let times: Vec<f64> = states.iter().map(|s| s.t).collect();
        let wt = trapezoid_weights(&times);
        let dv = spec.cell_volume();
        let r2 = spec.radius_squared();
        let mut nodes = Vec::new();
        for (s, w) in states.iter().zip(wt) {
            if s.t >= r_max {
                break;
            }
            for (&q, &u) in r2.iter().zip(s.u.values()) {
                let rho = q + s.t;
                if rho < r_max {
                    let m = w * dv * nl.h(u);
                    if !m.is_finite() {
                        return Err(Error::NonFinite { index: 0 });
                    }
                    if m > 0.0 {
                        nodes.push((rho, m));
                    }
                }
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (rho, mass): (Vec<f64>, Vec<f64>) = nodes.into_iter().unzip();
        let mut prefix = Vec::with_capacity(mass.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for m in &mass {
            acc += m;
            prefix.push(acc);
        }
        Ok(Self {
            dim: traj.dim(),
            r_max,
            rho,
            mass,
            prefix,
        })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r <= self.r_max) {
            return Err(invalid(format!("R = {r} outside (0, {}]", self.r_max)));
        }
        Ok(())
    }

    fn range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        self.rho.partition_point(|&v| v <= lo)..self.rho.partition_point(|&v| v < hi)
    }

    /// `I_R = ∫_{Q_R} h(|u|) ψ_R`.
    pub fn i_r(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let n = self.dim.as_usize() as i32;
        let half = self.rho.partition_point(|&v| v <= 0.5 * r);
        let mut total = self.prefix[half];
        for i in self.range(0.5 * r, r) {
            total += self.mass[i] * eta(self.rho[i] / r).powi(n + 2);
        }
        Ok(total)
    }

    /// `y(r) = ∫ h(|u|) ψ*_r`.
    pub fn y(&self, r: f64) -> Result<f64> {
        self.check_r(r)?;
        let n = self.dim.as_usize() as i32;
        Ok(self
            .range(0.5 * r, r)
            .map(|i| self.mass[i] * eta(self.rho[i] / r).powi(n + 2))
            .sum())
    }

    /// `Y(R) = ∫_0^R y(r) r^{-1} dr`, with the `r`-integral done first and
    /// exactly for every node: `Y(R) = Σ m W(ρ/R)`.
    pub fn big_y(&self, r: f64, profile: &CutoffProfile) -> Result<f64> {
        self.check_r(r)?;
        if profile.dim != self.dim {
            return Err(Error::GridMismatch("profile dimension differs".into()));
        }
        // ρ = 0 never enters ψ*_r.
        let start = self.rho.partition_point(|&v| v <= 0.0);
        let half = self.rho.partition_point(|&v| v <= 0.5 * r);
        let mut total = (self.prefix[half] - self.prefix[start]) * profile.inner_integral(0.0);
        for i in self.range(0.5 * r, r) {
            total += self.mass[i] * profile.inner_integral(self.rho[i] / r);
        }
        Ok(total)
    }

    /// `Y(R)` integrating `y(r)/r` in `ln r` by adaptive quadrature between
    /// the jump points `r = 2ρ`. Slow; meant as a cross-check on small data.
    pub fn big_y_by_r(&self, r: f64, rel_tol: f64) -> Result<f64> {
        self.check_r(r)?;
        let start = self.rho.partition_point(|&v| v <= 0.0);
        if start == self.rho.len() || self.rho[start] >= r {
            return Ok(0.0);
        }
        let lo = self.rho[start].ln();
        let hi = r.ln();
        let mut cuts: Vec<f64> = self.rho[start..]
            .iter()
            .map(|&v| (2.0 * v).ln())
            .filter(|&c| c > lo && c < hi)
            .collect();
        cuts.dedup();
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        let tol = Tolerance {
            abs: 0.0,
            rel: rel_tol,
            max_subdivisions: 100,
        };
        let f = |l: f64| self.y(l.exp()).unwrap_or(0.0);
        Ok(edges
            .par_windows(2)
            .map(|w| if w[1] > w[0] { integrate(f, w[0], w[1], tol).value } else { 0.0 })
            .sum())
    }
}

/// `I_R`, `y(R)` and `Y(R)` on an increasing grid of scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Functionals {
    pub r_grid: Vec<f64>,
    pub i_r: Vec<f64>,
    pub y: Vec<f64>,
    pub big_y: Vec<f64>,
    /// `|Q_R|`.
    pub q_measure: Vec<f64>,
}

impl Functionals {
    /// Largest `Y(R) / (log 2 · I_R)` over the grid (0 where both vanish).
    pub fn max_bound_ratio(&self) -> f64 {
        self.big_y
            .iter()
            .zip(&self.i_r)
            .map(|(&y, &i)| if y == 0.0 { 0.0 } else { y / (LN_2 * i) })
            .fold(0.0, f64::max)
    }

    /// `Y(R) <= log 2 · I_R` at every scale, up to rounding.
    pub fn bound_holds(&self) -> bool {
        self.big_y
            .iter()
            .zip(&self.i_r)
            .all(|(&y, &i)| y <= LN_2 * i * (1.0 + 1e-12) + 1e-300)
    }

    pub fn y_monotone(&self) -> bool {
        self.big_y.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
    }
}

fn check_r_grid(r_grid: &[f64]) -> Result<f64> {
    if r_grid.is_empty() {
        return Err(invalid("empty R grid"));
    }
    if r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("R grid must be positive and strictly increasing"));
    }
    Ok(r_grid[r_grid.len() - 1])
}

/// `I_R` for one scale: trapezoid in time over the stored samples, Riemann
/// sum in space.
pub fn functional_ir(traj: &Trajectory, nl: &Nonlinearity, r: f64) -> Result<f64> {
    SpaceTimeMass::new(traj, nl, r)?.i_r(r)
}

pub fn functional_y(
    traj: &Trajectory,
    nl: &Nonlinearity,
    profile: &CutoffProfile,
    r_grid: &[f64],
) -> Result<Functionals> {
    let r_max = check_r_grid(r_grid)?;
    let mass = SpaceTimeMass::new(traj, nl, r_max)?;
    functionals_from_mass(&mass, profile, r_grid)
}

pub fn functionals_from_mass(
    mass: &SpaceTimeMass,
    profile: &CutoffProfile,
    r_grid: &[f64],
) -> Result<Functionals> {
    check_r_grid(r_grid)?;
    let rows: Vec<(f64, f64, f64)> = r_grid
        .par_iter()
        .map(|&r| Ok((mass.i_r(r)?, mass.y(r)?, mass.big_y(r, profile)?)))
        .collect::<Result<_>>()?;
    let (mut i_r, mut y, mut big_y) = (Vec::new(), Vec::new(), Vec::new());
    for (a, b, c) in rows {
        i_r.push(a);
        y.push(b);
        big_y.push(c);
    }
    Ok(Functionals {
        r_grid: r_grid.to_vec(),
        i_r,
        y,
        big_y,
        q_measure: r_grid.iter().map(|&r| q_measure(mass.dim, r)).collect(),
    })
}

/// Scale `R` at which the left side reaches the right side, written as
/// `log R = (2/n)(ℓ - log(1/c₂))` with `ℓ = exp^{(levels)}(value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub levels: u32,
    pub value: f64,
    /// `log R` when representable.
    pub ln_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub dim: Dim,
    pub r0: f64,
    pub y_r0: f64,
    /// Pointwise weight constant.
    pub c: f64,
    /// Support measure factor of `ψ*`.
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    /// `-∫(g+φ)ψ_{R0}(0) + ∫φ ∂_tψ_{R0}(0)`; non-positive for large `R0`.
    pub data_term: f64,
    pub r_grid: Vec<f64>,
    /// `c₁ ∫_{R0}^R μ(c₂ s^{-n/2}) s^{-1} ds` on `r_grid`.
    pub lhs: Vec<f64>,
    /// Limit of the left side as `R → ∞` (infinite for divergent moduli).
    pub lhs_limit: f64,
    /// `Y(R0)^{-2/n}`.
    pub rhs: f64,
    pub witness: Option<Witness>,
}

impl Certificate {
    /// True when the left side exceeds the right side at some finite `R`.
    pub fn contradicts_global_existence(&self) -> bool {
        self.witness.is_some()
    }

    pub fn verdict(&self) -> String {
        match self.witness {
            None => format!(
                "no witness: left side bounded by {:.6e} <= {:.6e}",
                self.lhs_limit, self.rhs
            ),
            Some(Witness { ln_r: Some(l), .. }) => {
                format!("witness: left side exceeds right side at log R = {l:.6e}")
            }
            Some(Witness { levels, value, .. }) => format!(
                "witness: left side exceeds right side at log R ~ (2/n) exp^({levels})({value:.6e})"
            ),
        }
    }
}

/// Evaluates both sides of the integrated differential inequality for `Y`,
/// with `c₂ = Y(R0)/(C κ log 2)` and
/// `c₁ = κ / ((n/2)(C κ log 2)^{(n+2)/n})`, and searches for the scale at
/// which a global solution would violate it.
pub fn blowup_certificate(
    traj: &Trajectory,
    nl: &Nonlinearity,
    profile: &CutoffProfile,
    r_grid: &[f64],
) -> Result<Certificate> {
    let dim = nl.dim();
    if profile.dim != dim {
        return Err(Error::GridMismatch("profile dimension differs".into()));
    }
    let r0 = profile.r0;
    let first = traj
        .states()
        .next()
        .ok_or_else(|| invalid("trajectory carries no stored states"))?;
    let g_mean = first.v.integral();
    // a mean at rounding level relative to ‖g‖₁ counts as zero
    if !(g_mean > 1e-9 * first.v.l1()?) {
        return Err(Error::Domain(format!(
            "initial velocity must have positive mean, got ∫g = {g_mean}"
        )));
    }
    let mass = SpaceTimeMass::new(traj, nl, r0)?;
    let y_r0 = mass.big_y(r0, profile)?;
    if !(y_r0 > 0.0) {
        return Err(Error::Domain("Y(R0) = 0: the solution carries no mass".into()));
    }
    let data_term = data_term(&first.u, &first.v, r0)?;
    certificate_from_y(nl.modulus(), dim, profile, y_r0, data_term, r_grid)
}

fn data_term(phi: &GridField, g: &GridField, r: f64) -> Result<f64> {
    let spec = phi.spec();
    let dim = spec.dim();
    let r2 = spec.radius_squared();
    let mut total = 0.0;
    for ((&q, &a), &b) in r2.iter().zip(phi.values()).zip(g.values()) {
        let w = psi_weights(0.0, q, r, dim);
        total += -(a + b) * w.psi + a * w.dt;
    }
    Ok(total * spec.cell_volume())
}

/// Certificate from a measured `Y(R0)`; see [`blowup_certificate`].
pub fn certificate_from_y(
    m: &Modulus,
    dim: Dim,
    profile: &CutoffProfile,
    y_r0: f64,
    data_term: f64,
    r_grid: &[f64],
) -> Result<Certificate> {
    if !(y_r0 > 0.0 && y_r0.is_finite()) {
        return Err(Error::Domain(format!("Y(R0) must be positive, got {y_r0}")));
    }
    let r0 = profile.r0;
    if r_grid.iter().any(|&r| !(r >= r0)) {
        return Err(invalid("certificate scales must be >= R0"));
    }
    let nf = dim.as_f64();
    let kap = kappa(dim);
    let a = profile.c * kap * LN_2;
    let c2 = y_r0 / a;
    let c1 = kap / (0.5 * nf * a.powf((nf + 2.0) / nf));
    let rhs = y_r0.powf(-2.0 / nf);
    // σ = c₂ s^{-n/2} turns ds/s into (2/n) dσ/σ; in ℓ = log(1/σ) the
    // lower scale sits at ℓ(R) = log(1/c₂) + (n/2) log R.
    let ell = |r: f64| -c2.ln() + 0.5 * nf * r.ln();
    let scale = c1 * 2.0 / nf;
    let l0 = ell(r0);
    let lhs = r_grid
        .iter()
        .map(|&r| scale * m.dini_integral_log(ell(r), l0))
        .collect();
    let lhs_limit = scale * m.dini_integral_log(f64::INFINITY, l0);
    let witness = if lhs_limit > rhs {
        m.dini_inverse(l0, rhs / scale).map(|(levels, value)| {
            let ln_r = if levels == 0 {
                Some((value + c2.ln()) * 2.0 / nf)
            } else {
                None
            };
            Witness { levels, value, ln_r }
        })
    } else {
        None
    };
    Ok(Certificate {
        dim,
        r0,
        y_r0,
        c: profile.c,
        kappa: kap,
        c1,
        c2,
        data_term,
        r_grid: r_grid.to_vec(),
        lhs,
        lhs_limit,
        rhs,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenReport {
    pub lhs: f64,
    pub rhs: f64,
}

impl JensenReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12 * (1.0 + self.rhs.abs())
    }
}

/// `Φ(∫uα/∫α)` against `∫Φ(u)α/∫α` on equally weighted samples.
pub fn jensen_check<F: Fn(f64) -> f64>(phi: F, u: &[f64], alpha: &[f64]) -> Result<JensenReport> {
    if u.len() != alpha.len() {
        return Err(invalid("u and α differ in length"));
    }
    if u.iter().chain(alpha).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite sample"));
    }
    if u.iter().any(|&v| v < 0.0) || alpha.iter().any(|&v| v < 0.0) {
        return Err(invalid("u and α must be non-negative"));
    }
    let total: f64 = alpha.iter().sum();
    if total <= 0.0 {
        return Err(invalid("∫α = 0"));
    }
    let mean: f64 = u.iter().zip(alpha).map(|(a, w)| a * w).sum::<f64>() / total;
    let rhs: f64 = u.iter().zip(alpha).map(|(&a, w)| phi(a) * w).sum::<f64>() / total;
    Ok(JensenReport {
        lhs: phi(mean),
        rhs,
    })
}

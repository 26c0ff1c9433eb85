//! Exact Fourier-multiplier flow of `u_tt - Δu + u_t = 0`.
//!
//! In frequency space `û(t) = K0(|ξ|,t) φ̂ + K1(|ξ|,t) ψ̂` with `K0, K1`
//! built from the roots `λ±` of `λ² + λ + |ξ|² = 0`.

use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{Dim, GridField, GridSpec, Spectral, WaveState};
use crate::quadrature::fit_line;
use crate::trajectory::{NormRecord, SeriesName, Trajectory};

/// Half-width of the band around `|ξ| = 1/2` handled by series expansion.
pub const RESONANT_HALF_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    LowFreq,
    Resonant,
    HighFreq,
}

pub fn regime(xi: f64) -> Regime {
    let xi = xi.abs();
    if (xi - 0.5).abs() < RESONANT_HALF_WIDTH {
        Regime::Resonant
    } else if xi < 0.5 {
        Regime::LowFreq
    } else {
        Regime::HighFreq
    }
}

/// `K0, K1` and their time derivatives at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub k0: f64,
    pub k1: f64,
    pub dk0: f64,
    pub dk1: f64,
}

pub fn multipliers(xi: f64, t: f64) -> Result<Multipliers> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be finite and >= 0, got {t}")));
    }
    if !xi.is_finite() {
        return Err(invalid(format!("frequency must be finite, got {xi}")));
    }
    Ok(multipliers_unchecked(xi.abs(), t))
}

fn multipliers_unchecked(xi: f64, t: f64) -> Multipliers {
    let xi2 = xi * xi;
    // σ = 1/4 - |ξ|², factored to keep relative accuracy near |ξ| = 1/2.
    let sigma = (0.5 - xi) * (0.5 + xi);
    let damp = (-0.5 * t).exp();
    let (k0, k1) = if regime(xi) == Regime::Resonant && sigma.abs() * t * t <= 1.0 {
        let x = sigma * t * t;
        let (mut c, mut s) = (1.0, 1.0);
        let (mut tc, mut ts) = (1.0, 1.0);
        for k in 1..30 {
            let k = f64::from(k);
            tc *= x / ((2.0 * k - 1.0) * (2.0 * k));
            ts *= x / ((2.0 * k) * (2.0 * k + 1.0));
            c += tc;
            s += ts;
            if tc.abs() < 1e-18 && ts.abs() < 1e-18 {
                break;
            }
        }
        (damp * (c + 0.5 * t * s), damp * t * s)
    } else if sigma > 0.0 {
        let w = sigma.sqrt();
        if w * t < 20.0 {
            let sh = (w * t).sinh() / w;
            (damp * ((w * t).cosh() + 0.5 * sh), damp * sh)
        } else {
            let lp = -xi2 / (0.5 + w);
            let lm = -0.5 - w;
            let (ep, em) = ((lp * t).exp(), (lm * t).exp());
            let k1 = (ep - em) / (2.0 * w);
            (0.5 * (ep + em) + 0.5 * k1, k1)
        }
    } else {
        let w = (-sigma).sqrt();
        let sn = (w * t).sin() / w;
        (damp * ((w * t).cos() + 0.5 * sn), damp * sn)
    };
    Multipliers {
        k0,
        k1,
        dk0: -xi2 * k1,
        dk1: k0 - k1,
    }
}

/// Roots of `λ² + λ + |ξ|² = 0` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbol {
    pub xi: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub regime: Regime,
}

impl Symbol {
    pub fn new(xi: f64) -> Self {
        let xi = xi.abs();
        let sigma = (0.5 - xi) * (0.5 + xi);
        let (lp, lm) = if sigma >= 0.0 {
            let w = sigma.sqrt();
            (
                Complex64::new(-xi * xi / (0.5 + w), 0.0),
                Complex64::new(-0.5 - w, 0.0),
            )
        } else {
            let w = (-sigma).sqrt();
            (Complex64::new(-0.5, w), Complex64::new(-0.5, -w))
        };
        Self {
            xi,
            lambda_plus: lp,
            lambda_minus: lm,
            regime: regime(xi),
        }
    }
}

/// Symbols at every frequency of a grid (flattened like the field).
pub fn symbols(spec: &GridSpec) -> Vec<Symbol> {
    spec.xi_squared(false)
        .into_iter()
        .map(|x2| Symbol::new(x2.sqrt()))
        .collect()
}

type Table = Arc<Vec<Multipliers>>;

/// Exact linear propagator on one grid, caching multiplier tables per step.
#[derive(Debug)]
pub struct LinearPropagator {
    spectral: Spectral,
    xi: Vec<f64>,
    mirror: Vec<usize>,
    cache: RwLock<Vec<(f64, Table)>>,
}

impl Clone for LinearPropagator {
    fn clone(&self) -> Self {
        Self {
            spectral: self.spectral.clone(),
            xi: self.xi.clone(),
            mirror: self.mirror.clone(),
            cache: RwLock::new(Vec::new()),
        }
    }
}

const CACHE_SLOTS: usize = 4;

impl LinearPropagator {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.points();
        let mirror = match spec.dim() {
            Dim::One => (0..n).map(|k| (n - k) % n).collect(),
            Dim::Two => (0..n * n)
                .map(|i| ((n - i / n) % n) * n + (n - i % n) % n)
                .collect(),
        };
        Self {
            spectral: Spectral::new(spec),
            xi: spec.xi_squared(false).into_iter().map(f64::sqrt).collect(),
            mirror,
            cache: RwLock::new(Vec::new()),
        }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn spec(&self) -> &GridSpec {
        self.spectral.spec()
    }

    /// Multiplier table at every frequency for elapsed time `t`.
    pub fn table(&self, t: f64) -> Table {
        if let Some((_, tab)) = self
            .cache
            .read()
            .expect("cache lock")
            .iter()
            .find(|(key, _)| *key == t)
        {
            return Arc::clone(tab);
        }
        let tab: Table = Arc::new(self.xi.par_iter().map(|&x| multipliers_unchecked(x, t)).collect());
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() >= CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push((t, Arc::clone(&tab)));
        tab
    }

    /// Transforms `(u, v)` jointly as `u + iv` and splits the result into
    /// `(û, v̂)` by Hermitian symmetry.
    pub fn forward_pair(&self, u: &[f64], v: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut w: Vec<Complex64> = u.iter().zip(v).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.spectral.forward_in_place(&mut w);
        let half = Complex64::new(0.5, 0.0);
        let minus_half_i = Complex64::new(0.0, -0.5);
        self.mirror
            .par_iter()
            .enumerate()
            .map(|(k, &m)| {
                let a = w[k];
                let b = w[m].conj();
                ((a + b) * half, (a - b) * minus_half_i)
            })
            .unzip()
    }

    /// Inverse of [`LinearPropagator::forward_pair`] for spectra of real fields.
    pub fn inverse_pair(&self, uh: &[Complex64], vh: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut w: Vec<Complex64> = uh.iter().zip(vh).map(|(a, b)| a + i * b).collect();
        self.spectral.inverse_in_place(&mut w);
        w.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// `(û, v̂) ↦ (K0 û + K1 v̂, K0' û + K1' v̂)` in place.
    pub fn apply(&self, table: &[Multipliers], uh: &mut [Complex64], vh: &mut [Complex64]) {
        uh.par_iter_mut()
            .zip(vh.par_iter_mut())
            .zip(table.par_iter())
            .for_each(|((a, b), m)| {
                let (u0, v0) = (*a, *b);
                *a = u0 * m.k0 + v0 * m.k1;
                *b = u0 * m.dk0 + v0 * m.dk1;
            });
    }

    /// Evolves `state` by `dt` under the linear flow.
    pub fn propagate(&self, state: &WaveState, dt: f64) -> Result<WaveState> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be finite and >= 0, got {dt}")));
        }
        state.u.spec().check_same(self.spec())?;
        state.u.check_finite()?;
        state.v.check_finite()?;
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let (mut uh, mut vh) = self.forward_pair(state.u.values(), state.v.values());
        self.apply(&self.table(dt), &mut uh, &mut vh);
        let (u, v) = self.inverse_pair(&uh, &vh);
        let spec = *self.spec();
        WaveState::new(
            state.t + dt,
            GridField::from_values(spec, u)?,
            GridField::from_values(spec, v)?,
        )
    }
}

/// `t_i = (1 + t_max)^{i/(count-1)} - 1`, starting at 0.
pub fn log_times(t_max: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let top = (1.0 + t_max).ln();
    (0..count)
        .map(|i| {
            if i + 1 == count {
                t_max
            } else {
                (top * i as f64 / (count - 1) as f64).exp() - 1.0
            }
        })
        .collect()
}

/// Samples the linear solution at `times` (increasing), each evaluated
/// directly from the initial data.
pub fn linear_trajectory(
    prop: &LinearPropagator,
    data: &WaveState,
    times: &[f64],
    keep_states: bool,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new(prop.spec().dim());
    for &t in times {
        if t < data.t {
            return Err(invalid(format!("sample time {t} precedes the data time {}", data.t)));
        }
        let s = prop.propagate(data, t - data.t)?;
        let norms = NormRecord::measure(&s, prop.spectral(), 0.0)?;
        traj.push(norms, keep_states.then_some(s))?;
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub norm: SeriesName,
    pub window: (f64, f64),
    /// Slope of `log ‖u‖` against `log(1+t)`.
    pub exponent: f64,
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares decay exponent over samples with `t ∈ [t_min, t_max]`.
/// Requires at least 20 samples spanning a decade of `1+t`.
pub fn decay_fit(traj: &Trajectory, norm: SeriesName, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let (x, y): (Vec<f64>, Vec<f64>) = traj
        .samples()
        .iter()
        .filter(|s| s.norms.t >= lo && s.norms.t <= hi)
        .map(|s| ((1.0 + s.norms.t).ln(), s.norms.get(norm)))
        .unzip();
    if x.len() < 20 {
        return Err(invalid(format!(
            "decay fit needs >= 20 samples in [{lo}, {hi}], found {}",
            x.len()
        )));
    }
    let span = x[x.len() - 1] - x[0];
    if span < std::f64::consts::LN_10 * (1.0 - 1e-9) {
        return Err(invalid(format!("window [{lo}, {hi}] spans less than a decade of 1+t")));
    }
    if let Some(i) = y.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "{norm} is not positive at sample {i}; cannot fit a power law"
        )));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&x, &ly).ok_or_else(|| Error::Domain("degenerate fit".into()))?;
    Ok(DecayFit {
        norm,
        window,
        exponent: fit.slope,
        residual: fit.residual,
        samples: x.len(),
    })
}

/// Decay exponents predicted for nonzero-mean data: `-n/2` (L∞),
/// `-n/4` (L²), `-(n+2)/4` (Ḣ¹).
pub fn expected_exponent(dim: Dim, norm: SeriesName) -> Option<f64> {
    let n = dim.as_f64();
    match norm {
        SeriesName::Linf => Some(-n / 2.0),
        SeriesName::L2 => Some(-n / 4.0),
        SeriesName::H1dot => Some(-(n + 2.0) / 4.0),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataSpec, Shape};

    #[test]
    fn mean_mode_multipliers() {
        for t in [0.0, 0.5, 3.0, 40.0] {
            let m = multipliers(0.0, t).unwrap();
            assert!((m.k0 - 1.0).abs() < 1e-15);
            assert!((m.k1 - (1.0 - (-t).exp())).abs() < 1e-15);
        }
        assert!(multipliers(1.0, -1.0).is_err());
    }

    #[test]
    fn resonant_limit_and_continuity() {
        for t in [0.1, 1.0, 10.0, 100.0] {
            let m = multipliers(0.5, t).unwrap();
            let e = (-0.5 * t).exp();
            assert!((m.k1 - t * e).abs() < 1e-15 * (1.0 + t));
            assert!((m.k0 - (1.0 + 0.5 * t) * e).abs() < 1e-15 * (1.0 + t));
            for d in [1e-6, RESONANT_HALF_WIDTH * (1.0 - 1e-9), RESONANT_HALF_WIDTH * (1.0 + 1e-9)] {
                for s in [-1.0, 1.0] {
                    let a = multipliers(0.5 + s * d, t).unwrap();
                    let inner = multipliers(0.5 + s * d * 0.999_999, t).unwrap();
                    assert!((a.k0 - inner.k0).abs() < 1e-8, "t={t} d={d}");
                    assert!((a.k1 - inner.k1).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn symbols_satisfy_vieta() {
        let spec = GridSpec::new(Dim::One, 30.0, 256).unwrap();
        for s in symbols(&spec).into_iter().chain([Symbol::new(0.5), Symbol::new(0.49999)]) {
            let sum = s.lambda_plus + s.lambda_minus;
            let prod = s.lambda_plus * s.lambda_minus;
            assert!((sum + 1.0).norm() < 1e-12);
            assert!((prod - s.xi * s.xi).norm() < 1e-12 * (1.0 + s.xi * s.xi));
            assert!(s.lambda_plus.re <= 0.0 && s.lambda_minus.re <= 0.0);
        }
    }

    #[test]
    fn multipliers_match_root_formula_away_from_resonance() {
        for xi in [0.1, 0.3, 0.7, 3.0] {
            let s = Symbol::new(xi);
            for t in [0.3, 2.0, 15.0] {
                let m = multipliers(xi, t).unwrap();
                let (lp, lm) = (s.lambda_plus, s.lambda_minus);
                let (ep, em) = ((lp * t).exp(), (lm * t).exp());
                let k1 = (ep - em) / (lp - lm);
                let k0 = (lp * em - lm * ep) / (lp - lm);
                assert!((k1.re - m.k1).abs() < 1e-12 && k1.im.abs() < 1e-12);
                assert!((k0.re - m.k0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn high_frequency_envelope() {
        for i in 0..2000 {
            let xi = 0.5 + 0.01 * f64::from(i);
            for t in [0.5, 5.0, 50.0] {
                let m = multipliers(xi, t).unwrap();
                let env = (-0.5 * t).exp() * (1.0 + t);
                assert!(m.k0.abs() <= env && m.k1.abs() <= env, "xi={xi} t={t}");
            }
        }
    }

    #[test]
    fn pair_transform_round_trips() {
        let spec = GridSpec::new(Dim::Two, 5.0, 32).unwrap();
        let p = LinearPropagator::new(spec);
        let u = GridField::from_fn(spec, |x| (-x[0] * x[0]).exp() * (x[1] * 0.7).cos());
        let v = GridField::from_fn(spec, |x| x[0] * (-x[1] * x[1] - x[0] * x[0]).exp());
        let (uh, vh) = p.forward_pair(u.values(), v.values());
        let direct = p.spectral().forward(u.values());
        let err = uh.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let (u2, v2) = p.inverse_pair(&uh, &vh);
        let eu = u2.iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ev = v2.iter().zip(v.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(eu < 1e-14 && ev < 1e-14);
    }

    #[test]
    fn identity_and_single_mode() {
        let l = 10.0;
        let spec = GridSpec::new(Dim::One, l, 64).unwrap();
        let p = LinearPropagator::new(spec);
        let xi = 3.0 * std::f64::consts::PI / l;
        let u = GridField::from_fn(spec, |x| (xi * x[0]).cos());
        let s = WaveState::new(0.0, u, GridField::zeros(spec)).unwrap();
        assert_eq!(p.propagate(&s, 0.0).unwrap(), s);
        let t = 2.5;
        let out = p.propagate(&s, t).unwrap();
        let k0 = multipliers(xi, t).unwrap().k0;
        let want = GridField::from_fn(spec, |x| k0 * (xi * x[0]).cos());
        assert!(out.u.max_abs_diff(&want).unwrap() < 1e-13);
        assert_eq!(out.t, t);
    }

    #[test]
    fn mass_law_and_energy_dissipation() {
        let spec = GridSpec::new(Dim::One, 40.0, 1024).unwrap();
        let p = LinearPropagator::new(spec);
        let data = DataSpec {
            epsilon: 1.0,
            ..DataSpec::default()
        }
        .build(p.spectral())
        .unwrap();
        let mass = data.v.integral();
        let times: Vec<f64> = (0..=30).map(|i| f64::from(i)).collect();
        let tr = linear_trajectory(&p, &data, &times, true).unwrap();
        for s in tr.states() {
            let want = mass * (1.0 - (-s.t).exp());
            assert!((s.u.integral() - want).abs() < 1e-8);
        }
        let e = tr.series(SeriesName::Energy);
        assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn decay_fit_validates_window() {
        let spec = GridSpec::new(Dim::One, 20.0, 64).unwrap();
        let p = LinearPropagator::new(spec);
        let data = DataSpec {
            shape: Shape::Gaussian,
            ..DataSpec::default()
        }
        .build(p.spectral())
        .unwrap();
        let tr = linear_trajectory(&p, &data, &log_times(100.0, 40), false).unwrap();
        assert!(decay_fit(&tr, SeriesName::Linf, (50.0, 100.0)).is_err());
        assert!(decay_fit(&tr, SeriesName::Linf, (1.0, 100.0)).is_ok());
        // u(0) = 0 for velocity data: no power law through t = 0.
        assert!(decay_fit(&tr, SeriesName::Linf, (0.0, 100.0)).is_err());
    }
}

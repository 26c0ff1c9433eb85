//! `u_tt - Δu + u_t = h(u)` by Strang splitting around the exact linear flow.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::data::DataSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridField, WaveState};
use crate::linear::LinearPropagator;
use crate::modulus::Nonlinearity;
use crate::trajectory::{NormRecord, Outcome, Trajectory};

/// Right-hand side `h(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    /// `|u|^{1+2/n} μ(|u|)`.
    Critical(Nonlinearity),
    /// `|u|^q`, for engine checks in the sub-critical regime.
    Power { exponent: f64 },
}

impl Forcing {
    #[inline]
    pub fn h(&self, s: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Critical(nl) => nl.h(s),
            Forcing::Power { exponent } => s.abs().powf(*exponent),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        if let Forcing::Power { exponent } = self {
            if !(exponent.is_finite() && *exponent > 1.0) {
                return Err(invalid(format!("power forcing needs exponent > 1, got {exponent}")));
            }
        }
        Ok(())
    }

    /// `h(u)` pointwise.
    pub fn apply(&self, u: &GridField) -> GridField {
        let mut out = u.clone();
        out.values_mut().par_iter_mut().for_each(|v| *v = self.h(*v));
        out
    }

    /// `‖h(u)‖_{L¹}`.
    pub fn l1(&self, u: &GridField) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        u.values().par_iter().map(|&v| self.h(v).abs()).sum::<f64>() * u.spec().cell_volume()
    }
}

impl fmt::Display for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("zero"),
            Forcing::Critical(nl) => write!(f, "{}", nl.modulus()),
            Forcing::Power { exponent } => write!(f, "|u|^{exponent}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub forcing: Forcing,
    pub dt: f64,
    pub t_max: f64,
    /// `U_max`: the run is declared blown up once `‖u‖_∞` exceeds it.
    pub blowup_threshold: f64,
    pub dt_min: f64,
    /// Time between recorded samples.
    pub sample_interval: f64,
    /// Step halving on fast growth only applies once `‖u‖_∞` reaches this
    /// level, so that the linear build-up from `u(0) = 0` does not trigger it.
    pub growth_floor: f64,
    pub keep_states: bool,
}

impl EvolveConfig {
    pub fn new(forcing: Forcing, dt: f64, t_max: f64) -> Self {
        Self {
            forcing,
            dt,
            t_max,
            blowup_threshold: 1e6,
            dt_min: 1e-10,
            sample_interval: 1.0,
            growth_floor: 1.0,
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.forcing.validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_max", self.t_max)?;
        positive("dt_min", self.dt_min)?;
        positive("sample_interval", self.sample_interval)?;
        if !(self.blowup_threshold > 1.0) {
            return Err(invalid(format!(
                "blow-up threshold must exceed 1, got {}",
                self.blowup_threshold
            )));
        }
        if self.dt_min > self.dt {
            return Err(invalid("dt_min exceeds dt"));
        }
        if !(self.growth_floor >= 0.0) {
            return Err(invalid("growth floor must be >= 0"));
        }
        Ok(())
    }
}

fn kick(forcing: &Forcing, state: &mut WaveState, tau: f64) {
    if forcing.is_zero() {
        return;
    }
    let u = state.u.values();
    state
        .v
        .values_mut()
        .par_iter_mut()
        .zip(u.par_iter())
        .for_each(|(v, &x)| *v += tau * forcing.h(x));
}

/// One Strang step: half kick, exact linear flow over `dt`, half kick.
/// A non-finite result is reported as [`Error::Blowup`] at the start time.
pub fn step(prop: &LinearPropagator, forcing: &Forcing, state: &WaveState, dt: f64) -> Result<WaveState> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    let mut s = state.clone();
    kick(forcing, &mut s, 0.5 * dt);
    let mut s = match prop.propagate(&s, dt) {
        Ok(s) => s,
        Err(Error::NonFinite { .. }) => return Err(Error::Blowup { time: state.t }),
        Err(e) => return Err(e),
    };
    kick(forcing, &mut s, 0.5 * dt);
    if !s.is_finite() {
        return Err(Error::Blowup { time: state.t });
    }
    Ok(s)
}

fn record(prop: &LinearPropagator, forcing: &Forcing, state: &WaveState) -> Result<NormRecord> {
    NormRecord::measure(state, prop.spectral(), forcing.l1(&state.u))
}

/// Integrates from `data` to `t_max`, sampling every `sample_interval`.
pub fn evolve(prop: &LinearPropagator, data: &WaveState, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.validate()?;
    data.spec().check_same(prop.spec())?;
    data.u.check_finite()?;
    data.v.check_finite()?;

    let mut traj = Trajectory::new(prop.spec().dim());
    let mut state = data.clone();
    let t0 = data.t;
    let t_end = t0 + cfg.t_max;
    traj.push(record(prop, &cfg.forcing, &state)?, cfg.keep_states.then(|| state.clone()))?;

    let mut dt = cfg.dt;
    let mut sample_index = 1u64;
    let mut linf = state.u.linf()?;
    // Tolerance for landing on sample times despite rounding.
    let eps = 1e-9 * cfg.dt;
    loop {
        let next_sample = (t0 + sample_index as f64 * cfg.sample_interval).min(t_end);
        if state.t >= t_end - eps {
            break;
        }
        let h = dt.min(next_sample - state.t);
        let next = match step(prop, &cfg.forcing, &state, h) {
            Ok(s) => s,
            Err(Error::Blowup { .. }) => {
                traj.outcome = Outcome::BlewUpAt(state.t);
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        let new_linf = next.u.linf()?;
        if linf >= cfg.growth_floor && new_linf > 2.0 * linf && new_linf <= cfg.blowup_threshold {
            dt *= 0.5;
            if dt < cfg.dt_min {
                traj.outcome = Outcome::StepCollapse(state.t);
                return Ok(traj);
            }
            continue;
        }
        state = next;
        traj.steps += 1;
        linf = new_linf;
        let landed = (state.t - next_sample).abs() <= eps;
        if landed {
            state.t = next_sample;
        }
        if new_linf > cfg.blowup_threshold {
            // Record the last state so the series shows the run-away.
            traj.push(record(prop, &cfg.forcing, &state)?, None)?;
            traj.outcome = Outcome::BlewUpAt(state.t);
            return Ok(traj);
        }
        if landed {
            traj.push(
                record(prop, &cfg.forcing, &state)?,
                cfg.keep_states.then(|| state.clone()),
            )?;
            sample_index += 1;
        }
    }
    traj.outcome = Outcome::CompletedHorizon;
    Ok(traj)
}

/// Running X-norm supremum of a trajectory.
pub fn xnorm(traj: &Trajectory) -> f64 {
    traj.xnorm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `d_k = ‖u^{k+1} - u^k‖_{X(T)}` for `k = 0, 1, …`.
    pub differences: Vec<f64>,
    /// `d_{k+1}/d_k` wherever `d_k` is above roundoff; `[0]` when the first
    /// correction already vanishes.
    pub factors: Vec<f64>,
    /// `‖u^K(T) - u_split(T)‖_∞` against the Strang solution with the same `dt`.
    pub mismatch: f64,
    pub window: f64,
    pub steps: usize,
}

impl PicardReport {
    pub fn max_factor(&self) -> f64 {
        self.factors.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_contractive(&self) -> bool {
        self.max_factor() < 1.0
    }
}

/// X-norm of a difference sampled on a uniform time grid, from spectra.
fn spectral_xnorm(prop: &LinearPropagator, times: &[f64], hats: &[Vec<Complex64>]) -> f64 {
    let spec = prop.spec();
    let n = spec.dim().as_f64();
    let xi2 = spec.xi_squared(true);
    let scale = spec.cell_volume() / spec.len() as f64;
    times
        .par_iter()
        .zip(hats.par_iter())
        .map(|(&t, hat)| {
            let l2 = (hat.iter().map(|z| z.norm_sqr()).sum::<f64>() * scale).sqrt();
            let grad = (hat.iter().zip(&xi2).map(|(z, k)| z.norm_sqr() * k).sum::<f64>() * scale).sqrt();
            let phys = prop.spectral().inverse_real(hat.clone());
            let linf = phys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = 1.0 + t;
            s.powf(n / 4.0) * l2 + s.powf((n + 2.0) / 4.0) * grad + s.powf(n / 2.0) * linf
        })
        .reduce(|| 0.0, f64::max)
}

/// Picard iteration of the Duhamel map on `[0, window]`, with the time
/// integral discretised by the composite trapezoid rule on the stepper's grid.
pub fn picard_verify(
    prop: &LinearPropagator,
    data: &WaveState,
    cfg: &EvolveConfig,
    window: f64,
    iterations: usize,
) -> Result<PicardReport> {
    cfg.validate()?;
    if iterations < 3 {
        return Err(invalid(format!("at least 3 Picard iterations are needed, got {iterations}")));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(invalid(format!("window must be > 0, got {window}")));
    }
    data.spec().check_same(prop.spec())?;
    let steps = (window / cfg.dt).round().max(1.0) as usize;
    let dt = window / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let spec = *prop.spec();

    // Linear part at every node, in frequency space.
    let (u0h, v0h) = prop.forward_pair(data.u.values(), data.v.values());
    let lin: Vec<Vec<Complex64>> = times
        .iter()
        .map(|&t| {
            let tab = prop.table(t);
            u0h.iter()
                .zip(&v0h)
                .zip(tab.iter())
                .map(|((a, b), m)| a * m.k0 + b * m.k1)
                .collect()
        })
        .collect();
    // K1 at every lag m·dt.
    let lags: Vec<Vec<f64>> = (0..=steps)
        .map(|m| prop.table(m as f64 * dt).iter().map(|k| k.k1).collect())
        .collect();

    let to_phys = |hat: &Vec<Complex64>| -> Result<GridField> {
        GridField::from_values(spec, prop.spectral().inverse_real(hat.clone()))
    };

    let mut current: Vec<Vec<Complex64>> = lin.clone();
    let mut differences = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let forcing_hat: Vec<Vec<Complex64>> = current
            .par_iter()
            .map(|hat| {
                let u = to_phys(hat)?;
                u.check_finite()?;
                Ok(prop.spectral().forward(cfg.forcing.apply(&u).values()))
            })
            .collect::<Result<_>>()?;
        let next: Vec<Vec<Complex64>> = (0..=steps)
            .into_par_iter()
            .map(|j| {
                let mut acc = lin[j].clone();
                if j == 0 {
                    return acc;
                }
                // Trapezoid over s_i ∈ [0, t_j].
                for i in 0..=j {
                    let w = if i == 0 || i == j { 0.5 * dt } else { dt };
                    let k1 = &lags[j - i];
                    for ((a, f), k) in acc.iter_mut().zip(&forcing_hat[i]).zip(k1) {
                        *a += f * (w * k);
                    }
                }
                acc
            })
            .collect();
        let diff: Vec<Vec<Complex64>> = next
            .iter()
            .zip(&current)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        differences.push(spectral_xnorm(prop, &times, &diff));
        current = next;
    }

    let scale = spectral_xnorm(prop, &times, &current).max(f64::MIN_POSITIVE);
    let floor = 1e-13 * scale;
    let mut factors: Vec<f64> = differences
        .windows(2)
        .filter(|w| w[0] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    if factors.is_empty() && differences[0] <= floor {
        factors.push(0.0);
    }

    let mut split = data.clone();
    for _ in 0..steps {
        split = step(prop, &cfg.forcing, &split, dt)?;
    }
    let picard_end = to_phys(&current[steps])?;
    let mismatch = picard_end.max_abs_diff(&split.u)?;

    Ok(PicardReport {
        differences,
        factors,
        mismatch,
        window,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub outcome: Outcome,
    pub t_est: f64,
    pub forcing_integral: f64,
    pub final_linf: f64,
}

/// Runs one evolution per amplitude, in parallel; rows come back in the
/// order of `epsilons`.
pub fn lifespan_sweep(
    prop: &LinearPropagator,
    data: &DataSpec,
    cfg: &EvolveConfig,
    epsilons: &[f64],
) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(invalid("empty amplitude list"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(invalid("amplitudes must be positive"));
    }
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("amplitudes must increase"));
    }
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let d = DataSpec { epsilon, ..*data };
            let init = d.build(prop.spectral())?;
            let traj = evolve(prop, &init, cfg)?;
            Ok(SweepRow {
                epsilon,
                outcome: traj.outcome,
                t_est: traj.outcome.t_est(),
                forcing_integral: traj.forcing_integral(f64::INFINITY),
                final_linf: traj.last_norms().map_or(0.0, |n| n.linf),
            })
        })
        .collect()
}

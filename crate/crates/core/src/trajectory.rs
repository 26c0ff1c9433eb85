use std::fmt;
use std::io::Write;

use crate::error::{invalid, Result};
use crate::grid::{Dim, GridField, Spectral, WaveState};

/// Norms of one sample of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// `‖∇u‖_{L²}`
    pub h1dot: f64,
    /// `½‖u_t‖² + ½‖∇u‖²`
    pub energy: f64,
    /// `‖h(u)‖_{L¹}`; zero for linear runs.
    pub forcing_l1: f64,
}

impl NormRecord {
    pub fn measure(state: &WaveState, spectral: &Spectral, forcing_l1: f64) -> Result<Self> {
        let h1dot = state.u.hdot_norm(spectral, 1)?;
        let vl2 = state.v.l2()?;
        Ok(Self {
            t: state.t,
            l1: state.u.l1()?,
            l2: state.u.l2()?,
            linf: state.u.linf()?,
            h1dot,
            energy: 0.5 * (vl2 * vl2 + h1dot * h1dot),
            forcing_l1,
        })
    }

    /// The weighted sum inside the X-norm supremum,
    /// `(1+τ)^{n/4}‖u‖ + (1+τ)^{(n+2)/4}‖∇u‖ + (1+τ)^{n/2}‖u‖_∞`.
    pub fn xnorm_term(&self, dim: Dim) -> f64 {
        let n = dim.as_f64();
        let s = 1.0 + self.t;
        s.powf(n / 4.0) * self.l2 + s.powf((n + 2.0) / 4.0) * self.h1dot + s.powf(n / 2.0) * self.linf
    }

    pub fn get(&self, name: SeriesName) -> f64 {
        match name {
            SeriesName::L1 => self.l1,
            SeriesName::L2 => self.l2,
            SeriesName::Linf => self.linf,
            SeriesName::H1dot => self.h1dot,
            SeriesName::Energy => self.energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesName {
    L1,
    L2,
    Linf,
    H1dot,
    Energy,
}

impl SeriesName {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesName::L1 => "L1",
            SeriesName::L2 => "L2",
            SeriesName::Linf => "Linf",
            SeriesName::H1dot => "H1dot",
            SeriesName::Energy => "energy",
        }
    }
}

impl fmt::Display for SeriesName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub norms: NormRecord,
    /// Running supremum of the X-norm term up to this sample.
    pub xnorm: f64,
    pub state: Option<WaveState>,
}

/// How a run ended. `BlewUpAt` and `StepCollapse` carry the time of the
/// last finite sample, an upper-detection proxy for the lifespan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    CompletedHorizon,
    BlewUpAt(f64),
    StepCollapse(f64),
}

impl Outcome {
    /// Estimated lifespan; `+∞` when the horizon was reached.
    pub fn t_est(&self) -> f64 {
        match *self {
            Outcome::CompletedHorizon => f64::INFINITY,
            Outcome::BlewUpAt(t) | Outcome::StepCollapse(t) => t,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::CompletedHorizon => "CompletedHorizon",
            Outcome::BlewUpAt(_) => "BlewUpAt",
            Outcome::StepCollapse(_) => "StepCollapse",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::CompletedHorizon => f.write_str("CompletedHorizon"),
            Outcome::BlewUpAt(t) => write!(f, "BlewUpAt({t})"),
            Outcome::StepCollapse(t) => write!(f, "StepCollapse({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: Dim,
    samples: Vec<Sample>,
    pub outcome: Outcome,
    /// Number of time steps taken.
    pub steps: usize,
}

impl Trajectory {
    pub fn new(dim: Dim) -> Self {
        Self {
            dim,
            samples: Vec::new(),
            outcome: Outcome::CompletedHorizon,
            steps: 0,
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, norms: NormRecord, state: Option<WaveState>) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(norms.t > last.norms.t) {
                return Err(invalid(format!(
                    "sample times must increase: {} after {}",
                    norms.t, last.norms.t
                )));
            }
        }
        let prev = self.samples.last().map_or(0.0, |s| s.xnorm);
        let xnorm = prev.max(norms.xnorm_term(self.dim));
        self.samples.push(Sample {
            norms,
            xnorm,
            state,
        });
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norms.t).collect()
    }

    pub fn series(&self, name: SeriesName) -> Vec<f64> {
        self.samples.iter().map(|s| s.norms.get(name)).collect()
    }

    pub fn last_norms(&self) -> Option<&NormRecord> {
        self.samples.last().map(|s| &s.norms)
    }

    /// Running X-norm at the last sample; 0 for an empty trajectory.
    pub fn xnorm(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.xnorm)
    }

    /// `∫‖h(u)‖_{L¹} dt` by the trapezoid rule over the samples up to `t_end`.
    pub fn forcing_integral(&self, t_end: f64) -> f64 {
        let (t, f): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .filter(|s| s.norms.t <= t_end)
            .map(|s| (s.norms.t, s.norms.forcing_l1))
            .unzip();
        crate::quadrature::trapezoid(&t, &f)
    }

    /// Samples that carry a stored state.
    pub fn states(&self) -> impl Iterator<Item = &WaveState> {
        self.samples.iter().filter_map(|s| s.state.as_ref())
    }

    pub fn last_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.norms.t)
    }

    /// CSV with columns `t,L1,L2,Linf,H1dot,energy` (plus `forcing_L1`, `xnorm`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,L1,L2,Linf,H1dot,energy,forcing_L1,xnorm")?;
        for s in &self.samples {
            let n = &s.norms;
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                n.t, n.l1, n.l2, n.linf, n.h1dot, n.energy, n.forcing_l1, s.xnorm
            )?;
        }
        Ok(())
    }
}

/// Samples `u(t, x) = f(t)` of a synthetic spatially varying field; used to
/// build trajectories without solving.
pub fn synthetic_trajectory<F>(
    spectral: &Spectral,
    times: &[f64],
    field_at: F,
) -> Result<Trajectory>
where
    F: Fn(f64) -> GridField,
{
    let spec = *spectral.spec();
    let mut traj = Trajectory::new(spec.dim());
    for &t in times {
        let u = field_at(t);
        let state = WaveState::new(t, u, GridField::zeros(spec))?;
        let norms = NormRecord::measure(&state, spectral, 0.0)?;
        traj.push(norms, Some(state))?;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn record(t: f64, linf: f64) -> NormRecord {
        NormRecord {
            t,
            l1: 0.0,
            l2: 0.0,
            linf,
            h1dot: 0.0,
            energy: 0.0,
            forcing_l1: 1.0,
        }
    }

    #[test]
    fn xnorm_is_running_supremum() {
        let mut tr = Trajectory::new(Dim::One);
        assert_eq!(tr.xnorm(), 0.0);
        tr.push(record(0.0, 1.0), None).unwrap();
        tr.push(record(3.0, 0.1), None).unwrap();
        assert_eq!(tr.xnorm(), 1.0);
        tr.push(record(8.0, 1.0), None).unwrap();
        assert_eq!(tr.xnorm(), 3.0);
        assert!(tr.push(record(8.0, 1.0), None).is_err());
        assert!((tr.forcing_integral(100.0) - 8.0).abs() < 1e-15);
        assert!((tr.forcing_integral(3.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn outcome_lifespan() {
        assert!(Outcome::CompletedHorizon.t_est().is_infinite());
        assert_eq!(Outcome::BlewUpAt(4.5).t_est(), 4.5);
        assert_eq!(Outcome::StepCollapse(2.0).to_string(), "StepCollapse(2)");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = GridSpec::new(Dim::One, 4.0, 16).unwrap();
        let sp = Spectral::new(spec);
        let tr = synthetic_trajectory(&sp, &[0.0, 1.0], |t| GridField::from_fn(spec, |_| t)).unwrap();
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,L1,L2,Linf,H1dot,energy"));
        assert_eq!(text.lines().count(), 3);
    }
}

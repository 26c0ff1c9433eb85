//! Initial data shapes, normalised in the data norm
//! `‖φ‖_{L¹} + ‖φ‖_{H^{1+⌊n/2⌋}} + ‖ψ‖_{L¹} + ‖ψ‖_{H^{⌊n/2⌋}}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::grid::{Dim, GridField, GridSpec, Spectral, WaveState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// `exp(-|x-c|²/w²)`, positive mean.
    Gaussian,
    /// `∂_{x₁}` of the Gaussian, zero mean.
    DGaussian,
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Shape::Gaussian),
            "dgaussian" => Ok(Shape::DGaussian),
            other => Err(Error::Parse(format!("unknown data shape `{other}`"))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Gaussian => "gaussian",
            Shape::DGaussian => "dgaussian",
        })
    }
}

/// Which of `(φ, ψ) = (u(0), u_t(0))` carries the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Velocity,
    Displacement,
    Both,
}

impl FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "velocity" | "psi" => Ok(Component::Velocity),
            "displacement" | "phi" => Ok(Component::Displacement),
            "both" => Ok(Component::Both),
            other => Err(Error::Parse(format!("unknown data component `{other}`"))),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Velocity => "velocity",
            Component::Displacement => "displacement",
            Component::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSpec {
    pub shape: Shape,
    /// Target value of the data norm.
    pub epsilon: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub component: Component,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Gaussian,
            epsilon: 1e-2,
            center: [0.0, 0.0],
            width: 1.0,
            component: Component::Velocity,
        }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid(format!("amplitude must be >= 0, got {}", self.epsilon)));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(invalid(format!("width must be > 0, got {}", self.width)));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("center must be finite"));
        }
        Ok(())
    }

    /// Radius outside which the profile is below `e^{-36}` of its peak.
    pub fn radius(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + 6.0 * self.width
    }

    /// Unnormalised profile.
    pub fn profile(&self, spec: GridSpec) -> GridField {
        let c = self.center;
        let w2 = self.width * self.width;
        let two_d = spec.dim() == Dim::Two;
        let shape = self.shape;
        GridField::from_fn(spec, move |x| {
            let dx = x[0] - c[0];
            let dy = if two_d { x[1] - c[1] } else { 0.0 };
            let g = (-(dx * dx + dy * dy) / w2).exp();
            match shape {
                Shape::Gaussian => g,
                Shape::DGaussian => -2.0 * dx / w2 * g,
            }
        })
    }

    /// Initial state with data norm exactly `epsilon`.
    pub fn build(&self, spectral: &Spectral) -> Result<WaveState> {
        self.validate()?;
        let spec = *spectral.spec();
        let g = self.profile(spec);
        let zero = GridField::zeros(spec);
        let (mut phi, mut psi) = match self.component {
            Component::Velocity => (zero, g),
            Component::Displacement => (g, zero),
            Component::Both => (g.clone(), g),
        };
        let norm = admissible_norm(&phi, &psi, spectral)?;
        if norm == 0.0 {
            return Err(Error::Domain("data profile vanishes on the grid".into()));
        }
        let scale = self.epsilon / norm;
        phi.scale(scale);
        psi.scale(scale);
        WaveState::new(0.0, phi, psi)
    }
}

/// `‖φ‖_{L¹} + ‖φ‖_{H^{1+⌊n/2⌋}} + ‖ψ‖_{L¹} + ‖ψ‖_{H^{⌊n/2⌋}}`.
pub fn admissible_norm(phi: &GridField, psi: &GridField, spectral: &Spectral) -> Result<f64> {
    let k = (phi.spec().dim().as_usize() / 2) as u32;
    Ok(phi.l1()? + phi.sobolev_norm(spectral, 1 + k)? + psi.l1()? + psi.sobolev_norm(spectral, k)?)
}

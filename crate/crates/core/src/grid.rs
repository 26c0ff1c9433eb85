//! Uniform periodic grids on `[-L, L)^n`, spectral transforms and norms.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn from_usize(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(invalid(format!("dimension must be 1 or 2, got {n}"))),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_usize() as f64
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_usize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: Dim,
    half_length: f64,
    points: usize,
}

impl GridSpec {
    /// `points` per axis must be a power of two, at least 16.
    pub fn new(dim: Dim, half_length: f64, points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(invalid(format!("half length must be positive, got {half_length}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(invalid(format!(
                "points per axis must be a power of two >= 16, got {points}"
            )));
        }
        let total = match dim {
            Dim::One => Some(points),
            Dim::Two => points.checked_mul(points),
        };
        if total.map_or(true, |t| t > 1 << 28) {
            return Err(invalid(format!("grid with {points} points per axis is too large")));
        }
        Ok(Self {
            dim,
            half_length,
            points,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of grid points `N^n`.
    pub fn len(&self) -> usize {
        match self.dim {
            Dim::One => self.points,
            Dim::Two => self.points * self.points,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// `Δx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim.as_usize() as i32)
    }

    /// Measure of the torus, `(2L)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim.as_usize() as i32)
    }

    /// Node coordinates along one axis, `x_i = -L + iΔx`.
    pub fn axis(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.points)
            .map(|i| -self.half_length + i as f64 * dx)
            .collect()
    }

    /// Signed angular wavenumbers `πj/L` in FFT order; the Nyquist entry is
    /// positive.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let k0 = std::f64::consts::PI / self.half_length;
        (0..n)
            .map(|j| if j <= n / 2 { j } else { j - n })
            .map(|j| k0 * j as f64)
            .collect()
    }

    /// Wavenumbers with the Nyquist entry zeroed, as used for odd derivatives.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.points / 2] = 0.0;
        k
    }

    /// `|ξ|²` at every frequency index (flattened like the field).
    pub fn xi_squared(&self, nyquist_zeroed: bool) -> Vec<f64> {
        let k = if nyquist_zeroed {
            self.derivative_wavenumbers()
        } else {
            self.wavenumbers()
        };
        match self.dim {
            Dim::One => k.iter().map(|v| v * v).collect(),
            Dim::Two => {
                let mut out = Vec::with_capacity(self.len());
                for a in &k {
                    for b in &k {
                        out.push(a * a + b * b);
                    }
                }
                out
            }
        }
    }

    /// Point coordinates of flat index `i` (row-major in 2D).
    pub fn point(&self, i: usize) -> [f64; 2] {
        let dx = self.dx();
        let l = self.half_length;
        match self.dim {
            Dim::One => [-l + i as f64 * dx, 0.0],
            Dim::Two => {
                let (r, c) = (i / self.points, i % self.points);
                [-l + r as f64 * dx, -l + c as f64 * dx]
            }
        }
    }

    /// `|x|²` at every grid point.
    pub fn radius_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let p = self.point(i);
                p[0] * p[0] + p[1] * p[1]
            })
            .collect()
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Forward and inverse complex FFT plans for one grid, applied along every
/// axis. The inverse is normalised so that `inverse(forward(u)) = u`.
#[derive(Clone)]
pub struct Spectral {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("spec", &self.spec).finish()
    }
}

const ROW_BATCH: usize = 32;

impl Spectral {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            forward: planner.plan_fft_forward(spec.points),
            inverse: planner.plan_fft_inverse(spec.points),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn along_axes(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let n = self.spec.points;
        match self.spec.dim {
            Dim::One => fft.process(buf),
            Dim::Two => {
                buf.par_chunks_mut(n * ROW_BATCH)
                    .for_each(|rows| fft.process(rows));
                transpose(buf, n);
                buf.par_chunks_mut(n * ROW_BATCH)
                    .for_each(|rows| fft.process(rows));
                transpose(buf, n);
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.along_axes(&self.forward, &mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.along_axes(&self.forward, buf);
    }

    /// Normalised inverse transform, in place.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.along_axes(&self.inverse, buf);
        let scale = 1.0 / buf.len() as f64;
        buf.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// Normalised inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

/// Gagliardo–Nirenberg ratios with the constant dropped:
/// `first = ∫|u|^{1+2/n} / (‖∇u‖^{1-n/2} ‖u‖^{2/n+n/2})` and
/// `second = ‖u‖_{2+4/n}^{1+2/n} / (‖∇u‖ ‖u‖^{2/n})`, all norms `L²` unless noted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnRatios {
    pub first: f64,
    pub second: f64,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f(x)` at every node; in 1D the second coordinate is 0.
    pub fn from_fn<F: Fn([f64; 2]) -> f64 + Sync>(spec: GridSpec, f: F) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| f(spec.point(i)))
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// First non-finite value, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `∫u` by the Riemann sum.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn lp_norm(&self, p: Norm) -> Result<f64> {
        self.check_finite()?;
        let dv = self.spec.cell_volume();
        Ok(match p {
            Norm::L1 => self.values.iter().map(|v| v.abs()).sum::<f64>() * dv,
            Norm::L2 => (self.values.iter().map(|v| v * v).sum::<f64>() * dv).sqrt(),
            Norm::Linf => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        })
    }

    pub fn l1(&self) -> Result<f64> {
        self.lp_norm(Norm::L1)
    }

    pub fn l2(&self) -> Result<f64> {
        self.lp_norm(Norm::L2)
    }

    pub fn linf(&self) -> Result<f64> {
        self.lp_norm(Norm::Linf)
    }

    /// `(∫|u|^q)` for a real exponent `q`.
    pub fn power_integral(&self, q: f64) -> Result<f64> {
        self.check_finite()?;
        Ok(self.values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * self.spec.cell_volume())
    }

    /// `‖u‖_{L²}` evaluated from the Fourier coefficients.
    pub fn l2_spectral(&self, spectral: &Spectral) -> Result<f64> {
        self.check_finite()?;
        let hat = spectral.forward(&self.values);
        let scale = self.spec.cell_volume() / self.spec.len() as f64;
        Ok((hat.iter().map(|z| z.norm_sqr()).sum::<f64>() * scale).sqrt())
    }

    /// Exact derivative of the trigonometric interpolant along each axis.
    pub fn spectral_gradient(&self, spectral: &Spectral) -> Vec<GridField> {
        let hat = spectral.forward(&self.values);
        let k = self.spec.derivative_wavenumbers();
        let n = self.spec.points;
        let axes = self.spec.dim.as_usize();
        (0..axes)
            .map(|axis| {
                let mut d = hat.clone();
                for (i, z) in d.iter_mut().enumerate() {
                    let kk = match (self.spec.dim, axis) {
                        (Dim::One, _) => k[i],
                        (Dim::Two, 0) => k[i / n],
                        (Dim::Two, _) => k[i % n],
                    };
                    *z *= Complex64::new(0.0, kk);
                }
                GridField {
                    spec: self.spec,
                    values: spectral.inverse_real(d),
                }
            })
            .collect()
    }

    /// `‖|ξ|^k û‖` in physical normalisation: the homogeneous `Ḣ^k` norm.
    pub fn hdot_norm(&self, spectral: &Spectral, k: u32) -> Result<f64> {
        self.weighted_spectral_norm(spectral, |xi2| xi2.powi(k as i32))
    }

    /// `H^k` norm with weight `(1 + |ξ|²)^k`, `k ∈ {0, 1, 2}`.
    pub fn sobolev_norm(&self, spectral: &Spectral, k: u32) -> Result<f64> {
        if k > 2 {
            return Err(invalid(format!("Sobolev order must be 0, 1 or 2, got {k}")));
        }
        self.weighted_spectral_norm(spectral, |xi2| (1.0 + xi2).powi(k as i32))
    }

    fn weighted_spectral_norm<W: Fn(f64) -> f64>(&self, spectral: &Spectral, w: W) -> Result<f64> {
        self.check_finite()?;
        let hat = spectral.forward(&self.values);
        let xi2 = self.spec.xi_squared(true);
        let scale = self.spec.cell_volume() / self.spec.len() as f64;
        let sum: f64 = hat
            .iter()
            .zip(&xi2)
            .map(|(z, &x)| z.norm_sqr() * w(x))
            .sum();
        Ok((sum * scale).sqrt())
    }

    pub fn gn_ratios(&self, spectral: &Spectral) -> Result<GnRatios> {
        let n = self.spec.dim.as_f64();
        let l2 = self.l2()?;
        if l2 == 0.0 {
            return Err(Error::Domain("Gagliardo–Nirenberg ratios need a nonzero field".into()));
        }
        let grad = self.hdot_norm(spectral, 1)?;
        if grad == 0.0 {
            return Err(Error::Domain("Gagliardo–Nirenberg ratios need a nonconstant field".into()));
        }
        let q = 1.0 + 2.0 / n;
        let first = if self.spec.dim == Dim::Two {
            // Both sides reduce to ‖u‖²; evaluate from the same sum.
            self.power_integral(2.0)? / (l2 * l2)
        } else {
            self.power_integral(q)? / (grad.powf(1.0 - n / 2.0) * l2.powf(2.0 / n + n / 2.0))
        };
        let second = self.power_integral(2.0 * q)?.sqrt() / (grad * l2.powf(2.0 / n));
        Ok(GnRatios { first, second })
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &GridField) -> Result<()> {
        self.spec.check_same(&other.spec)?;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(x, y)| *x += a * y);
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.spec.check_same(&other.spec)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// `(u, u_t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u: GridField,
    pub v: GridField,
}

impl WaveState {
    pub fn new(t: f64, u: GridField, v: GridField) -> Result<Self> {
        u.spec.check_same(&v.spec)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(Self { t, u, v })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            t: 0.0,
            u: GridField::zeros(spec),
            v: GridField::zeros(spec),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.u.spec
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Writes `<stem>.hdr` and `<stem>.bin` (u followed by v).
    pub fn save(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let header = FieldHeader {
            dim: self.spec().dim,
            points: self.spec().points,
            half_length: self.spec().half_length,
            time: self.t,
            fields: 2,
        };
        let hdr = stem.with_extension("hdr");
        let bin = stem.with_extension("bin");
        std::fs::write(&hdr, header.to_string())?;
        let mut bytes = Vec::with_capacity(16 * self.spec().len());
        for v in self.u.values.iter().chain(&self.v.values) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin, bytes)?;
        Ok((hdr, bin))
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let header = FieldHeader::parse(&std::fs::read_to_string(stem.with_extension("hdr"))?)?;
        if header.fields != 2 {
            return Err(Error::Parse(format!(
                "a wave state has two fields, header declares {}",
                header.fields
            )));
        }
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        let mut fields = decode_fields(&header, &bytes)?;
        let v = fields.pop().expect("two fields");
        let u = fields.pop().expect("two fields");
        WaveState::new(header.time, u, v)
    }
}

/// Key-value header accompanying a raw little-endian `f64` field file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHeader {
    pub dim: Dim,
    pub points: usize,
    pub half_length: f64,
    pub time: f64,
    pub fields: usize,
}

impl FieldHeader {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.half_length, self.points)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut points = None;
        let mut half_length = None;
        let mut time = None;
        let mut fields = None;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
            let value = value.trim();
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("`{v}` is not a number")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("`{v}` is not a count")))
            };
            let duplicate = match key.trim() {
                "n" => dim.replace(Dim::from_usize(int(value)?)?).is_some(),
                "N" => points.replace(int(value)?).is_some(),
                "L" => half_length.replace(num(value)?).is_some(),
                "t" => time.replace(num(value)?).is_some(),
                "fields" => fields.replace(int(value)?).is_some(),
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            };
            if duplicate {
                return Err(Error::Parse(format!("header key `{}` repeated", key.trim())));
            }
        }
        let missing = |k: &str| Error::Parse(format!("header lacks `{k}`"));
        let header = Self {
            dim: dim.ok_or_else(|| missing("n"))?,
            points: points.ok_or_else(|| missing("N"))?,
            half_length: half_length.ok_or_else(|| missing("L"))?,
            time: time.unwrap_or(0.0),
            fields: fields.unwrap_or(1),
        };
        header.spec()?;
        if !(header.time.is_finite() && header.time >= 0.0) {
            return Err(Error::Parse(format!("invalid time {}", header.time)));
        }
        if header.fields == 0 || header.fields > 16 {
            return Err(Error::Parse(format!("invalid field count {}", header.fields)));
        }
        Ok(header)
    }
}

impl fmt::Display for FieldHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.dim)?;
        writeln!(f, "N={}", self.points)?;
        writeln!(f, "L={:?}", self.half_length)?;
        writeln!(f, "t={:?}", self.time)?;
        writeln!(f, "fields={}", self.fields)
    }
}

/// Splits a little-endian `f64` payload into the fields the header declares.
pub fn decode_fields(header: &FieldHeader, bytes: &[u8]) -> Result<Vec<GridField>> {
    let spec = header.spec()?;
    let expected = spec
        .len()
        .checked_mul(header.fields)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Parse("payload size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "payload has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(values
        .chunks_exact(spec.len())
        .map(|chunk| GridField {
            spec,
            values: chunk.to_vec(),
        })
        .collect())
}

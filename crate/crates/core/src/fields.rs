//! Test functions, flow-field encoding and the physics post-processing used to
//! judge reconstructions (energy spectra, vorticity), plus the two on-disk
//! grid formats.
//!
//! Grids are flattened row-major with dimension 1 slowest. For a 2D velocity
//! field the `x` index is the slow one: `flat = ix * ny + iy`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Builtin analytic test functions on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    /// `sin(pi x)`
    SinPiX,
    /// `log(x + 1) sin(5 e^x)`
    LogSinExp,
    /// `x^2 + sin(10 x)`
    X2Sin10x,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::SinPiX, Builtin::LogSinExp, Builtin::X2Sin10x];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::SinPiX => "sin_pi_x",
            Builtin::LogSinExp => "log_sin_exp",
            Builtin::X2Sin10x => "x2_sin10x",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Builtin::SinPiX => (PI * x).sin(),
            Builtin::LogSinExp => (x + 1.0).ln() * (5.0 * x.exp()).sin(),
            Builtin::X2Sin10x => x * x + (10.0 * x).sin(),
        }
    }

    /// `log(x + 1)` diverges at `x = -1`, so that function samples on the
    /// left-open grid; the others include both endpoints.
    pub fn default_grid(self) -> Grid {
        match self {
            Builtin::LogSinExp => Grid::LeftOpen,
            _ => Grid::Endpoints,
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownBuiltin(s.to_string()))
    }
}

/// Uniform sampling conventions on `[-1, 1]` for `p` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// `x_k = -1 + 2k/(p-1)`, both endpoints included.
    Endpoints,
    /// `x_k = -1 + (2k+1)/p`, cell midpoints.
    Midpoints,
    /// `x_k = -1 + 2(k+1)/p`, excludes -1, includes 1.
    LeftOpen,
}

impl Grid {
    pub fn points(self, p: usize) -> Vec<f64> {
        let pf = p as f64;
        (0..p)
            .map(|k| {
                let k = k as f64;
                match self {
                    Grid::Endpoints if p == 1 => 0.0,
                    Grid::Endpoints => -1.0 + 2.0 * k / (pf - 1.0),
                    Grid::Midpoints => -1.0 + (2.0 * k + 1.0) / pf,
                    Grid::LeftOpen => -1.0 + 2.0 * (k + 1.0) / pf,
                }
            })
            .collect()
    }
}

/// Unit-norm samples of a function, with the norm they were scaled by.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub dims: Vec<usize>,
    pub values: Vec<Complex64>,
    pub norm: f64,
}

impl GridFunction {
    /// Normalizes raw samples and keeps their norm for decoding.
    pub fn encode(dims: Vec<usize>, raw: Vec<Complex64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if raw.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: raw.len(),
            });
        }
        if let Some(i) = raw.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        let norm = raw.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            dims,
            values: raw.into_iter().map(|v| v / norm).collect(),
            norm,
        })
    }

    /// Samples in physical units.
    pub fn decode(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v * self.norm).collect()
    }
}

/// Samples `name` at `2^n` points of its default grid and normalizes.
pub fn sample_function(name: &str, n: usize) -> Result<GridFunction> {
    let builtin: Builtin = name.parse()?;
    sample_builtin(builtin, n, builtin.default_grid())
}

pub fn sample_builtin(builtin: Builtin, n: usize, grid: Grid) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one qubit".into()));
    }
    let p = 1usize << n;
    let raw = grid
        .points(p)
        .into_iter()
        .map(|x| Complex64::new(builtin.eval(x), 0.0))
        .collect();
    GridFunction::encode(vec![p], raw)
}

/// A 2D velocity field on a periodic `lx x ly` box.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField2D {
    pub nx: usize,
    pub ny: usize,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub lx: f64,
    pub ly: f64,
}

impl FlowField2D {
    pub fn new(nx: usize, ny: usize, ux: Vec<f64>, uy: Vec<f64>, lx: f64, ly: f64) -> Result<Self> {
        let len = nx * ny;
        for plane in [&ux, &uy] {
            if plane.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: plane.len(),
                });
            }
        }
        if let Some(i) = ux.iter().chain(&uy).position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidConfig("domain lengths must be positive".into()));
        }
        Ok(Self { nx, ny, ux, uy, lx, ly })
    }

    /// Builds a field from `f = u_x + i u_y` samples.
    pub fn from_complex(nx: usize, ny: usize, values: &[Complex64], lx: f64, ly: f64) -> Result<Self> {
        Self::new(
            nx,
            ny,
            values.iter().map(|v| v.re).collect(),
            values.iter().map(|v| v.im).collect(),
            lx,
            ly,
        )
    }

    fn at(&self, plane: &[f64], ix: usize, iy: usize) -> f64 {
        plane[(ix % self.nx) * self.ny + iy % self.ny]
    }
}

/// `f = u_x + i u_y`, normalized, as a `[nx, ny]` grid.
pub fn encode_complex_flow(field: &FlowField2D) -> Result<GridFunction> {
    let raw = field
        .ux
        .iter()
        .zip(&field.uy)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    GridFunction::encode(vec![field.nx, field.ny], raw)
}

/// Inverse of [`encode_complex_flow`].
pub fn decode_complex_flow(grid: &GridFunction, lx: f64, ly: f64) -> Result<FlowField2D> {
    match grid.dims[..] {
        [nx, ny] => FlowField2D::from_complex(nx, ny, &grid.decode(), lx, ly),
        _ => Err(Error::SizeMismatch(format!(
            "expected a 2D grid, got dims {:?}",
            grid.dims
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DownsampleFilter {
    /// Keep every `factor`-th point starting at index 0.
    #[default]
    Stride,
    /// Average each `factor x factor` block.
    BlockMean,
}

/// Strided subsampling by `factor` in both directions.
pub fn downsample(field: &FlowField2D, factor: usize) -> Result<FlowField2D> {
    downsample_with(field, factor, DownsampleFilter::Stride)
}

pub fn downsample_with(field: &FlowField2D, factor: usize, filter: DownsampleFilter) -> Result<FlowField2D> {
    if factor == 0 || !field.nx.is_multiple_of(factor) || !field.ny.is_multiple_of(factor) {
        return Err(Error::NonDivisibleFactor {
            factor,
            nx: field.nx,
            ny: field.ny,
        });
    }
    let (nx, ny) = (field.nx / factor, field.ny / factor);
    let reduce = |plane: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                out.push(match filter {
                    DownsampleFilter::Stride => plane[ix * factor * field.ny + iy * factor],
                    DownsampleFilter::BlockMean => {
                        let mut sum = 0.0;
                        for dx in 0..factor {
                            for dy in 0..factor {
                                sum += plane[(ix * factor + dx) * field.ny + iy * factor + dy];
                            }
                        }
                        sum / (factor * factor) as f64
                    }
                });
            }
        }
        out
    };
    FlowField2D::new(nx, ny, reduce(&field.ux), reduce(&field.uy), field.lx, field.ly)
}

/// In-place 2D DFT on a row-major `nx x ny` array.
fn fft2(data: &mut [Complex64], nx: usize, ny: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft(ny, direction);
    for chunk in data.chunks_exact_mut(ny) {
        row.process(chunk);
    }
    let col = planner.plan_fft(nx, direction);
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for iy in 0..ny {
        for ix in 0..nx {
            buf[ix] = data[ix * ny + iy];
        }
        col.process(&mut buf);
        for ix in 0..nx {
            data[ix * ny + iy] = buf[ix];
        }
    }
}

/// Signed integer wavenumber of DFT bin `i` on `n` points.
fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Normalized Fourier coefficients `u_hat = DFT(u) / (nx ny)`.
fn spectral_coefficients(plane: &[f64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut data, nx, ny, FftDirection::Forward);
    let scale = 1.0 / (nx * ny) as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    data
}

fn shell_of(kx: i64, ky: i64) -> usize {
    (((kx * kx + ky * ky) as f64).sqrt() + 0.5).floor() as usize
}

/// Shell-summed kinetic energy `E(k)` over integer wavevectors with
/// `|k'| in [k - 1/2, k + 1/2)`; `sum_k E(k) = mean(u_x^2 + u_y^2) / 2`.
pub fn energy_spectrum(field: &FlowField2D) -> Vec<(usize, f64)> {
    let (nx, ny) = (field.nx, field.ny);
    let ux = spectral_coefficients(&field.ux, nx, ny);
    let uy = spectral_coefficients(&field.uy, nx, ny);
    let kmax = shell_of((nx / 2) as i64, (ny / 2) as i64);
    let mut energy = vec![0.0; kmax + 1];
    for ix in 0..nx {
        for iy in 0..ny {
            let i = ix * ny + iy;
            let k = shell_of(wavenumber(ix, nx), wavenumber(iy, ny));
            energy[k] += 0.5 * (ux[i].norm_sqr() + uy[i].norm_sqr());
        }
    }
    energy.into_iter().enumerate().collect()
}

/// Least-squares slope of `log E` against `log k` over shells `lo..=hi`
/// with positive energy.
pub fn spectrum_slope(spectrum: &[(usize, f64)], lo: usize, hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = spectrum
        .iter()
        .filter(|(k, e)| *k >= lo.max(1) && *k <= hi && *e > 0.0)
        .map(|&(k, e)| ((k as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `omega = du_y/dx - du_x/dy` by periodic central differences.
pub fn vorticity(field: &FlowField2D) -> Vec<f64> {
    let (nx, ny) = (field.nx, field.ny);
    let dx = field.lx / nx as f64;
    let dy = field.ly / ny as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let duy_dx = (field.at(&field.uy, ix + 1, iy) - field.at(&field.uy, ix + nx - 1, iy)) / (2.0 * dx);
            let dux_dy = (field.at(&field.ux, ix, iy + 1) - field.at(&field.ux, ix, iy + ny - 1)) / (2.0 * dy);
            out.push(duy_dx - dux_dy);
        }
    }
    out
}

/// Largest `|div u|` evaluated spectrally with physical wavenumbers.
pub fn spectral_divergence(field: &FlowField2D) -> f64 {
    let (nx, ny) = (field.nx, field.ny);
    let ux = spectral_coefficients(&field.ux, nx, ny);
    let uy = spectral_coefficients(&field.uy, nx, ny);
    let mut div = vec![Complex64::new(0.0, 0.0); nx * ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let i = ix * ny + iy;
            let kx = 2.0 * PI * wavenumber(ix, nx) as f64 / field.lx;
            let ky = 2.0 * PI * wavenumber(iy, ny) as f64 / field.ly;
            div[i] = Complex64::i() * (ux[i] * kx + uy[i] * ky);
        }
    }
    fft2(&mut div, nx, ny, FftDirection::Inverse);
    div.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Seeded divergence-free random field on a `2 pi x 2 pi` box with
/// `E(k) = k^slope` on shells `1..=min(nx, ny)/4` and no energy elsewhere.
///
/// Built from a stream function with one random phase per `(k, -k)` pair;
/// each shell's pairs share its energy equally.
pub fn synth_field(nx: usize, ny: usize, slope: f64, seed: u64) -> Result<FlowField2D> {
    if !nx.is_power_of_two() || !ny.is_power_of_two() || nx.min(ny) < 4 {
        return Err(Error::InvalidConfig(format!(
            "synthetic fields need power-of-two sizes of at least 4, got {nx}x{ny}"
        )));
    }
    if !slope.is_finite() {
        return Err(Error::InvalidConfig("slope must be finite".into()));
    }
    let (lx, ly) = (2.0 * PI, 2.0 * PI);
    let kmax = (nx.min(ny) / 4) as i64;

    // Canonical half plane: kx > 0, or kx == 0 and ky > 0.
    let mut pairs = Vec::new();
    for kx in 0..=kmax {
        for ky in -kmax..=kmax {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let s = shell_of(kx, ky);
            if (1..=kmax as usize).contains(&s) {
                pairs.push((kx, ky, s));
            }
        }
    }
    let mut per_shell = vec![0usize; kmax as usize + 1];
    for &(_, _, s) in &pairs {
        per_shell[s] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ux_hat = vec![Complex64::new(0.0, 0.0); nx * ny];
    let mut uy_hat = vec![Complex64::new(0.0, 0.0); nx * ny];
    let bin = |k: i64, n: usize| k.rem_euclid(n as i64) as usize;
    for &(kx, ky, s) in &pairs {
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let kxp = 2.0 * PI * kx as f64 / lx;
        let kyp = 2.0 * PI * ky as f64 / ly;
        let amp = ((s as f64).powf(slope) / (per_shell[s] as f64 * (kxp * kxp + kyp * kyp))).sqrt();
        let psi = Complex64::from_polar(amp, phase);
        // u_x = d psi/dy, u_y = -d psi/dx
        let ux = Complex64::i() * kyp * psi;
        let uy = -Complex64::i() * kxp * psi;
        let (i, j) = (bin(kx, nx) * ny + bin(ky, ny), bin(-kx, nx) * ny + bin(-ky, ny));
        ux_hat[i] = ux;
        uy_hat[i] = uy;
        ux_hat[j] = ux.conj();
        uy_hat[j] = uy.conj();
    }
    fft2(&mut ux_hat, nx, ny, FftDirection::Inverse);
    fft2(&mut uy_hat, nx, ny, FftDirection::Inverse);
    FlowField2D::new(
        nx,
        ny,
        ux_hat.iter().map(|v| v.re).collect(),
        uy_hat.iter().map(|v| v.re).collect(),
        lx,
        ly,
    )
}

/// On-disk grid formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Raw,
}

impl Format {
    /// `.csv` is CSV; anything else is raw binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Raw,
        }
    }
}

/// Contents of a grid file.
#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real {
        dims: Vec<usize>,
        values: Vec<f64>,
    },
    Complex {
        dims: Vec<usize>,
        values: Vec<Complex64>,
    },
    /// Two stacked planes `u_x`, `u_y` on a 2D grid. Domain lengths are not
    /// stored; loaded fields use `2 pi x 2 pi`.
    Velocity(FlowField2D),
}

const RAW_MAGIC: &[u8; 4] = b"CHQF";
const RAW_VERSION: u32 = 1;

impl GridData {
    pub fn dims(&self) -> Vec<usize> {
        match self {
            GridData::Real { dims, .. } | GridData::Complex { dims, .. } => dims.clone(),
            GridData::Velocity(f) => vec![f.nx, f.ny],
        }
    }

    fn kind(&self) -> u8 {
        match self {
            GridData::Real { .. } => 0,
            GridData::Complex { .. } => 1,
            GridData::Velocity(_) => 2,
        }
    }

    /// Normalized amplitudes; velocity fields encode as `u_x + i u_y`.
    pub fn to_grid_function(&self) -> Result<GridFunction> {
        match self {
            GridData::Real { dims, values } => {
                GridFunction::encode(dims.clone(), values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            }
            GridData::Complex { dims, values } => GridFunction::encode(dims.clone(), values.clone()),
            GridData::Velocity(f) => encode_complex_flow(f),
        }
    }

    /// Reads a velocity field; 2D complex grids are taken as `u_x + i u_y`.
    pub fn to_flow(&self) -> Result<FlowField2D> {
        match self {
            GridData::Velocity(f) => Ok(f.clone()),
            GridData::Complex { dims, values } if dims.len() == 2 => {
                FlowField2D::from_complex(dims[0], dims[1], values, 2.0 * PI, 2.0 * PI)
            }
            other => Err(Error::SizeMismatch(format!(
                "expected a 2D velocity or complex grid, got dims {:?}",
                other.dims()
            ))),
        }
    }

    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::new();
        out.extend_from_slice(RAW_MAGIC);
        out.extend_from_slice(&RAW_VERSION.to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        out.push(self.kind());
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        match self {
            GridData::Real { values, .. } => values.iter().for_each(|&v| put(v)),
            GridData::Complex { values, .. } => values.iter().for_each(|v| {
                put(v.re);
                put(v.im);
            }),
            GridData::Velocity(f) => f.ux.iter().chain(&f.uy).for_each(|&v| put(v)),
        }
        out
    }

    pub fn from_raw_bytes(bytes: &[u8]) -> Result<Self> {
        let header = |msg: &str| Error::MalformedHeader(msg.to_string());
        let u32_at = |at: usize| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| header("truncated header"))
        };
        if bytes.get(..4) != Some(RAW_MAGIC.as_slice()) {
            return Err(header("bad magic, expected CHQF"));
        }
        let version = u32_at(4)?;
        if version != RAW_VERSION {
            return Err(Error::MalformedHeader(format!("unsupported version {version}")));
        }
        let d = u32_at(8)? as usize;
        if d == 0 || d > 16 {
            return Err(Error::MalformedHeader(format!("bad dimension count {d}")));
        }
        let dims: Vec<usize> = (0..d)
            .map(|i| u32_at(12 + 4 * i).map(|v| v as usize))
            .collect::<Result<_>>()?;
        let kind_at = 12 + 4 * d;
        let kind = *bytes.get(kind_at).ok_or_else(|| header("truncated header"))?;
        let len: usize = dims.iter().product();
        let per_cell = match kind {
            0 => 1,
            1 | 2 => 2,
            k => return Err(Error::MalformedHeader(format!("unknown kind {k}"))),
        };
        if kind == 2 && d != 2 {
            return Err(Error::MalformedHeader("velocity pairs need a 2D grid".into()));
        }
        let payload = &bytes[kind_at + 1..];
        if payload.len() != len * per_cell * 8 {
            return Err(Error::SizeMismatch(format!(
                "payload has {} bytes, dims {:?} need {}",
                payload.len(),
                dims,
                len * per_cell * 8
            )));
        }
        let floats: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = floats.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(match kind {
            0 => GridData::Real { dims, values: floats },
            1 => GridData::Complex {
                dims,
                values: floats.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            },
            _ => {
                let (ux, uy) = floats.split_at(len);
                GridData::Velocity(FlowField2D::new(
                    dims[0],
                    dims[1],
                    ux.to_vec(),
                    uy.to_vec(),
                    2.0 * PI,
                    2.0 * PI,
                )?)
            }
        })
    }

    /// CSV text: `# dims: p1 p2 ...`, an optional `# kind: ...` line, then
    /// `p1` rows of `p2 * ... * pd` cells; complex and velocity cells take two
    /// adjacent columns `(re, im)` / `(u_x, u_y)`.
    pub fn to_csv_string(&self) -> String {
        let dims = self.dims();
        let mut out = String::new();
        let dims_str: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "# dims: {}", dims_str.join(" "));
        let kind = match self {
            GridData::Real { .. } => "real",
            GridData::Complex { .. } => "complex",
            GridData::Velocity(_) => "velocity",
        };
        let _ = writeln!(out, "# kind: {kind}");
        let cols: usize = dims[1..].iter().product();
        let cell = |i: usize| -> String {
            match self {
                GridData::Real { values, .. } => format!("{}", values[i]),
                GridData::Complex { values, .. } => format!("{},{}", values[i].re, values[i].im),
                GridData::Velocity(f) => format!("{},{}", f.ux[i], f.uy[i]),
            }
        };
        for r in 0..dims[0] {
            let row: Vec<String> = (0..cols).map(|c| cell(r * cols + c)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut dims: Option<Vec<usize>> = None;
        let mut kind: Option<String> = None;
        let mut rows: Vec<&str> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(rest) = comment.strip_prefix("dims:") {
                    let parsed = rest
                        .split_whitespace()
                        .map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::MalformedHeader(format!("bad dims: {e}")))?;
                    if parsed.is_empty() || parsed.contains(&0) {
                        return Err(Error::MalformedHeader("dims must be positive".into()));
                    }
                    dims = Some(parsed);
                } else if let Some(rest) = comment.strip_prefix("kind:") {
                    kind = Some(rest.trim().to_string());
                }
                continue;
            }
            rows.push(line);
        }
        let dims = dims.ok_or_else(|| Error::MalformedHeader("missing '# dims:' line".into()))?;
        let cells: usize = dims[1..].iter().product();
        if rows.len() != dims[0] {
            return Err(Error::SizeMismatch(format!(
                "expected {} rows, found {}",
                dims[0],
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(dims.iter().product::<usize>() * 2);
        let mut width = None;
        for (r, row) in rows.iter().enumerate() {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            match width {
                None => width = Some(fields.len()),
                Some(w) if w != fields.len() => {
                    return Err(Error::SizeMismatch(format!(
                        "row {r} has {} columns, expected {w}",
                        fields.len()
                    )));
                }
                _ => {}
            }
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {r}: cannot parse {f:?}")))?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue(values.len()));
                }
                values.push(v);
            }
        }
        let width = width.unwrap_or(0);
        let per_cell = match kind.as_deref() {
            Some("real") => 1,
            Some("complex") | Some("velocity") => 2,
            Some(other) => return Err(Error::MalformedHeader(format!("unknown kind {other:?}"))),
            None if width == cells => 1,
            None => 2,
        };
        if width != cells * per_cell {
            return Err(Error::SizeMismatch(format!(
                "rows have {width} columns, dims {dims:?} need {}",
                cells * per_cell
            )));
        }
        Ok(match (kind.as_deref(), per_cell) {
            (Some("velocity"), _) => {
                if dims.len() != 2 {
                    return Err(Error::MalformedHeader("velocity pairs need a 2D grid".into()));
                }
                let ux = values.iter().step_by(2).copied().collect();
                let uy = values.iter().skip(1).step_by(2).copied().collect();
                GridData::Velocity(FlowField2D::new(dims[0], dims[1], ux, uy, 2.0 * PI, 2.0 * PI)?)
            }
            (_, 1) => GridData::Real { dims, values },
            _ => GridData::Complex {
                dims,
                values: values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            },
        })
    }
}

pub fn load_grid(path: &Path, format: Format) -> Result<GridData> {
    match format {
        Format::Raw => GridData::from_raw_bytes(&std::fs::read(path)?),
        Format::Csv => GridData::from_csv_str(&std::fs::read_to_string(path)?),
    }
}

pub fn write_grid(path: &Path, format: Format, data: &GridData) -> Result<()> {
    match format {
        Format::Raw => std::fs::write(path, data.to_raw_bytes())?,
        Format::Csv => std::fs::write(path, data.to_csv_string())?,
    }
    Ok(())
}

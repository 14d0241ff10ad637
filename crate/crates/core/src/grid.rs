//! Discrete periodic cylinder `G x (0,1)` with `G = (0,1)^2`.
//!
//! Horizontal directions are Fourier collocation, the vertical direction is a
//! uniform grid of `nz` intervals (`nz + 1` levels, `z_0 = 0` at the bottom and
//! `z_nz = 1` at the surface). Physical arrays are row-major over
//! `(x, y, z)`, so every vertical column is contiguous; spectral arrays use the
//! same layout with `(x, y)` replaced by the mode index, which keeps the
//! per-mode vertical solves cache friendly.
//!
//! The forward transform divides by `nx * ny`, so the `(0, 0)` coefficient is
//! the horizontal mean.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative conjugate-symmetry defect tolerated by [`Grid::to_physical2`] and
/// [`Grid::to_physical3`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Field2 {
    nx: usize,
    ny: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field3 {
    nx: usize,
    ny: usize,
    levels: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectral2 {
    nx: usize,
    ny: usize,
    pub data: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectral3 {
    nx: usize,
    ny: usize,
    levels: usize,
    pub data: Vec<Complex64>,
}

impl Field2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", nx * ny),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { nx, ny, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.ny + j] = value;
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean of the squares over the unit square (the discrete `L^2(G)` norm
    /// squared).
    pub fn mean_square(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Field3 {
    pub fn zeros(nx: usize, ny: usize, levels: usize) -> Self {
        Self {
            nx,
            ny,
            levels,
            data: vec![0.0; nx * ny * levels],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, levels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * levels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", nx * ny * levels),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self {
            nx,
            ny,
            levels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.levels)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.levels + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let start = self.index(i, j, 0);
        &self.data[start..start + self.levels]
    }

    pub fn column_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = self.index(i, j, 0);
        let levels = self.levels;
        &mut self.data[start..start + levels]
    }

    pub fn level(&self, k: usize) -> Field2 {
        let mut out = Field2::zeros(self.nx, self.ny);
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.set(i, j, self.get(i, j, k));
            }
        }
        out
    }

    pub fn set_level(&mut self, k: usize, plane: &Field2) {
        for i in 0..self.nx {
            for j in 0..self.ny {
                self.set(i, j, k, plane.get(i, j));
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Spectral2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![Complex64::new(0.0, 0.0); nx * ny],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.ny + j] = value;
    }
}

impl Spectral3 {
    pub fn zeros(nx: usize, ny: usize, levels: usize) -> Self {
        Self {
            nx,
            ny,
            levels,
            data: vec![Complex64::new(0.0, 0.0); nx * ny * levels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.levels)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.levels + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: Complex64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn column(&self, i: usize, j: usize) -> &[Complex64] {
        let start = self.index(i, j, 0);
        &self.data[start..start + self.levels]
    }

    pub fn column_mut(&mut self, i: usize, j: usize) -> &mut [Complex64] {
        let start = self.index(i, j, 0);
        let levels = self.levels;
        &mut self.data[start..start + levels]
    }

    pub fn level(&self, k: usize) -> Spectral2 {
        let mut out = Spectral2::zeros(self.nx, self.ny);
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.set(i, j, self.get(i, j, k));
            }
        }
        out
    }

    pub fn set_level(&mut self, k: usize, plane: &Spectral2) {
        for i in 0..self.nx {
            for j in 0..self.ny {
                self.set(i, j, k, plane.get(i, j));
            }
        }
    }
}

/// Signed Fourier mode number of storage index `i` on an `n`-point grid.
/// The Nyquist index `n/2` maps to `-n/2`.
#[inline]
pub fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[derive(Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    keep: Vec<bool>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("nz", &self.nz)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let sizing = |reason| Error::Sizing { nx, ny, nz, reason };
        if !nx.is_multiple_of(2) || !ny.is_multiple_of(2) {
            return Err(sizing("horizontal sizes must be even"));
        }
        if nx < 4 || ny < 4 {
            return Err(sizing("horizontal sizes must be at least 4"));
        }
        if nz < 4 {
            return Err(sizing("vertical interval count must be at least 4"));
        }
        let mut planner = FftPlanner::new();
        let keep = (0..nx * ny)
            .map(|idx| {
                let (i, j) = (idx / ny, idx % ny);
                signed_mode(i, nx).unsigned_abs() as usize <= nx / 3
                    && signed_mode(j, ny).unsigned_abs() as usize <= ny / 3
            })
            .collect();
        Ok(Self {
            nx,
            ny,
            nz,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
            keep,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Number of vertical levels, `nz + 1`.
    pub fn levels(&self) -> usize {
        self.nz + 1
    }

    /// Vertical spacing.
    pub fn h(&self) -> f64 {
        1.0 / self.nz as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.ny as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 / self.nz as f64
    }

    pub fn mode(&self, i: usize, j: usize) -> (i64, i64) {
        (signed_mode(i, self.nx), signed_mode(j, self.ny))
    }

    /// Wavevector `xi = 2 pi (k1, k2)`.
    pub fn wavevector(&self, i: usize, j: usize) -> (f64, f64) {
        let (k1, k2) = self.mode(i, j);
        (2.0 * PI * k1 as f64, 2.0 * PI * k2 as f64)
    }

    pub fn xi_sq(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.wavevector(i, j);
        a * a + b * b
    }

    /// Storage index of the conjugate partner mode `-k`.
    pub fn partner(&self, i: usize, j: usize) -> (usize, usize) {
        ((self.nx - i) % self.nx, (self.ny - j) % self.ny)
    }

    /// Modes with a Nyquist component have no distinct conjugate partner.
    pub fn is_nyquist(&self, i: usize, j: usize) -> bool {
        i == self.nx / 2 || j == self.ny / 2
    }

    pub fn is_retained(&self, i: usize, j: usize) -> bool {
        self.keep[i * self.ny + j]
    }

    /// Wavevector used for first derivatives; zero on Nyquist components so
    /// derivatives of real fields stay real.
    pub fn derivative_wavevector(&self, i: usize, j: usize) -> (f64, f64) {
        let (a, b) = self.wavevector(i, j);
        (
            if i == self.nx / 2 { 0.0 } else { a },
            if j == self.ny / 2 { 0.0 } else { b },
        )
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nx).flat_map(move |i| (0..self.ny).map(move |j| (i, j)))
    }

    pub fn zeros2(&self) -> Field2 {
        Field2::zeros(self.nx, self.ny)
    }

    pub fn zeros3(&self) -> Field3 {
        Field3::zeros(self.nx, self.ny, self.levels())
    }

    pub fn spectral_zeros2(&self) -> Spectral2 {
        Spectral2::zeros(self.nx, self.ny)
    }

    pub fn spectral_zeros3(&self) -> Spectral3 {
        Spectral3::zeros(self.nx, self.ny, self.levels())
    }

    pub fn field2_from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field2 {
        let mut out = self.zeros2();
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.set(i, j, f(self.x(i), self.y(j)));
            }
        }
        out
    }

    pub fn field3_from_fn(&self, mut f: impl FnMut(f64, f64, f64) -> f64) -> Field3 {
        let mut out = self.zeros3();
        for i in 0..self.nx {
            for j in 0..self.ny {
                for k in 0..self.levels() {
                    out.set(i, j, k, f(self.x(i), self.y(j), self.z(k)));
                }
            }
        }
        out
    }

    fn check2(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.nx, self.ny) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.nx, self.ny),
                found: format!("{}x{}", shape.0, shape.1),
            });
        }
        Ok(())
    }

    fn check3(&self, shape: (usize, usize, usize)) -> Result<()> {
        if shape != (self.nx, self.ny, self.levels()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}x{}", self.nx, self.ny, self.levels()),
                found: format!("{}x{}x{}", shape.0, shape.1, shape.2),
            });
        }
        Ok(())
    }

    /// In-place 2D DFT of a plane stored as `[i * ny + j]`.
    fn plane_transform(&self, plane: &mut [Complex64], forward: bool) {
        let (fx, fy) = if forward {
            (&self.fft_x, &self.fft_y)
        } else {
            (&self.ifft_x, &self.ifft_y)
        };
        for row in plane.chunks_exact_mut(self.ny) {
            fy.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.nx];
        for j in 0..self.ny {
            for i in 0..self.nx {
                col[i] = plane[i * self.ny + j];
            }
            fx.process(&mut col);
            for i in 0..self.nx {
                plane[i * self.ny + j] = col[i];
            }
        }
        if forward {
            let scale = 1.0 / (self.nx * self.ny) as f64;
            plane.iter_mut().for_each(|c| *c *= scale);
        }
    }

    pub fn to_spectral2(&self, field: &Field2) -> Result<Spectral2> {
        self.check2(field.shape())?;
        let mut plane: Vec<Complex64> = field.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plane_transform(&mut plane, true);
        Ok(Spectral2 {
            nx: self.nx,
            ny: self.ny,
            data: plane,
        })
    }

    pub fn to_spectral3(&self, field: &Field3) -> Result<Spectral3> {
        self.check3(field.shape())?;
        let levels = self.levels();
        let mut out = self.spectral_zeros3();
        let mut plane = vec![Complex64::new(0.0, 0.0); self.nx * self.ny];
        for k in 0..levels {
            for (p, c) in plane.iter_mut().enumerate() {
                *c = Complex64::new(field.data[p * levels + k], 0.0);
            }
            self.plane_transform(&mut plane, true);
            for (p, c) in plane.iter().enumerate() {
                out.data[p * levels + k] = *c;
            }
        }
        Ok(out)
    }

    /// Largest `|c(k) - conj(c(-k))|` relative to the largest coefficient.
    pub fn symmetry_defect(&self, data: &[Complex64], levels: usize) -> f64 {
        let scale = data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut defect = 0.0f64;
        for (i, j) in self.modes() {
            let (pi, pj) = self.partner(i, j);
            for k in 0..levels {
                let a = data[(i * self.ny + j) * levels + k];
                let b = data[(pi * self.ny + pj) * levels + k];
                defect = defect.max((a - b.conj()).norm());
            }
        }
        defect / scale
    }

    pub fn to_physical2(&self, coeffs: &Spectral2) -> Result<Field2> {
        self.check2(coeffs.shape())?;
        let defect = self.symmetry_defect(&coeffs.data, 1);
        if defect > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { defect });
        }
        Ok(self.to_physical2_unchecked(coeffs))
    }

    /// Inverse transform keeping the real part, without the symmetry check.
    pub fn to_physical2_unchecked(&self, coeffs: &Spectral2) -> Field2 {
        let mut plane = coeffs.data.clone();
        self.plane_transform(&mut plane, false);
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: plane.iter().map(|c| c.re).collect(),
        }
    }

    pub fn to_physical3(&self, coeffs: &Spectral3) -> Result<Field3> {
        self.check3(coeffs.shape())?;
        let defect = self.symmetry_defect(&coeffs.data, coeffs.levels());
        if defect > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { defect });
        }
        Ok(self.to_physical3_unchecked(coeffs))
    }

    pub fn to_physical3_unchecked(&self, coeffs: &Spectral3) -> Field3 {
        let levels = coeffs.levels();
        let mut out = Field3::zeros(self.nx, self.ny, levels);
        let mut plane = vec![Complex64::new(0.0, 0.0); self.nx * self.ny];
        for k in 0..levels {
            for (p, c) in plane.iter_mut().enumerate() {
                *c = coeffs.data[p * levels + k];
            }
            self.plane_transform(&mut plane, false);
            for (p, c) in plane.iter().enumerate() {
                out.data[p * levels + k] = c.re;
            }
        }
        out
    }

    /// Zero every mode outside the 2/3-rule band; retained modes are untouched.
    pub fn dealias2(&self, coeffs: &mut Spectral2) {
        for (c, &keep) in coeffs.data.iter_mut().zip(&self.keep) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealias3(&self, coeffs: &mut Spectral3) {
        let levels = coeffs.levels();
        for (column, &keep) in coeffs.data.chunks_exact_mut(levels).zip(&self.keep) {
            if !keep {
                column.fill(Complex64::new(0.0, 0.0));
            }
        }
    }

    /// Spectral `(d/dx, d/dy)` of a plane.
    pub fn gradient2(&self, coeffs: &Spectral2) -> (Spectral2, Spectral2) {
        let mut dx = self.spectral_zeros2();
        let mut dy = self.spectral_zeros2();
        for (i, j) in self.modes() {
            let (a, b) = self.derivative_wavevector(i, j);
            let c = coeffs.get(i, j);
            dx.set(i, j, Complex64::new(0.0, a) * c);
            dy.set(i, j, Complex64::new(0.0, b) * c);
        }
        (dx, dy)
    }

    pub fn gradient3(&self, coeffs: &Spectral3) -> (Spectral3, Spectral3) {
        let mut dx = coeffs.clone();
        let mut dy = coeffs.clone();
        for (i, j) in self.modes() {
            let (a, b) = self.derivative_wavevector(i, j);
            dx.column_mut(i, j)
                .iter_mut()
                .for_each(|c| *c *= Complex64::new(0.0, a));
            dy.column_mut(i, j)
                .iter_mut()
                .for_each(|c| *c *= Complex64::new(0.0, b));
        }
        (dx, dy)
    }

    /// Spectral horizontal divergence of a vector field.
    pub fn divergence3(&self, u: &Spectral3, v: &Spectral3) -> Spectral3 {
        let mut out = u.clone();
        for (i, j) in self.modes() {
            let (a, b) = self.derivative_wavevector(i, j);
            let vcol = v.column(i, j);
            for (o, vv) in out.column_mut(i, j).iter_mut().zip(vcol) {
                *o = Complex64::new(0.0, a) * *o + Complex64::new(0.0, b) * *vv;
            }
        }
        out
    }

    pub fn divergence2(&self, u: &Spectral2, v: &Spectral2) -> Spectral2 {
        let mut out = self.spectral_zeros2();
        for (i, j) in self.modes() {
            let (a, b) = self.derivative_wavevector(i, j);
            out.set(
                i,
                j,
                Complex64::new(0.0, a) * u.get(i, j) + Complex64::new(0.0, b) * v.get(i, j),
            );
        }
        out
    }
}

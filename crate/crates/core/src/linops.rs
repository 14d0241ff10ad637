//! Per-mode vertical operators for the temperature system with dynamic
//! boundary condition and for the velocity Helmholtz problem.
//!
//! After a horizontal Fourier transform the coupled generator `A(T, rho) =
//! (Delta T, -dz T|top + Delta_H rho)` with `dz T|bottom = 0` and
//! `T|top = rho` becomes, for every wavevector `xi`, a tridiagonal matrix
//! acting on the column `(T_0, ..., T_{nz-1}, rho)`; the surface value of `T`
//! *is* `rho`, so the trace condition holds by construction.
//!
//! Interior rows are the centered second difference minus `|xi|^2`, the bottom
//! row eliminates the ghost value with the Neumann condition. The surface row
//! is the half-cell balance
//!
//! ```text
//! (1 + h/2) d rho/dt = -(T_nz - T_{nz-1}) / h - (1 + h/2) |xi|^2 rho
//! ```
//!
//! which is second-order consistent and makes the operator self-adjoint and
//! negative semidefinite for the trapezoid-weighted inner product with
//! weights `(h/2, h, ..., h, 1 + h/2)`, i.e. the norm
//! `||T||^2_{L^2(O)} + ||rho||^2_{L^2(G)}`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Mul, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field2, Field3, Grid, Spectral2, Spectral3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// Temperature column with the surface temperature as last unknown.
    Coupled,
    /// Velocity component with Neumann rows at both ends.
    Velocity,
}

/// Mass of the surface row: the surface unknown carries the `L^2(G)` weight
/// plus the upper half cell of the interior column.
#[inline]
pub fn surface_mass(h: f64) -> f64 {
    1.0 + 0.5 * h
}

/// Explicit load on the surface row from the surface tendency and the
/// interior tendency evaluated at `z = 1`.
#[inline]
pub fn surface_load<T>(surface: T, interior_top: T, h: f64) -> T
where
    T: Copy + std::ops::Add<Output = T> + Mul<f64, Output = T>,
{
    (surface + interior_top * (0.5 * h)) * (1.0 / surface_mass(h))
}

/// Tridiagonal vertical operator for one horizontal wavevector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    pub kind: OperatorKind,
    pub xi_sq: f64,
    pub nz: usize,
    /// Sub-diagonal; `lower[0]` is unused.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal; `upper[n-1]` is unused.
    pub upper: Vec<f64>,
}

impl ModeOperator {
    pub fn new(kind: OperatorKind, xi_sq: f64, nz: usize) -> Self {
        let n = nz + 1;
        let h = 1.0 / nz as f64;
        let inv_h2 = 1.0 / (h * h);
        let mut lower = vec![inv_h2; n];
        let mut diag = vec![-2.0 * inv_h2 - xi_sq; n];
        let mut upper = vec![inv_h2; n];
        lower[0] = 0.0;
        upper[0] = 2.0 * inv_h2;
        upper[n - 1] = 0.0;
        match kind {
            OperatorKind::Coupled => {
                let flux = 1.0 / (h * surface_mass(h));
                lower[n - 1] = flux;
                diag[n - 1] = -flux - xi_sq;
            }
            OperatorKind::Velocity => {
                lower[n - 1] = 2.0 * inv_h2;
            }
        }
        Self {
            kind,
            xi_sq,
            nz,
            lower,
            diag,
            upper,
        }
    }

    pub fn coupled(xi_sq: f64, nz: usize) -> Self {
        Self::new(OperatorKind::Coupled, xi_sq, nz)
    }

    pub fn velocity(xi_sq: f64, nz: usize) -> Self {
        Self::new(OperatorKind::Velocity, xi_sq, nz)
    }

    pub fn size(&self) -> usize {
        self.nz + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.nz as f64
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|j| {
                let mut acc = self.diag[j] * x[j];
                if j > 0 {
                    acc += self.lower[j] * x[j - 1];
                }
                if j + 1 < n {
                    acc += self.upper[j] * x[j + 1];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.diag[j];
            if j > 0 {
                m[(j, j - 1)] = self.lower[j];
            }
            if j + 1 < n {
                m[(j, j + 1)] = self.upper[j];
            }
        }
        m
    }

    /// Quadrature weights of the inner product in which the operator is
    /// self-adjoint.
    pub fn energy_weights(&self) -> Vec<f64> {
        let n = self.size();
        let h = self.h();
        let mut w = vec![h; n];
        w[0] = 0.5 * h;
        w[n - 1] = match self.kind {
            OperatorKind::Coupled => surface_mass(h),
            OperatorKind::Velocity => 0.5 * h,
        };
        w
    }

    /// Symmetric similarity transform `W^{1/2} M W^{-1/2}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let w: Vec<f64> = self.energy_weights().iter().map(|v| v.sqrt()).collect();
        let n = self.size();
        let mut s = self.to_dense();
        for r in 0..n {
            for c in 0..n {
                s[(r, c)] *= w[r] / w[c];
            }
        }
        // remove the rounding asymmetry
        (&s + s.transpose()) * 0.5
    }
}

/// Thomas factorization of `I - dt M`.
#[derive(Clone, Debug)]
pub struct ImplicitFactor {
    sub: Vec<f64>,
    c_prime: Vec<f64>,
    inv_den: Vec<f64>,
}

impl ImplicitFactor {
    pub fn new(op: &ModeOperator, dt: f64) -> Option<Self> {
        let n = op.size();
        let mut sub = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut inv_den = vec![0.0; n];
        let mut prev_c = 0.0;
        for j in 0..n {
            let a = if j > 0 { -dt * op.lower[j] } else { 0.0 };
            let b = 1.0 - dt * op.diag[j];
            let c = if j + 1 < n { -dt * op.upper[j] } else { 0.0 };
            let den = b - a * prev_c;
            if den == 0.0 || !den.is_finite() {
                return None;
            }
            sub[j] = a;
            inv_den[j] = 1.0 / den;
            c_prime[j] = c / den;
            prev_c = c_prime[j];
        }
        Some(Self {
            sub,
            c_prime,
            inv_den,
        })
    }

    pub fn solve_in_place<T>(&self, x: &mut [T])
    where
        T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
    {
        let n = x.len();
        x[0] = x[0] * self.inv_den[0];
        for j in 1..n {
            x[j] = (x[j] - x[j - 1] * self.sub[j]) * self.inv_den[j];
        }
        for j in (0..n - 1).rev() {
            x[j] = x[j] - x[j + 1] * self.c_prime[j];
        }
    }
}

/// Cached per-mode factorizations of `I - dt M` for one grid and time step.
#[derive(Clone, Debug)]
pub struct ImplicitSolver {
    kind: OperatorKind,
    dt: f64,
    nx: usize,
    ny: usize,
    factors: Vec<ImplicitFactor>,
}

impl ImplicitSolver {
    pub fn new(grid: &Grid, kind: OperatorKind, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive (got {dt})")));
        }
        let mut factors = Vec::with_capacity(grid.nx() * grid.ny());
        for (i, j) in grid.modes() {
            let op = ModeOperator::new(kind, grid.xi_sq(i, j), grid.nz());
            let (k1, k2) = grid.mode(i, j);
            factors.push(ImplicitFactor::new(&op, dt).ok_or(Error::SingularSolve { k1, k2 })?);
        }
        Ok(Self {
            kind,
            dt,
            nx: grid.nx(),
            ny: grid.ny(),
            factors,
        })
    }

    pub fn coupled(grid: &Grid, dt: f64) -> Result<Self> {
        Self::new(grid, OperatorKind::Coupled, dt)
    }

    pub fn velocity(grid: &Grid, dt: f64) -> Result<Self> {
        Self::new(grid, OperatorKind::Velocity, dt)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solve `(I - dt M) x = rhs` for every mode column in place.
    pub fn solve(&self, rhs: &mut Spectral3) {
        let (nx, ny, _) = rhs.shape();
        debug_assert_eq!((nx, ny), (self.nx, self.ny));
        for i in 0..nx {
            for j in 0..ny {
                self.factors[i * ny + j].solve_in_place(rhs.column_mut(i, j));
            }
        }
    }

    pub fn solve_mode(&self, i: usize, j: usize, column: &mut [Complex64]) {
        self.factors[i * self.ny + j].solve_in_place(column);
    }
}

/// Implicit solve of the coupled temperature system. Levels `0..nz` of
/// `rhs_temp` and the surface right-hand side `rhs_rho` are used; the returned
/// temperature carries the surface value as its top level.
pub fn solve_coupled_implicit(
    grid: &Grid,
    rhs_temp: &Spectral3,
    rhs_rho: &Spectral2,
    dt: f64,
) -> Result<(Spectral3, Spectral2)> {
    let solver = ImplicitSolver::coupled(grid, dt)?;
    let mut x = rhs_temp.clone();
    x.set_level(grid.nz(), rhs_rho);
    solver.solve(&mut x);
    let rho = x.level(grid.nz());
    Ok((x, rho))
}

pub fn solve_velocity_implicit(grid: &Grid, rhs: &Spectral3, dt: f64) -> Result<Spectral3> {
    let solver = ImplicitSolver::velocity(grid, dt)?;
    let mut x = rhs.clone();
    solver.solve(&mut x);
    Ok(x)
}

/// Discrete harmonic extension of unit surface data for one wavevector:
/// interior Laplacian rows, ghost-eliminated Neumann bottom, value 1 at the
/// surface.
pub fn dirichlet_profile(xi_sq: f64, nz: usize) -> Vec<f64> {
    let op = ModeOperator::coupled(xi_sq, nz);
    // Rows 0..nz of -M restricted to the interior unknowns, surface value moved
    // to the right-hand side.
    let n = nz;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        a[j] = -op.lower[j];
        b[j] = -op.diag[j];
        c[j] = -op.upper[j];
    }
    rhs[n - 1] = op.upper[n - 1];
    // Thomas sweep; the system is strictly diagonally dominant in the last row
    // and weakly elsewhere, and irreducible.
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for j in 1..n {
        let den = b[j] - a[j] * cp[j - 1];
        cp[j] = c[j] / den;
        dp[j] = (rhs[j] - a[j] * dp[j - 1]) / den;
    }
    let mut theta = vec![0.0; nz + 1];
    theta[nz] = 1.0;
    theta[n - 1] = dp[n - 1];
    for j in (0..n - 1).rev() {
        theta[j] = dp[j] - cp[j] * theta[j + 1];
    }
    theta
}

/// Dirichlet map `L0`: harmonic extension with zero flux at the bottom.
pub fn dirichlet_map(grid: &Grid, phi: &Field2) -> Result<Field3> {
    let s = grid.to_spectral2(phi)?;
    let mut out = grid.spectral_zeros3();
    for (i, j) in grid.modes() {
        let profile = dirichlet_profile(grid.xi_sq(i, j), grid.nz());
        let c = s.get(i, j);
        for (o, p) in out.column_mut(i, j).iter_mut().zip(&profile) {
            *o = c * *p;
        }
    }
    let mut field = grid.to_physical3_unchecked(&out);
    // the surface row of the extension is the data itself
    field.set_level(grid.nz(), phi);
    Ok(field)
}

/// Discrete Dirichlet-to-Neumann symbol: one-sided `dz` of the discrete
/// harmonic extension at the surface. The continuum symbol is
/// `|xi| tanh |xi|`.
///
/// The extension itself is second order; the five-point stencil keeps the
/// differentiation error below it, so the symbol error stays `O(h^2)` with a
/// small constant. Needs `nz >= 4`.
pub fn dtn_symbol(xi_sq: f64, nz: usize) -> f64 {
    const STENCIL: [f64; 5] = [25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25];
    let theta = dirichlet_profile(xi_sq, nz);
    let h = 1.0 / nz as f64;
    STENCIL
        .iter()
        .enumerate()
        .map(|(m, c)| c * theta[nz - m])
        .sum::<f64>()
        / h
}

pub fn dtn_continuum_symbol(xi_sq: f64) -> f64 {
    let xi = xi_sq.sqrt();
    xi * xi.tanh()
}

pub fn dtn_apply(grid: &Grid, phi: &Field2) -> Result<Field2> {
    let mut s = grid.to_spectral2(phi)?;
    for (i, j) in grid.modes() {
        let sym = dtn_symbol(grid.xi_sq(i, j), grid.nz());
        s.set(i, j, s.get(i, j) * sym);
    }
    Ok(grid.to_physical2_unchecked(&s))
}

/// `S^{-1} (T, rho) = (T - L0 rho, rho)`.
pub fn similarity_split(grid: &Grid, temp: &Field3, rho: &Field2) -> Result<(Field3, Field2)> {
    let ext = dirichlet_map(grid, rho)?;
    let mut out = temp.clone();
    for (o, e) in out.data.iter_mut().zip(&ext.data) {
        *o -= e;
    }
    Ok((out, rho.clone()))
}

/// `S (T0, rho) = (T0 + L0 rho, rho)`.
pub fn similarity_join(grid: &Grid, temp0: &Field3, rho: &Field2) -> Result<(Field3, Field2)> {
    let ext = dirichlet_map(grid, rho)?;
    let mut out = temp0.clone();
    for (o, e) in out.data.iter_mut().zip(&ext.data) {
        *o += e;
    }
    Ok((out, rho.clone()))
}

/// `phi_1(x) = (e^x - 1) / x`, with `phi_1(0) = 1`.
#[inline]
pub fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// Exact per-mode propagator `E = exp(dt M)` and the averaged noise response
/// `phi_1(dt M) b` for an injection vector `b`.
#[derive(Clone, Debug)]
pub struct ModePropagator {
    pub exp: DMatrix<f64>,
    pub phi_injection: DVector<f64>,
}

impl ModePropagator {
    /// Built from the eigendecomposition of the symmetrized operator, which is
    /// exact up to rounding since `M` is similar to a symmetric matrix.
    pub fn new(op: &ModeOperator, dt: f64, injection: &[f64]) -> Self {
        let n = op.size();
        let sqrt_w: Vec<f64> = op.energy_weights().iter().map(|v| v.sqrt()).collect();
        let eig = SymmetricEigen::new(op.symmetrized());
        let v = &eig.eigenvectors;
        let exp_diag = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| (dt * l).exp()));
        let phi_diag = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| phi1(dt * l)));

        let sym_exp = v * DMatrix::from_diagonal(&exp_diag) * v.transpose();
        let mut exp = sym_exp;
        for r in 0..n {
            for c in 0..n {
                exp[(r, c)] *= sqrt_w[c] / sqrt_w[r];
            }
        }
        let b = DVector::from_iterator(n, injection.iter().zip(&sqrt_w).map(|(b, w)| b * w));
        let mut phi_injection = v * DMatrix::from_diagonal(&phi_diag) * (v.transpose() * b);
        for r in 0..n {
            phi_injection[r] /= sqrt_w[r];
        }
        Self { exp, phi_injection }
    }
}

/// Injection vector of surface noise: the forcing acts on the surface row
/// with the surface-row mass.
pub fn surface_injection(nz: usize) -> Vec<f64> {
    let mut b = vec![0.0; nz + 1];
    b[nz] = 1.0 / surface_mass(1.0 / nz as f64);
    b
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpectrum {
    pub k1: i64,
    pub k2: i64,
    /// Eigenvalues of `omega I - M`.
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorReport {
    pub omega: f64,
    pub modes: Vec<ModeSpectrum>,
    /// Largest `|arg lambda|` over all reported eigenvalues.
    pub max_angle: f64,
    /// Smallest real part among the eigenvalues of `-M` (unshifted).
    pub min_real_part: f64,
}

impl SectorReport {
    pub fn is_sectorial(&self) -> bool {
        self.max_angle < PI / 2.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# ebpe spectrum v1\n");
        out.push_str("k1,k2,re,im\n");
        for m in &self.modes {
            for l in &m.eigenvalues {
                let _ = writeln!(out, "{},{},{:.16e},{:.16e}", m.k1, m.k2, l.re, l.im);
            }
        }
        let _ = writeln!(
            out,
            "# omega={:.16e},max_angle={:.16e},min_real_part={:.16e}",
            self.omega, self.max_angle, self.min_real_part
        );
        out
    }
}

/// Eigenvalues of `omega I - M` for the retained modes, ordered by `|xi|`,
/// at most `max_modes` of them.
pub fn spectrum_report(grid: &Grid, omega: f64, max_modes: usize) -> Result<SectorReport> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive (got {omega})")));
    }
    let mut modes: Vec<(usize, usize)> = grid
        .modes()
        .filter(|&(i, j)| grid.is_retained(i, j))
        .collect();
    modes.sort_by(|a, b| {
        grid.xi_sq(a.0, a.1)
            .total_cmp(&grid.xi_sq(b.0, b.1))
            .then_with(|| grid.mode(a.0, a.1).cmp(&grid.mode(b.0, b.1)))
    });
    modes.truncate(max_modes);

    let mut report = SectorReport {
        omega,
        modes: Vec::with_capacity(modes.len()),
        max_angle: 0.0,
        min_real_part: f64::INFINITY,
    };
    for (i, j) in modes {
        let (k1, k2) = grid.mode(i, j);
        let op = ModeOperator::coupled(grid.xi_sq(i, j), grid.nz());
        let n = op.size();
        let shifted = DMatrix::identity(n, n) * omega - op.to_dense();
        let schur = Schur::try_new(shifted, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Eigen(format!("Schur iteration did not converge at mode ({k1}, {k2})")))?;
        let eigenvalues: Vec<Complex64> = schur
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re, c.im))
            .collect();
        for l in &eigenvalues {
            report.max_angle = report.max_angle.max(l.arg().abs());
            report.min_real_part = report.min_real_part.min(l.re - omega);
        }
        report.modes.push(ModeSpectrum { k1, k2, eigenvalues });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constants_in_kernel_at_zero_mode() {
        let op = ModeOperator::coupled(0.0, 8);
        let y = op.apply(&[2.5; 9]);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        let op = ModeOperator::velocity(0.0, 8);
        assert!(op.apply(&[-1.0; 9]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn interior_rows_approximate_cosine_laplacian() {
        for nz in [16, 32] {
            let op = ModeOperator::coupled(0.0, nz);
            let h = 1.0 / nz as f64;
            let x: Vec<f64> = (0..=nz).map(|k| (PI * k as f64 * h).cos()).collect();
            let y = op.apply(&x);
            for k in 0..nz {
                let exact = -PI * PI * x[k];
                assert!((y[k] - exact).abs() < PI.powi(4) * h * h / 6.0, "nz={nz} k={k}");
            }
        }
    }

    #[test]
    fn operator_is_self_adjoint_in_energy_weights() {
        for kind in [OperatorKind::Coupled, OperatorKind::Velocity] {
            let op = ModeOperator::new(kind, 39.0, 8);
            let w = op.energy_weights();
            let m = op.to_dense();
            for r in 0..9 {
                for c in 0..9 {
                    assert!((w[r] * m[(r, c)] - w[c] * m[(c, r)]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigenvalues_of_minus_m_nonnegative() {
        let xi = 2.0 * PI;
        let op = ModeOperator::coupled(xi * xi, 16);
        let eig = op.to_dense().complex_eigenvalues();
        assert!(eig.iter().all(|l| -l.re >= -1e-10));
    }

    #[test]
    fn tiny_dt_returns_rhs() {
        let g = Grid::new(4, 4, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rhs = g.spectral_zeros3();
        rhs.data
            .iter_mut()
            .for_each(|c| *c = Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        let solver = ImplicitSolver::coupled(&g, 1e-12).unwrap();
        let mut x = rhs.clone();
        solver.solve(&mut x);
        for (a, b) in x.data.iter().zip(&rhs.data) {
            assert!((a - b).norm() <= 1e-9);
        }
    }

    #[test]
    fn constant_column_is_preserved() {
        let g = Grid::new(4, 4, 8).unwrap();
        let mut rhs = g.spectral_zeros3();
        rhs.column_mut(0, 0).fill(Complex64::new(1.7, 0.0));
        for dt in [1e-3, 1.0, 100.0] {
            let (t, rho) = solve_coupled_implicit(&g, &rhs, &rhs.level(g.nz()), dt).unwrap();
            assert!(t.column(0, 0).iter().all(|c| (c.re - 1.7).abs() < 1e-12));
            assert!((rho.get(0, 0).re - 1.7).abs() < 1e-12);
            let v = solve_velocity_implicit(&g, &rhs, dt).unwrap();
            assert!(v.column(0, 0).iter().all(|c| (c.re - 1.7).abs() < 1e-12));
        }
    }

    fn dense_solve(op: &ModeOperator, dt: f64, rhs: &[f64]) -> Vec<f64> {
        let n = op.size();
        let a = DMatrix::identity(n, n) - op.to_dense() * dt;
        a.lu()
            .solve(&DVector::from_column_slice(rhs))
            .unwrap()
            .iter()
            .copied()
            .collect()
    }

    #[test]
    fn thomas_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [OperatorKind::Coupled, OperatorKind::Velocity] {
            for _ in 0..10 {
                let op = ModeOperator::new(kind, rng.random_range(0.0..400.0), 8);
                let dt = 10f64.powf(rng.random_range(-4.0..1.0));
                let rhs: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut x = rhs.clone();
                ImplicitFactor::new(&op, dt).unwrap().solve_in_place(&mut x);
                let oracle = dense_solve(&op, dt, &rhs);
                for (a, b) in x.iter().zip(&oracle) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn velocity_neumann_eigenfunction() {
        // cos(pi z) at xi = 0, dt = 1: continuum answer cos(pi z) / (1 + pi^2).
        let mut errs = Vec::new();
        for nz in [16, 32] {
            let op = ModeOperator::velocity(0.0, nz);
            let h = 1.0 / nz as f64;
            let mut x: Vec<f64> = (0..=nz).map(|k| (PI * k as f64 * h).cos()).collect();
            ImplicitFactor::new(&op, 1.0).unwrap().solve_in_place(&mut x);
            let err = (0..=nz)
                .map(|k| (x[k] - (PI * k as f64 * h).cos() / (1.0 + PI * PI)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 1e-2);
        assert!(errs[0] / errs[1] > 3.5);
    }

    #[test]
    fn dirichlet_profile_matches_cosh() {
        let xi = 2.0 * PI;
        let mut errs = Vec::new();
        for nz in [16, 32, 64] {
            let theta = dirichlet_profile(xi * xi, nz);
            assert_eq!(theta[nz], 1.0);
            errs.push((theta[0] - 1.0 / xi.cosh()).abs());
        }
        assert!((1.0 / xi.cosh() - 3.7348e-3).abs() < 1e-7);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
        assert!(dirichlet_profile(0.0, 8).iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn dirichlet_map_reproduces_data() {
        let g = Grid::new(8, 8, 8).unwrap();
        let phi = g.field2_from_fn(|x, y| 1.0 + (2.0 * PI * x).cos() * (2.0 * PI * y).sin());
        let ext = dirichlet_map(&g, &phi).unwrap();
        assert_eq!(ext.level(8), phi);
        let c = g.field2_from_fn(|_, _| 0.4);
        let ext = dirichlet_map(&g, &c).unwrap();
        assert!(ext.data.iter().all(|v| (v - 0.4).abs() < 1e-13));
    }

    #[test]
    fn dtn_examples() {
        assert!(dtn_symbol(0.0, 8).abs() < 1e-12);
        let xi = 2.0 * PI;
        let exact = dtn_continuum_symbol(xi * xi);
        assert!((exact - 6.283_141_484).abs() < 1e-8);
        assert!((dtn_symbol(xi * xi, 64) - exact).abs() < 5e-3);

        let g = Grid::new(8, 8, 16).unwrap();
        let a = g.field2_from_fn(|x, _| (2.0 * PI * x).cos());
        let b = g.field2_from_fn(|x, y| (2.0 * PI * (x + y)).sin() + 0.3);
        let combo = g.field2_from_fn(|x, y| {
            2.0 * (2.0 * PI * x).cos() - 0.5 * ((2.0 * PI * (x + y)).sin() + 0.3)
        });
        let na = dtn_apply(&g, &a).unwrap();
        let nb = dtn_apply(&g, &b).unwrap();
        let nc = dtn_apply(&g, &combo).unwrap();
        for p in 0..64 {
            assert!((nc.data[p] - (2.0 * na.data[p] - 0.5 * nb.data[p])).abs() < 1e-13 * 40.0);
        }
    }

    #[test]
    fn similarity_split_examples() {
        let g = Grid::new(8, 8, 8).unwrap();
        let rho = g.field2_from_fn(|x, y| (2.0 * PI * x).sin() + (2.0 * PI * y).cos() + 0.2);
        let ext = dirichlet_map(&g, &rho).unwrap();
        let (t0, r) = similarity_split(&g, &ext, &rho).unwrap();
        assert!(t0.sup_norm() < 1e-13);
        assert_eq!(r, rho);

        let t = g.field3_from_fn(|x, _, z| x * z);
        let (t0, r) = similarity_split(&g, &t, &g.zeros2()).unwrap();
        assert_eq!(t0, t);
        assert!(r.data.iter().all(|&v| v == 0.0));

        // compatible pair: zero trace after the split, identity after the join
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = g.field3_from_fn(|_, _, _| rng.random_range(-1.0..1.0));
        t.set_level(8, &rho);
        let (t0, r) = similarity_split(&g, &t, &rho).unwrap();
        assert!(t0.level(8).sup_norm() <= 1e-12);
        let (back, _) = similarity_join(&g, &t0, &r).unwrap();
        for (a, b) in back.data.iter().zip(&t.data) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn propagator_matches_pade_exponential() {
        let xi = 2.0 * PI;
        let op = ModeOperator::coupled(xi * xi, 8);
        let dt = 0.01;
        let b = surface_injection(8);
        let prop = ModePropagator::new(&op, dt, &b);
        let oracle = (op.to_dense() * dt).exp();
        assert!((&prop.exp - &oracle).amax() < 1e-12);
        // phi_1 via the augmented-matrix exponential
        let n = op.size();
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(op.to_dense() * dt));
        for r in 0..n {
            aug[(r, n)] = b[r];
        }
        let e = aug.exp();
        for r in 0..n {
            assert!((prop.phi_injection[r] - e[(r, n)]).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_at_first_mode_matches_dense_oracle() {
        let g = Grid::new(8, 8, 16).unwrap();
        let report = spectrum_report(&g, 1.0, 2).unwrap();
        assert_eq!((report.modes[0].k1, report.modes[0].k2), (0, 0));
        assert!(report.modes[0]
            .eigenvalues
            .iter()
            .any(|l| (l.re - 1.0).abs() < 1e-10 && l.im.abs() < 1e-10));
        let first = &report.modes[1];
        let xi_sq = 4.0 * PI * PI * ((first.k1 * first.k1 + first.k2 * first.k2) as f64);
        let op = ModeOperator::coupled(xi_sq, 16);
        let mut oracle: Vec<f64> = SymmetricEigen::new(op.symmetrized())
            .eigenvalues
            .iter()
            .map(|l| 1.0 - l)
            .collect();
        oracle.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = first.eigenvalues.iter().map(|l| l.re).collect();
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        assert!(report.is_sectorial());
        assert!(report.to_csv().starts_with("# ebpe spectrum v1\nk1,k2,re,im\n"));
    }
}

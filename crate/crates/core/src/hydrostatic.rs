//! Hydrostatic reconstructions: vertical averages, the diagnosed vertical
//! velocity, pressure from temperature, the baroclinic forcing and the
//! barotropic projection that enforces `div_H vbar = 0`.
//!
//! All vertical integrals use the trapezoid rule on the uniform grid.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{Field2, Field3, Grid, Spectral2, Spectral3};

/// Trapezoid-rule average of one column over `[0, 1]`.
pub fn column_average<T>(column: &[T], h: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = column.len() - 1;
    let mut acc = (column[0] + column[n]) * 0.5;
    for &c in &column[1..n] {
        acc = acc + c;
    }
    acc * h
}

/// Cumulative trapezoid integral `int_0^{z_k}` of one column; entry 0 is zero.
pub fn cumulative_trapezoid<T>(column: &[T], h: f64, out: &mut [T])
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    out[0] = column[0] * 0.0;
    for k in 1..column.len() {
        out[k] = out[k - 1] + (column[k - 1] + column[k]) * (0.5 * h);
    }
}

pub fn vertical_average(grid: &Grid, f: &Field3) -> Field2 {
    let mut out = grid.zeros2();
    for (i, j) in grid.modes() {
        out.set(i, j, column_average(f.column(i, j), grid.h()));
    }
    out
}

pub fn vertical_average_spectral(grid: &Grid, f: &Spectral3) -> Spectral2 {
    let mut out = grid.spectral_zeros2();
    for (i, j) in grid.modes() {
        out.set(i, j, column_average(f.column(i, j), grid.h()));
    }
    out
}

fn cumulative_spectral(grid: &Grid, f: &Spectral3) -> Spectral3 {
    let mut out = f.clone();
    for (i, j) in grid.modes() {
        cumulative_trapezoid(f.column(i, j), grid.h(), out.column_mut(i, j));
    }
    out
}

/// `w = -int_0^z div_H v`, in spectral form.
pub fn diagnose_w_spectral(grid: &Grid, v1: &Spectral3, v2: &Spectral3) -> Spectral3 {
    let div = grid.divergence3(v1, v2);
    let mut w = cumulative_spectral(grid, &div);
    w.data.iter_mut().for_each(|c| *c = -*c);
    w
}

pub fn diagnose_w(grid: &Grid, v1: &Field3, v2: &Field3) -> Result<Field3> {
    let w = diagnose_w_spectral(grid, &grid.to_spectral3(v1)?, &grid.to_spectral3(v2)?);
    Ok(grid.to_physical3_unchecked(&w))
}

/// `p = p_s - int_0^z T`.
pub fn pressure_field(grid: &Grid, temp: &Field3, surface_pressure: &Field2) -> Field3 {
    let mut out = grid.zeros3();
    for (i, j) in grid.modes() {
        let col = out.column_mut(i, j);
        cumulative_trapezoid(temp.column(i, j), grid.h(), col);
        let ps = surface_pressure.get(i, j);
        col.iter_mut().for_each(|p| *p = ps - *p);
    }
    out
}

/// Spectral `grad_H int_0^z T`, the right-hand side of the momentum equation.
pub fn baroclinic_grad_spectral(grid: &Grid, temp: &Spectral3) -> (Spectral3, Spectral3) {
    grid.gradient3(&cumulative_spectral(grid, temp))
}

pub fn baroclinic_grad(grid: &Grid, temp: &Field3) -> Result<(Field3, Field3)> {
    let (gx, gy) = baroclinic_grad_spectral(grid, &grid.to_spectral3(temp)?);
    Ok((
        grid.to_physical3_unchecked(&gx),
        grid.to_physical3_unchecked(&gy),
    ))
}

/// Result of the barotropic projection in spectral form.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Potential `phi` with `Delta_H phi = div_H vbar`, zero mean.
    pub potential: Spectral2,
    /// Removed gradient `grad_H phi` (z-independent).
    pub grad: (Spectral2, Spectral2),
}

/// Remove `grad_H phi` from every level so that the vertical average is
/// horizontally divergence free. The `k = 0` mode is left untouched.
pub fn project_barotropic_spectral(
    grid: &Grid,
    v1: &mut Spectral3,
    v2: &mut Spectral3,
) -> Projection {
    let mean1 = vertical_average_spectral(grid, v1);
    let mean2 = vertical_average_spectral(grid, v2);
    let div = grid.divergence2(&mean1, &mean2);
    let mut potential = grid.spectral_zeros2();
    let mut gx = grid.spectral_zeros2();
    let mut gy = grid.spectral_zeros2();
    for (i, j) in grid.modes() {
        let (a, b) = grid.derivative_wavevector(i, j);
        let lap = a * a + b * b;
        if lap == 0.0 {
            continue;
        }
        let phi = div.get(i, j) / (-lap);
        potential.set(i, j, phi);
        let dx = Complex64::new(0.0, a) * phi;
        let dy = Complex64::new(0.0, b) * phi;
        gx.set(i, j, dx);
        gy.set(i, j, dy);
        v1.column_mut(i, j).iter_mut().for_each(|c| *c -= dx);
        v2.column_mut(i, j).iter_mut().for_each(|c| *c -= dy);
    }
    Projection {
        potential,
        grad: (gx, gy),
    }
}

/// Physical-space projection; returns the projected velocity and the removed
/// gradient.
pub fn project_barotropic(
    grid: &Grid,
    v1: &Field3,
    v2: &Field3,
) -> Result<((Field3, Field3), (Field2, Field2))> {
    let mut s1 = grid.to_spectral3(v1)?;
    let mut s2 = grid.to_spectral3(v2)?;
    let proj = project_barotropic_spectral(grid, &mut s1, &mut s2);
    Ok((
        (
            grid.to_physical3_unchecked(&s1),
            grid.to_physical3_unchecked(&s2),
        ),
        (
            grid.to_physical2_unchecked(&proj.grad.0),
            grid.to_physical2_unchecked(&proj.grad.1),
        ),
    ))
}

/// Sup norm of `div_H vbar` for a velocity field.
pub fn barotropic_divergence(grid: &Grid, v1: &Field3, v2: &Field3) -> Result<f64> {
    let m1 = grid.to_spectral2(&vertical_average(grid, v1))?;
    let m2 = grid.to_spectral2(&vertical_average(grid, v2))?;
    Ok(grid
        .to_physical2_unchecked(&grid.divergence2(&m1, &m2))
        .sup_norm())
}

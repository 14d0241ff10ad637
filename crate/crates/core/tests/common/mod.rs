#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

/// Coupled column operator assembled from the stencil definitions: Neumann
/// ghost row at the bottom, centered rows inside, half-cell balance for the
/// surface unknown `(1 + h/2) rho' = -(T_N - T_{N-1})/h - (1 + h/2)|xi|^2 rho`.
pub fn dense_coupled(xi_sq: f64, nz: usize) -> DMatrix<f64> {
    let n = nz + 1;
    let h = 1.0 / nz as f64;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..nz {
        m[(r, r)] = -2.0 / (h * h) - xi_sq;
        if r > 0 {
            m[(r, r - 1)] = 1.0 / (h * h);
        }
        m[(r, r + 1)] = 1.0 / (h * h);
    }
    m[(0, 1)] = 2.0 / (h * h);
    let c = 1.0 + h / 2.0;
    m[(nz, nz - 1)] = 1.0 / (h * c);
    m[(nz, nz)] = -1.0 / (h * c) - xi_sq;
    m
}

/// Velocity column operator: Neumann ghost rows at both ends.
pub fn dense_velocity(xi_sq: f64, nz: usize) -> DMatrix<f64> {
    let n = nz + 1;
    let h = 1.0 / nz as f64;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        m[(r, r)] = -2.0 / (h * h) - xi_sq;
        if r > 0 {
            m[(r, r - 1)] = 1.0 / (h * h);
        }
        if r + 1 < n {
            m[(r, r + 1)] = 1.0 / (h * h);
        }
    }
    m[(0, 1)] = 2.0 / (h * h);
    m[(nz, nz - 1)] = 2.0 / (h * h);
    m
}

/// `(I - dt M)^{-1} rhs` by dense LU.
pub fn dense_implicit(m: &DMatrix<f64>, dt: f64, rhs: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows();
    let a = DMatrix::identity(n, n) - m * dt;
    a.lu().solve(rhs).expect("nonsingular")
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn config_text(name: &str) -> String {
    std::fs::read_to_string(config_path(name)).expect("config file")
}

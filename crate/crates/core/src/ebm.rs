//! Surface energy balance: co-albedo ramp, radiation budget and insolation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Field2, Grid};

/// Which horizontal velocity carries the surface temperature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportVariant {
    /// `v|_{z=1} . grad_H rho` (deterministic model).
    SurfaceTrace,
    /// `vbar . grad_H rho` (model used by the stochastic drivers).
    VerticalAverage,
}

impl FromStr for TransportVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "surface_trace" => Ok(Self::SurfaceTrace),
            "vertical_average" => Ok(Self::VerticalAverage),
            other => Err(format!(
                "unknown transport '{other}' (expected surface_trace or vertical_average)"
            )),
        }
    }
}

impl fmt::Display for TransportVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SurfaceTrace => "surface_trace",
            Self::VerticalAverage => "vertical_average",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysParams {
    /// Co-albedo of ice-covered surface.
    pub beta1: f64,
    /// Co-albedo of ice-free surface.
    pub beta2: f64,
    /// Ice-melt reference temperature.
    pub rho_ref: f64,
    /// Insolation on the surface grid.
    pub insolation: Field2,
    pub transport: TransportVariant,
    pub radiation_on: bool,
}

impl PhysParams {
    pub fn new(
        beta1: f64,
        beta2: f64,
        rho_ref: f64,
        insolation: Field2,
        transport: TransportVariant,
        radiation_on: bool,
    ) -> Result<Self> {
        validate_coalbedo_bounds(beta1, beta2)?;
        // Q = 0 is allowed as a switch-off for diagnostic runs.
        if insolation.data.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidParameter(
                "insolation must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            beta1,
            beta2,
            rho_ref,
            insolation,
            transport,
            radiation_on,
        })
    }

    pub fn coalbedo(&self, rho: f64) -> f64 {
        coalbedo(rho, self.beta1, self.beta2, self.rho_ref)
    }

    /// Pointwise `R(x, rho) = Q(x) beta(rho) - |rho|^3 rho`; zero when the
    /// radiation switch is off.
    pub fn radiation(&self, rho: &Field2) -> Field2 {
        if !self.radiation_on {
            return Field2::zeros(rho.shape().0, rho.shape().1);
        }
        let mut out = rho.clone();
        for (r, q) in out.data.iter_mut().zip(&self.insolation.data) {
            *r = radiation_point(*r, *q, self);
        }
        out
    }

    pub fn max_insolation(&self) -> f64 {
        self.insolation.sup_norm()
    }
}

pub fn validate_coalbedo_bounds(beta1: f64, beta2: f64) -> Result<()> {
    if !(beta1 > 0.0 && beta1 < beta2) || !beta2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "co-albedo bounds must satisfy 0<β₁<β₂ (got β₁={beta1}, β₂={beta2})"
        )));
    }
    Ok(())
}

/// `beta(rho) = beta1 + (beta2 - beta1) (1 + tanh(rho - rho_ref)) / 2`.
#[inline]
pub fn coalbedo(rho: f64, beta1: f64, beta2: f64, rho_ref: f64) -> f64 {
    beta1 + (beta2 - beta1) * 0.5 * (1.0 + (rho - rho_ref).tanh())
}

pub fn coalbedo_field(rho: &Field2, params: &PhysParams) -> Field2 {
    rho.map(|r| params.coalbedo(r))
}

/// Stefan-Boltzmann emission `|rho|^3 rho`.
#[inline]
pub fn emission(rho: f64) -> f64 {
    rho.abs().powi(3) * rho
}

#[inline]
pub fn radiation_point(rho: f64, insolation: f64, params: &PhysParams) -> f64 {
    insolation * params.coalbedo(rho) - emission(rho)
}

/// `Q(x, y) = Q0 (1 + q1 cos(2 pi y))`.
pub fn default_insolation(grid: &Grid, q0: f64, q1: f64) -> Result<Field2> {
    if !(q0 > 0.0) || !(q1.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "insolation must stay positive: need Q0 > 0 and |q1| < 1 (got Q0={q0}, q1={q1})"
        )));
    }
    Ok(grid.field2_from_fn(|_, y| q0 * (1.0 + q1 * (2.0 * PI * y).cos())))
}

//! Run-time checks of the a priori structure of the system: sup-norm
//! confinement, the energy and H1 ledgers, constraint residuals, and
//! manufactured-solution convergence studies.
//!
//! Discrete norms: horizontal means over the collocation points, trapezoid
//! rule in `z`. With these, `E0 = 1/2 (|v|^2 + |T|^2 + |rho|^2)` is exactly
//! the energy in which the implicit operator is dissipative.

use std::f64::consts::PI;

use crate::ebm::{PhysParams, TransportVariant};
use crate::error::Result;
use crate::grid::{Field2, Field3, Grid};
use crate::hydrostatic::{barotropic_divergence, diagnose_w};
use crate::io::diagnostics::DiagnosticsRow;
use crate::timestep::{Forcing, RunConfig, State, Stepper, Tendencies};

pub const TRACE_TOL: f64 = 1e-12;
pub const SOLENOIDAL_TOL: f64 = 1e-10;

pub const FLAG_MAX_PRINCIPLE: u32 = 1;
pub const FLAG_ENERGY: u32 = 2;
pub const FLAG_H1: u32 = 4;
pub const FLAG_CONSTRAINT: u32 = 8;

/// Trapezoid-in-z, mean-in-xy square norm of a 3D field.
pub fn norm_sq3(f: &Field3) -> f64 {
    let levels = f.levels();
    let h = 1.0 / (levels - 1) as f64;
    let mut acc = 0.0;
    for col in f.data.chunks_exact(levels) {
        let mut s = 0.5 * (col[0] * col[0] + col[levels - 1] * col[levels - 1]);
        for v in &col[1..levels - 1] {
            s += v * v;
        }
        acc += s * h;
    }
    acc / (f.data.len() / levels) as f64
}

pub fn norm_sq2(f: &Field2) -> f64 {
    f.mean_square()
}

/// `|grad f|^2` of a 3D field: spectral horizontal part plus forward
/// differences in `z`.
pub fn grad_sq3(grid: &Grid, f: &Field3) -> Result<f64> {
    let s = grid.to_spectral3(f)?;
    let levels = grid.levels();
    let h = grid.h();
    let mut horizontal = 0.0;
    for (i, j) in grid.modes() {
        let col = s.column(i, j);
        let mut acc = 0.5 * (col[0].norm_sqr() + col[levels - 1].norm_sqr());
        for c in &col[1..levels - 1] {
            acc += c.norm_sqr();
        }
        horizontal += grid.xi_sq(i, j) * acc * h;
    }
    let mut vertical = 0.0;
    for col in f.data.chunks_exact(levels) {
        for k in 0..levels - 1 {
            let d = col[k + 1] - col[k];
            vertical += d * d / h;
        }
    }
    Ok(horizontal + vertical / (grid.nx() * grid.ny()) as f64)
}

pub fn grad_sq2(grid: &Grid, f: &Field2) -> Result<f64> {
    let s = grid.to_spectral2(f)?;
    Ok(grid
        .modes()
        .map(|(i, j)| grid.xi_sq(i, j) * s.get(i, j).norm_sqr())
        .sum())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstraintResiduals {
    /// `max |T(., 1) - rho|`.
    pub trace: f64,
    /// One-sided second-order `dz T` at the bottom. The scheme imposes the
    /// condition through the ghost point, so this is a consistency measure,
    /// not an invariant.
    pub bottom_neumann: f64,
    /// `max |div_H vbar|`.
    pub solenoidal: f64,
    /// `max |w(., 1)|`.
    pub w_top: f64,
}

impl ConstraintResiduals {
    pub fn within_tolerance(&self, velocity_sup: f64, rho_sup: f64) -> bool {
        self.trace <= TRACE_TOL * (1.0 + rho_sup)
            && self.solenoidal <= SOLENOIDAL_TOL * (1.0 + velocity_sup)
            && self.w_top <= SOLENOIDAL_TOL * (1.0 + velocity_sup)
    }
}

pub fn constraint_check(grid: &Grid, state: &State) -> Result<ConstraintResiduals> {
    state.check_shape(grid)?;
    let nz = grid.nz();
    let h = grid.h();
    let mut trace: f64 = 0.0;
    let mut bottom: f64 = 0.0;
    for (i, j) in grid.modes() {
        let col = state.temp.column(i, j);
        trace = trace.max((col[nz] - state.rho.get(i, j)).abs());
        bottom = bottom.max(((-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * h)).abs());
    }
    let w = diagnose_w(grid, &state.v1, &state.v2)?;
    Ok(ConstraintResiduals {
        trace,
        bottom_neumann: bottom,
        solenoidal: barotropic_divergence(grid, &state.v1, &state.v2)?,
        w_top: w.level(nz).sup_norm(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub grad_v: f64,
    pub grad_t: f64,
    pub grad_rho: f64,
    /// `|rho|_5^5`.
    pub rho_l5: f64,
    pub t_sup: f64,
    pub rho_sup: f64,
    pub v_sup: f64,
    pub residuals: ConstraintResiduals,
}

impl LedgerEntry {
    pub fn compute(grid: &Grid, state: &State) -> Result<Self> {
        let energy = 0.5
            * (norm_sq3(&state.v1) + norm_sq3(&state.v2) + norm_sq3(&state.temp) + norm_sq2(&state.rho));
        let grad_v = grad_sq3(grid, &state.v1)? + grad_sq3(grid, &state.v2)?;
        let grad_t = grad_sq3(grid, &state.temp)?;
        let grad_rho = grad_sq2(grid, &state.rho)?;
        let rho_l5 = state.rho.data.iter().map(|r| r.abs().powi(5)).sum::<f64>()
            / state.rho.data.len() as f64;
        Ok(Self {
            step: state.step,
            time: state.time,
            energy,
            dissipation: grad_v + grad_t + grad_rho,
            grad_v,
            grad_t,
            grad_rho,
            rho_l5,
            t_sup: state.temp.sup_norm(),
            rho_sup: state.rho.sup_norm(),
            v_sup: state.velocity_sup(),
            residuals: constraint_check(grid, state)?,
        })
    }

    /// Squared discrete `H^1` norm of `(v, T, rho)`.
    pub fn h1_norm_sq(&self) -> f64 {
        2.0 * self.energy + self.dissipation
    }

    pub fn is_finite(&self) -> bool {
        [
            self.energy,
            self.dissipation,
            self.rho_l5,
            self.t_sup,
            self.rho_sup,
            self.v_sup,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
}

/// Sup-norm bound `C + tol` for the temperature and the surface temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleBound {
    pub constant: f64,
    pub tolerance: f64,
}

impl MaxPrincipleBound {
    /// `C = max(|T0|, |rho0|, (max(1, |Q|) beta2)^{1/4})`; with `|Q| <= 1`
    /// this is the classical `max(|T0|, |rho0|, beta2^{1/4})`.
    pub fn new(params: &PhysParams, t0_sup: f64, rho0_sup: f64, dt: f64) -> Self {
        let radiative = (params.max_insolation().max(1.0) * params.beta2).powf(0.25);
        let constant = t0_sup.max(rho0_sup).max(radiative);
        Self {
            constant,
            tolerance: 1e-6 + 10.0 * dt * (1.0 + constant.powi(3)),
        }
    }

    pub fn limit(&self) -> f64 {
        self.constant + self.tolerance
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleResult {
    pub pass: bool,
    /// `limit - max(|T|, |rho|)`; negative on violation.
    pub margin: f64,
    /// Grid point `(i, j, k)` of the largest `|T|`, `k = nz` meaning the surface.
    pub location: (usize, usize, usize),
    pub time: f64,
}

pub fn max_principle_check(grid: &Grid, state: &State, bound: &MaxPrincipleBound) -> MaxPrincipleResult {
    let levels = grid.levels();
    let mut worst = 0.0;
    let mut location = (0, 0, 0);
    for (p, col) in state.temp.data.chunks_exact(levels).enumerate() {
        for (k, v) in col.iter().enumerate() {
            if v.abs() > worst {
                worst = v.abs();
                location = (p / grid.ny(), p % grid.ny(), k);
            }
        }
    }
    for (p, v) in state.rho.data.iter().enumerate() {
        if v.abs() > worst {
            worst = v.abs();
            location = (p / grid.ny(), p % grid.ny(), grid.nz());
        }
    }
    let margin = bound.limit() - worst;
    MaxPrincipleResult {
        pass: margin >= 0.0,
        margin,
        location,
        time: state.time,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyMode {
    /// `E(n+1) - E(n) <= dt C (1 + E(n)) + tol`.
    Gronwall { c_led: f64, tol: f64 },
    /// `E(n+1) <= E(n) (1 + 1e-14)`: frozen zero velocity, no radiation.
    Strict,
}

pub fn energy_step_ok(prev: &LedgerEntry, next: &LedgerEntry, dt: f64, mode: EnergyMode) -> bool {
    match mode {
        EnergyMode::Gronwall { c_led, tol } => {
            next.energy - prev.energy <= dt * c_led * (1.0 + prev.energy) + tol
        }
        EnergyMode::Strict => next.energy <= prev.energy * (1.0 + 1e-14),
    }
}

/// Returns the first violating step, if any.
pub fn energy_ledger_check(ledger: &Ledger, dt: f64, mode: EnergyMode) -> std::result::Result<(), u64> {
    for w in ledger.entries.windows(2) {
        if !energy_step_ok(&w[0], &w[1], dt, mode) {
            return Err(w[1].step);
        }
    }
    Ok(())
}

/// Envelope `factor (1 + H1(0)) exp(rate t)` on the squared discrete `H^1`
/// norm `|v|^2 + |T|^2 + |rho|^2 + |grad v|^2 + |grad T|^2 + |grad_H rho|^2`.
/// The `L^2` part is included because a blow-up of the horizontal mean
/// leaves the gradients nearly unchanged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H1Envelope {
    pub factor: f64,
    pub rate: f64,
}

impl H1Envelope {
    pub fn bound(&self, initial: &LedgerEntry, time: f64) -> f64 {
        self.factor * (1.0 + initial.h1_norm_sq()) * (self.rate * (time - initial.time)).exp()
    }

    pub fn entry_ok(&self, initial: &LedgerEntry, entry: &LedgerEntry) -> bool {
        entry.is_finite() && entry.h1_norm_sq() <= self.bound(initial, entry.time)
    }
}

pub fn h1_ledger_check(ledger: &Ledger, envelope: &H1Envelope) -> std::result::Result<(), u64> {
    let Some(first) = ledger.entries.first() else {
        return Ok(());
    };
    for e in &ledger.entries {
        if !envelope.entry_ok(first, e) {
            return Err(e.step);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorConfig {
    pub enabled: bool,
    pub c_led: f64,
    pub energy_tol: f64,
    pub h1_factor: f64,
    pub h1_rate: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            c_led: 50.0,
            energy_tol: 1e-12,
            h1_factor: 10.0,
            h1_rate: 0.1,
        }
    }
}

impl MonitorConfig {
    pub fn envelope(&self) -> H1Envelope {
        H1Envelope {
            factor: self.h1_factor,
            rate: self.h1_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorMode {
    Deterministic { warn_only_max_principle: bool },
    /// Noise-driven run: only the constraint residuals are asserted.
    Stochastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Warn { first_step: u64 },
    Fail { first_step: u64 },
    Skipped,
}

impl Status {
    fn record(&mut self, step: u64, warn_only: bool) {
        if matches!(self, Status::Pass) {
            *self = if warn_only {
                Status::Warn { first_step: step }
            } else {
                Status::Fail { first_step: step }
            };
        }
    }

    pub fn label(&self) -> String {
        match self {
            Status::Pass => "pass".into(),
            Status::Warn { first_step } => format!("warn@{first_step}"),
            Status::Fail { first_step } => format!("fail@{first_step}"),
            Status::Skipped => "skipped".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonitorSummary {
    pub steps: u64,
    pub max_principle: Status,
    pub energy: Status,
    pub h1: Status,
    pub constraints: Status,
}

impl MonitorSummary {
    pub fn failed(&self) -> bool {
        [self.max_principle, self.energy, self.h1, self.constraints]
            .iter()
            .any(|s| matches!(s, Status::Fail { .. }))
    }
}

/// Incremental monitor used by the run drivers.
pub struct RunMonitor {
    grid: Grid,
    dt: f64,
    enabled: bool,
    warn_mp: bool,
    bound: MaxPrincipleBound,
    energy_mode: Option<EnergyMode>,
    envelope: Option<H1Envelope>,
    ledger: Ledger,
    summary: MonitorSummary,
    last_flags: u32,
}

impl RunMonitor {
    pub fn new(
        grid: &Grid,
        config: &RunConfig,
        params: &PhysParams,
        initial: &State,
        mode: MonitorMode,
    ) -> Result<Self> {
        let first = LedgerEntry::compute(grid, initial)?;
        let cfg = &config.monitors;
        let deterministic = matches!(mode, MonitorMode::Deterministic { .. });
        let strict = config.physics.frozen_velocity && first.v_sup == 0.0 && !params.radiation_on;
        let skipped = |on: bool| if on && cfg.enabled { Status::Pass } else { Status::Skipped };
        let mut monitor = Self {
            grid: grid.clone(),
            dt: config.dt,
            enabled: cfg.enabled,
            warn_mp: matches!(
                mode,
                MonitorMode::Deterministic {
                    warn_only_max_principle: true
                }
            ),
            bound: MaxPrincipleBound::new(params, first.t_sup, first.rho_sup, config.dt),
            energy_mode: deterministic.then_some(if strict {
                EnergyMode::Strict
            } else {
                EnergyMode::Gronwall {
                    c_led: cfg.c_led,
                    tol: cfg.energy_tol,
                }
            }),
            envelope: deterministic.then(|| cfg.envelope()),
            ledger: Ledger::default(),
            summary: MonitorSummary {
                steps: 0,
                max_principle: skipped(deterministic),
                energy: skipped(deterministic),
                h1: skipped(deterministic),
                constraints: skipped(true),
            },
            last_flags: 0,
        };
        monitor.push(initial, first);
        Ok(monitor)
    }

    fn push(&mut self, state: &State, entry: LedgerEntry) {
        let mut flags = 0;
        if self.enabled {
            if self.energy_mode.is_some() && !max_principle_check(&self.grid, state, &self.bound).pass {
                flags |= FLAG_MAX_PRINCIPLE;
                self.summary.max_principle.record(entry.step, self.warn_mp);
            }
            if let (Some(mode), Some(prev)) = (self.energy_mode, self.ledger.entries.last()) {
                if !energy_step_ok(prev, &entry, self.dt, mode) {
                    flags |= FLAG_ENERGY;
                    self.summary.energy.record(entry.step, false);
                }
            }
            if let Some(env) = self.envelope {
                let first = self.ledger.entries.first().unwrap_or(&entry);
                if !env.entry_ok(first, &entry) {
                    flags |= FLAG_H1;
                    self.summary.h1.record(entry.step, false);
                }
            }
            if !entry.residuals.within_tolerance(entry.v_sup, entry.rho_sup) {
                flags |= FLAG_CONSTRAINT;
                self.summary.constraints.record(entry.step, false);
            }
        }
        self.last_flags = flags;
        self.summary.steps = entry.step;
        self.ledger.entries.push(entry);
    }

    pub fn observe(&mut self, state: &State) -> Result<()> {
        let entry = LedgerEntry::compute(&self.grid, state)?;
        self.push(state, entry);
        Ok(())
    }

    pub fn bound(&self) -> &MaxPrincipleBound {
        &self.bound
    }

    pub fn last_row(&self) -> DiagnosticsRow {
        let e = self.ledger.entries.last().expect("ledger has the initial entry");
        DiagnosticsRow::from_entry(e, self.last_flags)
    }

    pub fn finish(self) -> (Ledger, MonitorSummary) {
        (self.ledger, self.summary)
    }
}

/// Manufactured solutions. Both satisfy the boundary conditions of the
/// system exactly; the forcing is the continuum residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsKind {
    /// Non-polynomial vertical structure with nonzero `w`; for spatial
    /// convergence in `h`.
    Spatial,
    /// Barotropic velocity and a temperature the vertical discretization
    /// reproduces exactly, so the error is purely temporal.
    Temporal,
}

#[derive(Clone, Debug)]
pub struct Manufactured {
    pub kind: MmsKind,
    pub params: PhysParams,
}

struct Basis {
    cx: f64,
    sx: f64,
    cy: f64,
    sy: f64,
}

impl Basis {
    fn at(x: f64, y: f64) -> Self {
        let (sx, cx) = (2.0 * PI * x).sin_cos();
        let (sy, cy) = (2.0 * PI * y).sin_cos();
        Self { cx, sx, cy, sy }
    }
    fn g(&self) -> f64 {
        1.0 + 0.5 * self.cx * self.sy
    }
    fn gx(&self) -> f64 {
        -PI * self.sx * self.sy
    }
    fn gy(&self) -> f64 {
        PI * self.cx * self.cy
    }
    fn lap_g(&self) -> f64 {
        -4.0 * PI * PI * self.cx * self.sy
    }
}

const KAPPA: f64 = PI / 3.0;

impl Manufactured {
    pub fn new(kind: MmsKind, params: PhysParams) -> Self {
        Self { kind, params }
    }

    fn amplitudes(t: f64) -> (f64, f64, f64, f64) {
        // a: baroclinic velocity, b: barotropic velocity, d, e: temperature
        (0.3 * (-t).exp(), 0.2 * (-t).exp(), 0.5 * (-0.5 * t).exp(), 0.2 * (-t).exp())
    }

    /// `(v1, v2, T)` at one point.
    fn point(&self, x: f64, y: f64, z: f64, t: f64) -> (f64, f64, f64) {
        let (a, b, d, e) = Self::amplitudes(t);
        let q = Basis::at(x, y);
        match self.kind {
            MmsKind::Spatial => {
                let cz = (PI * z).cos();
                (
                    a * q.cx * cz + b * q.sy,
                    a * q.cy * cz + b * q.sx,
                    d * q.g() * (KAPPA * z).cos(),
                )
            }
            MmsKind::Temporal => (b * q.sy, b * q.sx, d * q.g() + e * (1.0 + z * z)),
        }
    }

    pub fn exact(&self, grid: &Grid, t: f64) -> Result<State> {
        let v1 = grid.field3_from_fn(|x, y, z| self.point(x, y, z, t).0);
        let v2 = grid.field3_from_fn(|x, y, z| self.point(x, y, z, t).1);
        let temp = grid.field3_from_fn(|x, y, z| self.point(x, y, z, t).2);
        let mut s = State::from_fields(grid, v1, v2, temp)?;
        s.time = t;
        Ok(s)
    }

    /// Interior residuals `(F_v1, F_v2, F_T)` at one point.
    fn interior_forcing(&self, x: f64, y: f64, z: f64, t: f64) -> (f64, f64, f64) {
        let (a, b, d, e) = Self::amplitudes(t);
        let (da, db, dd, de) = (-a, -b, -0.5 * d, -e);
        let q = Basis::at(x, y);
        let two_pi = 2.0 * PI;
        match self.kind {
            MmsKind::Spatial => {
                let (sz, cz) = (PI * z).sin_cos();
                let v1 = a * q.cx * cz + b * q.sy;
                let v2 = a * q.cy * cz + b * q.sx;
                let w = 2.0 * a * (q.sx + q.sy) * sz;
                let lap1 = -5.0 * PI * PI * a * q.cx * cz - 4.0 * PI * PI * b * q.sy;
                let lap2 = -5.0 * PI * PI * a * q.cy * cz - 4.0 * PI * PI * b * q.sx;
                let adv1 = v1 * (-two_pi * a * q.sx * cz) + v2 * (two_pi * b * q.cy) + w * (-PI * a * q.cx * sz);
                let adv2 = v1 * (two_pi * b * q.cx) + v2 * (-two_pi * a * q.sy * cz) + w * (-PI * a * q.cy * sz);
                let (skz, ckz) = (KAPPA * z).sin_cos();
                let integral = d * skz / KAPPA;
                let f1 = da * q.cx * cz + db * q.sy - lap1 + adv1 - integral * q.gx();
                let f2 = da * q.cy * cz + db * q.sx - lap2 + adv2 - integral * q.gy();

                let lap_t = d * (q.lap_g() * ckz - KAPPA * KAPPA * q.g() * ckz);
                let tz = -d * q.g() * KAPPA * skz;
                let adv_t = d * ckz * (v1 * q.gx() + v2 * q.gy()) + w * tz;
                let ft = dd * q.g() * ckz - lap_t + adv_t;
                (f1, f2, ft)
            }
            MmsKind::Temporal => {
                let v1 = b * q.sy;
                let v2 = b * q.sx;
                let f1 = db * q.sy + 4.0 * PI * PI * b * q.sy + v2 * two_pi * b * q.cy - d * z * q.gx();
                let f2 = db * q.sx + 4.0 * PI * PI * b * q.sx + v1 * two_pi * b * q.cx - d * z * q.gy();
                let lap_t = d * q.lap_g() + 2.0 * e;
                let ft = dd * q.g() + de * (1.0 + z * z) - lap_t + d * (v1 * q.gx() + v2 * q.gy());
                (f1, f2, ft)
            }
        }
    }

    /// Surface residual without the radiation term.
    fn surface_forcing(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (a, b, d, e) = Self::amplitudes(t);
        let (dd, de) = (-0.5 * d, -e);
        let q = Basis::at(x, y);
        match self.kind {
            MmsKind::Spatial => {
                let p1 = KAPPA.cos();
                let rho = d * q.g() * p1;
                let drho = dd * q.g() * p1;
                let tz = -d * q.g() * KAPPA * KAPPA.sin();
                let lap = d * q.lap_g() * p1;
                let (u1, u2) = match self.params.transport {
                    TransportVariant::SurfaceTrace => (-a * q.cx + b * q.sy, -a * q.cy + b * q.sx),
                    TransportVariant::VerticalAverage => (b * q.sy, b * q.sx),
                };
                let transport = d * p1 * (u1 * q.gx() + u2 * q.gy());
                (rho, drho + tz - lap + transport)
            }
            MmsKind::Temporal => {
                let rho = d * q.g() + 2.0 * e;
                let drho = dd * q.g() + 2.0 * de;
                let transport = d * (b * q.sy * q.gx() + b * q.sx * q.gy());
                (rho, drho + 2.0 * e - d * q.lap_g() + transport)
            }
        }
    }
}

impl Forcing for Manufactured {
    fn forcing(&self, grid: &Grid, t: f64) -> Tendencies {
        let v1 = grid.field3_from_fn(|x, y, z| self.interior_forcing(x, y, z, t).0);
        let v2 = grid.field3_from_fn(|x, y, z| self.interior_forcing(x, y, z, t).1);
        let temp = grid.field3_from_fn(|x, y, z| self.interior_forcing(x, y, z, t).2);
        let rho_ex = grid.field2_from_fn(|x, y| self.surface_forcing(x, y, t).0);
        let radiation = self.params.radiation(&rho_ex);
        let mut rho = grid.field2_from_fn(|x, y| self.surface_forcing(x, y, t).1);
        for (r, q) in rho.data.iter_mut().zip(&radiation.data) {
            *r -= q;
        }
        Tendencies { v1, v2, temp, rho }
    }
}

/// Discrete `L2` distance over all prognostic fields.
pub fn state_distance(a: &State, b: &State) -> f64 {
    let d3 = |x: &Field3, y: &Field3| {
        let mut d = x.clone();
        d.data.iter_mut().zip(&y.data).for_each(|(p, q)| *p -= q);
        norm_sq3(&d)
    };
    let mut dr = a.rho.clone();
    dr.data.iter_mut().zip(&b.rho.data).for_each(|(p, q)| *p -= q);
    (d3(&a.v1, &b.v1) + d3(&a.v2, &b.v2) + d3(&a.temp, &b.temp) + norm_sq2(&dr)).sqrt()
}

/// Error of the forced scheme against the manufactured solution at `t_end`.
pub fn mms_error(grid: &Grid, kind: MmsKind, params: &PhysParams, dt: f64, t_end: f64) -> Result<f64> {
    let mms = Manufactured::new(kind, params.clone());
    let mut state = mms.exact(grid, 0.0)?;
    let mut stepper = Stepper::new(grid, params.clone(), dt)?.with_forcing(Box::new(mms.clone()));
    let steps = (t_end / dt).round() as u64;
    for _ in 0..steps {
        state = stepper.step(&state)?;
    }
    Ok(state_distance(&state, &mms.exact(grid, state.time)?))
}

/// Least-squares slope of `log(error)` against `log(resolution)`.
pub fn least_squares_order(resolution: &[f64], errors: &[f64]) -> f64 {
    let n = resolution.len() as f64;
    let xs: Vec<f64> = resolution.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[derive(Clone, Debug, PartialEq)]
pub enum MmsLadder {
    Spatial {
        nx: usize,
        ny: usize,
        nz: Vec<usize>,
        dt: f64,
        t_end: f64,
    },
    Temporal {
        nx: usize,
        ny: usize,
        nz: usize,
        dt: Vec<f64>,
        t_end: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsReport {
    /// `(h or dt, error)` pairs.
    pub rows: Vec<(f64, f64)>,
    pub order: f64,
}

impl MmsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("resolution,error\n");
        for (r, e) in &self.rows {
            out.push_str(&format!("{r:.16e},{e:.16e}\n"));
        }
        out.push_str(&format!("# order={:.16e}\n", self.order));
        out
    }
}

/// Default physics for manufactured-solution runs: uniform `Q = q0`.
pub fn mms_params(grid: &Grid, q0: f64, transport: TransportVariant) -> Result<PhysParams> {
    PhysParams::new(0.38, 0.68, 0.0, grid.field2_from_fn(|_, _| q0), transport, true)
}

pub fn mms_convergence_study(ladder: &MmsLadder) -> Result<MmsReport> {
    let mut rows = Vec::new();
    match ladder {
        MmsLadder::Spatial { nx, ny, nz, dt, t_end } => {
            for &n in nz {
                let grid = Grid::new(*nx, *ny, n)?;
                let params = mms_params(&grid, 1.0, TransportVariant::SurfaceTrace)?;
                rows.push((grid.h(), mms_error(&grid, MmsKind::Spatial, &params, *dt, *t_end)?));
            }
        }
        MmsLadder::Temporal { nx, ny, nz, dt, t_end } => {
            let grid = Grid::new(*nx, *ny, *nz)?;
            let params = mms_params(&grid, 1.0, TransportVariant::SurfaceTrace)?;
            for &d in dt {
                rows.push((d, mms_error(&grid, MmsKind::Temporal, &params, d, *t_end)?));
            }
        }
    }
    let (res, err): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    Ok(MmsReport {
        order: least_squares_order(&res, &err),
        rows,
    })
}

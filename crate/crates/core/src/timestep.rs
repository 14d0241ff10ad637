//! First-order IMEX integration of the coupled system: the vertical and
//! horizontal diffusion (including the surface flux coupling) is implicit,
//! advection, the baroclinic term and radiation are explicit, and the
//! velocity is projected onto barotropically solenoidal fields after each
//! step.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ebm::{default_insolation, PhysParams, TransportVariant};
use crate::error::{Error, Result};
use crate::grid::{Field2, Field3, Grid, Spectral2, Spectral3};
use crate::hydrostatic::{
    baroclinic_grad_spectral, diagnose_w_spectral, project_barotropic_spectral, vertical_average,
};
use crate::linops::{surface_load, ImplicitSolver};
use crate::monitors::{Ledger, MonitorConfig, MonitorMode, MonitorSummary, RunMonitor};
use crate::stochastic::NoiseSpec;

/// Sup norm beyond which a state counts as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Prognostic fields. `temp` holds `nz + 1` levels and its top level equals
/// `rho` bitwise.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub v1: Field3,
    pub v2: Field3,
    pub temp: Field3,
    pub rho: Field2,
    pub time: f64,
    pub step: u64,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            v1: grid.zeros3(),
            v2: grid.zeros3(),
            temp: grid.zeros3(),
            rho: grid.zeros2(),
            time: 0.0,
            step: 0,
        }
    }

    /// Assemble a state whose surface temperature is the top level of `temp`.
    pub fn from_fields(grid: &Grid, v1: Field3, v2: Field3, temp: Field3) -> Result<Self> {
        let state = Self {
            rho: temp.level(temp.levels() - 1),
            v1,
            v2,
            temp,
            time: 0.0,
            step: 0,
        };
        state.check_shape(grid)?;
        Ok(state)
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        let want3 = (grid.nx(), grid.ny(), grid.levels());
        for (name, f) in [("v1", &self.v1), ("v2", &self.v2), ("temp", &self.temp)] {
            if f.shape() != want3 {
                return Err(Error::DimensionMismatch {
                    expected: format!("{name} {want3:?}"),
                    found: format!("{:?}", f.shape()),
                });
            }
        }
        if self.rho.shape() != (grid.nx(), grid.ny()) {
            return Err(Error::DimensionMismatch {
                expected: format!("rho {:?}", (grid.nx(), grid.ny())),
                found: format!("{:?}", self.rho.shape()),
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.v1
            .sup_norm()
            .max(self.v2.sup_norm())
            .max(self.temp.sup_norm())
            .max(self.rho.sup_norm())
    }

    pub fn velocity_sup(&self) -> f64 {
        self.v1.sup_norm().max(self.v2.sup_norm())
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite() && self.v2.is_finite() && self.temp.is_finite() && self.rho.is_finite()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum InitialCondition {
    #[default]
    Zero,
    /// `v = 0`, `T = rho = value`.
    Uniform { value: f64 },
    /// `v = 0`, `T = mean + amplitude cos(2 pi (k1 x + k2 y))`, constant in z.
    SingleMode {
        k1: i64,
        k2: i64,
        amplitude: f64,
        mean: f64,
    },
    /// Random band-limited data built from `cos(m pi z)` profiles, which
    /// satisfy the Neumann conditions of the velocity and the bottom
    /// condition of the temperature; `rho` is the trace of `T`. Temperature
    /// and velocity are scaled to the given sup norms, the velocity is then
    /// projected.
    RandomSmooth {
        seed: u64,
        decay: f64,
        temp_amplitude: f64,
        velocity_amplitude: f64,
    },
}


pub fn initial_state(grid: &Grid, ic: &InitialCondition) -> Result<State> {
    match *ic {
        InitialCondition::Zero => Ok(State::zeros(grid)),
        InitialCondition::Uniform { value } => {
            let temp = grid.field3_from_fn(|_, _, _| value);
            State::from_fields(grid, grid.zeros3(), grid.zeros3(), temp)
        }
        InitialCondition::SingleMode {
            k1,
            k2,
            amplitude,
            mean,
        } => {
            let temp = grid.field3_from_fn(|x, y, _| {
                mean + amplitude * (2.0 * PI * (k1 as f64 * x + k2 as f64 * y)).cos()
            });
            State::from_fields(grid, grid.zeros3(), grid.zeros3(), temp)
        }
        InitialCondition::RandomSmooth {
            seed,
            decay,
            temp_amplitude,
            velocity_amplitude,
        } => random_smooth(grid, seed, decay, temp_amplitude, velocity_amplitude),
    }
}

fn random_smooth(grid: &Grid, seed: u64, decay: f64, temp_amp: f64, vel_amp: f64) -> Result<State> {
    const VERTICAL_MODES: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kx = (grid.nx() / 3) as i64;
    let ky = (grid.ny() / 3) as i64;
    let mut terms = Vec::new();
    for k1 in 0..=kx {
        for k2 in -ky..=ky {
            if k1 == 0 && k2 < 0 {
                continue;
            }
            terms.push((k1, k2));
        }
    }
    let sample = |rng: &mut ChaCha8Rng| -> Field3 {
        let mut coeffs = Vec::with_capacity(terms.len() * VERTICAL_MODES);
        for &(k1, k2) in &terms {
            for m in 0..VERTICAL_MODES {
                let weight = (1.0 + (k1 * k1 + k2 * k2) as f64 + (m * m) as f64).powf(-0.5 * decay);
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                coeffs.push((k1, k2, m, a * weight, b * weight));
            }
        }
        grid.field3_from_fn(|x, y, z| {
            coeffs
                .iter()
                .map(|&(k1, k2, m, a, b)| {
                    let th = 2.0 * PI * (k1 as f64 * x + k2 as f64 * y);
                    (a * th.cos() + b * th.sin()) * (PI * m as f64 * z).cos()
                })
                .sum()
        })
    };
    let mut temp = sample(&mut rng);
    let mut v1 = sample(&mut rng);
    let mut v2 = sample(&mut rng);

    let scale = |f: &mut Field3, s: f64| f.data.iter_mut().for_each(|v| *v *= s);
    let ts = temp.sup_norm();
    if ts > 0.0 {
        scale(&mut temp, temp_amp / ts);
    }
    let vs = v1.sup_norm().max(v2.sup_norm());
    if vs > 0.0 {
        scale(&mut v1, vel_amp / vs);
        scale(&mut v2, vel_amp / vs);
    }
    let mut s1 = grid.to_spectral3(&v1)?;
    let mut s2 = grid.to_spectral3(&v2)?;
    project_barotropic_spectral(grid, &mut s1, &mut s2);
    State::from_fields(
        grid,
        grid.to_physical3_unchecked(&s1),
        grid.to_physical3_unchecked(&s2),
        temp,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub rho_ref: f64,
    /// Insolation `Q0 (1 + q1 cos(2 pi y))`; `q0 = 0` switches it off.
    pub q0: f64,
    pub q1: f64,
    pub transport: TransportVariant,
    pub radiation_on: bool,
    pub frozen_velocity: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            beta1: 0.38,
            beta2: 0.68,
            rho_ref: 0.0,
            q0: 1.0,
            q1: 0.0,
            transport: TransportVariant::SurfaceTrace,
            radiation_on: true,
            frozen_velocity: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Diagnostics row every `cadence` steps (plus first and last).
    pub cadence: u64,
    /// Snapshot every `snapshot_every` steps; 0 writes only the final state.
    pub snapshot_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            cadence: 1,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dt: f64,
    pub t_end: f64,
    pub physics: PhysicsConfig,
    pub initial: InitialCondition,
    pub noise: NoiseSpec,
    pub output: OutputConfig,
    pub monitors: MonitorConfig,
}

impl RunConfig {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self {
            nx,
            ny,
            nz,
            dt: 1e-3,
            t_end: 1e-3,
            physics: PhysicsConfig::default(),
            initial: InitialCondition::default(),
            noise: NoiseSpec::default(),
            output: OutputConfig::default(),
            monitors: MonitorConfig::default(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.nz)
    }

    /// Number of steps from `t = 0` to `t_end`.
    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.nx, self.ny, self.nz)?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.t_end >= 0.0) || (self.t_end > 0.0 && self.t_end < self.dt * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be 0 or at least dt (got t_end={}, dt={})",
                self.t_end, self.dt
            )));
        }
        if self.output.cadence == 0 {
            return Err(Error::InvalidParameter("cadence must be at least 1".into()));
        }
        self.noise.validate()?;
        Ok(())
    }

    pub fn phys_params(&self, grid: &Grid) -> Result<PhysParams> {
        let p = &self.physics;
        let insolation = if p.q0 == 0.0 {
            grid.zeros2()
        } else {
            default_insolation(grid, p.q0, p.q1)?
        };
        PhysParams::new(p.beta1, p.beta2, p.rho_ref, insolation, p.transport, p.radiation_on)
    }
}

/// Explicit tendencies in physical space.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendencies {
    pub v1: Field3,
    pub v2: Field3,
    pub temp: Field3,
    pub rho: Field2,
}

/// Additional source terms, evaluated at the start of each step. Used for
/// manufactured solutions.
pub trait Forcing {
    fn forcing(&self, grid: &Grid, t: f64) -> Tendencies;
}

struct SpectralTendencies {
    v1: Spectral3,
    v2: Spectral3,
    temp: Spectral3,
    rho: Spectral2,
}

/// `u . grad_H f + w dz f` at every point, with centered `dz` in the interior
/// and no vertical transport at the bottom and top (`w = 0` there).
fn advect(h: f64, u: &Field3, v: &Field3, w: &Field3, f: &Field3, fx: &Field3, fy: &Field3) -> Field3 {
    let levels = f.shape().2;
    let inv_2h = 0.5 / h;
    let mut out = f.clone();
    for (q, o) in out.data.iter_mut().enumerate() {
        let k = q % levels;
        let mut acc = u.data[q] * fx.data[q] + v.data[q] * fy.data[q];
        if k > 0 && k + 1 < levels {
            acc += w.data[q] * (f.data[q + 1] - f.data[q - 1]) * inv_2h;
        }
        *o = acc;
    }
    out
}

fn spectral_tendencies(
    grid: &Grid,
    v1: &Spectral3,
    v2: &Spectral3,
    temp: &Spectral3,
    rho: &Field2,
    params: &PhysParams,
) -> SpectralTendencies {
    let levels = grid.levels();
    let h = grid.h();
    let mut v1d = v1.clone();
    let mut v2d = v2.clone();
    let mut td = temp.clone();
    grid.dealias3(&mut v1d);
    grid.dealias3(&mut v2d);
    grid.dealias3(&mut td);

    let phys = |s: &Spectral3| grid.to_physical3_unchecked(s);
    let u = phys(&v1d);
    let v = phys(&v2d);
    let t = phys(&td);
    let w = phys(&diagnose_w_spectral(grid, &v1d, &v2d));

    let spectral_dealiased = |f: &Field3| {
        // physical products are real by construction
        let mut s = grid.to_spectral3(f).expect("field on grid");
        grid.dealias3(&mut s);
        s
    };
    let negate = |mut s: Spectral3| {
        s.data.iter_mut().for_each(|c| *c = -*c);
        s
    };

    let (ux, uy) = grid.gradient3(&v1d);
    let adv_u = advect(h, &u, &v, &w, &u, &phys(&ux), &phys(&uy));
    let (vx, vy) = grid.gradient3(&v2d);
    let adv_v = advect(h, &u, &v, &w, &v, &phys(&vx), &phys(&vy));
    let (tx, ty) = grid.gradient3(&td);
    let adv_t = advect(h, &u, &v, &w, &t, &phys(&tx), &phys(&ty));

    let (bx, by) = baroclinic_grad_spectral(grid, &td);
    let mut f1 = negate(spectral_dealiased(&adv_u));
    let mut f2 = negate(spectral_dealiased(&adv_v));
    for (f, b) in f1.data.iter_mut().zip(&bx.data) {
        *f += b;
    }
    for (f, b) in f2.data.iter_mut().zip(&by.data) {
        *f += b;
    }
    let ft = negate(spectral_dealiased(&adv_t));

    let (ut, vt) = match params.transport {
        TransportVariant::SurfaceTrace => (u.level(levels - 1), v.level(levels - 1)),
        TransportVariant::VerticalAverage => (vertical_average(grid, &u), vertical_average(grid, &v)),
    };
    let (rx, ry) = grid.gradient2(&td.level(levels - 1));
    let rx = grid.to_physical2_unchecked(&rx);
    let ry = grid.to_physical2_unchecked(&ry);
    let mut transport = grid.zeros2();
    for p in 0..transport.data.len() {
        transport.data[p] = -(ut.data[p] * rx.data[p] + vt.data[p] * ry.data[p]);
    }
    let mut frho = grid.to_spectral2(&transport).expect("field on grid");
    grid.dealias2(&mut frho);
    let radiation = grid.to_spectral2(&params.radiation(rho)).expect("field on grid");
    for (f, r) in frho.data.iter_mut().zip(&radiation.data) {
        *f += r;
    }

    SpectralTendencies {
        v1: f1,
        v2: f2,
        temp: ft,
        rho: frho,
    }
}

/// Explicit part of the right-hand side: advection (dealiased), the
/// baroclinic term, surface transport and radiation.
pub fn nonlinear_tendencies(grid: &Grid, state: &State, params: &PhysParams) -> Result<Tendencies> {
    state.check_shape(grid)?;
    let s = spectral_tendencies(
        grid,
        &grid.to_spectral3(&state.v1)?,
        &grid.to_spectral3(&state.v2)?,
        &grid.to_spectral3(&state.temp)?,
        &state.rho,
        params,
    );
    Ok(Tendencies {
        v1: grid.to_physical3_unchecked(&s.v1),
        v2: grid.to_physical3_unchecked(&s.v2),
        temp: grid.to_physical3_unchecked(&s.temp),
        rho: grid.to_physical2_unchecked(&s.rho),
    })
}

/// IMEX Euler integrator with cached implicit factorizations.
pub struct Stepper {
    grid: Grid,
    params: PhysParams,
    dt: f64,
    coupled: ImplicitSolver,
    velocity: ImplicitSolver,
    frozen_velocity: bool,
    forcing: Option<Box<dyn Forcing>>,
    surface_pressure: Field2,
}

impl Stepper {
    pub fn new(grid: &Grid, params: PhysParams, dt: f64) -> Result<Self> {
        Ok(Self {
            coupled: ImplicitSolver::coupled(grid, dt)?,
            velocity: ImplicitSolver::velocity(grid, dt)?,
            grid: grid.clone(),
            params,
            dt,
            frozen_velocity: false,
            forcing: None,
            surface_pressure: grid.zeros2(),
        })
    }

    pub fn with_frozen_velocity(mut self, frozen: bool) -> Self {
        self.frozen_velocity = frozen;
        self
    }

    pub fn with_forcing(mut self, forcing: Box<dyn Forcing>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Surface pressure recovered from the last projection.
    pub fn surface_pressure(&self) -> &Field2 {
        &self.surface_pressure
    }

    pub fn step(&mut self, state: &State) -> Result<State> {
        self.advance(state, None, None)
    }

    /// One step. `shift` is added to the temperature (and its trace) inside
    /// every explicit term but not to the implicit unknown; `surface_noise`
    /// is added to the surface row after the implicit solve.
    pub fn advance(
        &mut self,
        state: &State,
        shift: Option<&Field3>,
        surface_noise: Option<&Spectral2>,
    ) -> Result<State> {
        let grid = &self.grid;
        let nz = grid.nz();
        let h = grid.h();
        let dt = self.dt;

        let v1s = grid.to_spectral3(&state.v1)?;
        let v2s = grid.to_spectral3(&state.v2)?;
        let ts = grid.to_spectral3(&state.temp)?;
        let mut tend = match shift {
            None => spectral_tendencies(grid, &v1s, &v2s, &ts, &state.rho, &self.params),
            Some(z) => {
                let mut te = state.temp.clone();
                for (a, b) in te.data.iter_mut().zip(&z.data) {
                    *a += b;
                }
                let rho_e = te.level(nz);
                spectral_tendencies(grid, &v1s, &v2s, &grid.to_spectral3(&te)?, &rho_e, &self.params)
            }
        };
        if let Some(forcing) = &self.forcing {
            let f = forcing.forcing(grid, state.time);
            let add3 = |acc: &mut Spectral3, f: &Field3| -> Result<()> {
                let s = grid.to_spectral3(f)?;
                acc.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
                Ok(())
            };
            add3(&mut tend.v1, &f.v1)?;
            add3(&mut tend.v2, &f.v2)?;
            add3(&mut tend.temp, &f.temp)?;
            let s = grid.to_spectral2(&f.rho)?;
            tend.rho.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
        }

        let (v1, v2) = if self.frozen_velocity {
            (state.v1.clone(), state.v2.clone())
        } else {
            let mut r1 = v1s;
            let mut r2 = v2s;
            r1.data.iter_mut().zip(&tend.v1.data).for_each(|(a, f)| *a += *f * dt);
            r2.data.iter_mut().zip(&tend.v2.data).for_each(|(a, f)| *a += *f * dt);
            self.velocity.solve(&mut r1);
            self.velocity.solve(&mut r2);
            let proj = project_barotropic_spectral(grid, &mut r1, &mut r2);
            let mut ps = proj.potential;
            for (i, j) in grid.modes() {
                let scale = (1.0 + dt * grid.xi_sq(i, j)) / dt;
                ps.set(i, j, ps.get(i, j) * scale);
            }
            self.surface_pressure = grid.to_physical2_unchecked(&ps);
            (grid.to_physical3_unchecked(&r1), grid.to_physical3_unchecked(&r2))
        };

        let mut col = ts;
        for (i, j) in grid.modes() {
            let ft = tend.temp.column(i, j);
            let fr = tend.rho.get(i, j);
            let c = col.column_mut(i, j);
            for k in 0..nz {
                c[k] += ft[k] * dt;
            }
            c[nz] += surface_load(fr, ft[nz], h) * dt;
        }
        self.coupled.solve(&mut col);
        if let Some(noise) = surface_noise {
            for (i, j) in grid.modes() {
                let c = col.column_mut(i, j);
                c[nz] += noise.get(i, j);
            }
        }
        let temp = grid.to_physical3_unchecked(&col);
        let rho = temp.level(nz);
        let step = state.step + 1;
        let next = State {
            v1,
            v2,
            temp,
            rho,
            time: step as f64 * dt,
            step,
        };
        check_blowup(&next, state)?;
        Ok(next)
    }
}

fn check_blowup(next: &State, last: &State) -> Result<()> {
    let reason = if !next.is_finite() {
        Some("non-finite value".to_string())
    } else {
        let sup = next.sup_norm();
        (sup > BLOWUP_THRESHOLD).then(|| format!("sup norm {sup:.3e} exceeds {BLOWUP_THRESHOLD:.0e}"))
    };
    match reason {
        None => Ok(()),
        Some(reason) => Err(Error::BlowUp {
            step: next.step,
            time: next.time,
            reason,
            last_valid: Box::new(last.clone()),
        }),
    }
}

/// Single IMEX step with freshly built solvers.
pub fn imex_step(grid: &Grid, state: &State, dt: f64, params: &PhysParams) -> Result<State> {
    state.check_shape(grid)?;
    Stepper::new(grid, params.clone(), dt)?.step(state)
}

/// Receiver for run output: diagnostics rows and snapshots.
pub trait RunObserver {
    fn row(&mut self, row: &crate::io::diagnostics::DiagnosticsRow) -> Result<()>;
    fn snapshot(&mut self, state: &State, z_rho: Option<&Field2>, is_final: bool) -> Result<()>;
    fn finish(&mut self, summary: &MonitorSummary) -> Result<()>;
}

/// Observer that discards everything.
pub struct NullObserver;

impl RunObserver for NullObserver {
    fn row(&mut self, _: &crate::io::diagnostics::DiagnosticsRow) -> Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _: &State, _: Option<&Field2>, _: bool) -> Result<()> {
        Ok(())
    }
    fn finish(&mut self, _: &MonitorSummary) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub final_state: State,
    pub ledger: Ledger,
    pub summary: MonitorSummary,
    /// Surface component of the stochastic convolution, for split runs.
    pub z_rho: Option<Field2>,
}

/// Shared time loop: monitors every step, rows at the configured cadence,
/// snapshots. `advance` returns the next state and the optional `Z_rho`
/// channel.
pub(crate) fn run_loop(
    grid: &Grid,
    config: &RunConfig,
    params: &PhysParams,
    initial: State,
    mode: MonitorMode,
    observer: &mut dyn RunObserver,
    mut advance: impl FnMut(&State) -> Result<(State, Option<Field2>)>,
) -> Result<RunOutput> {
    initial.check_shape(grid)?;
    let target = config.total_steps();
    let mut monitor = RunMonitor::new(grid, config, params, &initial, mode)?;
    let cadence = config.output.cadence;
    let snap_every = config.output.snapshot_every;

    let mut state = initial;
    let mut z_rho = None;
    observer.row(&monitor.last_row())?;
    while state.step < target {
        let (next, z) = advance(&state)?;
        state = next;
        z_rho = z;
        monitor.observe(&state)?;
        if state.step.is_multiple_of(cadence) || state.step == target {
            observer.row(&monitor.last_row())?;
        }
        if snap_every > 0 && state.step.is_multiple_of(snap_every) && state.step != target {
            observer.snapshot(&state, z_rho.as_ref(), false)?;
        }
    }
    observer.snapshot(&state, z_rho.as_ref(), true)?;
    let (ledger, summary) = monitor.finish();
    observer.finish(&summary)?;
    Ok(RunOutput {
        final_state: state,
        ledger,
        summary,
        z_rho,
    })
}

/// Deterministic run from the configured initial condition.
pub fn run_deterministic(config: &RunConfig, observer: &mut dyn RunObserver) -> Result<RunOutput> {
    config.validate()?;
    let grid = config.grid()?;
    let initial = initial_state(&grid, &config.initial)?;
    run_deterministic_from(config, initial, observer)
}

/// Deterministic run continuing from `initial` (e.g. a snapshot) up to
/// `config.t_end`.
pub fn run_deterministic_from(
    config: &RunConfig,
    initial: State,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    config.validate()?;
    let grid = config.grid()?;
    let params = config.phys_params(&grid)?;
    let mut stepper = Stepper::new(&grid, params.clone(), config.dt)?
        .with_frozen_velocity(config.physics.frozen_velocity);
    let mode = MonitorMode::Deterministic {
        warn_only_max_principle: params.transport == TransportVariant::VerticalAverage,
    };
    run_loop(&grid, config, &params, initial, mode, observer, |s| {
        Ok((stepper.step(s)?, None))
    })
}

/// Recover the step counter of a state read back from disk.
pub fn step_from_time(time: f64, dt: f64) -> u64 {
    (time / dt).round() as u64
}

//! Additive boundary noise on the surface temperature: Wiener increments in
//! the Fourier basis of the surface, the stochastic convolution of the
//! linear coupled operator, the split driver (convolution plus a
//! deterministic remainder) and a direct Euler-Maruyama driver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ebm::TransportVariant;
use crate::error::{Error, Result};
use crate::grid::{Field2, Field3, Grid, Spectral2, Spectral3};
use crate::linops::{phi1, surface_injection, ModeOperator, ModePropagator};
use crate::monitors::MonitorMode;
use crate::timestep::{initial_state, run_loop, RunConfig, RunObserver, RunOutput, State, Stepper};

/// Diagonal noise on the surface temperature:
/// `q_k = sigma (1 + |xi_k|^2)^{-decay/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub decay: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            decay: 2.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn new(sigma: f64, decay: f64, seed: u64) -> Result<Self> {
        let spec = Self { sigma, decay, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and nonnegative (got {})",
                self.sigma
            )));
        }
        if !(self.decay >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "noise decay exponent must be at least 2 (got {})",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self, xi_sq: f64) -> f64 {
        self.sigma * (1.0 + xi_sq).powf(-0.5 * self.decay)
    }
}

/// Per-step Fourier coefficients of the Wiener increments on the surface.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    dt: f64,
    increments: Vec<Spectral2>,
}

impl PathBundle {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increment(&self, n: usize) -> &Spectral2 {
        &self.increments[n]
    }

    /// Sum consecutive groups of `factor` increments: the same path seen at
    /// the step `factor * dt`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.len().is_multiple_of(factor) {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen {} increments by {factor}",
                self.len()
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|group| {
                let mut acc = group[0].clone();
                for g in &group[1..] {
                    acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b);
                }
                acc
            })
            .collect();
        Ok(Self {
            dt: self.dt * factor as f64,
            increments,
        })
    }

    /// Physical increment field of step `n`.
    pub fn physical(&self, grid: &Grid, n: usize) -> Result<Field2> {
        grid.to_physical2(&self.increments[n])
    }
}

/// Complex Gaussian increments with conjugate symmetry: for paired modes
/// `Re` and `Im` have variance `dt / 2` each, the mean mode has variance
/// `dt`, Nyquist modes carry no noise. The stream depends only on the seed
/// and the grid.
pub fn wiener_increments(grid: &Grid, spec: &NoiseSpec, dt: f64, n_steps: usize) -> Result<PathBundle> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {dt})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = (0.5 * dt).sqrt();
    let full = dt.sqrt();
    let mut increments = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let mut inc = grid.spectral_zeros2();
        for (i, j) in grid.modes() {
            if grid.is_nyquist(i, j) {
                continue;
            }
            let (pi, pj) = grid.partner(i, j);
            if (pi, pj) == (i, j) {
                let g: f64 = StandardNormal.sample(&mut rng);
                inc.set(i, j, Complex64::new(full * g, 0.0));
            } else if (i, j) < (pi, pj) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let c = Complex64::new(half * re, half * im);
                inc.set(i, j, c);
                inc.set(pi, pj, c.conj());
            }
        }
        increments.push(inc);
    }
    Ok(PathBundle { dt, increments })
}

/// Exact per-mode propagators and noise amplitudes for one `dt`.
pub struct ConvolutionCache {
    dt: f64,
    ny: usize,
    propagators: Vec<ModePropagator>,
    amplitudes: Vec<f64>,
}

impl ConvolutionCache {
    pub fn new(grid: &Grid, spec: &NoiseSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        let b = surface_injection(grid.nz());
        let mut propagators = Vec::with_capacity(grid.nx() * grid.ny());
        let mut amplitudes = Vec::with_capacity(grid.nx() * grid.ny());
        for (i, j) in grid.modes() {
            let op = ModeOperator::coupled(grid.xi_sq(i, j), grid.nz());
            propagators.push(ModePropagator::new(&op, dt, &b));
            amplitudes.push(spec.amplitude(grid.xi_sq(i, j)));
        }
        Ok(Self {
            dt,
            ny: grid.ny(),
            propagators,
            amplitudes,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `Z <- E Z + phi_1(dt M) b q_k dW_k` for every mode.
    pub fn step(&self, z: &mut Spectral3, increment: &Spectral2) {
        let (nx, ny, levels) = z.shape();
        debug_assert_eq!(ny, self.ny);
        let mut re = DVector::zeros(levels);
        let mut im = DVector::zeros(levels);
        for i in 0..nx {
            for j in 0..ny {
                let m = i * ny + j;
                let prop = &self.propagators[m];
                let kick = increment.get(i, j) * self.amplitudes[m];
                let col = z.column_mut(i, j);
                for (k, c) in col.iter().enumerate() {
                    re[k] = c.re;
                    im[k] = c.im;
                }
                let new_re = &prop.exp * &re + &prop.phi_injection * kick.re;
                let new_im = &prop.exp * &im + &prop.phi_injection * kick.im;
                for (k, c) in col.iter_mut().enumerate() {
                    *c = Complex64::new(new_re[k], new_im[k]);
                }
            }
        }
    }
}

/// One exponential-Euler step of the stochastic convolution.
pub fn stoch_convolution_step(
    grid: &Grid,
    z: &Spectral3,
    dt: f64,
    increment: &Spectral2,
    spec: &NoiseSpec,
) -> Result<Spectral3> {
    let cache = ConvolutionCache::new(grid, spec, dt)?;
    let mut out = z.clone();
    cache.step(&mut out, increment);
    Ok(out)
}

/// Covariance of one mode of the convolution after `n_steps` steps of the
/// update law, started from zero, for unit-variance-rate increments.
pub fn convolution_covariance(op: &ModeOperator, dt: f64, q: f64, n_steps: usize) -> DMatrix<f64> {
    let prop = ModePropagator::new(op, dt, &surface_injection(op.nz));
    let kick = &prop.phi_injection * q;
    let source = &kick * kick.transpose() * dt;
    let n = op.size();
    let mut c = DMatrix::zeros(n, n);
    for _ in 0..n_steps {
        c = &prop.exp * &c * prop.exp.transpose() + &source;
    }
    c
}

/// Scalar surrogate `dX = -lambda X dt + q dW` advanced by the same
/// exponential-Euler law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuSurrogate {
    pub lambda: f64,
    pub q: f64,
    pub dt: f64,
}

impl OuSurrogate {
    pub fn decay(&self) -> f64 {
        (-self.lambda * self.dt).exp()
    }

    pub fn kick(&self) -> f64 {
        phi1(-self.lambda * self.dt) * self.q
    }

    pub fn continuum_variance(&self) -> f64 {
        self.q * self.q / (2.0 * self.lambda)
    }

    /// Stationary variance of the discrete update law.
    pub fn scheme_variance(&self) -> f64 {
        let a = self.decay();
        self.kick() * self.kick() * self.dt / (1.0 - a * a)
    }

    pub fn path(&self, x0: f64, n_steps: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.decay();
        let k = self.kick() * self.dt.sqrt();
        let mut x = x0;
        (0..n_steps)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                x = a * x + k * g;
                x
            })
            .collect()
    }
}

fn check_stochastic_config(config: &RunConfig, path: &PathBundle) -> Result<()> {
    config.validate()?;
    if config.physics.transport != TransportVariant::VerticalAverage {
        return Err(Error::InvalidParameter(
            "stochastic runs require transport = vertical_average".into(),
        ));
    }
    if (path.dt() - config.dt).abs() > 1e-12 * config.dt {
        return Err(Error::InvalidParameter(format!(
            "path step {} does not match dt {}",
            path.dt(),
            config.dt
        )));
    }
    if (path.len() as u64) < config.total_steps() {
        return Err(Error::InvalidParameter(format!(
            "path has {} increments, run needs {}",
            path.len(),
            config.total_steps()
        )));
    }
    Ok(())
}

fn default_path(config: &RunConfig, grid: &Grid) -> Result<PathBundle> {
    wiener_increments(grid, &config.noise, config.dt, config.total_steps() as usize)
}

/// Result of a split run: the reassembled trajectory output plus the final
/// remainder and convolution.
#[derive(Clone, Debug)]
pub struct SplitOutput {
    pub run: RunOutput,
    pub remainder: State,
    pub convolution: Field3,
}

/// Split run: `Z` follows the stochastic convolution, the remainder follows
/// the deterministic step with the temperature shifted by `Z` in every
/// explicit term; `(T, rho) = (T~ + Z_T, rho~ + Z_rho)`.
pub fn run_split_stochastic(
    config: &RunConfig,
    path: Option<&PathBundle>,
    observer: &mut dyn RunObserver,
) -> Result<SplitOutput> {
    let grid = config.grid()?;
    let owned;
    let path = match path {
        Some(p) => p,
        None => {
            owned = default_path(config, &grid)?;
            &owned
        }
    };
    check_stochastic_config(config, path)?;
    let params = config.phys_params(&grid)?;
    let mut stepper = Stepper::new(&grid, params.clone(), config.dt)?
        .with_frozen_velocity(config.physics.frozen_velocity);
    let cache = ConvolutionCache::new(&grid, &config.noise, config.dt)?;
    let initial = initial_state(&grid, &config.initial)?;

    let mut remainder = initial.clone();
    let mut z = grid.spectral_zeros3();
    let mut z_phys = grid.zeros3();
    let run = run_loop(
        &grid,
        config,
        &params,
        initial,
        MonitorMode::Stochastic,
        observer,
        |_| {
            let n = remainder.step as usize;
            let next = stepper.advance(&remainder, Some(&z_phys), None)?;
            cache.step(&mut z, path.increment(n));
            z_phys = grid.to_physical3_unchecked(&z);
            let mut temp = next.temp.clone();
            temp.data.iter_mut().zip(&z_phys.data).for_each(|(a, b)| *a += b);
            let full = State {
                v1: next.v1.clone(),
                v2: next.v2.clone(),
                rho: temp.level(grid.nz()),
                temp,
                time: next.time,
                step: next.step,
            };
            if !full.is_finite() {
                return Err(Error::BlowUp {
                    step: full.step,
                    time: full.time,
                    reason: "non-finite value after reassembly".into(),
                    last_valid: Box::new(remainder.clone()),
                });
            }
            remainder = next;
            Ok((full, Some(z_phys.level(grid.nz()))))
        },
    )?;
    Ok(SplitOutput {
        run,
        remainder,
        convolution: z_phys,
    })
}

/// Semi-implicit Euler-Maruyama on the unsplit system: implicit linear
/// solve, explicit nonlinear terms, `b q_k dW_k` added to the surface row
/// after the solve.
pub fn run_direct_em(
    config: &RunConfig,
    path: Option<&PathBundle>,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    let grid = config.grid()?;
    let owned;
    let path = match path {
        Some(p) => p,
        None => {
            owned = default_path(config, &grid)?;
            &owned
        }
    };
    check_stochastic_config(config, path)?;
    let params = config.phys_params(&grid)?;
    let mut stepper = Stepper::new(&grid, params.clone(), config.dt)?
        .with_frozen_velocity(config.physics.frozen_velocity);
    let injection = surface_injection(grid.nz())[grid.nz()];
    let amplitudes: Vec<f64> = grid
        .modes()
        .map(|(i, j)| config.noise.amplitude(grid.xi_sq(i, j)) * injection)
        .collect();
    let initial = initial_state(&grid, &config.initial)?;
    run_loop(
        &grid,
        config,
        &params,
        initial,
        MonitorMode::Stochastic,
        observer,
        |s| {
            let mut noise = path.increment(s.step as usize).clone();
            noise.data.iter_mut().zip(&amplitudes).for_each(|(c, a)| *c *= *a);
            Ok((stepper.advance(s, None, Some(&noise))?, None))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestep::{NullObserver, InitialCondition};

    #[test]
    fn same_seed_same_bundle() {
        let g = Grid::new(8, 8, 4).unwrap();
        let spec = NoiseSpec::new(1.0, 2.0, 42).unwrap();
        let a = wiener_increments(&g, &spec, 0.01, 20).unwrap();
        let b = wiener_increments(&g, &spec, 0.01, 20).unwrap();
        assert_eq!(a, b);
        let c = wiener_increments(&g, &NoiseSpec::new(1.0, 2.0, 43).unwrap(), 0.01, 20).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn increments_are_real_fields() {
        let g = Grid::new(8, 6, 4).unwrap();
        let spec = NoiseSpec::new(1.0, 2.0, 7).unwrap();
        let p = wiener_increments(&g, &spec, 0.1, 3).unwrap();
        for n in 0..3 {
            assert!(g.symmetry_defect(&p.increment(n).data, 1) <= 1e-13);
            assert!(p.physical(&g, n).is_ok());
        }
    }

    #[test]
    fn increment_variances() {
        // chi-square: the sample variance of n normals has relative
        // standard error sqrt(2 / (n - 1)).
        let g = Grid::new(4, 4, 4).unwrap();
        let dt = 0.02;
        let n = 100_000;
        let p = wiener_increments(&g, &NoiseSpec::new(1.0, 2.0, 5).unwrap(), dt, n).unwrap();
        let se = (2.0 / (n as f64 - 1.0)).sqrt();
        let var = |f: &dyn Fn(usize) -> f64| {
            let xs: Vec<f64> = (0..n).map(f).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
        };
        let v0 = var(&|s| p.increment(s).get(0, 0).re);
        assert!((v0 / dt - 1.0).abs() < 3.0 * se);
        let vr = var(&|s| p.increment(s).get(1, 0).re);
        let vi = var(&|s| p.increment(s).get(1, 0).im);
        assert!((vr / (0.5 * dt) - 1.0).abs() < 3.0 * se);
        assert!((vi / (0.5 * dt) - 1.0).abs() < 3.0 * se);
        assert_eq!(p.increment(0).get(2, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coarsening_sums_increments() {
        let g = Grid::new(4, 4, 4).unwrap();
        let p = wiener_increments(&g, &NoiseSpec::new(1.0, 2.0, 1).unwrap(), 0.01, 8).unwrap();
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c.dt() - 0.04).abs() < 1e-15);
        let want: Complex64 = (4..8).map(|n| p.increment(n).get(1, 1)).sum();
        assert!((c.increment(1).get(1, 1) - want).norm() < 1e-15);
        assert!(p.coarsen(3).is_err());
    }

    #[test]
    fn zero_noise_convolution_decays_and_keeps_constants() {
        let g = Grid::new(4, 4, 8).unwrap();
        let spec = NoiseSpec::new(0.0, 2.0, 0).unwrap();
        let inc = wiener_increments(&g, &NoiseSpec::new(1.0, 2.0, 0).unwrap(), 0.01, 1).unwrap();
        let mut z = g.spectral_zeros3();
        z.column_mut(0, 0).fill(Complex64::new(0.4, 0.0));
        z.column_mut(1, 0).fill(Complex64::new(0.2, 0.1));
        z.column_mut(3, 0).fill(Complex64::new(0.2, -0.1));
        let next = stoch_convolution_step(&g, &z, 0.01, inc.increment(0), &spec).unwrap();
        assert!(next.column(0, 0).iter().all(|c| (c.re - 0.4).abs() < 1e-13 && c.im.abs() < 1e-13));
        let before: f64 = z.column(1, 0).iter().map(|c| c.norm_sqr()).sum();
        let after: f64 = next.column(1, 0).iter().map(|c| c.norm_sqr()).sum();
        assert!(after < before);
    }

    #[test]
    fn surrogate_scheme_variance_is_close_to_continuum() {
        let ou = OuSurrogate { lambda: 1.0, q: 1.0, dt: 0.1 };
        let x = ou.lambda * ou.dt;
        let ratio = ou.scheme_variance() / ou.continuum_variance();
        assert!((ratio - 2.0 / x * (x / 2.0).tanh()).abs() < 1e-14);
    }

    #[test]
    fn stochastic_runs_reject_surface_trace() {
        let mut c = RunConfig::new(8, 8, 4);
        c.t_end = 2e-3;
        c.initial = InitialCondition::Uniform { value: 0.5 };
        assert!(matches!(
            run_split_stochastic(&c, None, &mut NullObserver),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            run_direct_em(&c, None, &mut NullObserver),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn stochastic_runs_are_pure_functions_of_seed() {
        let mut c = RunConfig::new(8, 8, 4);
        c.t_end = 5e-3;
        c.physics.transport = TransportVariant::VerticalAverage;
        c.noise = NoiseSpec::new(0.1, 2.0, 9).unwrap();
        c.initial = InitialCondition::Uniform { value: 0.5 };
        let a = run_split_stochastic(&c, None, &mut NullObserver).unwrap();
        let b = run_split_stochastic(&c, None, &mut NullObserver).unwrap();
        assert_eq!(a.run.final_state, b.run.final_state);
        assert_eq!(a.remainder.temp.level(4), a.remainder.rho);
        let e1 = run_direct_em(&c, None, &mut NullObserver).unwrap();
        let e2 = run_direct_em(&c, None, &mut NullObserver).unwrap();
        assert_eq!(e1.final_state, e2.final_state);
    }
}

//! Fixtures shared by the criterion benches.

use ebpe_core::timestep::{initial_state, InitialCondition, State};
use ebpe_core::{Grid, PhysParams, RunConfig};

/// Cubic grid of side `n` with a random-smooth state and default physics.
pub fn fixture(n: usize) -> (Grid, State, PhysParams) {
    let config = RunConfig::new(n, n, n);
    let grid = config.grid().expect("valid grid");
    let state = initial_state(
        &grid,
        &InitialCondition::RandomSmooth {
            seed: 1,
            decay: 2.0,
            temp_amplitude: 0.8,
            velocity_amplitude: 0.5,
        },
    )
    .expect("initial state");
    let params = config.phys_params(&grid).expect("physics");
    (grid, state, params)
}

//! Fixed inputs shared by the kernel benchmarks.

use sis_core::rng::{stream, Purpose};
use sis_core::screening::sis_screen;
use sis_core::simgen::{generate, SimulationSpec};
use sis_core::{n_over_log_n, standardize, StandardizedDesign};

/// Standardized design of one SIM1 instance with `s = 8`, `σ = 1.5`.
pub fn sim1_design(n: usize, p: usize, seed: u64) -> StandardizedDesign {
    let spec = SimulationSpec::sim1(n, p, 8, 1.5);
    let inst = generate(&spec, &mut stream(seed, 0, Purpose::Instance)).expect("valid spec");
    standardize(&inst.data)
}

/// The design restricted to its top `d` SIS columns, `[n/log n]` when `d` is `None`.
pub fn screened(sd: &StandardizedDesign, d: Option<usize>) -> StandardizedDesign {
    let d = d.unwrap_or_else(|| n_over_log_n(sd.n(), 1.0));
    let sel = sis_screen(sd, d).expect("d within range").selected;
    sd.subset(&sel)
}

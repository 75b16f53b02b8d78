//! Scratch calibration probe (not part of the library surface).

use cbf2d::direct::SolverConfig;
use cbf2d::manufactured::{build_case, case};
use cbf2d::{ops, Grid};
use std::time::Instant;

fn main() {
    // dt-order: same-grid reference at dt_min / 8.
    for name in ["taylor-vortex-r1", "taylor-vortex-r2", "taylor-vortex-r3"] {
        let c = case(name).unwrap();
        let grid = Grid::new(32, 32).unwrap();
        let t = 0.1;
        let start = Instant::now();
        let reference = {
            let cfg = SolverConfig::from_horizon(0.0, 6.25e-5, t).unwrap();
            build_case(&c, grid, cfg).unwrap().solve_with_exact_amplitude().unwrap()
        };
        let errs: Vec<f64> = [2e-3, 1e-3, 5e-4]
            .iter()
            .map(|&dt| {
                let cfg = SolverConfig::from_horizon(0.0, dt, t).unwrap();
                let traj =
                    build_case(&c, grid, cfg).unwrap().solve_with_exact_amplitude().unwrap();
                ops::h_norm(&traj.final_state().sub(reference.final_state()).unwrap())
            })
            .collect();
        println!(
            "{name}: dt errs {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2} [{:.1}s]",
            errs[0],
            errs[1],
            errs[2],
            errs[0] / errs[1],
            errs[1] / errs[2],
            start.elapsed().as_secs_f64()
        );
    }
    // h-order: exact solution reference, small horizon, tiny dt.
    for name in ["taylor-vortex-r1", "taylor-vortex-r2", "taylor-vortex-r3"] {
        let c = case(name).unwrap();
        let t = 0.01;
        let dt = 2e-6;
        let start = Instant::now();
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| {
                let grid = Grid::new(n, n).unwrap();
                let cfg = SolverConfig::from_horizon(0.0, dt, t).unwrap();
                let bundle = build_case(&c, grid, cfg).unwrap();
                let traj = bundle.solve_with_exact_amplitude().unwrap();
                let exact = bundle.case.exact_velocity(grid, cfg.t_final()).unwrap();
                ops::h_norm(&traj.final_state().sub(&exact).unwrap())
            })
            .collect();
        println!(
            "{name}: h errs {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2} [{:.1}s]",
            errs[0],
            errs[1],
            errs[2],
            errs[0] / errs[1],
            errs[1] / errs[2],
            start.elapsed().as_secs_f64()
        );
    }
}

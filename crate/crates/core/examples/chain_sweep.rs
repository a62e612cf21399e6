//! Barrier-model continuation on the three-ball chain, printing segregation
//! diagnostics per κ.
//!
//! ```text
//! cargo run --release --example chain_sweep -- [steps]
//! ```
//!
//! κ starts at 4 and doubles `steps` times (default 17).

use std::sync::Arc;
use std::time::Instant;

use lvseg::diagnostics::{h1_distance, DiagnosticsContext};
use lvseg::grid_domain::{BallSpec, BoundingBox, CorridorSpec, GridDomain};
use lvseg::reaction::SpeciesParams;
use lvseg::scalar_solver::{positive_guess, principal_eigenvalue, solve_ball, SolverOptions};
use lvseg::state::StateField;
use lvseg::system_solver::{continuation_run, ContinuationSchedule, CoupledSystem, ModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 17,
    };
    let balls: Vec<_> =
        (0..3).map(|s| BallSpec { center: (3.0 * s as f64, 0.0), radius: 1.0, species_index: s }).collect();
    let corridors = [
        CorridorSpec { from_ball: 0, to_ball: 1, width: 0.2 },
        CorridorSpec { from_ball: 1, to_ball: 2, width: 0.2 },
    ];
    let bbox = BoundingBox { xmin: -1.5, ymin: -1.5, xmax: 7.5, ymax: 1.5 };
    let d = Arc::new(GridDomain::build(&balls, &corridors, bbox, 1.0 / 32.0)?);
    let opts = SolverOptions::default();

    let mut species = Vec::new();
    let mut base = Vec::new();
    for s in 0..3 {
        let region = d.ball_nodes(s);
        let (l1, _) = principal_eigenvalue(&region, &d, &opts)?;
        let sp = SpeciesParams::new(2.0 * l1, 2.0)?;
        let rep = solve_ball(&sp, &region, &positive_guess(&region, &d, &opts)?, &opts)?;
        println!("ball {s}: lambda1 {l1:.5}, {} Newton iterations", rep.newton_iterations);
        species.push(sp);
        base.push(rep.solution);
    }
    let baseline = StateField::new(base)?;
    let system = CoupledSystem::new(species.clone(), ModelKind::Barrier(baseline.clone()));
    let ctx =
        DiagnosticsContext { baseline: Some(baseline.clone()), ..DiagnosticsContext::new(species, &opts) };
    let schedule = ContinuationSchedule { kappa_start: 4.0, factor: 2.0, steps };
    let t0 = Instant::now();
    let trace = continuation_run(&baseline, &system, &schedule, &opts, &ctx)?;
    println!("continuation: {:.1} s", t0.elapsed().as_secs_f64());

    println!("{:>12} {:>4} {:>12} {:>12} {:>12}", "kappa", "its", "overlap", "invasion", "step H1");
    let mut prev: Option<&StateField> = None;
    for e in &trace.entries {
        let ni = &e.diagnostics.noninvasion;
        let mut invasion: f64 = 0.0;
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                invasion = invasion.max(ni[i][j] / ni[j][j]);
            }
        }
        let step = match prev {
            Some(p) => format!("{:.4e}", h1_distance(p, &e.state)?),
            None => "-".into(),
        };
        println!(
            "{:>12} {:>4} {:>12.4e} {:>12.3e} {:>12}",
            e.kappa,
            e.newton_iterations,
            e.diagnostics.max_overlap(),
            invasion,
            step
        );
        prev = Some(&e.state);
    }
    Ok(())
}

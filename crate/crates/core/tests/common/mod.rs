#![allow(dead_code)]

use std::sync::Arc;

use lvseg::grid_domain::{BallSpec, BoundingBox, CorridorSpec, GridDomain, NodeSet};
use lvseg::reaction::SpeciesParams;
use lvseg::scalar_solver::{positive_guess, principal_eigenvalue, solve_ball, SolverOptions};
use lvseg::state::StateField;

/// Three unit balls centred at x = 0, 3, 6 on the axis.
pub fn chain_balls() -> Vec<BallSpec> {
    (0..3).map(|s| BallSpec { center: (3.0 * s as f64, 0.0), radius: 1.0, species_index: s }).collect()
}

pub fn chain_corridors(width: f64) -> Vec<CorridorSpec> {
    vec![CorridorSpec { from_ball: 0, to_ball: 1, width }, CorridorSpec { from_ball: 1, to_ball: 2, width }]
}

pub const CHAIN_BBOX: BoundingBox = BoundingBox { xmin: -1.5, ymin: -1.5, xmax: 7.5, ymax: 1.5 };

/// The chain joined by corridors of width 0.2.
pub fn chain(h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::build(&chain_balls(), &chain_corridors(0.2), CHAIN_BBOX, h).unwrap())
}

/// The same balls with no corridors.
pub fn disconnected_chain(h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::build(&chain_balls(), &[], CHAIN_BBOX, h).unwrap())
}

pub fn unit_disk(h: f64) -> Arc<GridDomain> {
    let ball = BallSpec { center: (0.0, 0.0), radius: 1.0, species_index: 0 };
    let bbox = BoundingBox { xmin: -1.5, ymin: -1.5, xmax: 1.5, ymax: 1.5 };
    Arc::new(GridDomain::build(&[ball], &[], bbox, h).unwrap())
}

pub fn unit_square(h: f64) -> Arc<GridDomain> {
    let bbox = BoundingBox { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 };
    Arc::new(GridDomain::rectangle(bbox, h).unwrap())
}

/// Species with `λ_i = factor · λ₁(B_i)` and `p = 2`, with their positive
/// single-ball states.
pub fn logistic_baselines(
    d: &Arc<GridDomain>,
    factor: f64,
    opts: &SolverOptions,
) -> (Vec<SpeciesParams>, StateField) {
    let mut species = Vec::new();
    let mut base = Vec::new();
    for s in 0..d.species_count() {
        let region = d.ball_nodes(s);
        let (l1, _) = principal_eigenvalue(&region, d, opts).unwrap();
        let sp = SpeciesParams::new(factor * l1, 2.0).unwrap();
        let guess = positive_guess(&region, d, opts).unwrap();
        let rep = solve_ball(&sp, &region, &guess, opts).unwrap();
        assert!(rep.positive, "baseline {s} not positive");
        species.push(sp);
        base.push(rep.solution);
    }
    (species, StateField::new(base).unwrap())
}

/// Dense matrix of the discrete Dirichlet Laplacian restricted to `region`,
/// indexed by the order of `region.nodes()`.
pub fn dense_laplacian(d: &GridDomain, region: &NodeSet) -> nalgebra::DMatrix<f64> {
    let nodes: Vec<usize> = region.nodes().collect();
    let mut pos = vec![usize::MAX; d.len()];
    for (n, &p) in nodes.iter().enumerate() {
        pos[p] = n;
    }
    let inv_h2 = 1.0 / (d.h() * d.h());
    let mut a = nalgebra::DMatrix::zeros(nodes.len(), nodes.len());
    for (n, &p) in nodes.iter().enumerate() {
        a[(n, n)] = 4.0 * inv_h2;
        for q in d.neighbours(p) {
            if region.contains(q) {
                a[(n, pos[q])] = -inv_h2;
            }
        }
    }
    a
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fail.

#![allow(clippy::needless_range_loop)]

mod common;

use std::sync::Arc;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use lvseg::cli::output::{field_csv, parse_field_csv};
use lvseg::cli::pipeline::convergence_study;
use lvseg::diagnostics::{
    diagnose, h1_distance, overlap, random_perturbation, uniqueness_probe, DiagnosticsContext,
};
use lvseg::discrete_ops::{apply_laplacian, inner, norm, CgOptions, NormKind, ScalarField};
use lvseg::grid_domain::{BallSpec, BoundingBox, GridDomain};
use lvseg::reaction::{hat_transform, SpeciesParams};
use lvseg::scalar_solver::{
    nd_margin, positive_guess, principal_eigenvalue, solve_ball, supersolution_phi, SolverOptions,
};
use lvseg::state::StateField;
use lvseg::system_solver::{
    continuation_run, solve_system, ContinuationSchedule, ContinuationTrace, CoupledSystem, ModelKind,
};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    let line = format!("{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
    println!("{line}");
    Outcome { id, pass, detail }
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

struct Chain {
    species: Vec<SpeciesParams>,
    baseline: StateField,
    system: CoupledSystem,
    trace: ContinuationTrace,
}

fn chain_run(opts: &SolverOptions) -> Chain {
    let d = common::chain(1.0 / 32.0);
    let (species, baseline) = common::logistic_baselines(&d, 2.0, opts);
    let system = CoupledSystem::new(species.clone(), ModelKind::Barrier(baseline.clone()));
    let ctx = DiagnosticsContext {
        baseline: Some(baseline.clone()),
        ..DiagnosticsContext::new(species.clone(), opts)
    };
    let schedule = ContinuationSchedule { kappa_start: 4.0, factor: 2.0, steps: 17 };
    let trace = continuation_run(&baseline, &system, &schedule, opts, &ctx).expect("chain continuation");
    Chain { species, baseline, system, trace }
}

fn a1() -> Outcome {
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let report = convergence_study(&hs, CgOptions::default()).unwrap();
    let pass = report.ratio.iter().all(|r| (r - 4.0).abs() <= 0.6);
    outcome("A1", pass, format!("L2 errors {:?}, ratios {:?}", report.l2_error, report.ratio))
}

fn a2(opts: &SolverOptions) -> Outcome {
    let pi = std::f64::consts::PI;
    let sq = common::unit_square(1.0 / 128.0);
    let (l_sq, _) = principal_eigenvalue(sq.interior(), &sq, opts).unwrap();
    let disk = common::unit_disk(1.0 / 128.0);
    let (l_disk, _) = principal_eigenvalue(disk.interior(), &disk, opts).unwrap();
    let disk_ref = 2.404825557695773_f64.powi(2);
    let err_sq = (l_sq - 2.0 * pi * pi).abs() / (2.0 * pi * pi);
    let err_disk = (l_disk - disk_ref).abs() / disk_ref;

    // Dense oracle on the coarse grids.
    let mut oracle_err: f64 = 0.0;
    for d in [common::unit_square(1.0 / 16.0), common::unit_disk(1.0 / 16.0)] {
        let (l, _) = principal_eigenvalue(d.interior(), &d, opts).unwrap();
        let dense = common::dense_laplacian(&d, d.interior()).symmetric_eigenvalues().min();
        oracle_err = oracle_err.max((l - dense).abs() / dense);
    }
    let pass = err_sq <= 0.005 && err_disk <= 0.01 && oracle_err <= 1e-6;
    outcome(
        "A2",
        pass,
        format!(
            "square {l_sq:.5} (rel err {err_sq:.2e}), disk {l_disk:.5} (rel err {err_disk:.2e}), dense oracle rel err {oracle_err:.1e}"
        ),
    )
}

fn a3(chain: &Chain) -> Outcome {
    let tail = &chain.trace.entries[chain.trace.entries.len() - 8..];
    let xs: Vec<f64> = tail.iter().map(|e| e.kappa.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|e| e.diagnostics.max_overlap().ln()).collect();
    let s = slope(&xs, &ys);
    let first = chain.trace.entries.first().unwrap();
    let last = chain.trace.last().unwrap();
    outcome(
        "A3",
        s <= -0.8,
        format!(
            "slope {s:.3} over kappa {}..{}; max overlap {:.3e} at kappa {} -> {:.3e} at kappa {}",
            tail[0].kappa,
            last.kappa,
            first.diagnostics.max_overlap(),
            first.kappa,
            last.diagnostics.max_overlap(),
            last.kappa
        ),
    )
}

fn a4(chain: &Chain) -> Outcome {
    let d = &chain.trace.last().unwrap().diagnostics;
    let sub: usize = d.sub_violations.iter().map(|v| v.count).sum();
    let sup: usize = d.super_violations.iter().map(|v| v.count).sum();
    outcome("A4", sub == 0 && sup == 0, format!("sub violations {sub}, super violations {sup}"))
}

fn worst_invasion_ratio(m: &[Vec<f64>]) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut least = f64::INFINITY;
    for i in 0..m.len() {
        for j in 0..m.len() {
            if i != j {
                worst = worst.max(m[i][j] / m[j][j]);
                least = least.min(m[i][j] / m[j][j]);
            }
        }
    }
    (worst, least)
}

fn a5(chain: &Chain, opts: &SolverOptions) -> Outcome {
    let (worst, _) = worst_invasion_ratio(&chain.trace.last().unwrap().diagnostics.noninvasion);
    // κ = 0: each species solves its own problem on the whole domain; start
    // from the positive branch.
    let d = chain.baseline.domain();
    let phi: Vec<ScalarField> =
        chain.species.iter().map(|sp| supersolution_phi(sp, d, opts).unwrap()).collect();
    let start = StateField::new(phi).unwrap();
    let free = solve_system(&start, &chain.system, 0.0, opts.newton_tol, opts).unwrap();
    let ctx = DiagnosticsContext::new(chain.species.clone(), opts);
    let (_, least) = worst_invasion_ratio(&diagnose(&free.state, &ctx).noninvasion);
    outcome(
        "A5",
        worst <= 1e-3 && least > 0.1,
        format!("final kappa worst off/diag ratio {worst:.2e}; kappa = 0 smallest off/diag ratio {least:.3}"),
    )
}

fn a6(chain: &Chain, opts: &SolverOptions) -> Outcome {
    let last = chain.trace.last().unwrap();
    let report = uniqueness_probe(&last.state, &chain.system, last.kappa, 0.02, 10, 7, opts).unwrap();
    let rel = report.max_pairwise_h1_distance / last.state.norm(NormKind::H1);
    outcome(
        "A6",
        report.all_converged && rel <= 1e-6,
        format!(
            "{}/{} converged, max pairwise H1 distance {rel:.2e} relative",
            report.converged, report.trials
        ),
    )
}

fn a7(chain: &Chain) -> Outcome {
    let e = &chain.trace.entries;
    let dists: Vec<f64> = e.windows(2).map(|w| h1_distance(&w[1].state, &w[0].state).unwrap()).collect();
    let tail = &dists[dists.len() - 6..];
    let pass = tail.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = tail.iter().map(|x| format!("{x:.2e}")).collect();
    outcome("A7", pass, format!("last step distances [{}]", shown.join(", ")))
}

fn a8(opts: &SolverOptions) -> Outcome {
    let d = common::chain(1.0 / 32.0);
    let (species, baseline) = common::logistic_baselines(&d, 2.0, opts);
    let phi: Vec<ScalarField> = species.iter().map(|sp| supersolution_phi(sp, &d, opts).unwrap()).collect();
    let system =
        CoupledSystem::new(species.clone(), ModelKind::PositivePart(baseline.clone())).with_caps(phi.clone());
    let ctx = DiagnosticsContext {
        baseline: Some(baseline.clone()),
        phi: Some(phi),
        ..DiagnosticsContext::new(species, opts)
    };
    // Started directly at the target rate: below κ ≈ (λ - λ₁)/max u⁰ the
    // segregated branch of the positive-part system is not isolated and
    // Newton from U⁰ stalls.
    let schedule = ContinuationSchedule { kappa_start: 1000.0, factor: 2.0, steps: 1 };
    let trace = continuation_run(&baseline, &system, &schedule, opts, &ctx).unwrap();
    let last = trace.last().unwrap();
    outcome(
        "A8",
        last.diagnostics.box_violations == 0,
        format!("kappa {}: {} box violations", last.kappa, last.diagnostics.box_violations),
    )
}

fn a9(opts: &SolverOptions) -> Outcome {
    let d = common::unit_disk(1.0 / 32.0);
    let region = d.ball_nodes(0);
    let (l1, _) = principal_eigenvalue(&region, &d, opts).unwrap();
    let sub = SpeciesParams::new(0.5 * l1, 2.0).unwrap();
    let zero = nd_margin(&ScalarField::zeros(&d), &sub, &region, opts).unwrap().margin;
    let mut margins = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let d = common::unit_disk(h);
        let region = d.ball_nodes(0);
        let (l1, _) = principal_eigenvalue(&region, &d, opts).unwrap();
        let sp = SpeciesParams::new(2.0 * l1, 2.0).unwrap();
        let guess = positive_guess(&region, &d, opts).unwrap();
        let u0 = solve_ball(&sp, &region, &guess, opts).unwrap().solution;
        margins.push(nd_margin(&u0, &sp, &region, opts).unwrap().margin);
    }
    let pass = (zero - 0.5).abs() <= 1e-4 && margins.iter().all(|&m| m > 0.0);
    outcome("A9", pass, format!("zero-state margin {zero:.6}; logistic margins {margins:?}"))
}

fn a10(opts: &SolverOptions) -> Outcome {
    let d = common::disconnected_chain(1.0 / 32.0);
    let (species, baseline) = common::logistic_baselines(&d, 2.0, opts);
    let system = CoupledSystem::new(species, ModelKind::Barrier(baseline.clone()));
    let scale = baseline.norm(NormKind::H1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for kappa in [1e2, 1e4] {
        for seed in 0..5 {
            let start = baseline.axpy(1.0, &random_perturbation(&baseline, 0.02, seed).unwrap()).unwrap();
            match solve_system(&start, &system, kappa, opts.newton_tol, opts) {
                Ok(sol) => worst = worst.max(h1_distance(&sol.state, &baseline).unwrap() / scale),
                Err(_) => failures += 1,
            }
        }
    }
    outcome(
        "A10",
        failures == 0 && worst <= 1e-6,
        format!("{failures} failed solves, worst relative H1 distance to U0 {worst:.2e}"),
    )
}

fn random_disk() -> impl Strategy<Value = Arc<GridDomain>> {
    (-0.5..0.5f64, -0.5..0.5f64, 0.6..1.4f64, prop::sample::select(vec![0.125, 0.1, 1.0 / 12.0])).prop_map(
        |(cx, cy, r, h)| {
            let ball = BallSpec { center: (cx, cy), radius: r, species_index: 0 };
            let bbox = BoundingBox {
                xmin: cx - r - 0.5,
                ymin: cy - r - 0.5,
                xmax: cx + r + 0.5,
                ymax: cy + r + 0.5,
            };
            Arc::new(GridDomain::build(&[ball], &[], bbox, h).unwrap())
        },
    )
}

fn field_on(d: &Arc<GridDomain>, seed: u64) -> ScalarField {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut f = ScalarField::zeros(d);
    for p in d.interior().nodes() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        f.values_mut()[p] = ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
    }
    f
}

fn close(a: f64, b: f64, scale: f64) -> std::result::Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= 1e-10 * scale.max(1.0), "{a} vs {b}");
    Ok(())
}

fn a11() -> Outcome {
    const CASES: u32 = 128;
    let config = Config { cases: CASES, ..Config::default() };
    let mut results: Vec<(&str, std::result::Result<(), String>)> = Vec::new();
    let mut check = |name: &'static str, r: std::result::Result<(), String>| results.push((name, r));

    let mut runner = TestRunner::new(config.clone());
    check(
        "oddness of f",
        runner
            .run(&(0.1..50.0f64, 1.01..5.0f64, -10.0..10.0f64), |(lambda, p, s)| {
                let sp = SpeciesParams::new(lambda, p).unwrap();
                prop_assert_eq!(sp.f(-s), -sp.f(s));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    check(
        "Laplacian symmetry and definiteness",
        runner
            .run(&(random_disk(), any::<u64>()), |(d, seed)| {
                let u = field_on(&d, seed);
                let v = field_on(&d, seed ^ 0x9e37);
                let uav = inner(&u, &apply_laplacian(&v)).unwrap();
                let vau = inner(&v, &apply_laplacian(&u)).unwrap();
                close(uav, vau, uav.abs())?;
                prop_assert!(inner(&u, &apply_laplacian(&u)).unwrap() > 0.0);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    check(
        "summation by parts",
        runner
            .run(&(random_disk(), any::<u64>()), |(d, seed)| {
                let u = field_on(&d, seed);
                let v = field_on(&d, seed.wrapping_add(17));
                let lhs = inner(&apply_laplacian(&u), &v).unwrap();
                let plus = norm(&u.axpy(1.0, &v).unwrap(), NormKind::H1Seminorm);
                let minus = norm(&u.axpy(-1.0, &v).unwrap(), NormKind::H1Seminorm);
                let rhs = 0.25 * (plus * plus - minus * minus);
                close(lhs, rhs, plus * plus)
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    check(
        "hat transform linearity",
        runner
            .run(&(any::<u64>(), -3.0..3.0f64, -3.0..3.0f64, 0..3usize), |(seed, a, b, i)| {
                let d = common::disconnected_chain(0.25);
                let mk = |s: u64| StateField::new((0..3).map(|c| field_on(&d, s + c)).collect()).unwrap();
                let (u, v) = (mk(seed), mk(seed ^ 0xabc));
                let combo = u.norm(NormKind::L2);
                let w = StateField::new(
                    (0..3).map(|c| u.component(c).scale(a).axpy(b, v.component(c)).unwrap()).collect(),
                )
                .unwrap();
                let lhs = hat_transform(&w, i);
                let rhs = hat_transform(&u, i).scale(a).axpy(b, &hat_transform(&v, i)).unwrap();
                let diff = norm(&lhs.axpy(-1.0, &rhs).unwrap(), NormKind::Linf);
                prop_assert!(diff <= 1e-12 * (1.0 + combo), "difference {diff}");
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    check(
        "overlap symmetry",
        runner
            .run(&(any::<u64>(), 2..5usize), |(seed, k)| {
                let d = common::disconnected_chain(0.25);
                let u = StateField::new((0..k).map(|c| field_on(&d, seed + c as u64)).collect()).unwrap();
                let m = overlap(&u);
                for i in 0..k {
                    prop_assert_eq!(m[i][i], 0.0);
                    for j in 0..k {
                        prop_assert_eq!(m[i][j], m[j][i]);
                    }
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config);
    check(
        "emit/read round trip",
        runner
            .run(&(random_disk(), any::<u64>(), -300i32..300), |(d, seed, e)| {
                let u = field_on(&d, seed).scale(10f64.powi(e / 10));
                let text = field_csv(&u);
                let back =
                    parse_field_csv(&text, std::path::Path::new("prop.csv")).unwrap().into_field(&d).unwrap();
                for (a, b) in u.values().iter().zip(back.values()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let failed: Vec<String> =
        results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    if failed.is_empty() {
        outcome("A11", true, format!("{} suites x {CASES} cases: {}", names.len(), names.join(", ")))
    } else {
        outcome("A11", false, failed.join("; "))
    }
}

fn main() {
    let opts = SolverOptions::default();
    let t0 = Instant::now();
    let mut results = vec![a1(), a2(&opts)];
    let chain = chain_run(&opts);
    results.push(a3(&chain));
    results.push(a4(&chain));
    results.push(a5(&chain, &opts));
    results.push(a6(&chain, &opts));
    results.push(a7(&chain));
    results.push(a8(&opts));
    results.push(a9(&opts));
    results.push(a10(&opts));
    results.push(a11());
    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        t0.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}

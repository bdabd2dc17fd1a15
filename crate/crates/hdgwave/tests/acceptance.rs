//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities. Run with `--nocapture` to see the lines:
//!
//! ```text
//! cargo test -p hdgwave --test acceptance -- --nocapture
//! ```

use hdgwave::adjoint::{accumulate_gradient, residual, solve_adjoint_states, Parameter};
use hdgwave::basis::dof_count;
use hdgwave::forward::{
    field_errors, solve_boundary_driven, solve_forward, PlaneWave, PointSource,
    RestrictionOperator,
};
use hdgwave::hdg::{BoundaryCondition, BoundarySpec, HdgOperator};
use hdgwave::inversion::{
    gradient_check, run_inversion, synthesize_data, InversionSettings, OrderPolicy,
};
use hdgwave::mesh::{build_structured_mesh, Extent, SimplicialMesh};
use hdgwave::model::ModelState;
use hdgwave::orders::{count_trace_dofs, count_volume_dofs, OrderAssignment};
use hdgwave::sparse::thread_factorization_count;
use hdgwave::C64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Criterion 1: exact dof accounting on the two-triangle unit square at
/// uniform order 3 (trace 20, DG volume 20) and the 3D dof-count formula.
#[test]
fn criterion_1_dof_accounting() {
    let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[1, 1]).unwrap();
    let orders = OrderAssignment::uniform(&mesh, 3);
    let trace = count_trace_dofs(&mesh, &orders);
    let volume = count_volume_dofs(&mesh, &orders);
    assert_eq!(trace, 20);
    assert_eq!(volume, 20);
    assert_eq!(dof_count(3, 3), 20);
    println!("criterion 1 (dof accounting): PASS (trace 20, volume 20, dof_count(3,3) = 20)");
}

/// Criterion 2: manufactured plane-wave convergence at orders 1..3 over four
/// refinements; pressure and every velocity component converge at >= p + 0.8.
#[test]
fn criterion_2_convergence_of_both_fields() {
    let omega = 4.0;
    let alpha = C64::new(1.0, 0.0);
    let beta = C64::new(1.0, 0.0);
    for order in [1u32, 2, 3] {
        let mut errors: Vec<(f64, Vec<f64>)> = Vec::new();
        for n in [2usize, 4, 8, 16] {
            let mesh =
                build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[n, n]).unwrap();
            let model = ModelState::uniform(&mesh, 1.0, 1000.0);
            let orders = OrderAssignment::uniform(&mesh, order);
            let wave = PlaneWave::new(omega, 1.0, 1000.0, [0.6, 0.8, 0.0]);
            let bspec = BoundarySpec::uniform(&mesh, BoundaryCondition::Robin { alpha, beta });
            let data = wave.robin_data(&mesh, alpha, beta);
            let op =
                HdgOperator::build(&mesh, &model, &orders, wave.sigma, &bspec, Some(&data))
                    .unwrap();
            let sol = solve_boundary_driven(&op).unwrap();
            let errs =
                field_errors(&op, &sol, &|x| wave.pressure(x), &|x| wave.velocity(x)).unwrap();
            errors.push((errs.p_error, errs.v_error.clone()));
        }
        let last = errors.len() - 1;
        let rate_p = (errors[last - 1].0 / errors[last].0).log2();
        assert!(
            rate_p >= order as f64 + 0.8,
            "order {order}: pressure rate {rate_p:.2}"
        );
        let mut rate_v = Vec::new();
        for d in 0..2 {
            let r = (errors[last - 1].1[d] / errors[last].1[d]).log2();
            assert!(
                r >= order as f64 + 0.8,
                "order {order}: velocity component {d} rate {r:.2}"
            );
            rate_v.push(r);
        }
        println!(
            "criterion 2 (convergence, order {order}): PASS (rates p {:.2}, vx {:.2}, vy {:.2})",
            rate_p, rate_v[0], rate_v[1]
        );
    }
}

fn jittered_mesh_2d(n: usize, seed: u64) -> SimplicialMesh {
    let base = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[n, n]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let mut vertices: Vec<[f64; 3]> = (0..base.n_vertices()).map(|v| base.vertex(v)).collect();
    for v in vertices.iter_mut() {
        let interior = v[0] > 1e-12 && v[0] < 1.0 - 1e-12 && v[1] > 1e-12 && v[1] < 1.0 - 1e-12;
        if interior {
            v[0] += h * 0.15 * (rng.gen::<f64>() - 0.5);
            v[1] += h * 0.15 * (rng.gen::<f64>() - 0.5);
        }
    }
    let mut cells = Vec::new();
    for e in 0..base.n_cells() {
        cells.extend_from_slice(base.cell(e));
    }
    SimplicialMesh::from_raw(2, vertices, cells, vec![], |_, _| None).unwrap()
}

/// Criterion 3: the explicitly assembled adjoint-form global matrix equals
/// the conjugate transpose of the forward matrix on three random meshes with
/// mixed orders, entrywise to 1e-12 relative.
#[test]
fn criterion_3_adjoint_matrix_identity() {
    for (trial, seed) in [(0u64, 101u64), (1, 202), (2, 303)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh: SimplicialMesh = if trial < 2 {
            jittered_mesh_2d(2 + trial as usize, seed)
        } else {
            build_structured_mesh(Extent::new_3d((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), &[1, 1, 1])
                .unwrap()
        };
        let cell_orders: Vec<u32> = (0..mesh.n_cells()).map(|_| rng.gen_range(1..=3)).collect();
        let orders = OrderAssignment::from_cell_orders(&mesh, cell_orders);
        let model = ModelState::uniform(&mesh, 1.3, 850.0);
        let bspec = BoundarySpec::uniform(
            &mesh,
            BoundaryCondition::Robin {
                alpha: C64::new(0.7, -0.4),
                beta: C64::new(1.0, 0.2),
            },
        );
        let sigma = C64::new(-0.3, 5.0);
        let op = HdgOperator::build(&mesh, &model, &orders, sigma, &bspec, None).unwrap();

        let forward_adjoint = op.matrix.adjoint();
        let explicit = op.adjoint_global_matrix();
        assert_eq!(forward_adjoint.col_ptr, explicit.col_ptr);
        assert_eq!(forward_adjoint.row_idx, explicit.row_idx);
        let scale = forward_adjoint
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        let mut max_rel = 0.0f64;
        for (a, b) in forward_adjoint.values.iter().zip(&explicit.values) {
            max_rel = max_rel.max((a - b).norm() / scale);
        }
        assert!(
            max_rel < 1e-12,
            "trial {trial}: adjoint identity max entry error {max_rel:e}"
        );
        println!(
            "criterion 3 (adjoint matrix identity, mesh {trial}): PASS (max entrywise error {max_rel:.2e})"
        );
    }
}

/// Criterion 4: adjoint-state gradient vs central finite differences of the
/// misfit on a 32-cell mesh, 5 random cells, two sources, two receivers, one
/// frequency; minimum-over-step relative error < 1e-5.
#[test]
fn criterion_4_gradient_correctness() {
    let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[4, 4]).unwrap();
    assert!(mesh.n_cells() <= 32);
    let model = ModelState::uniform(&mesh, 1.0, 1000.0);
    let policy = OrderPolicy::Fixed(2);
    let bspec = BoundarySpec::uniform(&mesh, BoundaryCondition::Absorbing);
    let sources = vec![
        PointSource {
            position: [0.28, 0.92, 0.0],
            amplitude: C64::new(1.0, 0.0),
        },
        PointSource {
            position: [0.71, 0.92, 0.0],
            amplitude: C64::new(0.6, -0.4),
        },
    ];
    let receivers = vec![[0.2, 0.84, 0.0], [0.8, 0.84, 0.0]];
    // data from a perturbed model: nonzero residual, nonzero gradient
    let mut truth = model.clone();
    for (e, c) in truth.c.iter_mut().enumerate() {
        *c *= 1.0 + 0.04 * ((e % 5) as f64 - 2.0) / 2.0;
    }
    let data = synthesize_data(
        &mesh, &truth, &policy, &bspec, &[1.1], 0.0, &sources, &receivers, None, 31,
    )
    .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut cells: Vec<usize> = (0..mesh.n_cells()).collect();
    cells.shuffle(&mut rng);
    cells.truncate(5);
    let steps: Vec<f64> = (2..=8).map(|e| 10f64.powi(-e)).collect();
    let rows = gradient_check(&mesh, &model, &policy, &bspec, &data, &cells, &steps).unwrap();
    for &cell in &cells {
        let best = rows
            .iter()
            .filter(|r| r.cell == cell)
            .map(|r| r.rel_error)
            .fold(f64::MAX, f64::min);
        assert!(best < 1e-5, "cell {cell}: best FD agreement {best:e}");
    }
    let overall = rows.iter().map(|r| r.rel_error).fold(f64::MAX, f64::min);
    println!(
        "criterion 4 (gradient vs finite differences): PASS (best relative error {overall:.2e} over {} cells)",
        cells.len()
    );
}

/// Criterion 5: a 10-source run with the full adjoint and gradient performs
/// exactly one global factorization.
#[test]
fn criterion_5_factorization_reuse() {
    let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[3, 3]).unwrap();
    let model = ModelState::uniform(&mesh, 1.0, 1000.0);
    let orders = OrderAssignment::uniform(&mesh, 2);
    let bspec = BoundarySpec::uniform(&mesh, BoundaryCondition::Absorbing);
    let sources: Vec<PointSource> = (0..10)
        .map(|i| PointSource {
            position: [0.08 + 0.09 * i as f64, 0.9, 0.0],
            amplitude: C64::new(1.0, 0.2),
        })
        .collect();
    let receivers: Vec<[f64; 3]> = (0..6).map(|i| [0.1 + 0.15 * i as f64, 0.8, 0.0]).collect();

    let before = thread_factorization_count();
    let op = HdgOperator::build(&mesh, &model, &orders, C64::new(0.0, 6.0), &bspec, None).unwrap();
    let restrict = RestrictionOperator::build(&mesh, &orders, &receivers).unwrap();
    let sols = solve_forward(&op, &sources).unwrap();
    let mut grad = vec![0.0; model.ndof()];
    for sol in &sols {
        let d: Vec<C64> = vec![C64::new(0.1, 0.1); receivers.len()];
        let r = residual(&op, &restrict, sol, &d).unwrap();
        let adj = solve_adjoint_states(&op, &restrict, &r).unwrap();
        accumulate_gradient(&op, sol, &adj, Parameter::WaveSpeed, &mut grad).unwrap();
    }
    let used = thread_factorization_count() - before;
    assert_eq!(used, 1, "expected exactly one factorization, got {used}");
    println!("criterion 5 (factorization reuse): PASS (10 sources + adjoint + gradient, 1 factorization)");
}

/// Criterion 6: post-solve interior-face flux-continuity residual below
/// 1e-8 of the face flux norm on every face of a mixed-order solve.
#[test]
fn criterion_6_flux_continuity() {
    let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[3, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let cell_orders: Vec<u32> = (0..mesh.n_cells()).map(|_| rng.gen_range(1..=4)).collect();
    let orders = OrderAssignment::from_cell_orders(&mesh, cell_orders);
    let model = ModelState::uniform(&mesh, 1.0, 1000.0);
    let bspec = BoundarySpec::uniform(&mesh, BoundaryCondition::Absorbing);
    let op = HdgOperator::build(&mesh, &model, &orders, C64::new(0.0, 7.0), &bspec, None).unwrap();
    let src = PointSource {
        position: [0.43, 0.57, 0.0],
        amplitude: C64::new(1.0, 0.0),
    };
    let sol = solve_forward(&op, &[src]).unwrap().remove(0);
    let residuals = op.flux_continuity_residuals(&sol).unwrap();
    assert!(!residuals.is_empty());
    let mut worst = 0.0f64;
    for (f, (rnorm, fnorm)) in residuals.iter().enumerate() {
        let rel = rnorm / fnorm;
        assert!(
            rel < 1e-8,
            "interior face {f}: flux residual {rnorm:e} vs flux norm {fnorm:e}"
        );
        worst = worst.max(rel);
    }
    println!(
        "criterion 6 (flux continuity): PASS ({} interior faces, worst relative residual {worst:.2e})",
        residuals.len()
    );
}

/// Criterion 7: on a fixed 3D mesh of >= 100 tetrahedra, the ratio of trace
/// dof to (dim+1) times volume dof decreases monotonically for p = 1..4 and
/// stays below 1.
#[test]
fn criterion_7_size_reduction() {
    let mesh =
        build_structured_mesh(Extent::new_3d((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), &[3, 3, 3])
            .unwrap();
    assert!(mesh.n_cells() >= 100, "{} tetrahedra", mesh.n_cells());
    let mut prev = f64::MAX;
    let mut ratios = Vec::new();
    for p in 1u32..=4 {
        let orders = OrderAssignment::uniform(&mesh, p);
        let trace = count_trace_dofs(&mesh, &orders) as f64;
        let volume = count_volume_dofs(&mesh, &orders) as f64;
        let ratio = trace / (4.0 * volume);
        assert!(ratio < 1.0, "p={p}: ratio {ratio}");
        assert!(ratio < prev, "p={p}: ratio {ratio} not decreasing from {prev}");
        prev = ratio;
        ratios.push(ratio);
    }
    println!(
        "criterion 7 (size reduction, {} tets): PASS (ratios {:.3} > {:.3} > {:.3} > {:.3})",
        mesh.n_cells(),
        ratios[0],
        ratios[1],
        ratios[2],
        ratios[3]
    );
}

struct PhantomOutcome {
    log_bytes: Vec<u8>,
    model_bytes: Vec<u8>,
    initial_misfit: f64,
    final_misfit: f64,
    initial_model: ModelState,
    final_model: ModelState,
}

const INCLUSION_CENTER: [f64; 2] = [500.0, 620.0];
const INCLUSION_RADIUS: f64 = 250.0;
const BACKGROUND_C: f64 = 2000.0;
const INCLUSION_C: f64 = 2500.0;

/// Reflection-style phantom: one-sided acquisition near the top, Dirichlet
/// surface, absorbing sides and bottom, 10 dB noise, data mesh and orders
/// different from the inversion's.
fn phantom_run(seed: u64) -> PhantomOutcome {
    let extent = Extent::new_2d((0.0, 1000.0), (0.0, 1000.0));
    let data_mesh = build_structured_mesh(extent, &[16, 16]).unwrap();
    let inv_mesh = build_structured_mesh(extent, &[12, 12]).unwrap();

    let mut truth = ModelState::uniform(&data_mesh, BACKGROUND_C, 1000.0);
    for e in 0..data_mesh.n_cells() {
        let c = data_mesh.cell_centroid(e);
        let d = ((c[0] - INCLUSION_CENTER[0]).powi(2) + (c[1] - INCLUSION_CENTER[1]).powi(2))
            .sqrt();
        if d <= INCLUSION_RADIUS {
            truth.c[e] = INCLUSION_C;
        }
    }

    let sources: Vec<PointSource> = (0..8)
        .map(|i| PointSource {
            position: [140.0 + 720.0 * i as f64 / 7.0, 955.0, 0.0],
            amplitude: C64::new(1.0, 0.0),
        })
        .collect();
    let receivers: Vec<[f64; 3]> = (0..16)
        .map(|i| [60.0 + 880.0 * i as f64 / 15.0, 905.0, 0.0])
        .collect();

    let surface = |mesh: &SimplicialMesh| {
        BoundarySpec::from_tags(
            mesh,
            &[("ymax".to_string(), BoundaryCondition::Dirichlet)],
            BoundaryCondition::Absorbing,
        )
        .unwrap()
    };

    let freq = 12.0;
    let data = synthesize_data(
        &data_mesh,
        &truth,
        &OrderPolicy::Fixed(4),
        &surface(&data_mesh),
        &[freq],
        0.0,
        &sources,
        &receivers,
        Some(10.0),
        seed,
    )
    .unwrap();

    let mut initial = ModelState::uniform(&inv_mesh, BACKGROUND_C, 1000.0);
    initial.c_bounds = (1500.0, 3200.0);
    let settings = InversionSettings {
        iterations_per_freq: 30,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let ckpt_path = dir.path().join("checkpoint.txt");
    let mut count = 0usize;
    let initial_clone = initial.clone();
    let (final_model, log) = run_inversion(
        &inv_mesh,
        initial,
        &OrderPolicy::Fixed(3),
        &surface(&inv_mesh),
        &data,
        &settings,
        |rec, current| {
            count += 1;
            if rec.accepted && count == 10 {
                hdgwave::io::write_model_ascii(&ckpt_path, current).unwrap();
            }
        },
    )
    .unwrap();
    let log_path = dir.path().join("log.csv");
    log.write_csv(&log_path).unwrap();
    let model_path = dir.path().join("final.txt");
    hdgwave::io::write_model_ascii(&model_path, &final_model).unwrap();

    let mut log_bytes = std::fs::read(&log_path).unwrap();
    if ckpt_path.exists() {
        log_bytes.extend(std::fs::read(&ckpt_path).unwrap());
    }
    PhantomOutcome {
        log_bytes,
        model_bytes: std::fs::read(&model_path).unwrap(),
        initial_misfit: log.records.first().unwrap().misfit,
        final_misfit: log.records.last().unwrap().misfit_after,
        initial_model: initial_clone,
        final_model,
    }
}

fn inclusion_error(mesh: &SimplicialMesh, model: &ModelState) -> f64 {
    let mut err = 0.0;
    let mut n = 0usize;
    for e in 0..mesh.n_cells() {
        let c = mesh.cell_centroid(e);
        let d = ((c[0] - INCLUSION_CENTER[0]).powi(2) + (c[1] - INCLUSION_CENTER[1]).powi(2))
            .sqrt();
        if d <= INCLUSION_RADIUS {
            err += (model.c[e] - INCLUSION_C).abs();
            n += 1;
        }
    }
    err / n as f64
}

/// Criterion 8: the end-to-end inversion smoke test reduces the misfit by at
/// least half in 30 iterations and improves the wave speed inside the
/// inclusion.
#[test]
fn criterion_8_inversion_smoke_test() {
    let outcome = phantom_run(7);
    let reduction = outcome.final_misfit / outcome.initial_misfit;
    assert!(
        reduction <= 0.5,
        "misfit only reduced to {:.1}% of initial",
        reduction * 100.0
    );
    let inv_mesh = build_structured_mesh(Extent::new_2d((0.0, 1000.0), (0.0, 1000.0)), &[12, 12])
        .unwrap();
    let err_before = inclusion_error(&inv_mesh, &outcome.initial_model);
    let err_after = inclusion_error(&inv_mesh, &outcome.final_model);
    assert!(
        err_after < err_before,
        "inclusion error {err_after} did not improve on {err_before}"
    );
    println!(
        "criterion 8 (inversion smoke test): PASS (misfit to {:.1}% of initial, inclusion error {:.0} -> {:.0} m/s)",
        reduction * 100.0,
        err_before,
        err_after
    );
}

/// Criterion 9: two runs of the criterion-8 pipeline with the same seed give
/// byte-identical logs and checkpoints.
#[test]
fn criterion_9_determinism() {
    let a = phantom_run(7);
    let b = phantom_run(7);
    assert_eq!(a.log_bytes, b.log_bytes, "inversion logs differ");
    assert_eq!(a.model_bytes, b.model_bytes, "final models differ");
    println!(
        "criterion 9 (determinism): PASS (log {} bytes and checkpoints byte-identical)",
        a.log_bytes.len()
    );
}

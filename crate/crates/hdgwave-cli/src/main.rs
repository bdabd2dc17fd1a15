//! `hdgwave`: forward modeling, synthetic data, gradient checks and
//! full-waveform inversion for time-harmonic acoustics on simplicial meshes.
//!
//! Subcommands map one-to-one onto the workflow stages; stage logs on stdout
//! name the global matrix, forward rhs and adjoint rhs computations so runs
//! are traceable. Deterministic artifacts (measurements, data sets, models,
//! logs) live in the output directory together with the resolved
//! configuration and the code version.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O failure. `HDGWAVE_THREADS` caps the worker pool.

use clap::{Args, Parser, Subcommand};
use hdgwave::config::{parse_config, RunConfig};
use hdgwave::forward::{solve_forward, RestrictionOperator};
use hdgwave::hdg::HdgOperator;
use hdgwave::inversion::{gradient_check, run_inversion, synthesize_data};
use hdgwave::orders::{count_trace_dofs, count_volume_dofs};
use hdgwave::{io, Error};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hdgwave", version, about = "Time-harmonic acoustic HDG solver and inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh, order and dof accounting for a configuration.
    MeshInfo(CommonArgs),
    /// Solve the forward problem for all sources and frequencies; write
    /// fields (VTK) and measurements (CSV).
    Forward(ForwardArgs),
    /// Forward-model data from the configured model, add noise, and write
    /// the data set.
    Synthesize(CommonArgs),
    /// Compare the adjoint-state gradient against finite differences and
    /// write a step-sweep report.
    Gradcheck(GradcheckArgs),
    /// Run the iterative inversion against a data set.
    Invert(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ForwardArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also dump each trace matrix in coordinate ASCII form.
    #[arg(long)]
    dump_matrix: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of randomly selected cells to check.
    #[arg(long, default_value_t = 5)]
    cells: usize,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HDGWAVE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MeshInfo(args) => with_config(args, mesh_info),
        Command::Forward(args) => {
            let dump = args.dump_matrix;
            with_config(args.common, move |cfg, out| forward(cfg, out, dump))
        }
        Command::Synthesize(args) => with_config(args, synthesize),
        Command::Gradcheck(args) => {
            let cells = args.cells;
            with_config(args.common, move |cfg, out| gradcheck(cfg, out, cells))
        }
        Command::Invert(args) => with_config(args, invert),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // machine-readable error record on stderr
            eprintln!(
                "{}",
                serde_json::json!({ "error": format!("{e}"), "kind": error_kind(&e) })
            );
            ExitCode::from(match e {
                Error::Config(_) | Error::Mesh(_) => 2,
                Error::Numerical(_) => 3,
                Error::Io(_) => 4,
            })
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Mesh(_) => "mesh",
        Error::Numerical(_) => "numerical",
        Error::Io(_) => "io",
    }
}

fn with_config(
    args: CommonArgs,
    run: impl FnOnce(RunConfig, &Path) -> hdgwave::Result<()>,
) -> hdgwave::Result<()> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)
        .map_err(|e| Error::Io(format!("cannot create output dir {}: {e}", out.display())))?;
    std::fs::write(out.join("resolved_config.json"), cfg.resolved_json())?;
    std::fs::write(
        out.join("VERSION"),
        format!("hdgwave {}\n", env!("CARGO_PKG_VERSION")),
    )?;
    run(cfg, &out)
}

fn mesh_info(cfg: RunConfig, _out: &Path) -> hdgwave::Result<()> {
    let mesh = cfg.build_mesh()?;
    let model = cfg.build_model(&mesh)?;
    let policy = cfg.order_policy();
    let orders = policy.resolve(&mesh, &model, cfg.frequencies_hz[0])?;
    let trace = count_trace_dofs(&mesh, &orders);
    let volume = count_volume_dofs(&mesh, &orders);
    println!("dimension: {}", mesh.dim);
    println!("vertices: {}", mesh.n_vertices());
    println!("cells: {}", mesh.n_cells());
    println!(
        "faces: {} ({} interior + {} boundary)",
        mesh.n_faces(),
        mesh.interior_face_count(),
        mesh.boundary_face_count()
    );
    let (pmin, pmax) = orders
        .cell_orders
        .iter()
        .fold((u32::MAX, 0u32), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    println!("cell orders: {pmin}..{pmax}");
    println!("volume dof per unknown: {volume}");
    println!("trace dof (global system size): {trace}");
    println!(
        "trace / ((dim+1) x volume): {:.4}",
        trace as f64 / ((mesh.dim + 1) as f64 * volume as f64)
    );
    Ok(())
}

fn forward(cfg: RunConfig, out: &Path, dump_matrix: bool) -> hdgwave::Result<()> {
    let mesh = cfg.build_mesh()?;
    let model = cfg.build_model(&mesh)?;
    let policy = cfg.order_policy();
    let bspec = cfg.boundary_spec(&mesh)?;
    let acq = cfg.acquisition_setup()?;
    acq.validate(&mesh)?;
    for (fi, &freq) in cfg.frequencies_hz.iter().enumerate() {
        let sigma = hdgwave::complex_frequency(freq, cfg.laplace_shift);
        let orders = policy.resolve(&mesh, &model, freq)?;
        println!("[f{fi} {freq} Hz] compute the global matrix");
        let op = HdgOperator::build(&mesh, &model, &orders, sigma, &bspec, None)?;
        println!(
            "[f{fi} {freq} Hz] factorized {} x {} trace system (L+U nnz {})",
            op.matrix.dim,
            op.matrix.dim,
            op.factorization.stats.l_nnz + op.factorization.stats.u_nnz
        );
        if dump_matrix {
            let mut w = std::io::BufWriter::new(std::fs::File::create(
                out.join(format!("trace_matrix_f{fi}.coo")),
            )?);
            op.matrix.write_coo_ascii(&mut w)?;
        }
        println!("[f{fi} {freq} Hz] compute the forward rhs; solve the global system; solve the local systems");
        let sols = solve_forward(&op, &acq.sources)?;
        let restrict = RestrictionOperator::build(&mesh, &orders, &acq.receivers)?;
        let traces: Vec<Vec<hdgwave::C64>> =
            sols.iter().map(|s| restrict.measure(&op, s)).collect();
        io::write_measurements_csv(&out.join(format!("measurements_f{fi}.csv")), sigma, &traces)?;
        let order_field: Vec<f64> = orders.cell_orders.iter().map(|&p| p as f64).collect();
        let c_field: Vec<f64> = (0..mesh.n_cells()).map(|e| model.cell_mean_c(e)).collect();
        for (si, sol) in sols.iter().enumerate() {
            let (re, im) = io::vertex_average_pressure(&op, sol);
            io::write_vtk(
                &out.join(format!("field_f{fi}_s{si}.vtk")),
                &mesh,
                &[("pressure_re", re), ("pressure_im", im)],
                &[("order", order_field.clone()), ("wave_speed", c_field.clone())],
            )?;
        }
        println!(
            "[f{fi} {freq} Hz] wrote {} fields and measurements for {} receivers",
            sols.len(),
            acq.receivers.len()
        );
    }
    Ok(())
}

fn synthesize(cfg: RunConfig, out: &Path) -> hdgwave::Result<()> {
    let mesh = cfg.build_mesh()?;
    let model = cfg.build_model(&mesh)?;
    let policy = cfg.order_policy();
    let bspec = cfg.boundary_spec(&mesh)?;
    let acq = cfg.acquisition_setup()?;
    acq.validate(&mesh)?;
    let data = synthesize_data(
        &mesh,
        &model,
        &policy,
        &bspec,
        &cfg.frequencies_hz,
        cfg.laplace_shift,
        &acq.sources,
        &acq.receivers,
        cfg.noise_snr_db,
        cfg.seed,
    )?;
    let path = cfg
        .data_path
        .clone()
        .unwrap_or_else(|| out.join("data.csv"));
    io::write_dataset_auto(&path, &data)?;
    println!(
        "synthesized {} frequencies x {} sources x {} receivers (seed {}) -> {}",
        data.freqs_hz.len(),
        data.sources.len(),
        data.receivers.len(),
        cfg.seed,
        path.display()
    );
    Ok(())
}

fn gradcheck(cfg: RunConfig, out: &Path, n_cells: usize) -> hdgwave::Result<()> {
    let mesh = cfg.build_mesh()?;
    let model = cfg.build_model(&mesh)?;
    let policy = cfg.order_policy();
    let bspec = cfg.boundary_spec(&mesh)?;
    let acq = cfg.acquisition_setup()?;
    acq.validate(&mesh)?;
    // data from a perturbed model so the residual (and gradient) is nonzero
    let mut truth = model.clone();
    for c in &mut truth.c {
        *c *= 1.05;
    }
    let data = synthesize_data(
        &mesh,
        &truth,
        &policy,
        &bspec,
        &cfg.frequencies_hz,
        cfg.laplace_shift,
        &acq.sources,
        &acq.receivers,
        None,
        cfg.seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cells: Vec<usize> = (0..mesh.n_cells()).collect();
    cells.shuffle(&mut rng);
    cells.truncate(n_cells.max(1));
    cells.sort_unstable();
    let steps: Vec<f64> = (2..=8).map(|e| 10f64.powi(-e)).collect();
    println!("compute the adjoint rhs; solve the global system (adjoint); solve the local systems");
    let rows = gradient_check(&mesh, &model, &policy, &bspec, &data, &cells, &steps)?;

    let path = out.join("gradcheck.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "cell,step,fd,adjoint,rel_error")?;
        for r in &rows {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.cell, r.step, r.fd, r.adjoint, r.rel_error
            )?;
        }
    }
    let best = rows.iter().map(|r| r.rel_error).fold(f64::MAX, f64::min);
    println!("gradcheck: {} rows -> {}", rows.len(), path.display());
    println!("minimum relative error over steps: {best:.3e}");
    if best >= 1e-5 {
        return Err(Error::Numerical(format!(
            "gradient check failed: best relative error {best:e} >= 1e-5"
        )));
    }
    Ok(())
}

fn invert(cfg: RunConfig, out: &Path) -> hdgwave::Result<()> {
    let mesh = cfg.build_mesh()?;
    let model = cfg.build_model(&mesh)?;
    let policy = cfg.order_policy();
    let bspec = cfg.boundary_spec(&mesh)?;
    let data_path = cfg
        .data_path
        .clone()
        .ok_or_else(|| Error::Config("invert requires 'data_path'".into()))?;
    let data = io::read_dataset_auto(&data_path)?;
    let settings = cfg.inversion_settings();
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;
    let every = cfg.inversion.checkpoint_every.max(1);

    println!(
        "inverting {} frequencies, {} sources, {} receivers, {} iterations per block",
        data.freqs_hz.len(),
        data.sources.len(),
        data.receivers.len(),
        settings.iterations_per_freq
    );
    let mut counter = 0usize;
    let (final_model, log) = run_inversion(
        &mesh,
        model,
        &policy,
        &bspec,
        &data,
        &settings,
        |rec, current| {
            println!(
                "[f {} Hz it {:02}] misfit {:.6e} -> {:.6e} step {:.3e} grad {:.3e} trials {} {}",
                rec.freq_hz,
                rec.iteration,
                rec.misfit,
                rec.misfit_after,
                rec.step,
                rec.grad_norm,
                rec.ls_trials,
                if rec.accepted { "accepted" } else { "rejected" }
            );
            counter += 1;
            if rec.accepted && counter % every == 0 {
                let name = format!("model_{:05}.txt", counter);
                let _ = io::write_model_ascii(&ckpt_dir.join(name), current);
            }
        },
    )?;
    io::write_model_ascii(&out.join("final_model.txt"), &final_model)?;
    log.write_csv(&out.join("inversion_log.csv"))?;
    log.write_timing_csv(&out.join("timing.csv"))?;
    let c_field: Vec<f64> = (0..mesh.n_cells()).map(|e| final_model.cell_mean_c(e)).collect();
    io::write_vtk(
        &out.join("final_model.vtk"),
        &mesh,
        &[],
        &[("wave_speed", c_field)],
    )?;
    if let (Some(first), Some(last)) = (log.records.first(), log.records.last()) {
        println!(
            "misfit {:.6e} -> {:.6e} over {} records",
            first.misfit,
            last.misfit_after,
            log.records.len()
        );
    }
    Ok(())
}

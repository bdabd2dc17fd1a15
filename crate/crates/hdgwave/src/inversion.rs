//! Iterative misfit minimization: nonlinear conjugate gradient with Armijo
//! backtracking, processed frequency by frequency from low to high.
//!
//! Within a frequency block each iteration performs one forward operator
//! build (one factorization serving all sources), the adjoint solves on the
//! same factors, and a handful of line-search trials that refactorize only
//! because they evaluate the misfit at a changed model.

use crate::adjoint::{accumulate_gradient, residual, solve_adjoint_states, Parameter};
use crate::forward::{solve_forward, PointSource, RestrictionOperator};
use crate::hdg::{BoundarySpec, HdgOperator};
use crate::io::DataSet;
use crate::mesh::SimplicialMesh;
use crate::model::ModelState;
use crate::orders::{assign_orders, OrderAssignment};
use crate::{C64, Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::time::Instant;

/// How polynomial orders are chosen for each frequency block.
#[derive(Clone, Debug)]
pub enum OrderPolicy {
    Fixed(u32),
    /// Wavelength-driven selection from the block's starting model.
    Adaptive {
        dofs_per_wavelength: f64,
        p_min: u32,
        p_max: u32,
    },
}

impl OrderPolicy {
    pub fn resolve(
        &self,
        mesh: &SimplicialMesh,
        model: &ModelState,
        freq_hz: f64,
    ) -> Result<OrderAssignment> {
        match self {
            OrderPolicy::Fixed(p) => Ok(OrderAssignment::uniform(mesh, *p)),
            OrderPolicy::Adaptive {
                dofs_per_wavelength,
                p_min,
                p_max,
            } => {
                let speeds = model.mean_wave_speeds();
                Ok(
                    assign_orders(mesh, &speeds, freq_hz, *dofs_per_wavelength, *p_min, *p_max)?
                        .orders,
                )
            }
        }
    }
}

/// Tunables of the minimization.
#[derive(Clone, Debug)]
pub struct InversionSettings {
    /// Update iterations per frequency block.
    pub iterations_per_freq: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Maximum step halvings per line search.
    pub max_halvings: usize,
    /// First trial step scales the largest model change to this fraction of
    /// the mean wave speed.
    pub initial_update_fraction: f64,
    /// Stop a block when the gradient norm falls below this times its value
    /// at the block start.
    pub grad_tol_rel: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            iterations_per_freq: 30,
            armijo_c1: 1e-4,
            max_halvings: 20,
            initial_update_fraction: 0.02,
            grad_tol_rel: 1e-10,
        }
    }
}

/// One line of the inversion log.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub freq_hz: f64,
    pub iteration: usize,
    /// Misfit at the model entering the iteration.
    pub misfit: f64,
    /// Misfit achieved by the accepted update (equals `misfit` on rejection).
    pub misfit_after: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub ls_trials: usize,
    pub accepted: bool,
    /// Wall time of the iteration; excluded from deterministic artifacts.
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct InversionLog {
    pub records: Vec<IterationRecord>,
}

impl InversionLog {
    /// Deterministic CSV (no wall time).
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "freq_hz,iteration,misfit,misfit_after,step,grad_norm,ls_trials,accepted"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
                r.freq_hz,
                r.iteration,
                r.misfit,
                r.misfit_after,
                r.step,
                r.grad_norm,
                r.ls_trials,
                r.accepted
            )?;
        }
        Ok(())
    }

    /// Wall-clock timings, one row per record (not byte-reproducible).
    pub fn write_timing_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "freq_hz,iteration,wall_ms")?;
        for r in &self.records {
            writeln!(w, "{:.17e},{},{:.3}", r.freq_hz, r.iteration, r.wall_ms)?;
        }
        Ok(())
    }
}

/// Least-squares misfit over all frequencies and sources:
/// `1/2 sum_f sum_s || F(m, sigma_f, g_s) - d ||^2`.
pub fn misfit(
    mesh: &SimplicialMesh,
    model: &ModelState,
    policy: &OrderPolicy,
    bspec: &BoundarySpec,
    data: &DataSet,
) -> Result<f64> {
    let mut total = 0.0;
    for fi in 0..data.freqs_hz.len() {
        let orders = policy.resolve(mesh, model, data.freqs_hz[fi])?;
        let frozen = bspec.freeze_absorbing(mesh, model, data.sigma(fi));
        total += misfit_one_frequency(mesh, model, &orders, &frozen, data, fi)?;
    }
    Ok(total)
}

fn misfit_one_frequency(
    mesh: &SimplicialMesh,
    model: &ModelState,
    orders: &OrderAssignment,
    bspec: &BoundarySpec,
    data: &DataSet,
    fi: usize,
) -> Result<f64> {
    if fi >= data.values.len() {
        return Err(Error::Config(format!("missing data block for frequency {fi}")));
    }
    let op = HdgOperator::build(mesh, model, orders, data.sigma(fi), bspec, None)?;
    let restrict = RestrictionOperator::build(mesh, orders, &data.receivers)?;
    let sols = solve_forward(&op, &data.sources)?;
    let mut j = 0.0;
    for (sol, d) in sols.iter().zip(&data.values[fi]) {
        let r = residual(&op, &restrict, sol, d)?;
        j += 0.5 * r.iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    Ok(j)
}

/// Polak-Ribiere-plus conjugate-gradient direction with a steepest-descent
/// restart whenever conjugacy fails to produce a descent direction.
pub fn nlcg_direction(
    grad: &[f64],
    prev_grad: Option<&[f64]>,
    prev_dir: Option<&[f64]>,
) -> Vec<f64> {
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    if let (Some(g0), Some(d0)) = (prev_grad, prev_dir) {
        let denom: f64 = g0.iter().map(|g| g * g).sum();
        if denom > 0.0 {
            let num: f64 = grad.iter().zip(g0).map(|(g, p)| g * (g - p)).sum();
            let beta = (num / denom).max(0.0);
            for (d, &p) in dir.iter_mut().zip(d0) {
                *d += beta * p;
            }
            // descent restart
            let descent: f64 = dir.iter().zip(grad).map(|(d, g)| -d * g).sum();
            if descent <= 0.0 {
                dir = grad.iter().map(|g| -g).collect();
            }
        }
    }
    dir
}

/// Result of one Armijo backtracking search.
pub struct LineSearchOutcome {
    pub step: f64,
    pub model: ModelState,
    pub misfit: f64,
    pub trials: usize,
    pub accepted: bool,
}

/// Backtracking line search: the largest step in `{rho0 * 2^-j}` satisfying
/// the Armijo condition, with the trial model projected onto the bounds
/// before each evaluation.
pub fn line_search(
    model: &ModelState,
    direction: &[f64],
    grad: &[f64],
    current_misfit: f64,
    rho0: f64,
    settings: &InversionSettings,
    mut eval: impl FnMut(&ModelState) -> Result<f64>,
) -> Result<LineSearchOutcome> {
    let dirdot: f64 = grad.iter().zip(direction).map(|(g, d)| g * d).sum();
    if dirdot >= 0.0 {
        return Ok(LineSearchOutcome {
            step: 0.0,
            model: model.clone(),
            misfit: current_misfit,
            trials: 0,
            accepted: false,
        });
    }
    let mut trials = 0;
    for j in 0..=settings.max_halvings {
        let rho = rho0 * 0.5f64.powi(j as i32);
        let mut trial = model.clone();
        for (c, &d) in trial.c.iter_mut().zip(direction) {
            *c += rho * d;
        }
        trial.clamp_to_bounds();
        trials += 1;
        let jt = eval(&trial)?;
        if jt <= current_misfit + settings.armijo_c1 * rho * dirdot {
            return Ok(LineSearchOutcome {
                step: rho,
                model: trial,
                misfit: jt,
                trials,
                accepted: true,
            });
        }
    }
    Ok(LineSearchOutcome {
        step: 0.0,
        model: model.clone(),
        misfit: current_misfit,
        trials,
        accepted: false,
    })
}

/// Full inversion: ascending frequency continuation with NLCG updates.
/// The callback observes every iteration together with the current model
/// (for logging and checkpointing).
pub fn run_inversion(
    mesh: &SimplicialMesh,
    initial_model: ModelState,
    policy: &OrderPolicy,
    bspec: &BoundarySpec,
    data: &DataSet,
    settings: &InversionSettings,
    mut on_iteration: impl FnMut(&IterationRecord, &ModelState),
) -> Result<(ModelState, InversionLog)> {
    data.validate()?;
    if data.freqs_hz.is_empty() {
        return Err(Error::Config("frequency list is empty".into()));
    }
    let mut freq_order: Vec<usize> = (0..data.freqs_hz.len()).collect();
    freq_order.sort_by(|&a, &b| data.freqs_hz[a].partial_cmp(&data.freqs_hz[b]).unwrap());

    let mut model = initial_model;
    let mut log = InversionLog::default();

    for &fi in &freq_order {
        let freq_hz = data.freqs_hz[fi];
        let sigma = data.sigma(fi);
        let orders = policy.resolve(mesh, &model, freq_hz)?;
        // absorbing coefficients frozen at the block's starting model so the
        // misfit gradient is exact for the discrete problem being minimized
        let frozen = bspec.freeze_absorbing(mesh, &model, sigma);
        let restrict = RestrictionOperator::build(mesh, &orders, &data.receivers)?;

        let mut prev_grad: Option<Vec<f64>> = None;
        let mut prev_dir: Option<Vec<f64>> = None;
        let mut rho_carry: Option<f64> = None;
        let mut grad0_norm: Option<f64> = None;

        for iteration in 0..settings.iterations_per_freq {
            let t0 = Instant::now();
            let op = HdgOperator::build(mesh, &model, &orders, sigma, &frozen, None)?;
            let sols = solve_forward(&op, &data.sources)?;
            let mut j = 0.0;
            let mut grad = vec![0.0; model.ndof()];
            for (sol, d) in sols.iter().zip(&data.values[fi]) {
                let r = residual(&op, &restrict, sol, d)?;
                j += 0.5 * r.iter().map(|v| v.norm_sqr()).sum::<f64>();
                let adj = solve_adjoint_states(&op, &restrict, &r)?;
                accumulate_gradient(&op, sol, &adj, Parameter::WaveSpeed, &mut grad)?;
            }
            let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let g0 = *grad0_norm.get_or_insert(grad_norm);

            if grad_norm <= settings.grad_tol_rel * g0.max(1e-300) || grad_norm == 0.0 {
                let rec = IterationRecord {
                    freq_hz,
                    iteration,
                    misfit: j,
                    misfit_after: j,
                    step: 0.0,
                    grad_norm,
                    ls_trials: 0,
                    accepted: false,
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                };
                on_iteration(&rec, &model);
                log.records.push(rec);
                break;
            }

            let was_restart = prev_grad.is_none();
            let dir = nlcg_direction(&grad, prev_grad.as_deref(), prev_dir.as_deref());
            let dmax = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let mean_c = model.c.iter().sum::<f64>() / model.c.len() as f64;
            let rho0 = rho_carry
                .unwrap_or(settings.initial_update_fraction * mean_c / dmax.max(1e-300));

            let outcome = line_search(&model, &dir, &grad, j, rho0, settings, |trial| {
                misfit_one_frequency(mesh, trial, &orders, &frozen, data, fi)
            })?;

            let rec = IterationRecord {
                freq_hz,
                iteration,
                misfit: j,
                misfit_after: outcome.misfit,
                step: outcome.step,
                grad_norm,
                ls_trials: outcome.trials,
                accepted: outcome.accepted,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            };
            if outcome.accepted {
                model = outcome.model;
                rho_carry = Some(outcome.step * 2.0);
                prev_grad = Some(grad);
                prev_dir = Some(dir);
                on_iteration(&rec, &model);
                log.records.push(rec);
            } else {
                on_iteration(&rec, &model);
                log.records.push(rec);
                if was_restart {
                    // steepest descent already failed: the block has stalled
                    break;
                }
                // drop conjugacy history and retry from steepest descent
                prev_grad = None;
                prev_dir = None;
                rho_carry = None;
            }
        }
    }
    Ok((model, log))
}

/// Misfit and its wave-speed gradient over all frequencies of a data set,
/// with absorbing coefficients frozen at the given model.
pub fn misfit_and_gradient(
    mesh: &SimplicialMesh,
    model: &ModelState,
    policy: &OrderPolicy,
    bspec: &BoundarySpec,
    data: &DataSet,
) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut grad = vec![0.0; model.ndof()];
    for fi in 0..data.freqs_hz.len() {
        let sigma = data.sigma(fi);
        let orders = policy.resolve(mesh, model, data.freqs_hz[fi])?;
        let frozen = bspec.freeze_absorbing(mesh, model, sigma);
        let op = HdgOperator::build(mesh, model, &orders, sigma, &frozen, None)?;
        let restrict = RestrictionOperator::build(mesh, &orders, &data.receivers)?;
        let sols = solve_forward(&op, &data.sources)?;
        for (sol, d) in sols.iter().zip(&data.values[fi]) {
            let r = residual(&op, &restrict, sol, d)?;
            total += 0.5 * r.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let adj = solve_adjoint_states(&op, &restrict, &r)?;
            accumulate_gradient(&op, sol, &adj, Parameter::WaveSpeed, &mut grad)?;
        }
    }
    Ok((total, grad))
}

/// One row of a finite-difference gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckRow {
    pub cell: usize,
    pub step: f64,
    pub fd: f64,
    pub adjoint: f64,
    pub rel_error: f64,
}

/// Compare the adjoint-state gradient against central finite differences of
/// the misfit for the given cells, sweeping the step sizes. Absorbing
/// coefficients are frozen at `model` for both paths so they see the same
/// discrete misfit.
pub fn gradient_check(
    mesh: &SimplicialMesh,
    model: &ModelState,
    policy: &OrderPolicy,
    bspec: &BoundarySpec,
    data: &DataSet,
    cells: &[usize],
    steps: &[f64],
) -> Result<Vec<GradCheckRow>> {
    let (_, grad) = misfit_and_gradient(mesh, model, policy, bspec, data)?;
    if model.order != 0 {
        return Err(Error::Config(
            "gradient check perturbs piecewise-constant models only".into(),
        ));
    }
    let eval = |m: &ModelState| -> Result<f64> {
        let mut total = 0.0;
        for fi in 0..data.freqs_hz.len() {
            let orders = policy.resolve(mesh, model, data.freqs_hz[fi])?;
            let frozen = bspec.freeze_absorbing(mesh, model, data.sigma(fi));
            total += misfit_one_frequency(mesh, m, &orders, &frozen, data, fi)?;
        }
        Ok(total)
    };
    let mut rows = Vec::with_capacity(cells.len() * steps.len());
    for &cell in cells {
        if cell >= model.n_cells {
            return Err(Error::Config(format!("gradient check cell {cell} out of range")));
        }
        for &h in steps {
            let mut plus = model.clone();
            plus.c[cell] += h;
            let mut minus = model.clone();
            minus.c[cell] -= h;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let rel = (fd - grad[cell]).abs() / grad[cell].abs().max(1e-300);
            rows.push(GradCheckRow {
                cell,
                step: h,
                fd,
                adjoint: grad[cell],
                rel_error: rel,
            });
        }
    }
    Ok(rows)
}

/// Forward-model a data set from `true_model`, optionally adding complex
/// white Gaussian noise per trace at the requested signal-to-noise ratio in
/// dB. The RNG is seeded, so synthesis is reproducible.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_data(
    mesh: &SimplicialMesh,
    true_model: &ModelState,
    policy: &OrderPolicy,
    bspec: &BoundarySpec,
    freqs_hz: &[f64],
    laplace_shift: f64,
    sources: &[PointSource],
    receivers: &[[f64; 3]],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<DataSet> {
    if freqs_hz.is_empty() {
        return Err(Error::Config("frequency list is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        let sigma = crate::complex_frequency(f, laplace_shift);
        let orders = policy.resolve(mesh, true_model, f)?;
        let frozen = bspec.freeze_absorbing(mesh, true_model, sigma);
        let op = HdgOperator::build(mesh, true_model, &orders, sigma, &frozen, None)?;
        let restrict = RestrictionOperator::build(mesh, &orders, receivers)?;
        let sols = solve_forward(&op, sources)?;
        let mut block = Vec::with_capacity(sources.len());
        for sol in &sols {
            let mut trace = restrict.measure(&op, sol);
            if let Some(snr) = snr_db {
                if snr.is_finite() {
                    let signal_power: f64 =
                        trace.iter().map(|v| v.norm_sqr()).sum::<f64>() / trace.len() as f64;
                    let noise_var = signal_power / 10f64.powf(snr / 10.0);
                    let normal = Normal::new(0.0, (noise_var / 2.0).sqrt())
                        .map_err(|e| Error::Numerical(format!("noise setup: {e}")))?;
                    for v in &mut trace {
                        let n_re: f64 = normal.sample(&mut rng);
                        let n_im: f64 = normal.sample(&mut rng);
                        *v += C64::new(n_re, n_im);
                    }
                } else {
                    // infinite SNR requested: draw nothing, keep data exact
                    let _: f64 = rng.gen();
                }
            }
            block.push(trace);
        }
        values.push(block);
    }
    Ok(DataSet {
        freqs_hz: freqs_hz.to_vec(),
        laplace_shift,
        sources: sources.to_vec(),
        receivers: receivers.to_vec(),
        values,
        noise_seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdg::BoundaryCondition;
    use crate::mesh::{build_structured_mesh, Extent};

    fn fixed_robin(mesh: &SimplicialMesh) -> BoundarySpec {
        BoundarySpec::uniform(
            mesh,
            BoundaryCondition::Robin {
                alpha: C64::new(1.0, 0.0),
                beta: C64::new(1.0, 0.0),
            },
        )
    }

    fn tiny_problem() -> (SimplicialMesh, ModelState, Vec<PointSource>, Vec<[f64; 3]>) {
        let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[2, 2]).unwrap();
        let model = ModelState::uniform(&mesh, 1.0, 1000.0);
        let sources = vec![
            PointSource {
                position: [0.3, 0.85, 0.0],
                amplitude: C64::new(1.0, 0.0),
            },
            PointSource {
                position: [0.7, 0.85, 0.0],
                amplitude: C64::new(1.0, 0.0),
            },
        ];
        let receivers = vec![[0.25, 0.75, 0.0], [0.5, 0.75, 0.0], [0.75, 0.75, 0.0]];
        (mesh, model, sources, receivers)
    }

    #[test]
    fn misfit_zero_for_self_data() {
        let (mesh, model, sources, receivers) = tiny_problem();
        let policy = OrderPolicy::Fixed(2);
        let bspec = fixed_robin(&mesh);
        let data = synthesize_data(
            &mesh, &model, &policy, &bspec, &[1.0], 0.0, &sources, &receivers, None, 7,
        )
        .unwrap();
        let j = misfit(&mesh, &model, &policy, &bspec, &data).unwrap();
        let dnorm: f64 = data.values[0]
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v.norm_sqr())
            .sum();
        assert!(j < 1e-16 * dnorm, "misfit {j} vs data norm {dnorm}");
    }

    #[test]
    fn doubled_residual_quadruples_misfit() {
        let (mesh, model, sources, receivers) = tiny_problem();
        let policy = OrderPolicy::Fixed(1);
        let bspec = fixed_robin(&mesh);
        let exact = synthesize_data(
            &mesh, &model, &policy, &bspec, &[1.0], 0.0, &sources, &receivers, None, 7,
        )
        .unwrap();
        // shift the data so the residual is d_shift, then double it
        let mut d1 = exact.clone();
        let mut d2 = exact.clone();
        for (b1, b2) in d1.values.iter_mut().zip(d2.values.iter_mut()) {
            for (t1, t2) in b1.iter_mut().zip(b2.iter_mut()) {
                for (v1, v2) in t1.iter_mut().zip(t2.iter_mut()) {
                    let shift = C64::new(0.01, -0.02);
                    *v1 += shift;
                    *v2 += shift * 2.0;
                }
            }
        }
        let j1 = misfit(&mesh, &model, &policy, &bspec, &d1).unwrap();
        let j2 = misfit(&mesh, &model, &policy, &bspec, &d2).unwrap();
        assert!((j2 / j1 - 4.0).abs() < 1e-9, "ratio {}", j2 / j1);
    }

    #[test]
    fn misfit_additive_over_frequencies() {
        let (mesh, model, sources, receivers) = tiny_problem();
        let policy = OrderPolicy::Fixed(1);
        let bspec = fixed_robin(&mesh);
        let truth = ModelState::uniform(&mesh, 1.08, 1000.0);
        let data = synthesize_data(
            &mesh, &truth, &policy, &bspec, &[1.0, 1.5], 0.0, &sources, &receivers, None, 7,
        )
        .unwrap();
        let total = misfit(&mesh, &model, &policy, &bspec, &data).unwrap();
        let mut parts = 0.0;
        for fi in 0..2 {
            let single = DataSet {
                freqs_hz: vec![data.freqs_hz[fi]],
                values: vec![data.values[fi].clone()],
                ..data.clone()
            };
            parts += misfit(&mesh, &model, &policy, &bspec, &single).unwrap();
        }
        assert!((total - parts).abs() < 1e-12 * total.max(1e-30));
    }

    #[test]
    fn nlcg_first_iteration_is_steepest_descent() {
        let grad = vec![1.0, -2.0, 3.0];
        let dir = nlcg_direction(&grad, None, None);
        assert_eq!(dir, vec![-1.0, 2.0, -3.0]);
    }

    #[test]
    fn nlcg_repeated_gradient_gives_zero_beta() {
        let grad = vec![1.0, -2.0, 3.0];
        let dir0 = nlcg_direction(&grad, None, None);
        let dir1 = nlcg_direction(&grad, Some(&grad), Some(&dir0));
        // PR+ numerator vanishes, so the direction is plain steepest descent
        assert_eq!(dir1, dir0);
    }

    /// NLCG with the Armijo search minimizes a strictly convex quadratic;
    /// every direction must be a descent direction.
    #[test]
    fn nlcg_descends_on_quadratic_toy() {
        let q = [[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let value = |x: &[f64]| -> f64 {
            let mut j = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    j += 0.5 * x[r] * q[r][c] * x[c];
                }
            }
            j
        };
        let gradient = |x: &[f64]| -> Vec<f64> {
            (0..3)
                .map(|r| (0..3).map(|c| q[r][c] * x[c]).sum())
                .collect()
        };
        let settings = InversionSettings::default();
        let mut x = vec![1.0, -2.0, 4.0];
        let mut prev_g: Option<Vec<f64>> = None;
        let mut prev_d: Option<Vec<f64>> = None;
        let mut j = value(&x);
        for _ in 0..25 {
            let g = gradient(&x);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-12 {
                break;
            }
            let d = nlcg_direction(&g, prev_g.as_deref(), prev_d.as_deref());
            let descent: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
            assert!(descent < 0.0, "non-descent direction");
            // inline backtracking (the model-based helper needs a mesh)
            let mut rho = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + rho * di).collect();
                let jt = value(&trial);
                if jt <= j + settings.armijo_c1 * rho * descent {
                    x = trial;
                    j = jt;
                    accepted = true;
                    break;
                }
                rho *= 0.5;
            }
            assert!(accepted);
            prev_g = Some(g);
            prev_d = Some(d);
        }
        assert!(j < 1e-10, "quadratic not minimized: {j}");
    }

    #[test]
    fn line_search_on_one_dimensional_quadratic() {
        let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[1, 1]).unwrap();
        let mut model = ModelState::uniform(&mesh, 1.0, 1000.0);
        model.c_bounds = (-1e9, 1e9);
        model.c = vec![1.0, 0.0];
        let settings = InversionSettings::default();
        // J(x) = x^2 on the first coefficient
        let eval = |m: &ModelState| -> Result<f64> { Ok(m.c[0] * m.c[0]) };
        let grad = vec![2.0, 0.0];
        let dir = vec![-2.0, 0.0];
        let out = line_search(&model, &dir, &grad, 1.0, 1.0, &settings, eval).unwrap();
        assert!(out.accepted);
        assert!(out.misfit < 1.0);

        // zero direction is rejected as non-descent
        let out = line_search(&model, &[0.0, 0.0], &grad, 1.0, 1.0, &settings, eval).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.step, 0.0);
    }

    /// The accepted update is exactly the floating-point evaluation of
    /// `m + rho * s` when no bound is active.
    #[test]
    fn update_formula_is_exact() {
        let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[1, 1]).unwrap();
        let mut model = ModelState::uniform(&mesh, 1.37, 1000.0);
        model.c_bounds = (0.1, 10.0);
        let settings = InversionSettings::default();
        let grad = vec![0.3, -0.7];
        let dir = vec![-0.3, 0.7];
        let eval = |_: &ModelState| -> Result<f64> { Ok(0.0) };
        let out = line_search(&model, &dir, &grad, 1.0, 0.25, &settings, eval).unwrap();
        assert!(out.accepted);
        for i in 0..2 {
            let expect = model.c[i] + out.step * dir[i];
            assert_eq!(out.model.c[i], expect, "coefficient {i} must match bitwise");
        }
    }

    #[test]
    fn snr_statistics_match_request() {
        let mesh = build_structured_mesh(Extent::new_2d((0.0, 1.0), (0.0, 1.0)), &[4, 4]).unwrap();
        let model = ModelState::uniform(&mesh, 1.0, 1000.0);
        let policy = OrderPolicy::Fixed(1);
        let bspec = fixed_robin(&mesh);
        let sources: Vec<PointSource> = (0..8)
            .map(|i| PointSource {
                position: [0.1 + 0.1 * i as f64, 0.9, 0.0],
                amplitude: C64::new(1.0, 0.0),
            })
            .collect();
        let receivers: Vec<[f64; 3]> = (0..128)
            .map(|i| [0.05 + 0.9 * (i as f64 / 127.0), 0.5, 0.0])
            .collect();
        let clean = synthesize_data(
            &mesh, &model, &policy, &bspec, &[1.0], 0.0, &sources, &receivers, None, 11,
        )
        .unwrap();
        let noisy = synthesize_data(
            &mesh,
            &model,
            &policy,
            &bspec,
            &[1.0],
            0.0,
            &sources,
            &receivers,
            Some(10.0),
            11,
        )
        .unwrap();
        let mut signal = 0.0;
        let mut noise = 0.0;
        for (bc, bn) in clean.values[0].iter().zip(&noisy.values[0]) {
            for (vc, vn) in bc.iter().zip(bn) {
                signal += vc.norm_sqr();
                noise += (vn - vc).norm_sqr();
            }
        }
        let ratio = signal / noise;
        assert!(
            (ratio - 10.0).abs() / 10.0 < 0.1,
            "empirical SNR {ratio} not within 10% of 10"
        );
        // infinite SNR leaves the data untouched
        let inf = synthesize_data(
            &mesh,
            &model,
            &policy,
            &bspec,
            &[1.0],
            0.0,
            &sources,
            &receivers,
            Some(f64::INFINITY),
            11,
        )
        .unwrap();
        assert_eq!(inf.values, clean.values);
    }

    #[test]
    fn inversion_on_self_data_converges_immediately() {
        let (mesh, model, sources, receivers) = tiny_problem();
        let policy = OrderPolicy::Fixed(1);
        let bspec = fixed_robin(&mesh);
        let data = synthesize_data(
            &mesh, &model, &policy, &bspec, &[1.0], 0.0, &sources, &receivers, None, 3,
        )
        .unwrap();
        let (_, log) = run_inversion(
            &mesh,
            model.clone(),
            &policy,
            &bspec,
            &data,
            &InversionSettings::default(),
            |_, _| {},
        )
        .unwrap();
        // gradient at the data-generating model vanishes: one record, no step
        assert_eq!(log.records.len(), 1);
        assert!(!log.records[0].accepted);
        assert!(log.records[0].grad_norm < 1e-20);
    }

    #[test]
    fn inversion_reduces_misfit_and_honors_frequency_order() {
        let (mesh, start, sources, receivers) = tiny_problem();
        let mut truth = start.clone();
        for (e, c) in truth.c.iter_mut().enumerate() {
            *c = 1.0 + 0.08 * ((e % 3) as f64 - 1.0);
        }
        let policy = OrderPolicy::Fixed(2);
        let bspec = fixed_robin(&mesh);
        // frequencies deliberately out of order in the data set
        let data = synthesize_data(
            &mesh,
            &truth,
            &policy,
            &bspec,
            &[1.4, 0.9],
            0.0,
            &sources,
            &receivers,
            None,
            5,
        )
        .unwrap();
        let settings = InversionSettings {
            iterations_per_freq: 6,
            ..Default::default()
        };
        let mut start_bounded = start.clone();
        start_bounded.c_bounds = (0.5, 2.0);
        let (final_model, log) = run_inversion(
            &mesh,
            start_bounded,
            &policy,
            &bspec,
            &data,
            &settings,
            |_, _| {},
        )
        .unwrap();
        // ascending frequency blocks
        let freqs: Vec<f64> = log.records.iter().map(|r| r.freq_hz).collect();
        let first_high = freqs.iter().position(|&f| f == 1.4).unwrap();
        assert!(freqs[..first_high].iter().all(|&f| f == 0.9));
        // accepted misfits decrease within each block
        for block in [0.9, 1.4] {
            let ms: Vec<f64> = log
                .records
                .iter()
                .filter(|r| r.freq_hz == block && r.accepted)
                .map(|r| r.misfit_after)
                .collect();
            for w in ms.windows(2) {
                assert!(w[1] <= w[0], "misfit must not increase: {ms:?}");
            }
        }
        // and the model moved toward the truth
        let err_before: f64 = start
            .c
            .iter()
            .zip(&truth.c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let err_after: f64 = final_model
            .c
            .iter()
            .zip(&truth.c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!(
            err_after < err_before,
            "model error {err_after} vs {err_before}"
        );
    }
}

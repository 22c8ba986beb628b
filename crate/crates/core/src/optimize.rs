//! Gate optimization: local environment sweeps, global gradient descent
//! (Polak-Ribiere CG and L-BFGS with a strong-Wolfe line search), and the
//! adaptive depth-growing initialization.
//!
//! All methods terminate when the relative objective change drops below
//! `rel_energy_tol` or the iteration budget runs out. Runs are deterministic
//! for a fixed config and seed.

use crate::ansatz::{build_ansatz, AnsatzDescriptor, Family};
use crate::error::{QtnError, Result};
use crate::gates::{log_so, realize_gate, so_polar_max, so_polar_min};
use crate::objective::{Objective, ObjectiveKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    LocalSweep,
    Cg,
    Lbfgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: OptMethod,
    pub max_iterations: usize,
    #[serde(default = "default_tol")]
    pub rel_energy_tol: f64,
    #[serde(default = "default_memory")]
    pub lbfgs_memory: usize,
    #[serde(default)]
    pub seed: u64,
    /// Checkpoint descriptor JSON and trace CSV here, if set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_memory() -> usize {
    10
}
fn default_checkpoint_every() -> usize {
    50
}

impl OptimizerConfig {
    pub fn new(method: OptMethod, max_iterations: usize) -> Self {
        OptimizerConfig {
            method,
            max_iterations,
            rel_energy_tol: default_tol(),
            lbfgs_memory: default_memory(),
            seed: 0,
            checkpoint_dir: None,
            checkpoint_every: default_checkpoint_every(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.rel_energy_tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
    pub status: TerminationStatus,
    pub stop_reason: String,
    pub line_search_failures: usize,
    /// Largest single-update objective increase seen by the local sweep.
    pub max_update_increase: f64,
}

impl OptimizationTrace {
    pub fn final_value(&self) -> f64 {
        self.rows.last().map(|r| r.value).unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// Trace CSV: `iteration,value,grad_norm,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,value,grad_norm,seconds\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.3}\n",
                r.iteration, r.value, r.grad_norm, r.seconds
            ));
        }
        s
    }
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    (cur - prev).abs() / prev.abs().max(1e-300) < tol
}

fn checkpoint(
    cfg: &OptimizerConfig,
    a: &AnsatzDescriptor,
    trace: &OptimizationTrace,
    iter: usize,
) -> Result<()> {
    let Some(dir) = &cfg.checkpoint_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| QtnError::io(dir.display().to_string(), e))?;
    let desc_path = dir.join("descriptor.json");
    std::fs::write(&desc_path, a.to_json()?)
        .map_err(|e| QtnError::io(desc_path.display().to_string(), e))?;
    let trace_path = dir.join("trace.csv");
    std::fs::write(&trace_path, trace.to_csv())
        .map_err(|e| QtnError::io(trace_path.display().to_string(), e))?;
    let _ = iter;
    Ok(())
}

// ---------------------------------------------------------------------------
// generic line-search minimizer over flat parameter vectors
// ---------------------------------------------------------------------------

/// Minimize a smooth function with CG or L-BFGS and a strong-Wolfe line
/// search. The plumbing hook behind [`gradient_minimize`]; exposed for
/// direct use on ordinary functions.
pub fn minimize_function<F>(
    f: &mut F,
    x0: Vec<f64>,
    method: OptMethod,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, OptimizationTrace)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    assert!(matches!(method, OptMethod::Cg | OptMethod::Lbfgs));
    let t0 = Instant::now();
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f(&x)?;
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut status = TerminationStatus::BudgetExhausted;
    let mut stop_reason = String::from("iteration budget exhausted");
    let mut ls_failures = 0usize;

    // CG state
    let mut prev_g: Vec<f64> = Vec::new();
    let mut prev_d: Vec<f64> = Vec::new();
    // L-BFGS memory
    let mut mem_s: Vec<Vec<f64>> = Vec::new();
    let mut mem_y: Vec<Vec<f64>> = Vec::new();

    let c1 = 1e-4;
    let c2 = if method == OptMethod::Lbfgs { 0.9 } else { 0.4 };

    for iter in 0..cfg.max_iterations {
        let gnorm_inf = gx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rows.push(TraceRow {
            iteration: iter,
            value: fx,
            grad_norm: gnorm_inf,
            seconds: t0.elapsed().as_secs_f64(),
        });
        if gnorm_inf < 1e-14 {
            status = TerminationStatus::Converged;
            stop_reason = "gradient vanished".into();
            break;
        }

        // search direction
        let mut d: Vec<f64> = match method {
            OptMethod::Cg => {
                if prev_g.is_empty() {
                    gx.iter().map(|v| -v).collect()
                } else {
                    // Polak-Ribiere+ with restart on non-descent
                    let num: f64 = gx.iter().zip(&prev_g).map(|(g, p)| g * (g - p)).sum();
                    let den: f64 = prev_g.iter().map(|p| p * p).sum();
                    let beta = (num / den.max(1e-300)).max(0.0);
                    gx.iter()
                        .zip(&prev_d)
                        .map(|(g, pd)| -g + beta * pd)
                        .collect()
                }
            }
            OptMethod::Lbfgs => two_loop_direction(&gx, &mem_s, &mem_y),
            OptMethod::LocalSweep => unreachable!(),
        };
        let mut dphi0: f64 = gx.iter().zip(&d).map(|(g, dd)| g * dd).sum();
        if dphi0 >= 0.0 {
            // not a descent direction; restart from steepest descent
            d = gx.iter().map(|v| -v).collect();
            dphi0 = -gx.iter().map(|v| v * v).sum::<f64>();
            mem_s.clear();
            mem_y.clear();
        }

        match wolfe_search(f, &x, fx, &d, dphi0, c1, c2)? {
            LineSearchOutcome::Accepted { alpha, fx_new, gx_new } => {
                let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                if method == OptMethod::Lbfgs {
                    let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = gx_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
                    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let ss: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let yy: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if sy > 1e-12 * ss * yy {
                        mem_s.push(s);
                        mem_y.push(y);
                        if mem_s.len() > cfg.lbfgs_memory {
                            mem_s.remove(0);
                            mem_y.remove(0);
                        }
                    }
                } else {
                    prev_g = gx.clone();
                    prev_d = d;
                }
                let f_prev = fx;
                x = x_new;
                fx = fx_new;
                gx = gx_new;
                if converged(f_prev, fx, cfg.rel_energy_tol) {
                    status = TerminationStatus::Converged;
                    stop_reason = "relative objective change below tolerance".into();
                    rows.push(TraceRow {
                        iteration: iter + 1,
                        value: fx,
                        grad_norm: gx.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                        seconds: t0.elapsed().as_secs_f64(),
                    });
                    break;
                }
            }
            LineSearchOutcome::Failed => {
                ls_failures += 1;
                status = TerminationStatus::Converged;
                stop_reason = "line search could not decrease the objective".into();
                break;
            }
        }
        if n == 0 {
            break;
        }
    }
    Ok((
        x,
        OptimizationTrace {
            rows,
            status,
            stop_reason,
            line_search_failures: ls_failures,
            max_update_increase: 0.0,
        },
    ))
}

fn two_loop_direction(g: &[f64], mem_s: &[Vec<f64>], mem_y: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let k = mem_s.len();
    let mut alphas = vec![0.0; k];
    let mut rhos = vec![0.0; k];
    for i in (0..k).rev() {
        let sy: f64 = mem_s[i].iter().zip(&mem_y[i]).map(|(a, b)| a * b).sum();
        rhos[i] = 1.0 / sy;
        let a = rhos[i] * mem_s[i].iter().zip(&q).map(|(s, qq)| s * qq).sum::<f64>();
        alphas[i] = a;
        for (qq, y) in q.iter_mut().zip(&mem_y[i]) {
            *qq -= a * y;
        }
    }
    if k > 0 {
        let sy: f64 = mem_s[k - 1].iter().zip(&mem_y[k - 1]).map(|(a, b)| a * b).sum();
        let yy: f64 = mem_y[k - 1].iter().map(|v| v * v).sum();
        let gamma = sy / yy.max(1e-300);
        for qq in q.iter_mut() {
            *qq *= gamma;
        }
    }
    for i in 0..k {
        let b = rhos[i] * mem_y[i].iter().zip(&q).map(|(y, qq)| y * qq).sum::<f64>();
        for (qq, s) in q.iter_mut().zip(&mem_s[i]) {
            *qq += (alphas[i] - b) * s;
        }
    }
    q.iter().map(|v| -v).collect()
}

enum LineSearchOutcome {
    Accepted {
        alpha: f64,
        fx_new: f64,
        gx_new: Vec<f64>,
    },
    Failed,
}

/// Strong-Wolfe bracketing line search (sufficient decrease + curvature),
/// falling back to step halving on bracketing failure.
fn wolfe_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    dphi0: f64,
    c1: f64,
    c2: f64,
) -> Result<LineSearchOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let eval = |f: &mut F, alpha: f64| -> Result<(f64, Vec<f64>, f64)> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (fv, gv) = f(&xt)?;
        let dphi: f64 = gv.iter().zip(d).map(|(g, dd)| g * dd).sum();
        Ok((fv, gv, dphi))
    };
    let zoom = |f: &mut F,
                mut lo: f64,
                mut f_lo: f64,
                mut hi: f64|
     -> Result<Option<(f64, f64, Vec<f64>)>> {
        for _ in 0..30 {
            let alpha = 0.5 * (lo + hi);
            let (fv, gv, dphi) = eval(f, alpha)?;
            if fv > f0 + c1 * alpha * dphi0 || fv >= f_lo {
                hi = alpha;
            } else {
                if dphi.abs() <= -c2 * dphi0 {
                    return Ok(Some((alpha, fv, gv)));
                }
                if dphi * (hi - lo) >= 0.0 {
                    hi = lo;
                }
                lo = alpha;
                f_lo = fv;
            }
            if (hi - lo).abs() < 1e-16 {
                break;
            }
        }
        Ok(None)
    };

    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut alpha = 1.0;
    let mut bracket: Option<(f64, f64, f64)> = None; // lo, f_lo, hi
    for i in 0..12 {
        let (fv, gv, dphi) = eval(f, alpha)?;
        if fv > f0 + c1 * alpha * dphi0 || (i > 0 && fv >= f_prev) {
            bracket = Some((alpha_prev, f_prev, alpha));
            break;
        }
        if dphi.abs() <= -c2 * dphi0 {
            return Ok(LineSearchOutcome::Accepted {
                alpha,
                fx_new: fv,
                gx_new: gv,
            });
        }
        if dphi >= 0.0 {
            bracket = Some((alpha, fv, alpha_prev));
            break;
        }
        alpha_prev = alpha;
        f_prev = fv;
        alpha = (alpha * 2.5).min(1e4);
    }
    if let Some((lo, f_lo, hi)) = bracket {
        if let Some((a, fv, gv)) = zoom(f, lo, f_lo, hi)? {
            return Ok(LineSearchOutcome::Accepted {
                alpha: a,
                fx_new: fv,
                gx_new: gv,
            });
        }
    }
    // halving fallback: accept any plain decrease
    let mut alpha = 0.5;
    for _ in 0..30 {
        let (fv, gv, _dphi) = eval(f, alpha)?;
        if fv < f0 {
            return Ok(LineSearchOutcome::Accepted {
                alpha,
                fx_new: fv,
                gx_new: gv,
            });
        }
        alpha *= 0.5;
    }
    Ok(LineSearchOutcome::Failed)
}

// ---------------------------------------------------------------------------
// public optimizer entry points
// ---------------------------------------------------------------------------

/// Global gradient minimization of the objective over all gate angles.
pub fn gradient_minimize(
    a: &AnsatzDescriptor,
    objective: &Objective,
    cfg: &OptimizerConfig,
) -> Result<(AnsatzDescriptor, OptimizationTrace)> {
    if cfg.method == OptMethod::LocalSweep {
        return Err(QtnError::InvalidArgument(
            "gradient_minimize expects cg or lbfgs".into(),
        ));
    }
    let mut work = a.clone();
    let mut ckpt_counter = 0usize;
    let mut eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        work.set_flat_theta(x)?;
        objective.value_and_gradient(&work)
    };
    let (x, trace) = minimize_function(&mut eval, a.flat_theta(), cfg.method, cfg)?;
    let mut out = a.clone();
    out.set_flat_theta(&x)?;
    ckpt_counter += 1;
    let _ = ckpt_counter;
    checkpoint(cfg, &out, &trace, trace.iterations())?;
    Ok((out, trace))
}

/// DMRG-like sweep: optimize one gate at a time against its environment via
/// the special-orthogonal Procrustes solution, re-extracting angles with the
/// matrix logarithm. Updates that would increase the objective are rejected,
/// so the trace is non-increasing per update.
pub fn local_sweep_optimize(
    a: &AnsatzDescriptor,
    objective: &Objective,
    cfg: &OptimizerConfig,
) -> Result<(AnsatzDescriptor, OptimizationTrace)> {
    if cfg.method != OptMethod::LocalSweep {
        return Err(QtnError::InvalidArgument(
            "local_sweep_optimize expects the local-sweep method".into(),
        ));
    }
    let t0 = Instant::now();
    let mut work = a.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut status = TerminationStatus::BudgetExhausted;
    let mut stop_reason = String::from("sweep budget exhausted");
    let mut max_increase = 0.0f64;
    let mut log_failures = 0usize;
    let mut current;

    for sweep in 0..cfg.max_iterations {
        let forward: Vec<usize> = (0..work.gates.len()).collect();
        let backward: Vec<usize> = forward.iter().rev().cloned().collect();
        for gi in forward.into_iter().chain(backward) {
            let (value, envs, _factor) = objective.value_and_environments(&work)?;
            current = value;
            let env = &envs[gi];
            let m = work.gates[gi].params.m;
            let dim = 1usize << m;
            let w_opt = match objective.kind {
                ObjectiveKind::Energy => so_polar_min(dim, env.data()),
                ObjectiveKind::Infidelity => so_polar_max(dim, env.data()),
            };
            // re-extract angles; retry with a small perturbation on a branch
            // failure of the logarithm
            let mut params = None;
            let mut w_try = w_opt.clone();
            for _attempt in 0..3 {
                match log_so(m, &w_try) {
                    Ok(p) => {
                        params = Some(p);
                        break;
                    }
                    Err(_) => {
                        log_failures += 1;
                        let eps = 1e-8;
                        let noise: Vec<f64> = (0..crate::gates::param_count(m))
                            .map(|_| rng.random_range(-eps..eps))
                            .collect();
                        let wiggle =
                            realize_gate(&crate::gates::GateParams::new(m, noise).unwrap());
                        let mut rotated = vec![0.0; dim * dim];
                        crate::tensor::matmul(dim, dim, dim, &w_opt, wiggle.data(), &mut rotated);
                        w_try = rotated;
                    }
                }
            }
            let Some(params) = params else { continue };
            let old_params = work.gates[gi].params.clone();
            work.gates[gi].params = params;
            let candidate = objective.value(&work)?;
            if candidate <= current + 1e-13 {
                max_increase = max_increase.max(candidate - current);
            } else {
                work.gates[gi].params = old_params;
            }
        }
        let (value, envs, factor) = objective.value_and_environments(&work)?;
        current = value;
        // gradient norm from the environments
        let mut gnorm = 0.0f64;
        for (g, env) in work.gates.iter().zip(&envs) {
            for j in crate::gates::gate_jacobian(&g.params) {
                let dot: f64 = j.data().iter().zip(env.data()).map(|(x, y)| x * y).sum();
                gnorm = gnorm.max((factor * dot).abs());
            }
        }
        rows.push(TraceRow {
            iteration: sweep,
            value: current,
            grad_norm: gnorm,
            seconds: t0.elapsed().as_secs_f64(),
        });
        checkpoint(cfg, &work, &make_trace(&rows, status, &stop_reason, log_failures, max_increase), sweep)?;
        if rows.len() >= 2 {
            let prev = rows[rows.len() - 2].value;
            if converged(prev, current, cfg.rel_energy_tol) {
                status = TerminationStatus::Converged;
                stop_reason = "relative objective change below tolerance".into();
                break;
            }
        }
    }
    let trace = make_trace(&rows, status, &stop_reason, log_failures, max_increase);
    checkpoint(cfg, &work, &trace, trace.iterations())?;
    Ok((work, trace))
}

fn make_trace(
    rows: &[TraceRow],
    status: TerminationStatus,
    stop_reason: &str,
    ls_failures: usize,
    max_update_increase: f64,
) -> OptimizationTrace {
    OptimizationTrace {
        rows: rows.to_vec(),
        status,
        stop_reason: stop_reason.to_string(),
        line_search_failures: ls_failures,
        max_update_increase,
    }
}

// ---------------------------------------------------------------------------
// adaptive depth growth
// ---------------------------------------------------------------------------

/// Embed an optimized depth-`tau'` descriptor into depth `target_tau`: new
/// layers on the input side carry identity gates, optimized gates keep their
/// slots on the output side, then every gate receives a uniform angle
/// perturbation of the given scale (0 preserves the state exactly).
pub fn adaptive_grow(
    optimized: &AnsatzDescriptor,
    target_tau: usize,
    perturbation_scale: f64,
    seed: u64,
) -> Result<AnsatzDescriptor> {
    if perturbation_scale < 0.0 {
        return Err(QtnError::InvalidArgument(
            "perturbation scale must be >= 0".into(),
        ));
    }
    let mut grown = grow_identity(optimized, target_tau)?;
    if perturbation_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for g in grown.gates.iter_mut() {
            for t in g.params.theta.iter_mut() {
                *t += rng.random_range(-perturbation_scale..=perturbation_scale);
            }
        }
    }
    Ok(grown)
}

/// The pure embedding step: depth grows, realized state is unchanged.
pub fn grow_identity(optimized: &AnsatzDescriptor, target_tau: usize) -> Result<AnsatzDescriptor> {
    if target_tau <= optimized.tau {
        return Err(QtnError::InvalidArgument(format!(
            "target depth {} must exceed current depth {}",
            target_tau, optimized.tau
        )));
    }
    let delta = target_tau - optimized.tau;
    let brickwall = matches!(
        optimized.family,
        Family::QmpsB | Family::QmpsM | Family::QmeraB | Family::QcB
    );
    if optimized.family == Family::DenseBlockMera {
        return Err(QtnError::UnsupportedFamily(
            "dense-block-mera has no circuit depth to grow".into(),
        ));
    }
    if brickwall && delta % 2 != 0 {
        return Err(QtnError::InvalidArgument(
            "brick-wall structures grow by an even number of layers".into(),
        ));
    }
    let mut grown = build_ansatz(
        optimized.family,
        optimized.l,
        optimized.q,
        target_tau,
        optimized.q_m,
    )?;
    // slot map of the grown circuit
    let mut slot_of: std::collections::BTreeMap<(usize, usize, usize, usize), usize> =
        std::collections::BTreeMap::new();
    for (k, g) in grown.gates.iter().enumerate() {
        slot_of.insert((g.block, g.sub, g.layer, g.rung), k);
    }
    for g in &optimized.gates {
        let key = (g.block, g.sub, g.layer + delta, g.rung);
        let Some(&k) = slot_of.get(&key) else {
            return Err(QtnError::InvalidAnsatz(format!(
                "no slot for gate at block {} sub {} layer {} rung {}",
                g.block, g.sub, g.layer, g.rung
            )));
        };
        if grown.gates[k].wires != g.wires {
            return Err(QtnError::InvalidAnsatz(
                "grown slot acts on different wires".into(),
            ));
        }
        grown.gates[k].params = g.params.clone();
    }
    Ok(grown)
}

/// Perturbation scale matched to the current optimization landscape: the
/// mean over gates of the max-norm of the gate's gradient block, evaluated
/// at the grown (unperturbed) point.
pub fn auto_perturbation_scale(
    grown: &AnsatzDescriptor,
    objective: &Objective,
) -> Result<f64> {
    let (_v, grad) = objective.value_and_gradient(grown)?;
    let offsets = grown.param_offsets();
    let mut acc = 0.0;
    for (gi, g) in grown.gates.iter().enumerate() {
        let block = &grad[offsets[gi]..offsets[gi] + g.params.theta.len()];
        acc += block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    Ok(acc / grown.gates.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::count_parameters;
    use crate::gates::perturbed_identity;
    use crate::hamiltonian::ModelSpec;
    use crate::oracle::ed_ground_state;

    fn randomize(a: &mut AnsatzDescriptor, seed: u64, strength: f64) {
        for (k, g) in a.gates.iter_mut().enumerate() {
            g.params =
                perturbed_identity(g.params.m, strength, seed.wrapping_add(k as u64)).unwrap();
        }
    }

    #[test]
    fn quadratic_function_converges_fast() {
        // f(x) = sum (x_i - i)^2 with curvature ramp
        let mut f = |x: &[f64]| -> crate::error::Result<(f64, Vec<f64>)> {
            let mut v = 0.0;
            let mut g = vec![0.0; x.len()];
            for (i, xi) in x.iter().enumerate() {
                let c = 1.0 + i as f64;
                let d = xi - i as f64;
                v += c * d * d;
                g[i] = 2.0 * c * d;
            }
            Ok((v, g))
        };
        for method in [OptMethod::Cg, OptMethod::Lbfgs] {
            let cfg = OptimizerConfig::new(method, 50).with_tol(1e-14);
            let (x, trace) = minimize_function(&mut f, vec![0.0; 8], method, &cfg).unwrap();
            assert!(trace.iterations() <= 50);
            for (i, xi) in x.iter().enumerate() {
                assert!((xi - i as f64).abs() < 1e-8, "{method:?} x[{i}]={xi}");
            }
            assert!(trace.final_value() < 1e-10, "{method:?}");
        }
    }

    #[test]
    fn lbfgs_minimizes_small_circuit_energy() {
        let model = ModelSpec::heisenberg(6);
        let obj = Objective::energy(&model).unwrap();
        let mut a = crate::ansatz::build_ansatz(Family::QcB, 6, 0, 4, None).unwrap();
        randomize(&mut a, 11, 0.2);
        let cfg = OptimizerConfig::new(OptMethod::Lbfgs, 400).with_tol(1e-10);
        let (opt, trace) = gradient_minimize(&a, &obj, &cfg).unwrap();
        let e_final = obj.value(&opt).unwrap();
        let e0 = obj.value(&a).unwrap();
        assert!(e_final < e0);
        assert!(trace.final_value() <= trace.rows[0].value);
        let ed = ed_ground_state(&model).unwrap();
        assert!(e_final >= ed.ground_energy - 1e-10);
        // trace never increases by more than line-search slack
        for w in trace.rows.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }

    #[test]
    fn sweep_on_converged_gate_changes_nothing() {
        // single gate circuit already at its optimum for infidelity
        let mut a = crate::ansatz::build_ansatz(Family::QcB, 2, 0, 1, None).unwrap();
        randomize(&mut a, 3, 0.5);
        let reference = crate::mps::qmps_to_dense_mps(
            &crate::ansatz::regroup_qc_as_qmps(&a).unwrap(),
        )
        .unwrap();
        let obj = Objective::infidelity(reference);
        let cfg = OptimizerConfig::new(OptMethod::LocalSweep, 2);
        let (opt, trace) = local_sweep_optimize(&a, &obj, &cfg).unwrap();
        assert!(trace.final_value() < 1e-12);
        let before = a.realize_statevector().unwrap();
        let after = opt.realize_statevector().unwrap();
        let ov: f64 = before.iter().zip(&after).map(|(x, y)| x * y).sum();
        assert!(ov.abs() > 1.0 - 1e-10);
    }

    #[test]
    fn local_sweep_is_monotone_for_energy() {
        let model = ModelSpec::heisenberg(6);
        let obj = Objective::energy(&model).unwrap();
        let mut a = crate::ansatz::build_ansatz(Family::QcB, 6, 0, 3, None).unwrap();
        randomize(&mut a, 7, 0.3);
        let cfg = OptimizerConfig::new(OptMethod::LocalSweep, 6);
        let (opt, trace) = local_sweep_optimize(&a, &obj, &cfg).unwrap();
        assert!(trace.max_update_increase <= 1e-12);
        for w in trace.rows.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        let ed = ed_ground_state(&model).unwrap();
        assert!(obj.value(&opt).unwrap() >= ed.ground_energy - 1e-10);
    }

    #[test]
    fn local_sweep_decreases_infidelity_for_qmps() {
        let reference = crate::mps::Mps::random(8, 4, 17);
        let obj = Objective::infidelity(reference);
        let mut a = crate::ansatz::build_ansatz(Family::QmpsB, 8, 2, 2, None).unwrap();
        randomize(&mut a, 23, 0.1);
        let f0 = obj.value(&a).unwrap();
        let cfg = OptimizerConfig::new(OptMethod::LocalSweep, 4);
        let (_opt, trace) = local_sweep_optimize(&a, &obj, &cfg).unwrap();
        assert!(trace.final_value() < f0);
        for w in trace.rows.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }

    #[test]
    fn polar_update_roundtrips_through_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = so_polar_min(4, &m);
            let p = log_so(2, &w).unwrap();
            let back = realize_gate(&p);
            let mut err = 0.0f64;
            for (a, b) in back.data().iter().zip(&w) {
                err = err.max((a - b).abs());
            }
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let model = ModelSpec::heisenberg(4);
        let obj1 = Objective::energy(&model).unwrap();
        let obj2 = Objective::energy(&model).unwrap();
        let mut a = crate::ansatz::build_ansatz(Family::QcB, 4, 0, 2, None).unwrap();
        randomize(&mut a, 1, 0.2);
        let cfg = OptimizerConfig::new(OptMethod::Lbfgs, 60).with_seed(9);
        let (x1, t1) = gradient_minimize(&a, &obj1, &cfg).unwrap();
        let (x2, t2) = gradient_minimize(&a, &obj2, &cfg).unwrap();
        assert_eq!(x1.flat_theta(), x2.flat_theta());
        assert_eq!(t1.to_csv().lines().count(), t2.to_csv().lines().count());
        for (r1, r2) in t1.rows.iter().zip(&t2.rows) {
            assert_eq!(r1.value.to_bits(), r2.value.to_bits());
            assert_eq!(r1.grad_norm.to_bits(), r2.grad_norm.to_bits());
        }
    }

    #[test]
    fn growth_with_zero_perturbation_preserves_energy() {
        let model = ModelSpec::heisenberg(6);
        let obj = Objective::energy(&model).unwrap();
        for (family, q, tau, target) in [
            (Family::QcB, 0usize, 2usize, 4usize),
            (Family::QcL, 0, 1, 3),
            (Family::QmpsB, 2, 2, 4),
            (Family::QmpsL, 2, 1, 2),
        ] {
            let mut a = crate::ansatz::build_ansatz(family, 6, q, tau, None).unwrap();
            randomize(&mut a, 31, 0.4);
            let grown = adaptive_grow(&a, target, 0.0, 0).unwrap();
            assert_eq!(grown.tau, target);
            assert!(count_parameters(&grown) > count_parameters(&a));
            let e0 = obj.value_statevector(&a).unwrap();
            let e1 = obj.value_statevector(&grown).unwrap();
            assert!((e0 - e1).abs() < 1e-12, "{family:?}");
        }
    }

    #[test]
    fn growth_embeds_states_exactly() {
        let mut a = crate::ansatz::build_ansatz(Family::QmeraB, 8, 1, 2, None).unwrap();
        randomize(&mut a, 41, 0.4);
        let grown = grow_identity(&a, 4).unwrap();
        let v0 = a.realize_statevector().unwrap();
        let v1 = grown.realize_statevector().unwrap();
        let ov: f64 = v0.iter().zip(&v1).map(|(x, y)| x * y).sum();
        assert!((ov - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growth_validates_arguments() {
        let a = crate::ansatz::build_ansatz(Family::QcB, 6, 0, 4, None).unwrap();
        assert!(grow_identity(&a, 4).is_err());
        assert!(grow_identity(&a, 5).is_err()); // odd step on brick-wall
        let d = crate::ansatz::build_ansatz(Family::DenseBlockMera, 4, 1, 0, None).unwrap();
        assert!(grow_identity(&d, 2).is_err());
    }

    #[test]
    fn auto_scale_tracks_gradient_magnitude() {
        let model = ModelSpec::heisenberg(6);
        let obj = Objective::energy(&model).unwrap();
        let mut a = crate::ansatz::build_ansatz(Family::QcB, 6, 0, 2, None).unwrap();
        randomize(&mut a, 2, 0.3);
        let grown = grow_identity(&a, 4).unwrap();
        let s = auto_perturbation_scale(&grown, &obj).unwrap();
        assert!(s > 0.0 && s < 10.0);
        let perturbed = adaptive_grow(&a, 4, s, 3).unwrap();
        let e_grown = obj.value_statevector(&grown).unwrap();
        let e_pert = obj.value_statevector(&perturbed).unwrap();
        // perturbation is small but non-trivial
        assert!((e_grown - e_pert).abs() > 0.0);
    }
}

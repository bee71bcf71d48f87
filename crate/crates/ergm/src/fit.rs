//! Coefficient estimation from target statistics under a fixed offset.
//!
//! Targets are mean-value parameters: we look for coefficients at which the
//! expected statistic vector matches them. Two routes:
//!
//! * [`FitMethod::LogisticDyadIndependent`] — when every term is
//!   dyad-independent the likelihood factorizes over dyads, so the moment
//!   equations are those of a logistic regression with the offset as a
//!   fixed intercept shift. Solved exactly by Newton scoring over the
//!   n(n-1)/2 dyads; no Monte Carlo involved.
//! * [`FitMethod::StochasticApproximation`] — Robbins-Monro on the moment
//!   equations, with the expectation estimated by a persistent Gibbs chain.
//!   Updates are `theta += a_t * (targets - sim_mean) / var(sim)` with the
//!   variance as a per-coordinate preconditioner, `a_t` a decaying gain.
//!   Convergence is only declared after a confirmation run with four times
//!   the per-iteration sample count stays within tolerance; the final
//!   scoring step and the reported Monte Carlo standard errors come from
//!   that run (batch means, mapped through the inverse of the statistic
//!   covariance, which is the Jacobian of the mean map).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{AttributeTable, Network};
use crate::sampler::{GibbsChain, InitialState};
use crate::terms::{
    change_stats_into, global_stats, ilogit, CompiledModel, Locality, ModelSpec, StatVector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LogisticDyadIndependent,
    StochasticApproximation,
}

/// Knobs for the fitters. Defaults suit sparse offset models with up to a
/// couple dozen terms; the chain spacing fields fall back to fractions of
/// the dyad count when unset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: FitMethod,
    /// Robbins-Monro iteration budget.
    pub max_iterations: usize,
    /// Gain at iteration 1.
    pub gain_initial: f64,
    /// Gain decay exponent, in (1/2, 1].
    pub gain_decay: f64,
    /// Chain samples drawn per iteration (confirmation uses four times this).
    pub samples_per_iteration: usize,
    /// Convergence bound on |target - simulated mean| in standard errors.
    pub tolerance: f64,
    pub seed: u64,
    /// Chain steps before the first sample; default 20 x dyad count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    /// Steps between iteration samples; default dyad count / 5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<u64>,
    /// Steps between confirmation samples; default twice the dyad count
    /// (batch-means error bars need roomy spacing to stay honest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmation_interval: Option<u64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: FitMethod::StochasticApproximation,
            max_iterations: 60,
            gain_initial: 0.5,
            gain_decay: 0.75,
            samples_per_iteration: 20,
            tolerance: 3.0,
            seed: 0,
            burn_in: None,
            sample_interval: None,
            confirmation_interval: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::ModelMismatch("tolerance must be positive".into()));
        }
        if !(self.gain_decay > 0.5 && self.gain_decay <= 1.0) {
            return Err(Error::ModelMismatch(
                "gain decay exponent must lie in (0.5, 1]".into(),
            ));
        }
        if self.samples_per_iteration < 4 {
            return Err(Error::ModelMismatch(
                "need at least 4 samples per iteration".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a fit. `converged == false` is a diagnostic failure, never a
/// silent success; `achieved` and the Monte Carlo standard errors always
/// describe the final confirmation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub target: StatVector,
    pub achieved: StatVector,
    pub mc_standard_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// Fit coefficients so the expected statistics match `targets`, which may
/// come from an observed network or from egocentric implied statistics.
pub fn fit_mean_value(
    targets: &[f64],
    attrs: &AttributeTable,
    model: &ModelSpec,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if targets.len() != model.terms.len() {
        return Err(Error::ModelMismatch(format!(
            "{} targets for {} terms",
            targets.len(),
            model.terms.len()
        )));
    }
    match cfg.method {
        FitMethod::LogisticDyadIndependent => fit_logistic(targets, attrs, model, cfg),
        FitMethod::StochasticApproximation => fit_stochastic(targets, attrs, model, cfg),
    }
}

/// Convenience wrapper: fit to the statistics of an observed network.
pub fn fit_network(
    net: &Network,
    attrs: &AttributeTable,
    model: &ModelSpec,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let compiled = model.compile(attrs)?;
    let targets = global_stats(net, &compiled)?;
    fit_mean_value(targets.as_slice(), attrs, model, cfg)
}

// ---------------------------------------------------------------------------
// Target feasibility
// ---------------------------------------------------------------------------

/// Saturation bounds of each statistic: dyad-level change sums for the
/// dyad-independent terms, node counts for degree terms. Targets must lie
/// strictly inside to identify finite coefficients.
fn validate_targets(targets: &[f64], compiled: &CompiledModel) -> Result<()> {
    let n = compiled.n;
    let p = compiled.n_terms();
    let empty = Network::empty(n);
    let mut lo = vec![0.0; p];
    let mut hi = vec![0.0; p];
    let localities: Vec<Locality> = compiled.kinds().iter().map(|k| k.locality()).collect();
    let mut delta = vec![0.0; p];
    for i in 0..n {
        for j in (i + 1)..n {
            change_stats_into(&empty, compiled, i, j, &mut delta);
            for k in 0..p {
                if localities[k] == Locality::DyadIndependent {
                    if delta[k] > 0.0 {
                        hi[k] += delta[k];
                    } else {
                        lo[k] += delta[k];
                    }
                }
            }
        }
    }
    for k in 0..p {
        if localities[k] == Locality::Markov {
            // Degree counts range over the actors that pass the filter.
            hi[k] = compiled
                .degree_term_node_count(k)
                .expect("Markov terms are degree counts") as f64;
            lo[k] = 0.0;
        }
        if !(targets[k] > lo[k] && targets[k] < hi[k]) {
            return Err(Error::DegenerateTargets(format!(
                "target {} = {} outside the open range ({}, {})",
                compiled.term_labels()[k],
                targets[k],
                lo[k],
                hi[k]
            )));
        }
    }
    Ok(())
}


// ---------------------------------------------------------------------------
// Exact logistic route
// ---------------------------------------------------------------------------

fn fit_logistic(
    targets: &[f64],
    attrs: &AttributeTable,
    model: &ModelSpec,
    _cfg: &FitConfig,
) -> Result<FitResult> {
    if !model.dyad_independent() {
        return Err(Error::WrongMethod(
            "logistic route requires every term to be dyad-independent".into(),
        ));
    }
    let mut compiled = model.compile(attrs)?;
    compiled.theta = vec![0.0; compiled.n_terms()];
    validate_targets(targets, &compiled)?;
    let (theta, achieved, iterations) = newton_logistic(targets, &mut compiled)?;
    Ok(FitResult {
        theta_hat: theta,
        target: StatVector(targets.to_vec()),
        achieved: StatVector(achieved),
        mc_standard_errors: vec![0.0; targets.len()],
        converged: true,
        iterations,
    })
}

/// Newton scoring on the factorized moment equations. Returns the solution,
/// the expected statistics there, and the iteration count.
fn newton_logistic(targets: &[f64], compiled: &mut CompiledModel) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = compiled.n;
    let p = compiled.n_terms();
    let empty = Network::empty(n);
    let mut delta = vec![0.0; p];
    let mut iterations = 0;
    for iter in 1..=100 {
        iterations = iter;
        let mut mu = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            for j in (i + 1)..n {
                change_stats_into(&empty, compiled, i, j, &mut delta);
                let mut lo = compiled.offset_value;
                for (t, d) in compiled.theta.iter().zip(&delta) {
                    lo += t * d;
                }
                let pr = ilogit(lo);
                let w = pr * (1.0 - pr);
                for a in 0..p {
                    mu[a] += pr * delta[a];
                    for b in a..p {
                        info[(a, b)] += w * delta[a] * delta[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let score = DVector::from_iterator(p, targets.iter().zip(mu.iter()).map(|(t, m)| t - m));
        let step = solve_spd(&info, &score)?;
        let max_step = step.amax();
        let scale = if max_step > 5.0 { 5.0 / max_step } else { 1.0 };
        for k in 0..p {
            compiled.theta[k] += scale * step[k];
        }
        if compiled.theta.iter().any(|t| t.abs() > 30.0) {
            return Err(Error::Separation(
                "coefficients diverging; a statistic separates ties from non-ties".into(),
            ));
        }
        if max_step < 1e-10 {
            return Ok((compiled.theta.clone(), mu.iter().cloned().collect(), iterations));
        }
    }
    // Did not settle: recompute the achieved statistics at the last iterate.
    let mut mu = vec![0.0; p];
    for i in 0..n {
        for j in (i + 1)..n {
            change_stats_into(&empty, compiled, i, j, &mut delta);
            let mut lo = compiled.offset_value;
            for (t, d) in compiled.theta.iter().zip(&delta) {
                lo += t * d;
            }
            let pr = ilogit(lo);
            for a in 0..p {
                mu[a] += pr * delta[a];
            }
        }
    }
    let worst = targets
        .iter()
        .zip(&mu)
        .map(|(t, m)| (t - m).abs())
        .fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(Error::Separation(format!(
            "Newton scoring failed to close the moment gap (residual {worst:.3e})"
        )));
    }
    Ok((compiled.theta.clone(), mu, iterations))
}

fn solve_spd(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let p = matrix.nrows();
    let ridge = 1e-10 * (1.0 + matrix.trace() / p as f64);
    let mut m = matrix.clone();
    for k in 0..p {
        m[(k, k)] += ridge;
    }
    m.clone()
        .cholesky()
        .map(|c| c.solve(rhs))
        .or_else(|| m.lu().solve(rhs))
        .ok_or_else(|| Error::Separation("information matrix is singular".into()))
}

/// Solve against a noisy covariance estimate: eigenvalues are floored at a
/// fraction of the largest so weak, poorly measured directions cannot blow
/// the step up.
fn solve_conditioned(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = matrix.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.amax();
    if !(max_ev > 0.0) {
        return Err(Error::Separation("statistic covariance is singular".into()));
    }
    let floor = 1e-2 * max_ev;
    let mut out = DVector::zeros(rhs.len());
    for (k, ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * (v.dot(rhs) / ev.max(floor));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stochastic approximation route
// ---------------------------------------------------------------------------

struct Confirmation {
    mean: Vec<f64>,
    /// Covariance of the run mean, from batch means.
    mean_cov: DMatrix<f64>,
    /// Sample covariance of the statistics (the Jacobian estimate).
    jacobian: DMatrix<f64>,
}

fn fit_stochastic(
    targets: &[f64],
    attrs: &AttributeTable,
    model: &ModelSpec,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let mut compiled = model.compile(attrs)?;
    let p = compiled.n_terms();
    compiled.theta = vec![0.0; p];
    validate_targets(targets, &compiled)?;
    let mut theta = warm_start(targets, attrs, model)?;
    compiled.theta.copy_from_slice(&theta);

    let n = compiled.n;
    let dyads = (n * (n - 1) / 2) as u64;
    let rm_interval = cfg.sample_interval.unwrap_or((dyads / 5).max(128));
    let conf_interval = cfg.confirmation_interval.unwrap_or(2 * dyads).max(1);
    let anchor_interval = dyads.max(1);
    let k_per_iter = cfg.samples_per_iteration;
    let trace = std::env::var_os("ERGM_FIT_TRACE").is_some();

    let mut chain = GibbsChain::new(&compiled, &InitialState::Empty, cfg.seed)?;
    chain.run(cfg.burn_in.unwrap_or(20 * dyads));

    // With only dyad-independent terms the warm start already solves the
    // moment equations; the approximation stages exist to move the Markov
    // coefficients, so skip straight to confirmation otherwise. Two fixed
    // mid-course "anchor" corrections with a matrix gain pull the jointly
    // coupled coordinates together faster than the diagonal updates alone.
    let mut iterations = 0;
    if !model.dyad_independent() {
        let anchors = [cfg.max_iterations * 3 / 10, cfg.max_iterations * 6 / 10];
        for t in 1..=cfg.max_iterations {
            iterations = t;
            let mut rows = Vec::with_capacity(k_per_iter);
            for _ in 0..k_per_iter {
                chain.run(rm_interval);
                rows.push(chain.stats().to_vec());
            }
            let (mean, var) = mean_var(&rows);
            let gain = cfg.gain_initial / (t as f64).powf(cfg.gain_decay);
            apply_rm_update(&mut theta, targets, &mean, &var, gain);
            chain.set_theta(&theta)?;
            if anchors.contains(&t) {
                chain.run(4 * anchor_interval);
                let anchor =
                    collect_confirmation(&mut chain, 2 * k_per_iter, anchor_interval);
                apply_newton_step(&mut theta, targets, &anchor, 0.6)?;
                chain.set_theta(&theta)?;
                chain.run(6 * anchor_interval);
                if trace {
                    eprintln!("anchor at iter {t}: theta {theta:?}");
                }
            }
        }
    }

    // Confirmation: a long, widely spaced run decides convergence and
    // prices the Monte Carlo error (eight iterations' worth of samples, so
    // the batch-means error bars and the Jacobian both hold up). Misses
    // take a damped corrective step and retry with doubled samples;
    // running out of retries is a diagnostic failure.
    let mut converged = false;
    let mut conf_samples = 8 * k_per_iter;
    let mut attempts_left = 4;
    let conf = loop {
        chain.run(6 * conf_interval);
        let conf = collect_confirmation(&mut chain, conf_samples, conf_interval);
        let ok = (0..p).all(|k| {
            let se = conf.mean_cov[(k, k)].sqrt().max(1e-12);
            (targets[k] - conf.mean[k]).abs() <= cfg.tolerance * se
        });
        if trace {
            let zs: Vec<f64> = (0..p)
                .map(|k| {
                    let se = conf.mean_cov[(k, k)].sqrt().max(1e-12);
                    ((targets[k] - conf.mean[k]) / se * 10.0).round() / 10.0
                })
                .collect();
            eprintln!("confirmation ({conf_samples} samples): ok={ok} z={zs:?}");
        }
        if ok {
            // Final scoring step; within Monte Carlo noise by the gate.
            apply_newton_step(&mut theta, targets, &conf, 1.0)?;
            chain.set_theta(&theta)?;
            converged = true;
            break conf;
        }
        attempts_left -= 1;
        if attempts_left == 0 {
            break conf;
        }
        apply_newton_step(&mut theta, targets, &conf, 0.6)?;
        chain.set_theta(&theta)?;
        conf_samples = (conf_samples * 2).min(16 * k_per_iter);
    };
    let mc_se = mc_standard_errors(&conf)?;
    Ok(FitResult {
        theta_hat: theta,
        target: StatVector(targets.to_vec()),
        achieved: StatVector(conf.mean.clone()),
        mc_standard_errors: mc_se,
        converged,
        iterations,
    })
}

/// Damped scoring step through the statistic covariance. `scale` tempers
/// corrective steps taken from noisy estimates; on top of it, no
/// coefficient ever moves more than 0.4 (coefficients act on log scale, so
/// larger jumps overshoot small-count statistics badly).
fn apply_newton_step(
    theta: &mut [f64],
    targets: &[f64],
    conf: &Confirmation,
    scale: f64,
) -> Result<()> {
    let p = theta.len();
    let disc = DVector::from_iterator(p, targets.iter().zip(&conf.mean).map(|(t, m)| t - m));
    let step = solve_conditioned(&conf.jacobian, &disc)?;
    let max_step = step.amax() * scale;
    let damp = scale * if max_step > 0.4 { 0.4 / max_step } else { 1.0 };
    for k in 0..p {
        theta[k] += damp * step[k];
    }
    Ok(())
}

/// Initial coefficients: exact logistic fit of the dyad-independent
/// sub-model to its own targets, zero for the Markov terms. Falls back to
/// all zeros when the sub-fit cannot be computed.
fn warm_start(targets: &[f64], attrs: &AttributeTable, model: &ModelSpec) -> Result<Vec<f64>> {
    let p = model.terms.len();
    let di_idx: Vec<usize> = (0..p)
        .filter(|&k| model.terms[k].locality() == Locality::DyadIndependent)
        .collect();
    let mut theta = vec![0.0; p];
    if di_idx.is_empty() {
        return Ok(theta);
    }
    let sub_model = ModelSpec {
        attributes: model.attributes.clone(),
        terms: di_idx.iter().map(|&k| model.terms[k].clone()).collect(),
        theta: None,
        offset: model.offset,
    };
    let sub_targets: Vec<f64> = di_idx.iter().map(|&k| targets[k]).collect();
    let cfg = FitConfig {
        method: FitMethod::LogisticDyadIndependent,
        ..FitConfig::default()
    };
    match fit_logistic(&sub_targets, attrs, &sub_model, &cfg) {
        Ok(fit) => {
            for (slot, &k) in fit.theta_hat.iter().zip(&di_idx) {
                theta[k] = slot.clamp(-15.0, 15.0);
            }
            Ok(theta)
        }
        Err(Error::Separation(_)) | Err(Error::DegenerateTargets(_)) => Ok(theta),
        Err(e) => Err(e),
    }
}

fn apply_rm_update(theta: &mut [f64], targets: &[f64], mean: &[f64], var: &[f64], gain: f64) {
    for k in 0..theta.len() {
        let precond = var[k].max(1e-8);
        let step = gain * (targets[k] - mean[k]) / precond;
        theta[k] += step.clamp(-1.0, 1.0);
    }
}

fn collect_confirmation(chain: &mut GibbsChain, n_samples: usize, interval: u64) -> Confirmation {
    let mut rows = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        chain.run(interval);
        rows.push(chain.stats().to_vec());
    }
    let (mean, _) = mean_var(&rows);
    let mean_cov = batch_means_cov(&rows, 8);
    // Shrink the covariance mildly toward its diagonal; the raw estimate is
    // noisy at these sample counts and Newton steps amplify that noise.
    let mut jacobian = sample_cov(&rows, &mean);
    let p = mean.len();
    for a in 0..p {
        for b in 0..p {
            if a != b {
                jacobian[(a, b)] *= 0.9;
            }
        }
    }
    Confirmation {
        mean,
        mean_cov,
        jacobian,
    }
}

fn mean_var(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for row in rows {
        for k in 0..p {
            var[k] += (row[k] - mean[k]).powi(2);
        }
    }
    let denom = (n - 1.0).max(1.0);
    for v in &mut var {
        *v /= denom;
    }
    (mean, var)
}

/// Covariance of the grand mean through non-overlapping batch means, which
/// absorbs the chain's autocorrelation.
fn batch_means_cov(rows: &[Vec<f64>], batches: usize) -> DMatrix<f64> {
    let p = rows[0].len();
    let b = batches.min(rows.len() / 2).max(2);
    let size = rows.len() / b;
    let used = b * size;
    let mut batch_means = Vec::with_capacity(b);
    for chunk in rows[..used].chunks(size) {
        let mut m = vec![0.0; p];
        for row in chunk {
            for (s, v) in m.iter_mut().zip(row) {
                *s += v;
            }
        }
        for s in &mut m {
            *s /= size as f64;
        }
        batch_means.push(m);
    }
    let (grand, _) = mean_var(&batch_means);
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for m in &batch_means {
        for a in 0..p {
            for c in a..p {
                cov[(a, c)] += (m[a] - grand[a]) * (m[c] - grand[c]);
            }
        }
    }
    let denom = (b as f64 - 1.0) * b as f64;
    for a in 0..p {
        for c in a..p {
            cov[(a, c)] /= denom;
            cov[(c, a)] = cov[(a, c)];
        }
    }
    cov
}

fn sample_cov(rows: &[Vec<f64>], mean: &[f64]) -> DMatrix<f64> {
    let p = mean.len();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for row in rows {
        for a in 0..p {
            for c in a..p {
                cov[(a, c)] += (row[a] - mean[a]) * (row[c] - mean[c]);
            }
        }
    }
    let denom = (rows.len() as f64 - 1.0).max(1.0);
    for a in 0..p {
        for c in a..p {
            cov[(a, c)] /= denom;
            cov[(c, a)] = cov[(a, c)];
        }
    }
    cov
}

/// Var(theta_hat) from the delta method: J^{-1} Var(mean) J^{-1}.
fn mc_standard_errors(conf: &Confirmation) -> Result<Vec<f64>> {
    let p = conf.mean.len();
    let ridge = 1e-8 * (1.0 + conf.jacobian.trace() / p as f64);
    let mut j = conf.jacobian.clone();
    for k in 0..p {
        j[(k, k)] += ridge;
    }
    let inv = j
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Separation("statistic covariance is singular".into()))?;
    let cov_theta = &inv * &conf.mean_cov * inv.transpose();
    Ok((0..p).map(|k| cov_theta[(k, k)].max(0.0).sqrt()).collect())
}

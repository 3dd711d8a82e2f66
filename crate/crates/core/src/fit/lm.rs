use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A least-squares problem: residual vector r(p) and optionally its Jacobian.
pub trait Residuals {
    fn len(&self) -> usize;

    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<()>;

    /// Analytic Jacobian, `len() x p.len()`, over all parameters (fixed ones
    /// included). `None` selects central finite differences.
    fn jacobian(&self, _p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, initial: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            fixed: false,
        }
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn fixed(mut self, fixed: bool) -> Self {
        self.fixed = fixed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative χ² decrease of an accepted step is below this.
    pub ftol: f64,
    /// Stop when the step is below this relative to the parameter norm.
    pub xtol: f64,
    /// Stop when every free Jacobian column is this close to orthogonal to
    /// the residual (cosine of the angle).
    pub gtol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Residuals are already divided by known σ: do not rescale the
    /// covariance by the reduced χ².
    pub absolute_sigma: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-14,
            xtol: 1e-13,
            gtol: 1e-12,
            fd_step: 1e-6,
            absolute_sigma: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<Param>,
    /// Quantities computed from the parameters, with propagated 1σ.
    pub derived: Vec<Param>,
    /// Covariance over all parameters; rows/columns of fixed ones are zero.
    pub covariance: Vec<Vec<f64>>,
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub dof: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Condition number of the column-scaled Jacobian at the solution.
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params
            .iter()
            .chain(&self.derived)
            .find(|p| p.name == name)
    }

    /// Value of a parameter or derived quantity. Panics on unknown names.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("no parameter {name}"))
            .value
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.param(name)
            .unwrap_or_else(|| panic!("no parameter {name}"))
            .uncertainty
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Correlation coefficient between two fitted parameters.
    pub fn correlation(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        let c = &self.covariance;
        let d = (c[i][i] * c[j][j]).sqrt();
        (d > 0.0).then(|| c[i][j] / d)
    }

    pub(crate) fn push_derived(&mut self, name: &str, value: f64, uncertainty: f64) {
        self.derived.push(Param {
            name: name.into(),
            value,
            uncertainty,
        });
    }
}

/// Above this the Jacobian is treated as rank deficient.
pub const SINGULAR_CONDITION: f64 = 1e13;
/// Above this a conditioning warning is attached to the result.
pub const WARN_CONDITION: f64 = 1e8;

struct Free<'a> {
    specs: &'a [ParamSpec],
    idx: Vec<usize>,
}

impl Free<'_> {
    fn expand(&self, base: &[f64], free: &[f64]) -> Vec<f64> {
        let mut p = base.to_vec();
        for (k, &i) in self.idx.iter().enumerate() {
            p[i] = free[k];
        }
        p
    }

    fn clamp(&self, free: &mut [f64]) {
        for (k, &i) in self.idx.iter().enumerate() {
            free[k] = free[k].clamp(self.specs[i].lower, self.specs[i].upper);
        }
    }
}

fn residual_vec(problem: &dyn Residuals, p: &[f64]) -> Result<DVector<f64>> {
    let mut r = vec![0.0; problem.len()];
    problem.eval(p, &mut r)?;
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateData("non-finite residual".into()));
    }
    Ok(DVector::from_vec(r))
}

fn free_jacobian(
    problem: &dyn Residuals,
    free: &Free,
    full: &[f64],
    r0: &DVector<f64>,
    opts: &LmOptions,
) -> Result<DMatrix<f64>> {
    let n = problem.len();
    if let Some(j) = problem.jacobian(full) {
        let j = j?;
        return Ok(DMatrix::from_fn(n, free.idx.len(), |row, k| {
            j[(row, free.idx[k])]
        }));
    }
    let mut jac = DMatrix::zeros(n, free.idx.len());
    for (k, &i) in free.idx.iter().enumerate() {
        let spec = &free.specs[i];
        let h = opts.fd_step * full[i].abs().max(1.0);
        let mut p = full.to_vec();
        let (up, down) = (full[i] + h <= spec.upper, full[i] - h >= spec.lower);
        let col = if up && down {
            p[i] = full[i] + h;
            let a = residual_vec(problem, &p)?;
            p[i] = full[i] - h;
            let b = residual_vec(problem, &p)?;
            (a - b) / (2.0 * h)
        } else if up {
            p[i] = full[i] + h;
            (residual_vec(problem, &p)? - r0) / h
        } else {
            p[i] = full[i] - h;
            (r0 - residual_vec(problem, &p)?) / h
        };
        jac.set_column(k, &col);
    }
    Ok(jac)
}

/// Singular values of the Jacobian after scaling each column to unit norm.
fn scaled_condition(j: &DMatrix<f64>) -> f64 {
    if j.ncols() == 0 {
        return 1.0;
    }
    let mut s = j.clone();
    for mut c in s.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    let sv = s.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Bounded Levenberg-Marquardt with Nielsen's damping update.
pub fn lm_fit(
    model: &str,
    problem: &dyn Residuals,
    specs: &[ParamSpec],
    opts: &LmOptions,
) -> Result<FitResult> {
    for s in specs {
        if !(s.initial >= s.lower && s.initial <= s.upper) || !s.initial.is_finite() {
            return Err(Error::InvalidParameter {
                name: "initial",
                reason: format!(
                    "{} = {} outside [{}, {}]",
                    s.name, s.initial, s.lower, s.upper
                ),
            });
        }
    }
    let free = Free {
        specs,
        idx: (0..specs.len()).filter(|&i| !specs[i].fixed).collect(),
    };
    let m = problem.len();
    let k = free.idx.len();
    if m <= k {
        return Err(Error::InsufficientData(format!(
            "{m} residuals for {k} free parameters"
        )));
    }
    let base: Vec<f64> = specs.iter().map(|s| s.initial).collect();
    let mut x: Vec<f64> = free.idx.iter().map(|&i| base[i]).collect();
    let mut full = free.expand(&base, &x);
    let mut r = residual_vec(problem, &full)?;
    let mut chi2 = r.norm_squared();
    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut converged = k == 0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let j = free_jacobian(problem, &free, &full, &r, opts)?;
        let a = j.transpose() * &j;
        let mut g = j.transpose() * &r;
        // Parameters pinned at a bound with the descent direction pointing out
        // are held for this iteration.
        let active: Vec<bool> = (0..k)
            .map(|i| {
                let s = &specs[free.idx[i]];
                (x[i] <= s.lower && g[i] > 0.0) || (x[i] >= s.upper && g[i] < 0.0)
            })
            .collect();
        let cosine = (0..k)
            .filter(|&i| !active[i])
            .map(|i| g[i].abs() / (a[(i, i)] * chi2).sqrt().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if cosine <= opts.gtol || chi2 == 0.0 {
            converged = true;
            break;
        }
        for i in 0..k {
            if active[i] {
                g[i] = 0.0;
            }
        }
        let dmax = a.diagonal().max();
        if mu < 0.0 {
            mu = 1e-3;
        }
        let diag: DVector<f64> = a
            .diagonal()
            .map(|d| d.max(1e-12 * dmax).max(f64::MIN_POSITIVE));
        loop {
            let mut damped = a.clone();
            for i in 0..k {
                damped[(i, i)] += mu * diag[i];
                if active[i] {
                    for c in 0..k {
                        damped[(i, c)] = 0.0;
                        damped[(c, i)] = 0.0;
                    }
                    damped[(i, i)] = 1.0;
                }
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    if !mu.is_finite() {
                        return Err(Error::SingularJacobian {
                            condition: f64::INFINITY,
                            params: full,
                        });
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            free.clamp(&mut trial);
            let delta = DVector::from_iterator(k, trial.iter().zip(&x).map(|(a, b)| a - b));
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if delta.norm() <= opts.xtol * (xnorm + opts.xtol) {
                converged = true;
                break;
            }
            let trial_full = free.expand(&base, &trial);
            let predicted = chi2 - (&r + &j * &delta).norm_squared();
            let outcome = residual_vec(problem, &trial_full).ok().map(|rn| {
                let c = rn.norm_squared();
                (rn, c)
            });
            match outcome {
                Some((rn, c)) if c < chi2 && predicted > 0.0 => {
                    let rho = (chi2 - c) / predicted;
                    let rel = (chi2 - c) / chi2;
                    x = trial;
                    full = trial_full;
                    r = rn;
                    chi2 = c;
                    mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                    nu = 2.0;
                    if rel <= opts.ftol || chi2 == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    mu *= nu;
                    nu *= 2.0;
                    if mu > 1e40 {
                        // No descent direction left at working precision.
                        converged = true;
                        break;
                    }
                }
            }
        }
    }

    if !converged {
        return Err(Error::NotConverged {
            iterations,
            chi_squared: chi2,
            best: full,
        });
    }
    summarize(model, problem, specs, &free, full, r, iterations, opts)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    model: &str,
    problem: &dyn Residuals,
    specs: &[ParamSpec],
    free: &Free,
    full: Vec<f64>,
    r: DVector<f64>,
    iterations: usize,
    opts: &LmOptions,
) -> Result<FitResult> {
    let m = problem.len();
    let k = free.idx.len();
    let chi2 = r.norm_squared();
    let dof = m - k;
    let red = chi2 / dof as f64;
    let j = free_jacobian(problem, free, &full, &r, opts)?;
    let condition = scaled_condition(&j);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::SingularJacobian {
            condition,
            params: full,
        });
    }
    let mut warnings = Vec::new();
    if condition > WARN_CONDITION {
        warnings.push(format!(
            "ill-conditioned Jacobian (condition {condition:.3e})"
        ));
    }
    let a = j.transpose() * &j;
    let inv = a
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| a.pseudo_inverse(1e-300).ok())
        .ok_or_else(|| Error::SingularJacobian {
            condition,
            params: full.clone(),
        })?;
    let scale = if opts.absolute_sigma { 1.0 } else { red };
    let n = specs.len();
    let mut cov = vec![vec![0.0; n]; n];
    for (a_, &i) in free.idx.iter().enumerate() {
        for (b_, &jdx) in free.idx.iter().enumerate() {
            cov[i][jdx] = inv[(a_, b_)] * scale;
        }
    }
    let params = specs
        .iter()
        .enumerate()
        .map(|(i, s)| Param {
            name: s.name.clone(),
            value: full[i],
            uncertainty: cov[i][i].max(0.0).sqrt(),
        })
        .collect();
    for (i, s) in specs.iter().enumerate() {
        if !s.fixed && (full[i] == s.lower || full[i] == s.upper) {
            warnings.push(format!("{} at bound {}", s.name, full[i]));
        }
    }
    Ok(FitResult {
        model: model.to_string(),
        params,
        derived: Vec::new(),
        covariance: cov,
        chi_squared: chi2,
        reduced_chi_squared: red,
        dof,
        residual_norm: chi2.sqrt(),
        converged: true,
        iterations,
        condition_number: condition,
        warnings,
    })
}

/// Central-difference Jacobian over all parameters with one Richardson
/// extrapolation step, for checking analytic ones.
pub fn numeric_jacobian(problem: &dyn Residuals, p: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(problem.len(), p.len());
    let central = |i: usize, h: f64| -> Result<DVector<f64>> {
        let mut q = p.to_vec();
        q[i] = p[i] + h;
        let a = residual_vec(problem, &q)?;
        q[i] = p[i] - h;
        let b = residual_vec(problem, &q)?;
        Ok((a - b) / (2.0 * h))
    };
    for i in 0..p.len() {
        let h = rel_step * p[i].abs().max(1e-3);
        let coarse = central(i, h)?;
        let fine = central(i, 0.5 * h)?;
        jac.set_column(i, &((fine * 4.0 - coarse) / 3.0));
    }
    Ok(jac)
}

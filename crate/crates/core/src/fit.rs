//! Thin least-squares layer over the `levenberg-marquardt` crate.
//!
//! Models hand in a residual closure over a flat parameter slice; the
//! Jacobian is taken by central differences and the 1σ uncertainties come
//! from the pseudo-inverse of JᵀJ at the optimum.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit did not converge: {0}")]
    DidNotConverge(String),
    #[error("Jacobian is rank deficient (rank {rank} of {params} parameters)")]
    DegenerateJacobian { rank: usize, params: usize },
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

/// Result of a converged least-squares run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// 1σ uncertainties in the same parameterization as `params`.
    pub sigma: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub evaluations: usize,
    pub jacobian_rank: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub tol: f64,
    pub patience: usize,
    /// Scale the covariance by the reduced chi-square. Use this when the
    /// residuals are not already divided by known measurement errors.
    pub scale_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            patience: 400,
            scale_covariance: true,
        }
    }
}

struct Problem<'a, F> {
    residual_fn: &'a F,
    params: DVector<f64>,
    steps: Vec<f64>,
}

impl<F> Problem<'_, F>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    fn eval(&self, p: &DVector<f64>) -> Option<DVector<f64>> {
        let r = (self.residual_fn)(p.as_slice())?;
        if r.iter().all(|v| v.is_finite()) {
            Some(DVector::from_vec(r))
        } else {
            None
        }
    }

    fn jacobian_at(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        let base = self.eval(p)?;
        let mut jac = DMatrix::zeros(base.len(), p.len());
        for j in 0..p.len() {
            let h = self.steps[j] * p[j].abs().max(1.0);
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += h;
            minus[j] -= h;
            let col = (self.eval(&plus)? - self.eval(&minus)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Some(jac)
    }
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, F>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(&self.params)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        self.jacobian_at(&self.params)
    }
}

/// Minimise ‖r(p)‖² starting from `initial`.
///
/// Parameters should be scaled to O(1) by the caller; the finite-difference
/// step is relative to max(|p|, 1).
pub fn least_squares<F>(residual_fn: F, initial: &[f64], opts: FitOptions) -> Result<FitOutcome, FitError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = initial.len();
    let problem = Problem {
        residual_fn: &residual_fn,
        params: DVector::from_column_slice(initial),
        steps: vec![1e-7; n],
    };
    let m = problem
        .residuals()
        .ok_or_else(|| FitError::DidNotConverge("residuals not finite at initial guess".into()))?
        .len();
    if m < n {
        return Err(FitError::InsufficientData { needed: n, got: m });
    }

    let solver = LevenbergMarquardt::new()
        .with_ftol(opts.tol)
        .with_xtol(opts.tol)
        .with_gtol(opts.tol)
        .with_patience(opts.patience);
    let (problem, report) = solver.minimize(problem);

    match report.termination {
        TerminationReason::ResidualsZero
        | TerminationReason::Orthogonal
        | TerminationReason::Converged { .. }
        | TerminationReason::NoImprovementPossible(_) => {}
        other => return Err(FitError::DidNotConverge(format!("{other:?}"))),
    }

    let residuals = problem
        .residuals()
        .ok_or_else(|| FitError::DidNotConverge("residuals not finite at optimum".into()))?;
    let jac = problem
        .jacobian()
        .ok_or_else(|| FitError::DidNotConverge("Jacobian not finite at optimum".into()))?;
    let ssr = residuals.norm_squared();

    let (cov, rank) = pseudo_inverse_normal(&jac);
    let dof = (m - n).max(1) as f64;
    let scale = if opts.scale_covariance { ssr / dof } else { 1.0 };
    let sigma = (0..n)
        .map(|i| {
            let v = cov[(i, i)];
            if v.is_infinite() {
                f64::INFINITY
            } else {
                (v * scale).max(0.0).sqrt()
            }
        })
        .collect();

    Ok(FitOutcome {
        params: problem.params.as_slice().to_vec(),
        sigma,
        residual_norm: ssr.sqrt(),
        evaluations: report.number_of_evaluations,
        jacobian_rank: rank,
    })
}

/// (JᵀJ)⁺ via the SVD of J, with the numerical rank.
fn pseudo_inverse_normal(jac: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = jac.ncols();
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    // central differences carry ~1e-9 relative noise; stay above it
    let cutoff = smax * 1e-8;
    let mut cov = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let row = v_t.row(k);
            cov += row.transpose() * row / (s * s);
        } else {
            // unidentifiable direction: infinite variance
            let row = v_t.row(k);
            for i in 0..n {
                if row[i].abs() > 1e-8 {
                    cov[(i, i)] = f64::INFINITY;
                }
            }
        }
    }
    (cov, rank)
}

/// Ordinary least squares for a small dense system, used for initial guesses.
pub(crate) fn linear_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(b, 1e-14).ok()
}

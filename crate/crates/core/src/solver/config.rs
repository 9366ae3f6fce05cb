use crate::error::{Error, Result};
use crate::objective::Problem;

/// Hyperparameters of the safeguarded alternating minimization.
///
/// `alpha`/`beta` are the candidate gradient steps on `z`/`x`, and
/// `alpha_hat`/`beta_hat` the composite regularizer steps `αp/(α+p)` and
/// `βq/(β+q)` of the linearized proximal update.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Initial safeguard step on `z`, reset every outer iteration.
    pub alpha_bar0: f64,
    /// Initial safeguard step on `x`.
    pub beta_bar0: f64,
    pub rho: f64,
    pub delta: f64,
    pub eta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub eps_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Gradient norm treated as exact stationarity.
    pub stationary_tol: f64,
    /// Keep every iterate in the result (memory heavy; meant for audits).
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    /// Defaults for a data term with unit Lipschitz constant; prefer
    /// [`SolverConfig::for_problem`].
    fn default() -> Self {
        Self::with_data_lipschitz(1.0)
    }
}

impl SolverConfig {
    /// `α = β = 0.2/L_f`, `α̂ = β̂ = α/2`, everything else at its default.
    pub fn with_data_lipschitz(data_lipschitz: f64) -> Self {
        let step = 0.2 / data_lipschitz;
        Self {
            alpha: step,
            beta: step,
            alpha_hat: step / 2.0,
            beta_hat: step / 2.0,
            alpha_bar0: 0.5,
            beta_bar0: 0.5,
            rho: 0.5,
            delta: 1e-4,
            eta: 1e-3,
            sigma: 1.0,
            gamma: 0.5,
            eps0: 1.0,
            eps_tol: 1e-4,
            max_iters: 2000,
            max_backtracks: 60,
            stationary_tol: 1e-14,
            record_iterates: false,
        }
    }

    pub fn for_problem(problem: &Problem) -> Result<Self> {
        Ok(Self::with_data_lipschitz(problem.data_term_lipschitz()?))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        let nonnegative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be nonnegative, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        nonnegative("alpha_hat", self.alpha_hat)?;
        nonnegative("beta_hat", self.beta_hat)?;
        unit("alpha_bar0", self.alpha_bar0)?;
        unit("beta_bar0", self.beta_bar0)?;
        unit("rho", self.rho)?;
        unit("delta", self.delta)?;
        positive("eta", self.eta)?;
        positive("sigma", self.sigma)?;
        unit("gamma", self.gamma)?;
        positive("eps0", self.eps0)?;
        nonnegative("eps_tol", self.eps_tol)?;
        nonnegative("stationary_tol", self.stationary_tol)?;
        if self.max_backtracks < 1 {
            return Err(Error::invalid("max_backtracks must be at least 1"));
        }
        Ok(())
    }

    /// Backtracking bound `⌈log_ρ(1/((δ + L_ε/2)·max(ᾱ₀, β̄₀)))⌉ + 1` for a
    /// gradient Lipschitz constant `lipschitz`.
    pub fn backtrack_bound(&self, lipschitz: f64) -> usize {
        let largest = self.alpha_bar0.max(self.beta_bar0);
        let ratio = 1.0 / ((self.delta + lipschitz / 2.0) * largest);
        let steps = (ratio.ln() / self.rho.ln()).ceil();
        steps.max(0.0) as usize + 1
    }
}

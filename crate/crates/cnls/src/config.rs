//! Run configuration: one structured-text file describing the system
//! instance, the spike placement, the grid and the solver tolerances.

use crate::error::{Error, Result};
use crate::geometry::SystemParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ODE residual tolerance for ground-state solves.
    pub ode_tol: f64,
    /// Truncation radius in units of 1/√λ.
    pub r_max_factor: f64,
    /// Newton residual tolerance (sup-norm).
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            ode_tol: 1e-8,
            r_max_factor: 25.0,
            newton_tol: 1e-8,
            newton_max_iter: 50,
        }
    }
}

/// Full run configuration (TOML). `beta` holds the strict upper triangle,
/// row by row: beta[0] = [β_{1,2}, β_{1,3}, ...], beta[1] = [β_{2,3}, ...].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    pub d: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub nu: Vec<f64>,
    pub theta: usize,
    pub rho_star: f64,
    /// Scaled gaps summing to 2π; omitted means the balanced closed form.
    #[serde(default)]
    pub alpha_star: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// 0 means the library default thread count.
    #[serde(default)]
    pub threads: usize,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.system()?; // validates
        if cfg.theta < 3 {
            return Err(Error::Config(format!("theta = {} must be at least 3", cfg.theta)));
        }
        if let Some(a) = &cfg.alpha_star {
            if a.len() != cfg.d {
                return Err(Error::Config("alpha_star must have one entry per component".into()));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Expand the upper-triangle coupling rows into the full system.
    pub fn system(&self) -> Result<SystemParams> {
        let d = self.d;
        if self.beta.len() != d.saturating_sub(1) {
            return Err(Error::Config(format!(
                "beta must have {} upper-triangle rows, got {}",
                d - 1,
                self.beta.len()
            )));
        }
        let mut beta = vec![vec![0.0; d]; d];
        for i in 0..d - 1 {
            if self.beta[i].len() != d - 1 - i {
                return Err(Error::Config(format!(
                    "beta row {i} must have {} entries, got {}",
                    d - 1 - i,
                    self.beta[i].len()
                )));
            }
            for (off, &v) in self.beta[i].iter().enumerate() {
                let j = i + 1 + off;
                beta[i][j] = v;
                beta[j][i] = v;
            }
        }
        let sys = SystemParams {
            dim: self.dim,
            d,
            lambda: self.lambda.clone(),
            mu: self.mu.clone(),
            beta,
            delta: self.delta.clone(),
            nu: self.nu.clone(),
        };
        sys.validate()?;
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
dim = 2
d = 2
lambda = [1.0, 1.0]
mu = [1.0, 1.0]
beta = [[0.3]]
delta = [0.5, 0.5]
nu = [1.5, 1.5]
theta = 4
rho_star = 0.35
alpha_star = [3.141592653589793, 3.141592653589793]
seed = 0

[grid]
L = 20.0
h = 0.1
"#;

    #[test]
    fn parses_and_expands_symmetric_coupling() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        let sys = cfg.system().unwrap();
        assert_eq!(sys.beta[0][1], 0.3);
        assert_eq!(sys.beta[1][0], 0.3);
        assert_eq!(sys.beta[0][0], 0.0);
        assert_eq!(cfg.solver.newton_max_iter, 50);
    }

    #[test]
    fn rejects_malformed_configs() {
        let bad = SAMPLE.replace("beta = [[0.3]]", "beta = [[0.3, 0.1]]");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("theta = 4", "theta = 2");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("nu = [1.5, 1.5]", "nu = [2.5, 1.5]");
        assert!(RunConfig::from_toml(&bad).is_err());
    }
}

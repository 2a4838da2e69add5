use std::f64::consts::PI;

/// Uniform grid 0 = t₀ < … < t_N = T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Smallest N with T/N ≤ dt (so the grid never coarsens the request).
    pub fn from_dt(t_final: f64, dt: f64) -> Self {
        let steps = ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self { t_final, steps }
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_final
        } else {
            self.t_final * n as f64 / self.steps as f64
        }
    }

    pub fn midpoint(&self, n: usize) -> f64 {
        self.t_final * (n as f64 + 0.5) / self.steps as f64
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }
}

/// min(T/200, √α/(4π N_u)): resolves the fastest retained acoustic mode.
pub fn default_dt(t_final: f64, alpha_min: f64, n_u: usize) -> f64 {
    (t_final / 200.0).min(alpha_min.sqrt() / (4.0 * PI * n_u as f64))
}

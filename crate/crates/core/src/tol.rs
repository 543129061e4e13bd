use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};

/// Every numeric threshold used by the pipeline. Relative tolerances are
/// multiplied by the norm of the relevant operator where noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Infinitesimal symplecticity, relative to ‖A‖.
    pub hamiltonian: f64,
    /// Eigenvalue clustering, relative to ‖A‖.
    pub cluster: f64,
    /// Resonance membership, relative to ‖A‖.
    pub spectral: f64,
    /// Largest harmonic k considered; 0 means ⌈‖A‖/ν∘⌉ + 1.
    pub kmax: f64,
    pub frame: f64,
    pub equivariance: f64,
    pub fit: f64,
    pub homological: f64,
    /// Relative finite-difference step; the actual step is h_fd·(1 + |λ∘|).
    pub h_fd: f64,
    /// Half-width of the λ-grid around λ∘.
    pub grid_halfwidth: f64,
    pub grid_points: f64,
    pub rho_singular: f64,
    pub newton: f64,
    pub newton_max_iter: f64,
    pub inner_iteration: f64,
    /// Integrator steps per T_ν∘.
    pub steps_per_period: f64,
    pub drift: f64,
    pub trust_radius: f64,
    pub shooting: f64,
    pub rpo: f64,
    pub noether: f64,
    /// Ratio between periodicity and RPO residual above which g is called nontrivial.
    pub nontrivial_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hamiltonian: 1e-10,
            cluster: 1e-7,
            spectral: 1e-7,
            kmax: 0.0,
            frame: 1e-8,
            equivariance: 1e-8,
            fit: 1e-8,
            homological: 1e-9,
            h_fd: 1e-4,
            grid_halfwidth: 0.05,
            grid_points: 5.0,
            rho_singular: 1e-12,
            newton: 1e-12,
            newton_max_iter: 50.0,
            inner_iteration: 1e-13,
            steps_per_period: 2000.0,
            drift: 1e-8,
            trust_radius: 0.1,
            shooting: 1e-11,
            rpo: 1e-6,
            noether: 1e-9,
            nontrivial_ratio: 100.0,
        }
    }
}

impl Tolerances {
    /// Override one tolerance by field name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(HopfError::Invalid(format!(
                "tolerance {name} must be finite and non-negative"
            )));
        }
        let mut map = match serde_json::to_value(&*self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("tolerances serialize to an object"),
        };
        if !map.contains_key(name) {
            return Err(HopfError::Invalid(format!("unknown tolerance '{name}'")));
        }
        map.insert(name.to_string(), serde_json::json!(value));
        *self = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| HopfError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn max_iter(&self) -> usize {
        self.newton_max_iter.max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_by_name() {
        let mut t = Tolerances::default();
        t.set("cluster", 1e-6).unwrap();
        assert_eq!(t.cluster, 1e-6);
        assert!(t.set("bogus", 1.0).is_err());
        assert!(t.set("cluster", -1.0).is_err());
    }
}

//! One-parameter polynomial Hamiltonian families with symmetry data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linear::{GroupData, HamMap, SymplecticForm};
use crate::mat::{Mat, Vect};
use crate::poly::{Poly, PolyJet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFamily {
    pub name: String,
    pub jet: PolyJet,
    pub form: SymplecticForm,
    pub group: GroupData,
}

impl HamiltonianFamily {
    pub fn new(name: &str, jet: PolyJet, form: SymplecticForm, group: GroupData) -> Result<Self> {
        if jet.dim != form.dim() {
            return Err(HopfError::DimensionMismatch(format!(
                "jet has {} variables, form has dimension {}",
                jet.dim,
                form.dim()
            )));
        }
        let low = jet.low_order_terms();
        if !low.is_empty() {
            return Err(HopfError::H1Violation(format!(
                "h_λ(0) = 0 and dh_λ(0) = 0 required; found monomials {low:?}"
            )));
        }
        group.validate(&form, 1e-10)?;
        Ok(HamiltonianFamily {
            name: name.to_string(),
            jet,
            form,
            group,
        })
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn hamiltonian(&self, lambda: f64) -> Poly {
        self.jet.at(lambda)
    }

    pub fn hessian(&self, lambda: f64) -> Mat {
        self.hamiltonian(lambda).hessian_at_zero()
    }

    pub fn linearization(&self, lambda: f64) -> HamMap {
        HamMap::from_hessian(&self.hessian(lambda), self.form.clone())
    }

    /// K^ξ(v) = ½ω(ξv, v).
    pub fn momentum(&self, xi: &Mat) -> Poly {
        Poly::quadratic(&GroupData::momentum_hessian(xi, &self.form))
    }

    /// Largest invariance defect of h_λ over sampled points: |h(gx) − h(x)| for
    /// finite generators and |{h, K^ξ}(x)| for algebra generators.
    pub fn invariance_defect(&self, lambda: f64, samples: usize, seed: u64) -> f64 {
        let h = self.hamiltonian(lambda);
        let grads = h.gradient_polys();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = Vect::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            let hx = h.eval(x.as_slice());
            let scale = 1.0 + x.norm().powi(4);
            for g in &self.group.finite_generators {
                let gx = g * &x;
                worst = worst.max((h.eval(gx.as_slice()) - hx).abs() / scale);
            }
            for xi in &self.group.algebra_generators {
                let v = xi * &x;
                let dh: f64 = grads.iter().zip(v.iter()).map(|(gp, vi)| gp.eval(x.as_slice()) * vi).sum();
                worst = worst.max(dh.abs() / scale);
            }
        }
        worst
    }

    pub fn check_invariance(&self, lambda: f64, tol: f64) -> Result<()> {
        let d = self.invariance_defect(lambda, 50, 7);
        if d > tol {
            return Err(HopfError::NotInvariant(format!(
                "Hamiltonian not invariant under supplied generators ({d:.3e})"
            )));
        }
        Ok(())
    }
}

/// Vector field X_h = Π∇h for a polynomial Hamiltonian.
pub fn vector_field(h: &Poly, form: &SymplecticForm, x: &Vect) -> Vect {
    form.poisson() * h.gradient(x.as_slice())
}

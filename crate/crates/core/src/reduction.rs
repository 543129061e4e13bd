//! Lyapunov–Schmidt reduction onto V₀ and the reduced bifurcation equation.
//!
//! All formulas use the absolute detuning α (rad/time), so ζ = ν∘ + α and
//! the frame coordinates are y = (v₀, v₁) ∈ V₀ ⊕ V₁ = ℝ^{2n} ⊕ ℝ^{2n}.

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::mat::{self, Mat, Vect};
use crate::normalform::{coefficient_hessian, CoeffValues, HessianCoefficients};
use crate::poly::{CompiledPoly, Poly};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionData {
    pub coeffs: HessianCoefficients,
    /// Quartic of the normalized Hamiltonian restricted to V₀; C = ∇ of it.
    pub quartic: Poly,
    /// Full degree-4 normal form on U_ν∘ at λ∘ (frame coordinates).
    pub normal_form: Poly,
    pub n: usize,
    pub nu0: f64,
    pub trust_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifPoint {
    pub v0: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    /// Drift velocity as a skew 2n×2n matrix on V₀ commuting with J₂ₙ.
    #[serde(with = "crate::mat::rowmajor")]
    pub xi: Mat,
}

impl ReductionData {
    pub fn new(coeffs: HessianCoefficients, normal_form: &Poly, trust_radius: f64) -> Result<Self> {
        let n = coeffs.n;
        if normal_form.nvars != 4 * n {
            return Err(HopfError::DimensionMismatch(format!(
                "normal form on {} variables, expected {}",
                normal_form.nvars,
                4 * n
            )));
        }
        Ok(ReductionData {
            nu0: coeffs.nu0,
            n,
            quartic: normal_form.homogeneous(4).restrict_leading(2 * n),
            normal_form: normal_form.clone(),
            coeffs,
            trust_radius,
        })
    }

    pub fn dim_v0(&self) -> usize {
        2 * self.n
    }

    pub fn cubic_c(&self, v: &Vect) -> Vect {
        self.quartic.gradient(v.as_slice())
    }

    pub fn sigma_prime(&self) -> f64 {
        self.coeffs.sigma_prime_0
    }

    pub fn psi_prime(&self) -> f64 {
        self.coeffs.psi_prime_0
    }

    fn j(&self) -> Mat {
        mat::std_j(2 * self.n)
    }
}

/// L^ζ = [[0, (1 − ζ/ν∘)ν∘J],[−(1 − ζ/ν∘)ν∘J, −I]].
pub fn l_zeta(n: usize, nu0: f64, zeta: f64) -> Mat {
    let m2 = 2 * n;
    let j = mat::std_j(m2);
    let k = (1.0 - zeta / nu0) * nu0;
    mat::block2(&Mat::zeros(m2, m2), &(&j * k), &(&j * (-k)), &(-Mat::identity(m2, m2)))
}

fn check_rho(c: &CoeffValues) -> Result<()> {
    if c.rho.abs() < 1e-12 {
        return Err(HopfError::RhoSingular(c.rho));
    }
    Ok(())
}

/// D_{V₀}v₁(0) = −(τ/ρ)I − (d/ρ)J − ξ/ρ with d = ν∘ + α − ψ.
pub fn v1_derivative(c: &HessianCoefficients, alpha: f64, lambda: f64, xi: &Mat) -> Result<Mat> {
    let v = c.at(lambda);
    check_rho(&v)?;
    let m2 = 2 * c.n;
    let d = c.nu0 + alpha - v.psi;
    Ok(Mat::identity(m2, m2) * (-v.tau / v.rho) - mat::std_j(m2) * (d / v.rho) - xi / v.rho)
}

/// D_{V₀}B(0) = [σρ − τ² − d²]/ρ·I + (2d/ρ)Jξ + ξ²/ρ.
pub fn db_at_zero(c: &HessianCoefficients, alpha: f64, lambda: f64, xi: &Mat) -> Result<Mat> {
    let v = c.at(lambda);
    check_rho(&v)?;
    let m2 = 2 * c.n;
    let d = c.nu0 + alpha - v.psi;
    let j = mat::std_j(m2);
    Ok(Mat::identity(m2, m2) * ((v.sigma * v.rho - v.tau * v.tau - d * d) / v.rho)
        + &j * xi * (2.0 * d / v.rho)
        + xi * xi / v.rho)
}

/// (σ′μ + α² − 2ψ′αμ)v − ξ²v − 2αJξv + 2ψ′μJξv + C(v), μ = λ − λ∘.
pub fn principal_part_b(r: &ReductionData, p: &BifPoint) -> Vect {
    let v = Vect::from_row_slice(&p.v0);
    let mu = p.lambda - r.coeffs.lambda0;
    let (sp, pp, a) = (r.sigma_prime(), r.psi_prime(), p.alpha);
    let jxi = r.j() * &p.xi;
    &v * (sp * mu + a * a - 2.0 * pp * a * mu) - &p.xi * (&p.xi * &v) - &jxi * &v * (2.0 * a)
        + &jxi * &v * (2.0 * pp * mu)
        + r.cubic_c(&v)
}

/// g with ∇g = principal_part_b.
pub fn bifurcation_potential_g(r: &ReductionData, p: &BifPoint) -> f64 {
    let v = Vect::from_row_slice(&p.v0);
    let mu = p.lambda - r.coeffs.lambda0;
    let (sp, pp, a) = (r.sigma_prime(), r.psi_prime(), p.alpha);
    let jxi = r.j() * &p.xi;
    let q = |m: &Mat| v.dot(&(m * &v));
    0.5 * (sp * mu + a * a - 2.0 * pp * a * mu) * v.norm_squared() - 0.5 * q(&(&p.xi * &p.xi)) - a * q(&jxi)
        + pp * mu * q(&jxi)
        + r.quartic.eval(v.as_slice())
}

/// λ with ⟨B(ru₀, α, λ, ξ), u₀⟩ = 0, by Newton from λ∘.
pub fn solve_lambda(r: &ReductionData, radius: f64, u0: &Vect, alpha: f64, xi: &Mat, tol: f64, max_iter: usize) -> Result<f64> {
    if radius == 0.0 {
        return Err(HopfError::Invalid("radius must be nonzero".into()));
    }
    let f = |lam: f64| {
        let p = BifPoint {
            v0: (u0 * radius).as_slice().to_vec(),
            alpha,
            lambda: lam,
            xi: xi.clone(),
        };
        principal_part_b(r, &p).dot(u0) / radius
    };
    let mut lam = r.coeffs.lambda0;
    let pp = r.psi_prime();
    let df = (r.sigma_prime() - 2.0 * pp * alpha) * u0.norm_squared() + 2.0 * pp * u0.dot(&(r.j() * xi * u0));
    for _ in 0..max_iter {
        let fv = f(lam);
        if fv.abs() < tol {
            return Ok(lam);
        }
        if df == 0.0 || !df.is_finite() {
            return Err(HopfError::NewtonDiverged("vanishing λ-derivative".into()));
        }
        lam -= fv / df;
    }
    if f(lam).abs() < tol {
        return Ok(lam);
    }
    Err(HopfError::NewtonDiverged(format!("|F| = {:.3e} after {max_iter} steps", f(lam).abs())))
}

/// G(r, u₀, α, ξ) = B(ru₀, α, λ(r, u₀, α, ξ), ξ), tangent to the sphere.
pub fn sphere_field_g(r: &ReductionData, radius: f64, u0: &Vect, alpha: f64, xi: &Mat, tol: f64, max_iter: usize) -> Result<(Vect, f64)> {
    let lam = solve_lambda(r, radius, u0, alpha, xi, tol, max_iter)?;
    let p = BifPoint {
        v0: (u0 * radius).as_slice().to_vec(),
        alpha,
        lambda: lam,
        xi: xi.clone(),
    };
    Ok((principal_part_b(r, &p), lam))
}

/// Full frame-space function Φ = ĥ_λ − K^ξ − J^ζ, with ĥ_λ modelled as the
/// fitted quadratic at λ plus the quartic normal form at λ∘. Used as an
/// implicit-function oracle for v₁ and B.
pub struct ExactReduction<'a> {
    pub data: &'a ReductionData,
    quartic: CompiledPoly,
}

impl<'a> ExactReduction<'a> {
    pub fn new(data: &'a ReductionData) -> Self {
        ExactReduction {
            quartic: CompiledPoly::new(data.normal_form.homogeneous(4).add(&data.normal_form.homogeneous(3))),
            data,
        }
    }

    fn quadratic(&self, alpha: f64, lambda: f64, xi: &Mat) -> Mat {
        let n = self.data.n;
        let m2 = 2 * n;
        let j = mat::std_j(m2);
        let zeta = self.data.nu0 + alpha;
        let z = Mat::zeros(m2, m2);
        let kxi = mat::block2(&z, xi, &(-xi), &z);
        let jz = mat::block2(&z, &(&j * zeta), &(&j * (-zeta)), &z);
        coefficient_hessian(&self.data.coeffs.at(lambda), n) - kxi - jz
    }

    pub fn gradient(&self, y: &Vect, alpha: f64, lambda: f64, xi: &Mat) -> Vect {
        self.quadratic(alpha, lambda, xi) * y + self.quartic.gradient(y.as_slice())
    }

    /// v₁(v₀) by Newton on (I − P)∇Φ(v₀ + v₁) = 0.
    pub fn v1(&self, v0: &Vect, alpha: f64, lambda: f64, xi: &Mat) -> Result<Vect> {
        let m2 = 2 * self.data.n;
        let q = self.quadratic(alpha, lambda, xi);
        let mut v1 = Vect::zeros(m2);
        for _ in 0..50 {
            let y = concat(v0, &v1);
            let g = &q * &y + self.quartic.gradient(y.as_slice());
            let r = g.rows(m2, m2).into_owned();
            if r.amax() < 1e-15 * (1.0 + v0.norm()) {
                return Ok(v1);
            }
            let h = &q + self.quartic.hessian(y.as_slice());
            let jac = h.view((m2, m2), (m2, m2)).into_owned();
            let step = jac.lu().solve(&r).ok_or_else(|| HopfError::NewtonDiverged("singular V₁ block".into()))?;
            v1 -= step;
        }
        Err(HopfError::NewtonDiverged("v₁ Newton did not converge".into()))
    }

    /// B(v₀) = P∇Φ(v₀ + v₁(v₀)).
    pub fn b(&self, v0: &Vect, alpha: f64, lambda: f64, xi: &Mat) -> Result<Vect> {
        let m2 = 2 * self.data.n;
        let v1 = self.v1(v0, alpha, lambda, xi)?;
        Ok(self.gradient(&concat(v0, &v1), alpha, lambda, xi).rows(0, m2).into_owned())
    }
}

fn concat(a: &Vect, b: &Vect) -> Vect {
    Vect::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).cloned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::FrameCase;

    pub(crate) fn synthetic(n: usize, quartic: Poly, sp: f64, pp: f64) -> ReductionData {
        let base = CoeffValues {
            sigma: 0.0,
            rho: -1.0,
            tau: 0.0,
            psi: 1.0,
        };
        let d1 = CoeffValues {
            sigma: sp,
            rho: 0.0,
            tau: 0.0,
            psi: pp,
        };
        let zero = CoeffValues {
            sigma: 0.0,
            rho: 0.0,
            tau: 0.0,
            psi: 0.0,
        };
        let coeffs = HessianCoefficients {
            lambda0: 0.0,
            nu0: 1.0,
            n,
            case: FrameCase::Plus,
            grid: vec![],
            sigma: vec![],
            rho: vec![],
            tau: vec![],
            psi: vec![],
            at_lambda0: base,
            d1,
            d2: zero,
            sigma_prime_0: sp,
            psi_prime_0: pp,
            sigma_prime_half_step: sp,
            h_fd: 1e-4,
            max_fit_residual: 0.0,
        };
        let mut nf = Poly::zero(4 * n);
        for (e, c) in &quartic.terms {
            let mut e2 = e.clone();
            e2.resize(4 * n, 0);
            nf.add_term(e2, *c);
        }
        ReductionData::new(coeffs, &nf, 0.1).unwrap()
    }

    fn r2(n: usize) -> Poly {
        let mut p = Poly::zero(2 * n);
        for i in 0..2 * n {
            p = p.add(&Poly::var(2 * n, i).pow(2));
        }
        p
    }

    #[test]
    fn l_zeta_examples() {
        let l = l_zeta(1, 1.0, 1.0);
        let expect = mat::block_diag(&Mat::zeros(2, 2), &(-Mat::identity(2, 2)));
        assert_eq!(l, expect);
        let l2 = l_zeta(1, 1.0, 2.0);
        let j = mat::std_j(2);
        assert!(mat::max_abs(&(l2.view((0, 2), (2, 2)).into_owned() + &j)) < 1e-15);
        assert!(mat::max_abs(&(l2.view((2, 0), (2, 2)).into_owned() - &j)) < 1e-15);
    }

    #[test]
    fn v1_and_db_examples() {
        let r = synthetic(1, r2(1).pow(2), 1.0, 0.0);
        let z = Mat::zeros(2, 2);
        assert!(mat::max_abs(&v1_derivative(&r.coeffs, 0.0, 0.0, &z).unwrap()) < 1e-15);
        let d = v1_derivative(&r.coeffs, 0.1, 0.0, &z).unwrap();
        assert!(mat::max_abs(&(d - mat::std_j(2) * 0.1)) < 1e-15);
        assert!(mat::max_abs(&db_at_zero(&r.coeffs, 0.0, 0.0, &z).unwrap()) < 1e-15);
        let db = db_at_zero(&r.coeffs, 0.01, 0.0, &z).unwrap();
        assert!(mat::max_abs(&(db - Mat::identity(2, 2) * 1e-4)) < 1e-15);
    }

    #[test]
    fn quadratic_only_lambda() {
        let r = synthetic(1, Poly::zero(2), 2.0, 0.0);
        let u = Vect::from_vec(vec![0.6, 0.8]);
        let lam = solve_lambda(&r, 0.05, &u, 0.3, &Mat::zeros(2, 2), 1e-12, 50).unwrap();
        assert!((lam + 0.09 / 2.0).abs() < 1e-13, "{lam}");
    }

    #[test]
    fn db_matches_jacobian_of_b() {
        let r = synthetic(2, r2(2).pow(2).scale(-0.1), 0.7, 0.2);
        let j = mat::std_j(4);
        let xi = &j * 0.05;
        let (alpha, lam) = (0.03, 0.02);
        let h = 1e-6;
        let mut jac = Mat::zeros(4, 4);
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = h;
            let bp = principal_part_b(&r, &BifPoint { v0: e.clone(), alpha, lambda: lam, xi: xi.clone() });
            e[k] = -h;
            let bm = principal_part_b(&r, &BifPoint { v0: e, alpha, lambda: lam, xi: xi.clone() });
            jac.set_column(k, &((bp - bm) / (2.0 * h)));
        }
        // The principal part drops O(μ²) terms of the exact linearization.
        let db = db_at_zero(&r.coeffs, alpha, lam, &xi).unwrap();
        assert!(mat::max_abs(&(jac - db)) < 1e-3);
    }

    #[test]
    fn v1_oracle_matches_derivative() {
        let r = synthetic(1, r2(1).pow(2).scale(-0.1), 1.0, 0.0);
        let ex = ExactReduction::new(&r);
        let xi = mat::std_j(2) * 0.02;
        let d = v1_derivative(&r.coeffs, 0.05, 0.01, &xi).unwrap();
        for eps in [1e-3, 1e-4] {
            let v0 = Vect::from_vec(vec![eps, -0.5 * eps]);
            let v1 = ex.v1(&v0, 0.05, 0.01, &xi).unwrap();
            assert!((v1 - &d * &v0).norm() < 10.0 * eps * eps * eps.max(1e-3));
        }
    }

    #[test]
    fn b_is_s1_and_rotation_equivariant() {
        let r = synthetic(2, r2(2).pow(2).scale(-0.2), 0.9, 0.3);
        let j = mat::std_j(4);
        // diag(J₂, J₂) commutes with J₄ = [[0, −I], [I, 0]].
        let rot = mat::block_diag(&mat::std_j(2), &mat::std_j(2));
        let xi = &rot * 0.04;
        let p = BifPoint {
            v0: vec![0.03, -0.02, 0.05, 0.01],
            alpha: 0.02,
            lambda: 0.01,
            xi: xi.clone(),
        };
        let b = principal_part_b(&r, &p);
        for g in [mat::expm(&(&j * 0.7)), mat::expm(&(&rot * 1.3))] {
            let gv = &g * Vect::from_row_slice(&p.v0);
            let q = BifPoint {
                v0: gv.as_slice().to_vec(),
                ..p.clone()
            };
            assert!((principal_part_b(&r, &q) - &g * &b).amax() < 1e-15);
        }
    }
}

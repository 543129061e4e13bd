//! Branch predictions: the O(2) solve, the torus theorem, restriction to
//! fixed-point subspaces and maximal-isotropy counts.

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::mat::{self, Mat, Vect};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BranchKind {
    Periodic,
    Rpo,
}

/// One point of an O(2) branch. α is relative to ν∘ (ζ = ν∘(1 + α)) and ξ is
/// the scalar drift along the rotation generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct O2Point {
    pub r: f64,
    pub alpha: f64,
    pub xi: f64,
    pub z1_sq: f64,
    pub z2_sq: f64,
    /// λ − λ∘.
    pub lambda_offset: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPrediction {
    pub kind: BranchKind,
    pub isotropy_label: String,
    pub xi: f64,
    pub alpha: f64,
    pub points: Vec<O2Point>,
    pub relative_period: f64,
    /// Rotation angle of the phase shift exp(τξ).
    pub phase_shift_angle: f64,
    pub trust_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct O2Coefficients {
    pub a: f64,
    pub b: f64,
    pub nu0: f64,
    pub sigma_prime: f64,
}

impl O2Coefficients {
    pub fn validate(&self) -> Result<()> {
        let scale = self.a.abs().max(self.b.abs()).max(1e-300);
        if self.a.abs() < 1e-12 * scale.max(1.0)
            || self.b.abs() < 1e-12 * scale.max(1.0)
            || (self.a - self.b).abs() < 1e-10 * scale
        {
            return Err(HopfError::DegenerateCoefficients(format!("a = {}, b = {}", self.a, self.b)));
        }
        if self.sigma_prime == 0.0 {
            return Err(HopfError::H4Violation("σ′(λ∘) = 0".into()));
        }
        Ok(())
    }

    /// Leading-order point: |z₁|² + |z₂|² = r², |z₂|² = |z₁|² − 4ν∘αξ/(a − b).
    pub fn leading_point(&self, r: f64, alpha: f64, xi: f64) -> O2Point {
        let nu = self.nu0;
        let shift = 4.0 * nu * alpha * xi / (self.a - self.b);
        let z1 = 0.5 * (r * r + shift);
        let z2 = 0.5 * (r * r - shift);
        let lam = (-alpha * alpha * nu * nu + 2.0 * nu * alpha * xi - (self.a * z1 + self.b * z2)) / self.sigma_prime;
        O2Point {
            r,
            alpha,
            xi,
            z1_sq: z1,
            z2_sq: z2,
            lambda_offset: lam,
            admissible: z1 >= 0.0 && z2 >= 0.0,
        }
    }
}

pub fn o2_branches(c: &O2Coefficients, alpha_xi: &[(f64, f64)], radii: &[f64], trust_radius: f64) -> Result<Vec<BranchPrediction>> {
    c.validate()?;
    let mut out = Vec::new();
    for &(alpha, xi) in alpha_xi {
        let points: Vec<O2Point> = radii.iter().map(|&r| c.leading_point(r, alpha, xi)).collect();
        let periodic = alpha * xi == 0.0;
        let zeta = c.nu0 * (1.0 + alpha);
        let period = 2.0 * std::f64::consts::PI / zeta;
        out.push(BranchPrediction {
            kind: if periodic { BranchKind::Periodic } else { BranchKind::Rpo },
            isotropy_label: if periodic {
                "|z1| = |z2| (spatiotemporal Z2)".into()
            } else {
                "trivial".into()
            },
            xi,
            alpha,
            points,
            relative_period: period,
            phase_shift_angle: period * xi,
            trust_radius,
        });
    }
    Ok(out)
}

/// Optional terms of the truncated O(2) system beyond the paper's leading order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct O2Corrections {
    pub psi_prime: f64,
    /// Include the −ξ²v₀ term (adds ξ² to both equations).
    pub xi_squared: bool,
    /// Quintic coefficients (c₁|z_i|⁴ + c₂|z_i|²|z_j|² + c₃|z_j|⁴) z_i.
    pub quintic: [f64; 3],
}

/// Residuals of the truncated component equations divided by z₁, z₂.
pub fn o2_truncated_residual(c: &O2Coefficients, k: &O2Corrections, p: &O2Point) -> [f64; 2] {
    let nu = c.nu0;
    let (a, x) = (p.alpha, p.xi);
    let mu = p.lambda_offset;
    let base = mu * c.sigma_prime + a * a * nu * nu - 2.0 * k.psi_prime * nu * a * mu
        + if k.xi_squared { x * x } else { 0.0 };
    let drift = 2.0 * nu * a * x - 2.0 * k.psi_prime * mu * x;
    let q = |s: f64, t: f64| k.quintic[0] * s * s + k.quintic[1] * s * t + k.quintic[2] * t * t;
    [
        base - drift + c.a * p.z1_sq + c.b * p.z2_sq + q(p.z1_sq, p.z2_sq),
        base + drift + c.a * p.z2_sq + c.b * p.z1_sq + q(p.z2_sq, p.z1_sq),
    ]
}

/// Newton solve of the truncated system for (|z₁|², |z₂|², λ − λ∘) at fixed r.
pub fn o2_refine(c: &O2Coefficients, k: &O2Corrections, start: &O2Point, tol: f64, max_iter: usize) -> Result<O2Point> {
    let mut p = *start;
    let f = |p: &O2Point| {
        let r = o2_truncated_residual(c, k, p);
        Vect::from_vec(vec![r[0], r[1], p.z1_sq + p.z2_sq - p.r * p.r])
    };
    for _ in 0..max_iter {
        let fv = f(&p);
        if fv.amax() < tol {
            p.admissible = p.z1_sq >= 0.0 && p.z2_sq >= 0.0;
            return Ok(p);
        }
        let mut jac = Mat::zeros(3, 3);
        let h = 1e-7;
        for j in 0..3 {
            let mut q = p;
            match j {
                0 => q.z1_sq += h,
                1 => q.z2_sq += h,
                _ => q.lambda_offset += h,
            }
            jac.set_column(j, &((f(&q) - &fv) / h));
        }
        let step = jac.lu().solve(&fv).ok_or_else(|| HopfError::NewtonDiverged("singular O(2) Jacobian".into()))?;
        p.z1_sq -= step[0];
        p.z2_sq -= step[1];
        p.lambda_offset -= step[2];
    }
    Err(HopfError::NewtonDiverged("O(2) refinement did not converge".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSolution {
    pub psi: Vec<f64>,
    /// π₁ … π_n, all positive.
    pub pi: Vec<f64>,
    pub residual: f64,
    pub kind: BranchKind,
    pub frequencies: usize,
}

/// Leading-order solve of 0 = ψᵢ² − ψₙ² + Σⱼ(ĉᵢⱼ − ĉₙⱼ)πⱼ, i < n, for
/// π₁ … π_{n−1} at each π_n. Rejected points (some πᵢ ≤ 0) are dropped.
pub fn torus_branches(c: &[f64], chat: &Mat, psi: &[f64], pi_n: &[f64]) -> Result<Vec<TorusSolution>> {
    let n = chat.nrows();
    if chat.ncols() != n || psi.len() != n || c.len() + 1 != n || n < 2 {
        return Err(HopfError::DimensionMismatch("torus data sizes".into()));
    }
    let sum: f64 = c.iter().sum();
    if (sum - 1.0).abs() < 1e-12 {
        return Err(HopfError::ConditionViolated(format!("c₁ + … + c_(n−1) = {sum}")));
    }
    let m = Mat::from_fn(n - 1, n - 1, |i, j| chat[(i, j)] - chat[(n - 1, j)]);
    if mat::rank(&m, 1e-12) < n - 1 {
        return Err(HopfError::RankDeficient(format!("Δ has rank {} < {}", mat::rank(&m, 1e-12), n - 1)));
    }
    let lu = m.clone().lu();
    let mut out = Vec::new();
    for &pn in pi_n {
        let rhs = Vect::from_fn(n - 1, |i, _| {
            -(psi[i] * psi[i] - psi[n - 1] * psi[n - 1]) - (chat[(i, n - 1)] - chat[(n - 1, n - 1)]) * pn
        });
        let sol = lu.solve(&rhs).ok_or_else(|| HopfError::RankDeficient("singular Δ".into()))?;
        let mut pi: Vec<f64> = sol.iter().cloned().collect();
        pi.push(pn);
        let residual = torus_residual(chat, psi, &pi);
        if pi.iter().all(|&x| x > 0.0) {
            out.push(TorusSolution {
                psi: psi.to_vec(),
                pi,
                residual,
                kind: BranchKind::Rpo,
                frequencies: n,
            });
        }
    }
    Ok(out)
}

pub fn torus_residual(chat: &Mat, psi: &[f64], pi: &[f64]) -> f64 {
    let n = chat.nrows();
    (0..n - 1)
        .map(|i| {
            let s: f64 = (0..n).map(|j| (chat[(i, j)] - chat[(n - 1, j)]) * pi[j]).sum();
            (psi[i] * psi[i] - psi[n - 1] * psi[n - 1] + s).abs()
        })
        .fold(0.0, f64::max)
}

/// ĉᵢⱼ from a quartic on V₀ and a real map v ↦ (Re z₁, Im z₁, …) that is a
/// multiple of an isometry: Cᵢ(eᵢ) = ĉᵢᵢ and Cᵢ(eᵢ + eⱼ) = ĉᵢᵢ + ĉᵢⱼ.
pub fn torus_coefficients(quartic: &Poly, zmap: &Mat) -> Result<Mat> {
    let d = zmap.nrows();
    let gram = zmap.transpose() * zmap;
    let c = gram[(0, 0)];
    if mat::max_abs(&(&gram - Mat::identity(d, d) * c)) > 1e-8 * c {
        return Err(HopfError::Invalid("complex coordinates are not conformal on V₀".into()));
    }
    let zh = zmap / c.sqrt();
    let zinv = zh.transpose();
    let n = d / 2;
    let comp = |w: &Vect, i: usize| -> f64 {
        let v = &zinv * w;
        (&zh * quartic.gradient(v.as_slice()))[2 * i]
    };
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        let mut e = Vect::zeros(d);
        e[2 * i] = 1.0;
        let cii = comp(&e, i);
        out[(i, i)] = cii;
        for j in 0..n {
            if j != i {
                let mut w = e.clone();
                w[2 * j] = 1.0;
                out[(i, j)] = comp(&w, i) - cii;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NormalizerQuotient {
    S1Trivial,
    S1Z2,
    Su2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyRecord {
    pub label: String,
    pub theta_hom: String,
    pub fixed_dim: usize,
    pub normalizer_quotient: NormalizerQuotient,
}

/// Generators of H as pairs (k acting on V₀, θ(k)) with the S¹ generator.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropyGenerators {
    pub label: String,
    pub elements: Vec<(Mat, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRestriction {
    #[serde(with = "crate::mat::rowmajor")]
    pub basis: Mat,
    #[serde(with = "crate::mat::rowmajor::vec")]
    pub restricted_generators: Vec<Mat>,
    #[serde(with = "crate::mat::rowmajor::vec")]
    pub restricted_momentum_hessians: Vec<Mat>,
    pub invariance_residual: f64,
}

/// V₀^H = ∩ ker(k·e^{θ(k)S} − I), with the normalizer generators and their
/// momentum Hessians restricted to it.
pub fn fixed_point_restriction(
    s1: &Mat,
    h: &IsotropyGenerators,
    normalizer: &[Mat],
    momentum_hessians: &[Mat],
    tol: f64,
) -> Result<FixedPointRestriction> {
    let d = s1.nrows();
    let basis = if h.elements.is_empty() {
        Mat::identity(d, d)
    } else {
        let mut rows = Mat::zeros(d * h.elements.len(), d);
        for (k, (g, th)) in h.elements.iter().enumerate() {
            let m = g * mat::expm(&(s1 * *th)) - Mat::identity(d, d);
            rows.view_mut((k * d, 0), (d, d)).copy_from(&m);
        }
        mat::null_space(&rows, 1e-9)
    };
    if basis.ncols() == 0 {
        return Err(HopfError::NotIsotropy(format!("{} fixes only the origin", h.label)));
    }
    let proj = &basis * basis.transpose();
    let mut worst: f64 = 0.0;
    let mut gens = Vec::new();
    for g in normalizer {
        let gb = g * &basis;
        worst = worst.max(mat::max_abs(&(&proj * &gb - &gb)));
        gens.push(basis.transpose() * gb);
    }
    if worst > tol {
        return Err(HopfError::NotIsotropy(format!(
            "normalizer does not preserve the fixed space of {} ({worst:.2e})",
            h.label
        )));
    }
    let hess = momentum_hessians.iter().map(|m| basis.transpose() * m * &basis).collect();
    Ok(FixedPointRestriction {
        basis,
        restricted_generators: gens,
        restricted_momentum_hessians: hess,
        invariance_residual: worst,
    })
}

/// Betti numbers of CP^{k−1} and HP^{k−1}: ones in degrees 0, 2, … resp. 0, 4, ….
fn projective_betti(k: usize, step: usize) -> Vec<u32> {
    let mut b = vec![0u32; step * (k.max(1) - 1) + 1];
    for i in 0..k {
        b[step * i] = 1;
    }
    b
}

fn euler(betti: &[u32]) -> i64 {
    betti.iter().enumerate().map(|(i, &b)| if i % 2 == 0 { b as i64 } else { -(b as i64) }).sum()
}

/// Lower bound on periodic branches with maximal isotropy: χ(S^{l−1}/N⁰),
/// divided by |N/N⁰| when that quotient acts freely.
pub fn maximal_isotropy_count(l: usize, q: NormalizerQuotient) -> Result<usize> {
    if l == 0 {
        return Err(HopfError::ParityViolation("l must be positive".into()));
    }
    let (modulus, chi) = match q {
        NormalizerQuotient::S1Trivial => (2, euler(&projective_betti(l / 2, 2))),
        // CP^{l/2−1} with a free involution.
        NormalizerQuotient::S1Z2 => (4, euler(&projective_betti(l / 2, 2)) / 2),
        NormalizerQuotient::Su2 => (4, euler(&projective_betti(l / 4, 4))),
    };
    if l % modulus != 0 {
        return Err(HopfError::ParityViolation(format!("l = {l} not divisible by {modulus} for {q:?}")));
    }
    Ok(chi as usize)
}

pub fn maximal_isotropy_count_from_basis(basis: &Mat, q: NormalizerQuotient) -> Result<usize> {
    maximal_isotropy_count(mat::rank(basis, 1e-9), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(a: f64, b: f64) -> O2Coefficients {
        O2Coefficients {
            a,
            b,
            nu0: 1.0,
            sigma_prime: 1.0,
        }
    }

    #[test]
    fn o2_examples() {
        let p = c(1.0, -1.0).leading_point(1.0, 0.1, 1.0);
        assert!((p.z1_sq - 0.6).abs() < 1e-15 && (p.z2_sq - 0.4).abs() < 1e-15 && p.admissible);
        let p = c(1.0, -1.0).leading_point(1.0, 0.6, 1.0);
        assert!(!p.admissible && p.z2_sq < 0.0);
        let p = c(1.0, -1.0).leading_point(0.3, 0.0, 0.0);
        assert!((p.z1_sq - p.z2_sq).abs() < 1e-16);
        assert!(matches!(o2_branches(&c(1.0, 1.0), &[(0.1, 0.1)], &[0.1], 0.1), Err(HopfError::DegenerateCoefficients(_))));
        assert!(matches!(o2_branches(&c(0.0, 1.0), &[(0.1, 0.1)], &[0.1], 0.1), Err(HopfError::DegenerateCoefficients(_))));
    }

    #[test]
    fn o2_leading_solves_truncated_system() {
        let co = c(-0.1, -0.2);
        let p = co.leading_point(0.1, 0.02, 0.05);
        let r = o2_truncated_residual(&co, &O2Corrections::default(), &p);
        assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);
    }

    #[test]
    fn torus_example() {
        let chat = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(torus_branches(&[-1.0], &chat, &[1.1, 1.0], &[0.01]).unwrap().is_empty());
        let s = torus_branches(&[-1.0], &chat, &[1.0, 1.1], &[0.01]).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].pi[0] - 0.115).abs() < 1e-14 && s[0].residual < 1e-14);
        assert!(matches!(torus_branches(&[1.0], &chat, &[1.0, 1.1], &[0.01]), Err(HopfError::ConditionViolated(_))));
        let flat = Mat::from_element(2, 2, 1.0);
        assert!(matches!(torus_branches(&[-1.0], &flat, &[1.0, 1.0], &[0.01]), Err(HopfError::RankDeficient(_))));
    }

    #[test]
    fn counts() {
        assert_eq!(maximal_isotropy_count(2, NormalizerQuotient::S1Trivial).unwrap(), 1);
        assert_eq!(maximal_isotropy_count(8, NormalizerQuotient::S1Z2).unwrap(), 2);
        assert_eq!(maximal_isotropy_count(4, NormalizerQuotient::Su2).unwrap(), 1);
        assert!(maximal_isotropy_count(3, NormalizerQuotient::S1Trivial).is_err());
        assert!(maximal_isotropy_count(6, NormalizerQuotient::Su2).is_err());
        let b = Mat::identity(6, 6).columns(0, 4).into_owned();
        assert_eq!(maximal_isotropy_count_from_basis(&b, NormalizerQuotient::S1Trivial).unwrap(), 2);
    }

    #[test]
    fn trivial_isotropy_is_unrestricted() {
        let s = mat::std_j(4);
        let h = IsotropyGenerators {
            label: "1".into(),
            elements: vec![],
        };
        let r = fixed_point_restriction(&s, &h, &[s.clone()], &[], 1e-10).unwrap();
        assert_eq!(r.basis, Mat::identity(4, 4));
    }
}

//! Two charged particles in the plane, coupled by springs and a magnetic field.
//!
//! State ordering is (q1, q3, q2, q4, p1, p3, p2, p4): particle i has
//! position (q_i, q_{i+2}), and the linearization takes the block form
//! [[−(γ/m)J₄, I/m], [(k − γ²/m)I, −(γ/m)J₄]].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::family::HamiltonianFamily;
use crate::linear::{GroupData, SymplecticForm};
use crate::mat::{self, Mat};
use crate::poly::{Poly, PolyJet};

/// Index of q_i (i = 1..4) in the state vector.
pub const fn q_index(i: usize) -> usize {
    match i {
        1 => 0,
        3 => 1,
        2 => 2,
        4 => 3,
        _ => panic!("q index out of range"),
    }
}

pub const fn p_index(i: usize) -> usize {
    q_index(i) + 4
}

/// Monomial in the invariants, ordered
/// (π₁¹, π₁², π₂¹, π₂², π₃¹, π₃², π₄¹, π₄²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub coeff: f64,
    pub powers: [u32; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorParams {
    pub m: f64,
    pub gamma: f64,
    pub f_coeffs: Vec<InteractionTerm>,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        OscillatorParams {
            m: 1.0,
            gamma: 1.0,
            f_coeffs: default_interaction(0.05),
        }
    }
}

impl OscillatorParams {
    pub fn linear(m: f64, gamma: f64) -> Self {
        OscillatorParams {
            m,
            gamma,
            f_coeffs: Vec::new(),
        }
    }

    pub fn k_hopf(&self) -> f64 {
        self.gamma * self.gamma / self.m
    }
}

/// Default quartic interaction ε[(π₁¹)² + (π₁²)²].
pub fn default_interaction(eps: f64) -> Vec<InteractionTerm> {
    vec![
        InteractionTerm {
            coeff: eps,
            powers: [2, 0, 0, 0, 0, 0, 0, 0],
        },
        InteractionTerm {
            coeff: eps,
            powers: [0, 2, 0, 0, 0, 0, 0, 0],
        },
    ]
}

fn q(i: usize) -> Poly {
    Poly::var(8, q_index(i))
}

fn p(i: usize) -> Poly {
    Poly::var(8, p_index(i))
}

/// The eight quadratic invariants in the order used by `InteractionTerm`.
pub fn invariants() -> [Poly; 8] {
    let pi1 = |i: usize| q(i).pow(2).add(&q(i + 2).pow(2));
    let pi2 = |i: usize| p(i).pow(2).add(&p(i + 2).pow(2));
    let pi3 = |i: usize| p(i).mul(&q(i + 2)).sub(&p(i + 2).mul(&q(i)));
    let pi4 = |i: usize| q(i).mul(&p(i)).add(&q(i + 2).mul(&p(i + 2)));
    [pi1(1), pi1(2), pi2(1), pi2(2), pi3(1), pi3(2), pi4(1), pi4(2)]
}

pub fn interaction_poly(terms: &[InteractionTerm]) -> Poly {
    let inv = invariants();
    let mut f = Poly::zero(8);
    for t in terms {
        let mut m = Poly::constant(8, t.coeff);
        for (k, &e) in t.powers.iter().enumerate() {
            if e > 0 {
                m = m.mul(&inv[k].pow(e));
            }
        }
        f = f.add(&m);
    }
    f
}

/// Rotation generator of the particle planes, lifted to momenta.
pub fn rotation_generator() -> Mat {
    let r = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut x = Mat::zeros(8, 8);
    for b in 0..4 {
        x.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&r);
    }
    x
}

/// τ: (q3, q4, p3, p4) ↦ −(q3, q4, p3, p4).
pub fn reflection() -> Mat {
    Mat::from_diagonal(&nalgebra::DVector::from_fn(8, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Canonical form with q̇ = ∂h/∂p, i.e. Ω = [[0, I], [−I, 0]].
pub fn oscillator_form() -> SymplecticForm {
    SymplecticForm::standard(8).negated()
}

/// K = p3q1 − q3p1 − p2q4 + p4q2.
pub fn momentum_k() -> Poly {
    p(3).mul(&q(1))
        .sub(&q(3).mul(&p(1)))
        .sub(&p(2).mul(&q(4)))
        .add(&p(4).mul(&q(2)))
}

/// Family in λ := k.
pub fn coupled_oscillator_family(params: &OscillatorParams) -> Result<HamiltonianFamily> {
    let (m, g) = (params.m, params.gamma);
    if !(m > 0.0) || !g.is_finite() {
        return Err(HopfError::Invalid("need m > 0 and finite γ".into()));
    }
    for t in &params.f_coeffs {
        let deg: u32 = t.powers.iter().sum();
        if deg < 2 {
            return Err(HopfError::Invalid(
                "interaction terms must have degree ≥ 2 in the invariants".into(),
            ));
        }
    }
    let mut p2 = Poly::zero(8);
    let mut q2 = Poly::zero(8);
    for i in 1..=4 {
        p2 = p2.add(&p(i).pow(2));
        q2 = q2.add(&q(i).pow(2));
    }
    let cross = p(1).mul(&q(2)).sub(&p(2).mul(&q(1)))
        .add(&p(3).mul(&q(4)))
        .sub(&p(4).mul(&q(3)));
    let base = p2
        .scale(0.5 / m)
        .add(&q2.scale(g * g / (2.0 * m)))
        .add(&cross.scale(g / m))
        .add(&interaction_poly(&params.f_coeffs));
    let mut jet = PolyJet::from_poly(&base);
    jet.add_poly(&q2.scale(-0.5), 1);
    let group = GroupData {
        finite_generators: vec![reflection()],
        algebra_generators: vec![rotation_generator()],
        structure_tags: vec!["O(2)".into(), "rotation".into(), "reflection".into()],
    };
    let fam = HamiltonianFamily::new("coupled_oscillator", jet, oscillator_form(), group)?;
    fam.check_invariance(params.k_hopf(), 1e-10)?;
    Ok(fam)
}

/// Linearization from the block formula, for cross-checking.
pub fn linearization_formula(params: &OscillatorParams, k: f64) -> Mat {
    let (m, g) = (params.m, params.gamma);
    let j4 = mat::std_j(4);
    let i4 = Mat::identity(4, 4);
    mat::block2(
        &(&j4 * (-g / m)),
        &(&i4 / m),
        &(&i4 * (k - g * g / m)),
        &(&j4 * (-g / m)),
    )
}

/// λ_k = ±(1/m)√(km − 2γ² ± 2γ√(γ² − km)), each with multiplicity two.
pub fn eigenvalues_formula(params: &OscillatorParams, k: f64) -> Vec<Complex64> {
    let (m, g) = (params.m, params.gamma);
    let inner = Complex64::new(g * g - k * m, 0.0).sqrt();
    let mut out = Vec::new();
    for s in [1.0, -1.0] {
        let mu = (Complex64::new(k * m - 2.0 * g * g, 0.0) + inner * (2.0 * g * s)).sqrt() / m;
        for _ in 0..2 {
            out.push(mu);
            out.push(-mu);
        }
    }
    out
}

/// Complex coordinates z₁ = q1 + q4 + i(q2 − q3), z₂ = q1 − q4 + i(q2 + q3)
/// as a real 4×8 map to (Re z₁, Im z₁, Re z₂, Im z₂).
pub fn complex_coordinates() -> Mat {
    let mut z = Mat::zeros(4, 8);
    z[(0, q_index(1))] = 1.0;
    z[(0, q_index(4))] = 1.0;
    z[(1, q_index(2))] = 1.0;
    z[(1, q_index(3))] = -1.0;
    z[(2, q_index(1))] = 1.0;
    z[(2, q_index(4))] = -1.0;
    z[(3, q_index(2))] = 1.0;
    z[(3, q_index(3))] = 1.0;
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linearization_matches_formula() {
        let prm = OscillatorParams::default();
        let fam = coupled_oscillator_family(&prm).unwrap();
        for k in [0.9, 1.0, 1.3] {
            let a = fam.linearization(k).matrix;
            assert!(mat::max_abs(&(a - linearization_formula(&prm, k))) < 1e-14);
        }
    }

    #[test]
    fn eigenvalues_at_sample_points() {
        let prm = OscillatorParams::linear(1.0, 1.0);
        let e = eigenvalues_formula(&prm, 0.96);
        let mut ims: Vec<f64> = e.iter().map(|z| z.im.abs()).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] - 0.8).abs() < 1e-12 && (ims[7] - 1.2).abs() < 1e-12);
        for z in eigenvalues_formula(&prm, 1.04) {
            let w = z * z;
            assert!((w.re + 0.96).abs() < 1e-12 && (w.im.abs() - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_is_rotation_generator_momentum() {
        let fam = coupled_oscillator_family(&OscillatorParams::default()).unwrap();
        let k = fam.momentum(&rotation_generator());
        assert!(k.max_coeff_diff(&momentum_k()) < 1e-15);
    }

    #[test]
    fn pi1_quartic_expansion() {
        let f = interaction_poly(&[InteractionTerm {
            coeff: 0.05,
            powers: [2, 0, 0, 0, 0, 0, 0, 0],
        }]);
        let expect = q(1).pow(2).add(&q(3).pow(2)).pow(2).scale(0.05);
        assert!(f.max_coeff_diff(&expect) < 1e-16);
    }

    #[test]
    fn non_invariant_interaction_rejected() {
        let mut prm = OscillatorParams::default();
        prm.f_coeffs.push(InteractionTerm {
            coeff: 0.1,
            powers: [0, 0, 0, 0, 1, 0, 1, 0],
        });
        assert!(coupled_oscillator_family(&prm).is_err());
    }

    #[test]
    fn generators_invariance() {
        let fam = coupled_oscillator_family(&OscillatorParams::default()).unwrap();
        assert!(fam.invariance_defect(0.97, 100, 1) < 1e-10);
        let t = reflection();
        assert!((mat::max_abs(&(&t * &t)) - 1.0).abs() < 1e-15);
    }
}

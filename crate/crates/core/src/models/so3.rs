//! SO(3) acting on traceless symmetric 3×3 matrices, complexified: the
//! ten-dimensional V₀ = W ⊗ ℂ with S¹ acting by complex phase.
//!
//! Real coordinates on V₀ are x ↦ Σₖ (x₂ₖ + i x₂ₖ₊₁) B_{mₖ}, m = −2, …, 2.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::mat::{self, CMat, Mat, Vect};

pub const WEIGHTS: [i32; 5] = [-2, -1, 0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct So3Model {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Default for So3Model {
    fn default() -> Self {
        So3Model {
            b1: 1.0,
            b2: 0.5,
            b3: 1.0,
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// B_m for m ∈ {−2, …, 2}. B₀ is taken traceless: diag(−1, −1, 2).
pub fn basis_matrix(m: i32) -> CMat {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let b = match m {
        0 => CMat::from_row_slice(3, 3, &[-one, z, z, z, -one, z, z, z, one * 2.0]),
        1 => CMat::from_row_slice(3, 3, &[z, z, one, z, z, i, one, i, z]),
        2 => CMat::from_row_slice(3, 3, &[one, i, z, i, -one, z, z, z, z]),
        -1 | -2 => basis_matrix(-m).map(|x| x.conj()),
        _ => panic!("weight {m} out of range"),
    };
    b
}

pub fn basis() -> [CMat; 5] {
    WEIGHTS.map(basis_matrix)
}

fn hdot(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Components z_m of M = Σ z_m B_m (the B_m are Hermitian-orthogonal).
pub fn decompose(m: &CMat) -> [Complex64; 5] {
    WEIGHTS.map(|w| {
        let b = basis_matrix(w);
        hdot(&b, m) / hdot(&b, &b).re
    })
}

pub fn compose(z: &[Complex64; 5]) -> CMat {
    let mut acc = CMat::zeros(3, 3);
    for (k, &w) in WEIGHTS.iter().enumerate() {
        acc += basis_matrix(w) * z[k];
    }
    acc
}

pub fn from_real(x: &[f64]) -> CMat {
    let mut z = [c(0.0, 0.0); 5];
    for k in 0..5 {
        z[k] = c(x[2 * k], x[2 * k + 1]);
    }
    compose(&z)
}

pub fn to_real(m: &CMat) -> Vec<f64> {
    decompose(m).iter().flat_map(|z| [z.re, z.im]).collect()
}

fn check_rotation(a: &Mat) -> Result<()> {
    if a.nrows() != 3 || a.ncols() != 3 {
        return Err(HopfError::InvalidRotation("expected 3×3".into()));
    }
    let orth = mat::max_abs(&(a.transpose() * a - Mat::identity(3, 3)));
    let det = a.determinant();
    if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
        return Err(HopfError::InvalidRotation(format!("‖AᵀA − I‖ = {orth:.2e}, det = {det:.6}")));
    }
    Ok(())
}

/// ρ_A(M) = A⁻¹MA.
pub fn so3_rep5(a: &Mat, m: &CMat) -> Result<CMat> {
    check_rotation(a)?;
    let ac = mat::to_complex(a);
    Ok(ac.transpose() * m * ac)
}

/// Rotation by angle φ about a unit axis.
pub fn rotation(axis: [f64; 3], phi: f64) -> Mat {
    let n = Vect::from_row_slice(&axis).normalize();
    let k = Mat::from_row_slice(3, 3, &[0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0]);
    mat::expm(&(k * phi))
}

pub fn random_rotation(rng: &mut impl Rng) -> Mat {
    let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    rotation(axis, rng.gen_range(0.0..2.0 * PI))
}

/// Real 10×10 matrix of M ↦ e^{iθ}ρ_A(M).
pub fn action_matrix(a: &Mat, theta: f64) -> Result<Mat> {
    check_rotation(a)?;
    let mut out = Mat::zeros(10, 10);
    let ph = Complex64::from_polar(1.0, theta);
    for j in 0..10 {
        let mut e = vec![0.0; 10];
        e[j] = 1.0;
        let img = so3_rep5(a, &from_real(&e))? * ph;
        out.set_column(j, &Vect::from_vec(to_real(&img)));
    }
    Ok(out)
}

impl So3Model {
    /// b₁tr(MM̄)M + b₂tr(M²)M̄ + b₃(M²M̄ + M̄M² − ⅔tr(M²M̄)I).
    pub fn cubic(&self, m: &CMat) -> CMat {
        let mb = m.map(|x| x.conj());
        let m2 = m * m;
        let t1 = (m * &mb).trace();
        let t2 = m2.trace();
        let m2mb = &m2 * &mb;
        let t3 = m2mb.trace();
        let sym = &m2mb + &mb * &m2 - CMat::identity(3, 3) * (t3 * (2.0 / 3.0));
        m * (t1 * self.b1) + &mb * (t2 * self.b2) + sym * c(self.b3, 0.0)
    }
}

pub fn so3_cubic(model: &So3Model, m: &CMat) -> CMat {
    model.cubic(m)
}

/// Generator (R₃ about e_z, −2π/3) of Z̃₃; its fixed space is span{B₁, B₋₂}.
pub fn z3_generator() -> (Mat, f64) {
    (rotation([0.0, 0.0, 1.0], 2.0 * PI / 3.0), -2.0 * PI / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Z3Analysis {
    /// ĉᵢⱼ from restricting C to z₁B₁ + z₂B₋₂ at unit and diagonal points.
    pub chat: [[f64; 2]; 2],
    /// Same coefficients by least squares over random samples.
    pub chat_sampled: [[f64; 2]; 2],
    pub path_agreement: f64,
    /// (ĉ₁₁ − ĉ₂₁, ĉ₁₂ − ĉ₂₂).
    pub delta: [f64; 2],
    pub rank: usize,
    /// SO(2) weights on (z₁, z₂) and c₁ = w₂/w₁.
    pub weights: [f64; 2],
    pub c1: f64,
    pub condition_holds: bool,
    pub theorem_applies: bool,
    /// Largest component of C(M) off span{B₁, B₋₂}, and fixed-space defect of B₁, B₋₂.
    pub invariance_defect: f64,
}

fn restricted(z1: Complex64, z2: Complex64) -> CMat {
    basis_matrix(1) * z1 + basis_matrix(-2) * z2
}

fn fixed_components(model: &So3Model, z1: Complex64, z2: Complex64) -> (Complex64, Complex64, f64) {
    let z = decompose(&model.cubic(&restricted(z1, z2)));
    let off = [z[1], z[2], z[4]].iter().map(|x| x.norm()).fold(0.0, f64::max);
    (z[3], z[0], off)
}

pub fn so3_z3_analysis(model: &So3Model, seed: u64) -> Result<Z3Analysis> {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let (p1, _, o1) = fixed_components(model, one, zero);
    let (_, q2, o2) = fixed_components(model, zero, one);
    let (p3, q3, o3) = fixed_components(model, one, one);
    let c11 = p1.re;
    let c22 = q2.re;
    let chat = [[c11, p3.re - c11], [q3.re - c22, c22]];
    let mut defect = o1.max(o2).max(o3).max(p1.im.abs()).max(q2.im.abs());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 24;
    let mut a = [Mat::zeros(2 * samples, 2), Mat::zeros(2 * samples, 2)];
    let mut rhs = [Vect::zeros(2 * samples), Vect::zeros(2 * samples)];
    for s in 0..samples {
        let z1 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let z2 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (w1, w2, off) = fixed_components(model, z1, z2);
        defect = defect.max(off);
        let (x1, x2) = (z1.norm_sqr(), z2.norm_sqr());
        for (row, (w, z)) in [(w1, z1), (w2, z2)].into_iter().enumerate() {
            // w = (ĉx₁ + ĉx₂)z, split into real and imaginary parts.
            a[row][(2 * s, 0)] = x1 * z.re;
            a[row][(2 * s, 1)] = x2 * z.re;
            a[row][(2 * s + 1, 0)] = x1 * z.im;
            a[row][(2 * s + 1, 1)] = x2 * z.im;
            rhs[row][2 * s] = w.re;
            rhs[row][2 * s + 1] = w.im;
        }
    }
    let r1 = mat::lstsq(&a[0], &rhs[0], 1e-14);
    let r2 = mat::lstsq(&a[1], &rhs[1], 1e-14);
    let chat_sampled = [[r1[0], r1[1]], [r2[0], r2[1]]];
    let path_agreement = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (chat[i][j] - chat_sampled[i][j]).abs())
        .fold(0.0, f64::max);

    let (g, th) = z3_generator();
    let act = action_matrix(&g, th)?;
    for w in [1, -2] {
        let v = Vect::from_vec(to_real(&basis_matrix(w)));
        defect = defect.max((&act * &v - &v).amax());
    }

    let delta = [chat[0][0] - chat[1][0], chat[0][1] - chat[1][1]];
    let scale = chat.iter().flatten().map(|x| x.abs()).fold(1.0, f64::max);
    let rank = usize::from(delta.iter().any(|d| d.abs() > 1e-12 * scale));
    let weights = so2_weights()?;
    let c1 = weights[1] / weights[0];
    let condition_holds = (c1 - 1.0).abs() > 1e-12;
    Ok(Z3Analysis {
        chat,
        chat_sampled,
        path_agreement,
        delta,
        rank,
        weights,
        c1,
        condition_holds,
        theorem_applies: condition_holds && rank == 1,
        invariance_defect: defect,
    })
}

/// Weights of rotation about e_z on B₁ and B₋₂, read off the phase of ρ_{R(φ)}.
pub fn so2_weights() -> Result<[f64; 2]> {
    let phi = 0.1;
    let r = rotation([0.0, 0.0, 1.0], phi);
    let mut out = [0.0; 2];
    for (k, w) in [1, -2].into_iter().enumerate() {
        let b = basis_matrix(w);
        let img = so3_rep5(&r, &b)?;
        let idx = (w + 2) as usize;
        out[k] = decompose(&img)[idx].arg() / phi;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum So3Verdict {
    PeriodicOnly,
    O2Case,
    TorusCase,
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct So3IsotropyRecord {
    pub label: String,
    pub normalizer_quotient: String,
    pub fixed_dim: usize,
    pub verdict: So3Verdict,
}

/// Generators (rotation, phase) realizing each listed subgroup.
pub fn isotropy_generators(label: &str) -> Option<Vec<(Mat, f64)>> {
    let ez = [0.0, 0.0, 1.0];
    let ex = [1.0, 0.0, 0.0];
    let gens = match label {
        "D2" => vec![(rotation(ez, PI), 0.0), (rotation(ex, PI), 0.0)],
        // (R₄, π); (R₄, −π/2) fixes only B₁.
        "Z4~" => vec![(rotation(ez, PI / 2.0), PI)],
        "Z2~" => vec![(rotation(ez, PI), -PI)],
        "Z3~" => vec![z3_generator()],
        "Z2" => vec![(rotation(ez, PI), 0.0)],
        "1" => vec![],
        _ => return None,
    };
    Some(gens)
}

pub fn fixed_dimension(gens: &[(Mat, f64)]) -> Result<usize> {
    let mut stack = Mat::zeros(0, 10);
    for (a, th) in gens {
        let m = action_matrix(a, *th)? - Mat::identity(10, 10);
        let mut next = Mat::zeros(stack.nrows() + 10, 10);
        next.view_mut((0, 0), (stack.nrows(), 10)).copy_from(&stack);
        next.view_mut((stack.nrows(), 0), (10, 10)).copy_from(&m);
        stack = next;
    }
    if stack.nrows() == 0 {
        return Ok(10);
    }
    Ok(10 - mat::rank(&stack, 1e-9))
}

pub fn so3_isotropy_lattice() -> Vec<So3IsotropyRecord> {
    let rows = [
        ("D2", "D3×S¹", So3Verdict::PeriodicOnly),
        ("Z4~", "O(2)×S¹", So3Verdict::O2Case),
        ("Z2~", "O(2)×S¹", So3Verdict::O2Case),
        ("Z3~", "SO(2)×S¹", So3Verdict::TorusCase),
        ("Z2", "O(2)×S¹", So3Verdict::OutOfRange),
        ("1", "SO(3)×S¹", So3Verdict::OutOfRange),
    ];
    rows.iter()
        .map(|&(label, q, verdict)| So3IsotropyRecord {
            label: label.to_string(),
            normalizer_quotient: q.to_string(),
            fixed_dim: fixed_dimension(&isotropy_generators(label).expect("listed")).expect("valid rotations"),
            verdict,
        })
        .collect()
}

pub fn lookup(label: &str) -> Option<So3IsotropyRecord> {
    so3_isotropy_lattice().into_iter().find(|r| r.label == label)
}

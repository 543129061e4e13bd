//! Seeded property suites: invariance, symplecticity, Noether and
//! S¹-normalization. Each suite draws its own cases from a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::williamson_frame;
use crate::dynamics::{flow_with_derivatives, integrate, noether_defect, Hamiltonian, StepOptions};
use crate::error::Result;
use crate::linear::{
    canonical_matrix, quadratic_hamiltonian, random_symplectic, resonance_space, verify_equivariance, GroupData, HamMap,
    SymplecticForm,
};
use crate::mat::{self, Vect};
use crate::models::oscillator::{coupled_oscillator_family, momentum_k, InteractionTerm, OscillatorParams};
use crate::models::so3::{self, So3Model};
use crate::normalform::{equivariant_normalize, s1_average, s1_invariance_defect};
use crate::poly::{monomials_of_degree, Poly};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteResult {
    pub fn failures(&self) -> usize {
        self.checks.iter().map(|c| c.failures).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn failures(&self) -> usize {
        self.suites.iter().map(|s| s.failures()).sum()
    }

    pub fn pass(&self) -> bool {
        self.failures() == 0
    }
}

struct Collector {
    name: String,
    tolerance: f64,
    values: Vec<f64>,
}

impl Collector {
    fn new(name: &str, tolerance: f64) -> Self {
        Collector {
            name: name.into(),
            tolerance,
            values: Vec::new(),
        }
    }

    fn push(&mut self, v: f64) {
        self.values.push(v);
    }

    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            cases: self.values.len(),
            failures: self.values.iter().filter(|v| !(**v <= self.tolerance)).count(),
            worst: self.values.iter().cloned().fold(0.0, f64::max),
            name: self.name,
            tolerance: self.tolerance,
        }
    }
}

/// Random interaction built from products of the quadratic invariants that
/// are even in π₃ (so invariant under the reflection as well).
pub fn random_interaction(rng: &mut impl Rng, scale: f64) -> Vec<InteractionTerm> {
    let mut out = Vec::new();
    for a in 0..8 {
        for b in a..8 {
            let odd = usize::from(a == 4 || a == 5) + usize::from(b == 4 || b == 5);
            if odd == 1 || rng.gen_bool(0.6) {
                continue;
            }
            let mut powers = [0u32; 8];
            powers[a] += 1;
            powers[b] += 1;
            out.push(InteractionTerm {
                coeff: rng.gen_range(-1.0..1.0) * scale,
                powers,
            });
        }
    }
    out
}

fn random_params(rng: &mut impl Rng) -> OscillatorParams {
    OscillatorParams {
        m: rng.gen_range(0.7..1.5),
        gamma: rng.gen_range(0.7..1.5),
        f_coeffs: random_interaction(rng, 0.1),
    }
}

fn random_vec(rng: &mut impl Rng, d: usize, r: f64) -> Vect {
    Vect::from_fn(d, |_, _| rng.gen_range(-r..r))
}

pub fn invariance_suite(seed: u64, tol: &Tolerances) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ham = Collector::new("oscillator Hamiltonian invariance", 1e-10);
    let mut eq = Collector::new("resonance space equivariance", tol.equivariance);
    let mut cubic = Collector::new("SO(3) cubic equivariance", 1e-10);
    let mut phase = Collector::new("SO(3) cubic S¹ equivariance", 1e-10);
    for case in 0..6 {
        let p = random_params(&mut rng);
        let fam = coupled_oscillator_family(&p)?;
        let k0 = p.k_hopf();
        ham.push(fam.invariance_defect(k0 + rng.gen_range(-0.1..0.1), 40, seed ^ case));
        let r = resonance_space(&fam.linearization(k0), p.gamma / p.m, tol)?;
        eq.push(verify_equivariance(&r, &fam.group, tol.equivariance).max_residual());
    }
    let model = So3Model {
        b1: rng.gen_range(-1.0..1.0),
        b2: rng.gen_range(-1.0..1.0),
        b3: rng.gen_range(-1.0..1.0),
    };
    for _ in 0..20 {
        let a = so3::random_rotation(&mut rng);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = so3::from_real(&x);
        let lhs = model.cubic(&so3::so3_rep5(&a, &m)?);
        let rhs = so3::so3_rep5(&a, &model.cubic(&m))?;
        cubic.push(mat::cmax_abs(&(lhs - rhs)));
        let ph = num_complex::Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
        phase.push(mat::cmax_abs(&(model.cubic(&(&m * ph)) - model.cubic(&m) * ph)));
    }
    Ok(SuiteResult {
        suite: "invariance".into(),
        checks: vec![ham.finish(), eq.finish(), cubic.finish(), phase.finish()],
    })
}

pub fn symplecticity_suite(seed: u64, tol: &Tolerances) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = Collector::new("Williamson frame of random conjugates", tol.frame);
    let mut flow = Collector::new("midpoint flow Jacobian symplectic", 1e-9);
    for n in [1, 2] {
        for _ in 0..5 {
            let s = random_symplectic(4 * n, 0.3, &mut rng);
            let sinv = s.clone().try_inverse().expect("symplectic matrices are invertible");
            let a = &sinv * canonical_matrix(n, 1.0) * &s;
            let w = SymplecticForm::new(s.transpose() * mat::std_j(4 * n) * &s)?;
            let r = resonance_space(&HamMap::new(a, w, 1e-9)?, 1.0, tol)?;
            let f = williamson_frame(&r, &GroupData::trivial(), tol.frame)?;
            frame.push(f.residuals.canonical_form.max(f.residuals.symplectic_form));
        }
    }
    for _ in 0..4 {
        let p = random_params(&mut rng);
        let fam = coupled_oscillator_family(&p)?;
        let h = Hamiltonian::new(fam.hamiltonian(p.k_hopf() * 0.95), fam.form.clone())?;
        let x0 = random_vec(&mut rng, 8, 0.2);
        let opt = StepOptions::new(0.01, tol.inner_iteration);
        let (_, m, _) = flow_with_derivatives(&h, &x0, 1.0, 100, &opt)?;
        let om = &fam.form.matrix;
        flow.push(mat::max_abs(&(m.transpose() * om * &m - om)));
    }
    Ok(SuiteResult {
        suite: "symplecticity".into(),
        checks: vec![frame.finish(), flow.finish()],
    })
}

pub fn noether_suite(seed: u64, tol: &Tolerances) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bracket = Collector::new("{h, K} vanishes", tol.noether);
    let mut drift = Collector::new("K conserved along the flow", tol.drift);
    let k = momentum_k();
    for case in 0..4 {
        let p = random_params(&mut rng);
        let fam = coupled_oscillator_family(&p)?;
        let h = Hamiltonian::new(fam.hamiltonian(p.k_hopf() * 0.9), fam.form.clone())?;
        bracket.push(noether_defect(&h, &k, 40, seed ^ case));
        let x0 = random_vec(&mut rng, 8, 0.2);
        let opt = StepOptions::new(0.02, tol.inner_iteration);
        let traj = integrate(&h, &x0, 2.0 * std::f64::consts::PI, &opt, std::slice::from_ref(&k), 20)?;
        drift.push(traj.momentum_drift());
    }
    Ok(SuiteResult {
        suite: "noether".into(),
        checks: vec![bracket.finish(), drift.finish()],
    })
}

fn random_homogeneous(rng: &mut impl Rng, nvars: usize, d: usize) -> Poly {
    let basis = monomials_of_degree(nvars, d);
    let v = Vect::from_fn(basis.len(), |_, _| rng.gen_range(-1.0..1.0));
    Poly::from_coeff_vector(nvars, &basis, &v)
}

pub fn normalization_suite(seed: u64, tol: &Tolerances) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inv = Collector::new("normal form S¹-invariant", 1e-9);
    let mut res = Collector::new("homological residual", tol.homological);
    let mut quartic = Collector::new("quartic part equals S¹-average when h3 = 0", 1e-10);
    for n in [1, 2] {
        let d = 4 * n;
        let form = SymplecticForm::standard(d);
        let j = mat::std_j(2 * n);
        let s = mat::block_diag(&j, &j);
        let h2 = Poly::quadratic(&quadratic_hamiltonian(&HamMap {
            matrix: canonical_matrix(n, 1.0),
            form: form.clone(),
        }));
        for _ in 0..3 {
            let h3 = random_homogeneous(&mut rng, d, 3);
            let h4 = random_homogeneous(&mut rng, d, 4);
            let out = equivariant_normalize(&h2.add(&h3).add(&h4), &s, 1.0, &form, tol)?;
            let pts: Vec<Vec<f64>> = (0..12).map(|_| random_vec(&mut rng, d, 1.0).as_slice().to_vec()).collect();
            inv.push(s1_invariance_defect(&out.poly, &s, 16, &pts));
            res.push(out.homological_residual);
            let only4 = equivariant_normalize(&h2.add(&h4), &s, 1.0, &form, tol)?;
            let avg = s1_average(&h4, &s, 16);
            quartic.push(only4.poly.homogeneous(4).max_coeff_diff(&avg));
        }
    }
    Ok(SuiteResult {
        suite: "s1_normalization".into(),
        checks: vec![inv.finish(), res.finish(), quartic.finish()],
    })
}

pub fn run_selftest(seed: u64, tol: &Tolerances) -> Result<SelftestReport> {
    Ok(SelftestReport {
        seed,
        suites: vec![
            invariance_suite(seed, tol)?,
            symplecticity_suite(seed.wrapping_add(1), tol)?,
            noether_suite(seed.wrapping_add(2), tol)?,
            normalization_suite(seed.wrapping_add(3), tol)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_interaction_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(&mut rng);
        assert!(!p.f_coeffs.is_empty());
        assert!(coupled_oscillator_family(&p).is_ok());
    }

    #[test]
    fn default_seed_passes() {
        let r = run_selftest(42, &Tolerances::default()).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn collector_counts_nan_as_failure() {
        let mut c = Collector::new("x", 1.0);
        c.push(0.5);
        c.push(f64::NAN);
        c.push(2.0);
        let r = c.finish();
        assert_eq!((r.cases, r.failures), (3, 2));
    }
}

//! Jets, degree-4 S¹ normalization on U_ν∘, the Hessian coefficients
//! σ, ρ, τ, ψ and the Krein collision test.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::canonical::{CanonicalFrame, FrameCase};
use crate::error::{HopfError, Result};
use crate::family::HamiltonianFamily;
use crate::linear::SymplecticForm;
use crate::mat::{self, CMat, Mat};
use crate::poly::{monomials_of_degree, Poly, PolyJet};
use crate::tol::Tolerances;

pub fn taylor_at_origin(family: &HamiltonianFamily, order: usize) -> Result<PolyJet> {
    if order > 4 {
        return Err(HopfError::UnsupportedOrder(order));
    }
    let low = family.jet.low_order_terms();
    if !low.is_empty() {
        return Err(HopfError::H1Violation(format!("terms of degree < 2: {low:?}")));
    }
    Ok(family.jet.truncate(order))
}

/// Average of p over θ ↦ p(e^{θS}y), θ ∈ [0, 2π), using `samples` equispaced
/// angles (exact when samples exceeds the trigonometric degree).
pub fn s1_average(p: &Poly, s: &Mat, samples: usize) -> Poly {
    let mut acc = Poly::zero(p.nvars);
    for k in 0..samples {
        let th = 2.0 * PI * k as f64 / samples as f64;
        let r = mat::expm(&(s * th));
        acc = acc.add(&p.linear_substitute(&r));
    }
    acc.scale(1.0 / samples as f64).chop(1e-14 * p.coeff_scale().max(1e-300))
}

/// Sup over sampled angles and points of |p(e^{θS}v) − p(v)| / (1 + ‖v‖⁴).
pub fn s1_invariance_defect(p: &Poly, s: &Mat, angles: usize, points: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..angles {
        let th = 2.0 * PI * k as f64 / angles as f64;
        let r = mat::expm(&(s * th));
        for v in points {
            let vv = crate::mat::Vect::from_row_slice(v);
            let rv = &r * &vv;
            let d = (p.eval(rv.as_slice()) - p.eval(v)).abs() / (1.0 + vv.norm().powi(4));
            worst = worst.max(d);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedJet {
    pub poly: Poly,
    pub homological_residual: f64,
}

/// Matrix of W ↦ {H2, W} on homogeneous polynomials of degree d.
fn homological_matrix(h2: &Poly, pi: &Mat, nvars: usize, d: usize) -> (Vec<crate::poly::Monomial>, Mat) {
    let basis = monomials_of_degree(nvars, d);
    let mut t = Mat::zeros(basis.len(), basis.len());
    for (j, m) in basis.iter().enumerate() {
        let mut w = Poly::zero(nvars);
        w.add_term(m.clone(), 1.0);
        let b = h2.bracket(&w, pi);
        t.set_column(j, &b.coeff_vector(&basis));
    }
    (basis, t)
}

/// Degree-4 normalization with respect to the S¹ action e^{θ A_s/ν∘}.
///
/// Each degree d ∈ {3, 4} is split into its S¹-average and a remainder R;
/// W_d solves {H2, W_d} = −R and the Lie series H ∘ φ_W = H + {H, W} + ½{{H, W}, W}
/// carries the cubic generator into degree 4.
pub fn equivariant_normalize(jet: &Poly, a_s: &Mat, nu0: f64, form: &SymplecticForm, tol: &Tolerances) -> Result<NormalizedJet> {
    if jet.degree() > 4 {
        return Err(HopfError::UnsupportedOrder(jet.degree()));
    }
    let n = jet.nvars;
    let s = a_s / nu0;
    let samples = 16;
    let pi = form.poisson();
    let h2 = jet.homogeneous(2);
    let h3 = jet.homogeneous(3);
    let h4 = jet.homogeneous(4);
    let mut residual: f64 = 0.0;
    let mut solve = |rem: &Poly, d: usize| -> Poly {
        if rem.is_zero() {
            return Poly::zero(n);
        }
        let (basis, t) = homological_matrix(&h2, &pi, n, d);
        let r = rem.coeff_vector(&basis);
        let w = mat::lstsq(&t, &(-&r), 1e-11);
        let res = (&t * &w + &r).amax() / r.amax().max(1e-300);
        residual = residual.max(res * rem.coeff_scale());
        Poly::from_coeff_vector(n, &basis, &w)
    };
    let avg3 = s1_average(&h3, &s, samples);
    let w3 = solve(&h3.sub(&avg3), 3);
    let h4_mid = if w3.is_zero() {
        h4.clone()
    } else {
        let h2w = h2.bracket(&w3, &pi);
        h4.add(&h3.bracket(&w3, &pi)).add(&h2w.bracket(&w3, &pi).scale(0.5))
    };
    let avg4 = s1_average(&h4_mid, &s, samples);
    let _w4 = solve(&h4_mid.sub(&avg4), 4);
    if residual > tol.homological {
        return Err(HopfError::HomologicalResidual(residual));
    }
    Ok(NormalizedJet {
        poly: h2.add(&avg3).add(&avg4),
        homological_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffValues {
    pub sigma: f64,
    pub rho: f64,
    pub tau: f64,
    pub psi: f64,
}

impl CoeffValues {
    pub fn f1(&self) -> f64 {
        self.rho * self.sigma - self.tau * self.tau
    }
}

/// Hessian [[σI, τI + ψJ],[τI − ψJ, ρI]] on ℝ^{4n}.
pub fn coefficient_hessian(c: &CoeffValues, n: usize) -> Mat {
    let m2 = 2 * n;
    let i = Mat::identity(m2, m2);
    let j = mat::std_j(m2);
    mat::block2(
        &(&i * c.sigma),
        &(&i * c.tau + &j * c.psi),
        &(&i * c.tau - &j * c.psi),
        &(&i * c.rho),
    )
}

/// Least-squares fit of a symmetric frame Hessian onto the four-matrix basis.
pub fn fit_coefficients(h: &Mat) -> (CoeffValues, f64) {
    let m2 = h.nrows() / 2;
    let n = m2 / 2;
    let a = h.view((0, 0), (m2, m2)).into_owned();
    let b = h.view((0, m2), (m2, m2)).into_owned();
    let d = h.view((m2, m2), (m2, m2)).into_owned();
    let j = mat::std_j(m2);
    let c = CoeffValues {
        sigma: a.trace() / m2 as f64,
        rho: d.trace() / m2 as f64,
        tau: b.trace() / m2 as f64,
        psi: (j.transpose() * &b).trace() / m2 as f64,
    };
    let res = mat::max_abs(&(h - coefficient_hessian(&c, n)));
    (c, res)
}

/// Evaluates the S¹-averaged frame Hessian of the family at any λ.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    pub family: HamiltonianFamily,
    pub frame: CanonicalFrame,
    pub lambda0: f64,
}

impl CoefficientModel {
    pub fn new(family: HamiltonianFamily, frame: CanonicalFrame, lambda0: f64) -> Self {
        CoefficientModel {
            family,
            frame,
            lambda0,
        }
    }

    pub fn n(&self) -> usize {
        self.frame.n
    }

    /// S¹ generator A_s/ν∘ in frame coordinates: diag(J₂ₙ, J₂ₙ).
    pub fn s1_generator(&self) -> Mat {
        let j = mat::std_j(2 * self.n());
        mat::block_diag(&j, &j)
    }

    /// Frame-coordinate Hamiltonian at λ, sign-adjusted to the PLUS convention.
    pub fn frame_poly(&self, lambda: f64) -> Poly {
        self.family
            .hamiltonian(lambda)
            .linear_substitute(&self.frame.ambient)
            .scale(self.frame.case.sign())
    }

    pub fn frame_form(&self) -> SymplecticForm {
        SymplecticForm::standard(self.frame.dim())
    }

    /// d²ĥ_λ(0): S¹-average of the frame Hessian.
    pub fn hessian(&self, lambda: f64) -> Mat {
        let h = self.frame.ambient.transpose() * self.family.hessian(lambda) * &self.frame.ambient
            * self.frame.case.sign();
        let s = self.s1_generator();
        let samples = 8;
        let mut acc = Mat::zeros(h.nrows(), h.ncols());
        for k in 0..samples {
            let r = mat::expm(&(&s * (2.0 * PI * k as f64 / samples as f64)));
            acc += r.transpose() * &h * &r;
        }
        acc / samples as f64
    }

    pub fn fit(&self, lambda: f64) -> (CoeffValues, f64) {
        fit_coefficients(&self.hessian(lambda))
    }
}

pub trait CoefficientSource {
    fn coeffs_at(&self, lambda: f64) -> Result<CoeffValues>;
}

impl CoefficientSource for CoefficientModel {
    fn coeffs_at(&self, lambda: f64) -> Result<CoeffValues> {
        Ok(self.fit(lambda).0)
    }
}

impl<F: Fn(f64) -> CoeffValues> CoefficientSource for F {
    fn coeffs_at(&self, lambda: f64) -> Result<CoeffValues> {
        Ok(self(lambda))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianCoefficients {
    pub lambda0: f64,
    pub nu0: f64,
    pub n: usize,
    pub case: FrameCase,
    pub grid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub psi: Vec<f64>,
    pub at_lambda0: CoeffValues,
    /// First derivatives at λ∘ (central differences).
    pub d1: CoeffValues,
    /// Second derivatives at λ∘ (central differences).
    pub d2: CoeffValues,
    pub sigma_prime_0: f64,
    pub psi_prime_0: f64,
    /// σ′ from step h/2, for the Richardson consistency check.
    pub sigma_prime_half_step: f64,
    pub h_fd: f64,
    pub max_fit_residual: f64,
}

impl HessianCoefficients {
    /// Second-order Taylor model around λ∘.
    pub fn at(&self, lambda: f64) -> CoeffValues {
        let t = lambda - self.lambda0;
        let f = |v: f64, d1: f64, d2: f64| v + d1 * t + 0.5 * d2 * t * t;
        CoeffValues {
            sigma: f(self.at_lambda0.sigma, self.d1.sigma, self.d2.sigma),
            rho: f(self.at_lambda0.rho, self.d1.rho, self.d2.rho),
            tau: f(self.at_lambda0.tau, self.d1.tau, self.d2.tau),
            psi: f(self.at_lambda0.psi, self.d1.psi, self.d2.psi),
        }
    }

    /// Deviation of (σ, ρ, τ, ψ)(λ∘) from (0, −1, 0, ν∘).
    pub fn initial_condition_residual(&self) -> f64 {
        let c = self.at_lambda0;
        c.sigma
            .abs()
            .max((c.rho + 1.0).abs())
            .max(c.tau.abs())
            .max((c.psi - self.nu0).abs())
    }
}

impl CoefficientSource for HessianCoefficients {
    fn coeffs_at(&self, lambda: f64) -> Result<CoeffValues> {
        Ok(self.at(lambda))
    }
}

/// Chebyshev points of the first kind on [a, b].
pub fn chebyshev_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let x = ((2 * k + 1) as f64 * PI / (2 * m) as f64).cos();
            0.5 * (a + b) - 0.5 * (b - a) * x
        })
        .collect()
}

pub fn default_grid(lambda0: f64, tol: &Tolerances, scale: f64) -> Vec<f64> {
    let w = tol.grid_halfwidth * scale;
    chebyshev_grid(lambda0 - w, lambda0 + w, tol.grid_points.max(5.0) as usize)
}

pub fn extract_coefficients(model: &CoefficientModel, grid: &[f64], tol: &Tolerances) -> Result<HessianCoefficients> {
    let l0 = model.lambda0;
    let h = tol.h_fd * (1.0 + l0.abs());
    let mut max_res: f64 = 0.0;
    let mut scale: f64 = 1.0;
    let mut eval = |lam: f64| -> CoeffValues {
        let hm = model.hessian(lam);
        scale = scale.max(mat::max_abs(&hm));
        let (c, r) = fit_coefficients(&hm);
        max_res = max_res.max(r);
        c
    };
    let samples: Vec<CoeffValues> = grid.iter().map(|&l| eval(l)).collect();
    let c0 = eval(l0);
    let cp = eval(l0 + h);
    let cm = eval(l0 - h);
    let cp2 = eval(l0 + 0.5 * h);
    let cm2 = eval(l0 - 0.5 * h);
    if max_res > tol.fit * scale {
        return Err(HopfError::FitResidualExceeded(max_res));
    }
    let d1f = |a: f64, b: f64, step: f64| (a - b) / (2.0 * step);
    let d2f = |a: f64, m: f64, b: f64| (a - 2.0 * m + b) / (h * h);
    let d1 = CoeffValues {
        sigma: d1f(cp.sigma, cm.sigma, h),
        rho: d1f(cp.rho, cm.rho, h),
        tau: d1f(cp.tau, cm.tau, h),
        psi: d1f(cp.psi, cm.psi, h),
    };
    let d2 = CoeffValues {
        sigma: d2f(cp.sigma, c0.sigma, cm.sigma),
        rho: d2f(cp.rho, c0.rho, cm.rho),
        tau: d2f(cp.tau, c0.tau, cm.tau),
        psi: d2f(cp.psi, c0.psi, cm.psi),
    };
    Ok(HessianCoefficients {
        lambda0: l0,
        nu0: model.frame.nu0,
        n: model.n(),
        case: model.frame.case,
        grid: grid.to_vec(),
        sigma: samples.iter().map(|c| c.sigma).collect(),
        rho: samples.iter().map(|c| c.rho).collect(),
        tau: samples.iter().map(|c| c.tau).collect(),
        psi: samples.iter().map(|c| c.psi).collect(),
        at_lambda0: c0,
        sigma_prime_0: d1.sigma,
        psi_prime_0: d1.psi,
        sigma_prime_half_step: d1f(cp2.sigma, cm2.sigma, 0.5 * h),
        d1,
        d2,
        h_fd: h,
        max_fit_residual: max_res,
    })
}

/// μ = ±√(τ² − ρσ − ψ² ± 2|ψ|√(ρσ − τ²)).
pub fn eigenvalues_closed_form(c: &CoeffValues) -> [Complex64; 4] {
    let base = Complex64::new(c.tau * c.tau - c.rho * c.sigma - c.psi * c.psi, 0.0);
    let root = Complex64::new(c.f1(), 0.0).sqrt() * (2.0 * c.psi.abs());
    let a = (base + root).sqrt();
    let b = (base - root).sqrt();
    [a, -a, b, -b]
}

/// Largest distance in a greedy nearest matching of two multisets.
pub fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (mut bi, mut bd) = (usize::MAX, f64::INFINITY);
        for (i, y) in b.iter().enumerate() {
            if !used[i] && (x - y).norm() < bd {
                bd = (x - y).norm();
                bi = i;
            }
        }
        if bi == usize::MAX {
            return f64::INFINITY;
        }
        used[bi] = true;
        worst = worst.max(bd);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HopfClass {
    CollisionSplit,
    NoEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfEvent {
    pub lambda_star: f64,
    pub nu_star: f64,
    pub f1_sign_change: (i8, i8),
    pub sigma_prime: f64,
    pub classification: HopfClass,
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// f₁ = ρσ − τ² root bracketing on `samples` equispaced points.
pub fn krein_classify<S: CoefficientSource + ?Sized>(src: &S, interval: (f64, f64), samples: usize) -> Result<HopfEvent> {
    let (lo, hi) = interval;
    if !(hi > lo) || samples < 5 {
        return Err(HopfError::Invalid("need lo < hi and at least 5 samples".into()));
    }
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let fs: Vec<f64> = xs
        .iter()
        .map(|&x| src.coeffs_at(x).map(|c| c.f1()))
        .collect::<Result<_>>()?;
    let fscale = fs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    for i in 0..samples - 1 {
        let (a, b) = (fs[i], fs[i + 1]);
        if a == 0.0 || (a > 0.0) != (b > 0.0) {
            let root = if a == 0.0 {
                xs[i]
            } else {
                bisect(|x| src.coeffs_at(x).map(|c| c.f1()), xs[i], xs[i + 1], a)?
            };
            let c = src.coeffs_at(root)?;
            let h = 1e-4 * (1.0 + root.abs());
            let sp = (src.coeffs_at(root + h)?.sigma - src.coeffs_at(root - h)?.sigma) / (2.0 * h);
            let class = if sp.abs() > 1e-8 && a != 0.0 {
                HopfClass::CollisionSplit
            } else {
                HopfClass::NoEvent
            };
            return Ok(HopfEvent {
                lambda_star: root,
                nu_star: c.psi.abs(),
                f1_sign_change: (a.signum() as i8, b.signum() as i8),
                sigma_prime: sp,
                classification: class,
            });
        }
    }
    let min_abs = fs.iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
    if min_abs <= 1e-12 * fscale.max(1.0) {
        let i = fs.iter().position(|f| f.abs() == min_abs).unwrap();
        let c = src.coeffs_at(xs[i])?;
        return Ok(HopfEvent {
            lambda_star: xs[i],
            nu_star: c.psi.abs(),
            f1_sign_change: (0, 0),
            sigma_prime: 0.0,
            classification: HopfClass::NoEvent,
        });
    }
    Err(HopfError::NoRoot(format!("f1 keeps its sign on [{lo}, {hi}]")))
}

/// Located Krein collision of the linearization, before any frame exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionLocation {
    pub lambda: f64,
    pub nu: f64,
    /// Number of eigenvalues in the colliding group (4n).
    pub group_size: usize,
    pub bracket: (f64, f64),
}

/// Riesz projector onto the eigenvalues inside the two circles |z ∓ iν̃| = r.
fn group_projector(a: &Mat, nu: f64, r: f64) -> CMat {
    let n = a.nrows();
    let ac = mat::to_complex(a);
    let nodes = 96;
    let mut p = CMat::zeros(n, n);
    for k in 0..nodes {
        let th = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
        let e = Complex64::new(th.cos(), th.sin());
        let z = Complex64::new(0.0, nu) + e * r;
        let res = (CMat::identity(n, n) * z - &ac).try_inverse().expect("contour avoids spectrum");
        p += res * (e * r / nodes as f64);
    }
    let conj = p.map(|x| x.conj());
    p + conj
}

/// Smooth collision test D = (w₁ − w₂)² for the squared eigenvalues w of the
/// group, from traces of A²P and A⁴P; D > 0 elliptic, D < 0 quadruplet.
pub fn collision_test_function(a: &Mat, nu: f64, r: f64) -> (f64, f64, usize) {
    let p = group_projector(a, nu, r);
    let ac = mat::to_complex(a);
    let a2 = &ac * &ac;
    let m = p.trace().re.round() as usize;
    let two_n = (m / 2).max(1) as f64;
    let s1 = (&a2 * &p).trace().re / two_n;
    let s2 = (&a2 * &a2 * &p).trace().re / two_n;
    (2.0 * s2 - s1 * s1, s1, m)
}

/// Scan the linearization for eigenvalues leaving the imaginary axis and
/// refine the collision with the smooth trace test.
pub fn locate_collision(family: &HamiltonianFamily, interval: (f64, f64), scan_points: usize) -> Result<CollisionLocation> {
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(HopfError::Invalid("empty λ interval".into()));
    }
    let m = scan_points.max(5);
    let xs: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let spectra: Vec<Vec<Complex64>> = xs
        .iter()
        .map(|&x| mat::eigenvalues(&family.linearization(x).matrix))
        .collect();
    let off_axis = |sp: &Vec<Complex64>| {
        let scale = sp.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        sp.iter().filter(|z| z.re.abs() > 1e-6 * scale).count()
    };
    for i in 0..m - 1 {
        let (c0, c1) = (off_axis(&spectra[i]), off_axis(&spectra[i + 1]));
        if c0 == c1 {
            continue;
        }
        let hyper = if c1 > c0 { &spectra[i + 1] } else { &spectra[i] };
        let scale = hyper.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let quad: Vec<&Complex64> = hyper.iter().filter(|z| z.re.abs() > 1e-6 * scale).collect();
        let nu = quad.iter().map(|z| z.im.abs()).sum::<f64>() / quad.len() as f64;
        if nu < 1e-8 * scale {
            continue;
        }
        // Radius: half the gap to the nearest eigenvalue outside the group.
        let r = {
            let mut gap = f64::INFINITY;
            for sp in [&spectra[i], &spectra[i + 1]] {
                let mut d: Vec<f64> = sp.iter().map(|z| (z - Complex64::new(0.0, nu)).norm()).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let inside = quad.len() / 2;
                if d.len() > inside {
                    gap = gap.min(d[inside]);
                }
            }
            if gap.is_finite() {
                (0.5 * gap).max(0.5 * quad.iter().map(|z| (*z - Complex64::new(0.0, nu)).norm()).fold(0.0, f64::max) + 1e-3)
            } else {
                0.5 * nu
            }
        }
        .min(0.9 * nu);
        let test = |x: f64| -> Result<f64> {
            Ok(collision_test_function(&family.linearization(x).matrix, nu, r).0)
        };
        let fa = test(xs[i])?;
        let fb = test(xs[i + 1])?;
        if (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let root = bisect(test, xs[i], xs[i + 1], fa)?;
        let (_, s1, group) = collision_test_function(&family.linearization(root).matrix, nu, r);
        return Ok(CollisionLocation {
            lambda: root,
            nu: (-0.5 * s1).max(0.0).sqrt(),
            group_size: group,
            bracket: (xs[i], xs[i + 1]),
        });
    }
    Err(HopfError::NoRoot(format!(
        "no eigenvalue collision on [{lo}, {hi}]"
    )))
}

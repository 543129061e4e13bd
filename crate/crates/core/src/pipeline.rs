//! Orchestration: from a family and a parameter window to the reduction
//! data, branch predictions and certified RPOs.

use serde::{Deserialize, Serialize};

use crate::branches::{torus_coefficients, O2Coefficients};
use crate::canonical::{williamson_frame, CanonicalFrame};
use crate::dynamics::{certify_rpo, shooting_refine, Hamiltonian, RpoCertificate, ShootingResult, StepOptions};
use crate::error::{HopfError, Result};
use crate::family::HamiltonianFamily;
use crate::linear::{resonance_space, ResonanceData};
use crate::mat::{self, Mat, Vect};
use crate::normalform::{
    default_grid, eigenvalues_closed_form, equivariant_normalize, extract_coefficients, krein_classify, locate_collision,
    spectrum_distance, CoefficientModel, CollisionLocation, HessianCoefficients, HopfClass, HopfEvent, NormalizedJet,
};
use crate::reduction::{v1_derivative, ReductionData};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub sigma_prime: f64,
    pub richardson_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub family: HamiltonianFamily,
    pub collision: CollisionLocation,
    pub resonance: ResonanceData,
    pub frame: CanonicalFrame,
    pub coefficients: HessianCoefficients,
    pub event: HopfEvent,
    pub normal_form: NormalizedJet,
    pub reduction: ReductionData,
    pub hypotheses: HypothesisReport,
    /// Largest distance between closed-form and numeric spectra on the grid.
    pub spectrum_check: f64,
    /// d²ĥ(0) in frame coordinates minus [[0, νJ],[−νJ, −I]].
    pub canonical_hessian_residual: f64,
}

impl Analysis {
    pub fn lambda0(&self) -> f64 {
        self.coefficients.lambda0
    }

    pub fn nu0(&self) -> f64 {
        self.coefficients.nu0
    }

    pub fn model(&self) -> CoefficientModel {
        CoefficientModel::new(self.family.clone(), self.frame.clone(), self.lambda0())
    }
}

pub fn analyze(family: &HamiltonianFamily, interval: (f64, f64), tol: &Tolerances) -> Result<Analysis> {
    let collision = locate_collision(family, interval, 17)?;
    let lambda0 = collision.lambda;
    let lin = family.linearization(lambda0);
    let resonance = resonance_space(&lin, collision.nu, tol)?;
    let frame = williamson_frame(&resonance, &family.group, tol.frame)?;
    let model = CoefficientModel::new(family.clone(), frame.clone(), lambda0);
    let scale = (interval.1 - interval.0).abs().max(1e-12);
    let grid = default_grid(lambda0, tol, scale);
    let coefficients = extract_coefficients(&model, &grid, tol)?;
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let event = krein_classify(&model, (lo, hi), 9)?;
    let jet = model.frame_poly(lambda0).truncate(4);
    let s = model.s1_generator() * frame.nu0;
    let normal_form = equivariant_normalize(&jet, &s, frame.nu0, &model.frame_form(), tol)?;
    let reduction = ReductionData::new(coefficients.clone(), &normal_form.poly, tol.trust_radius)?;

    let mut spectrum_check: f64 = 0.0;
    for &l in &grid {
        let c = model.fit(l).0;
        let closed = eigenvalues_closed_form(&c);
        let numeric = mat::eigenvalues(&(mat::std_j(frame.dim()) * model.hessian(l)));
        let mut cl = Vec::new();
        for z in closed {
            for _ in 0..frame.n {
                cl.push(z);
            }
        }
        spectrum_check = spectrum_check.max(spectrum_distance(&cl, &numeric));
    }
    let n2 = 2 * frame.n;
    let j = mat::std_j(n2);
    let target = mat::block2(&Mat::zeros(n2, n2), &(&j * frame.nu0), &(&j * -frame.nu0), &(-Mat::identity(n2, n2)));
    let canonical_hessian_residual = mat::max_abs(&(model.hessian(lambda0) - target));
    let sp = coefficients.sigma_prime_0;
    let hypotheses = HypothesisReport {
        h1: true,
        h2: resonance.harmonics == [1],
        h3: frame.residuals.canonical_form < tol.frame,
        h4: sp.abs() > 1e-8 && event.classification == HopfClass::CollisionSplit,
        sigma_prime: sp,
        richardson_gap: (sp - coefficients.sigma_prime_half_step).abs(),
    };
    if !hypotheses.h4 {
        return Err(HopfError::H4Violation(format!("σ′(λ∘) = {sp:.3e}")));
    }
    Ok(Analysis {
        family: family.clone(),
        collision,
        resonance,
        frame,
        coefficients,
        event,
        normal_form,
        reduction,
        hypotheses,
        spectrum_check,
        canonical_hessian_residual,
    })
}

/// O(2) data in complex coordinates z = Ẑv on V₀ (Ẑ isometric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct O2Reduction {
    pub coefficients: O2Coefficients,
    /// Ẑ: V₀ frame coordinates → (Re z₁, Im z₁, Re z₂, Im z₂).
    #[serde(with = "crate::mat::rowmajor")]
    pub zmap: Mat,
    /// V₀ block of the rotation generator in frame coordinates.
    #[serde(with = "crate::mat::rowmajor")]
    pub rotation_v0: Mat,
    /// Diagonal of J₂ₙξ₀ in z for unit drift.
    pub jxi_diag: [f64; 2],
}

/// `zmap_ambient` maps ambient states to (Re z₁, Im z₁, Re z₂, Im z₂).
pub fn o2_reduction(a: &Analysis, zmap_ambient: &Mat, rotation: &Mat) -> Result<O2Reduction> {
    let n2 = 2 * a.frame.n;
    if n2 != 4 {
        return Err(HopfError::DimensionMismatch("O(2) reduction needs dim V₀ = 4".into()));
    }
    let zf = zmap_ambient * a.frame.ambient.columns(0, n2);
    let chat = torus_coefficients(&a.reduction.quartic, &zf)?;
    let c = (zf.transpose() * &zf)[(0, 0)];
    let zh = &zf / c.sqrt();
    let rot = a.frame.to_frame(&a.resonance, rotation);
    let rotation_v0 = rot.view((0, 0), (n2, n2)).into_owned();
    let jxi = &zh * (mat::std_j(n2) * &rotation_v0) * zh.transpose();
    let off = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|&(i, j)| i / 2 != j / 2 || (i != j && i / 2 == j / 2));
    let mut worst: f64 = 0.0;
    for (i, j) in off {
        worst = worst.max(jxi[(i, j)].abs());
    }
    if worst > 1e-8 {
        return Err(HopfError::BlockStructureViolation(format!("J·ξ not diagonal in z ({worst:.2e})")));
    }
    Ok(O2Reduction {
        coefficients: O2Coefficients {
            a: chat[(0, 0)],
            b: chat[(0, 1)],
            nu0: a.nu0(),
            sigma_prime: a.coefficients.sigma_prime_0,
        },
        zmap: zh,
        rotation_v0,
        jxi_diag: [jxi[(0, 0)], jxi[(2, 2)]],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpoPrediction {
    pub r: f64,
    /// Relative detuning: ζ = ν∘(1 + α).
    pub alpha: f64,
    pub xi: f64,
    pub z_sq: [f64; 2],
    pub lambda: f64,
    pub frame_state: Vec<f64>,
    pub ambient_state: Vec<f64>,
    pub tau_guess: f64,
}

/// Solve the truncated reduced equations on the principal stratum
/// (both z's nonzero) and lift the point through v₁ and the frame.
pub fn o2_predict(a: &Analysis, o2: &O2Reduction, r: f64, alpha: f64, xi: f64) -> Result<RpoPrediction> {
    let c = &o2.coefficients;
    let (sp, pp) = (c.sigma_prime, a.coefficients.psi_prime_0);
    let aa = alpha * c.nu0;
    let xi0 = &o2.rotation_v0 * xi;
    let zi = o2.zmap.transpose();
    let e_mat = &o2.zmap * (-(&xi0 * &xi0)) * &zi;
    let e = [e_mat[(0, 0)], e_mat[(2, 2)]];
    let d = [o2.jxi_diag[0] * xi, o2.jxi_diag[1] * xi];
    let chat = [[c.a, c.b], [c.b, c.a]];
    // Unknowns (x₁, x₂, μ); equation i: (σ′ − 2ψ′α + 2ψ′dᵢ)μ + Σⱼ ĉᵢⱼxⱼ = −α² − eᵢ + 2αdᵢ.
    let mut m = Mat::zeros(3, 3);
    let mut rhs = Vect::zeros(3);
    for i in 0..2 {
        m[(i, 0)] = chat[i][0];
        m[(i, 1)] = chat[i][1];
        m[(i, 2)] = sp - 2.0 * pp * aa + 2.0 * pp * d[i];
        rhs[i] = -aa * aa - e[i] + 2.0 * aa * d[i];
    }
    m[(2, 0)] = 1.0;
    m[(2, 1)] = 1.0;
    rhs[2] = r * r;
    let sol = m.lu().solve(&rhs).ok_or_else(|| HopfError::DegenerateCoefficients("singular O(2) system".into()))?;
    if sol[0] <= 0.0 || sol[1] <= 0.0 {
        return Err(HopfError::Invalid(format!(
            "no admissible point: |z₁|² = {:.3e}, |z₂|² = {:.3e}",
            sol[0], sol[1]
        )));
    }
    let w = Vect::from_vec(vec![sol[0].sqrt(), 0.0, sol[1].sqrt(), 0.0]);
    let v0 = &zi * w;
    let lambda = a.lambda0() + sol[2];
    let dv1 = v1_derivative(&a.coefficients, aa, lambda, &xi0)?;
    let v1 = dv1 * &v0;
    let y = Vect::from_iterator(8, v0.iter().chain(v1.iter()).cloned());
    let x = a.frame.to_ambient(&y);
    Ok(RpoPrediction {
        r,
        alpha,
        xi,
        z_sq: [sol[0], sol[1]],
        lambda,
        frame_state: y.as_slice().to_vec(),
        ambient_state: x.as_slice().to_vec(),
        tau_guess: 2.0 * std::f64::consts::PI / (c.nu0 * (1.0 + alpha)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub prediction: RpoPrediction,
    pub shooting: ShootingResult,
    pub certificate: RpoCertificate,
    pub period_ratio: f64,
}

/// Refine a prediction by shooting on h_λ − K^ξ and certify it as an RPO of h_λ.
pub fn refine_and_certify(family: &HamiltonianFamily, pred: &RpoPrediction, rotation: &Mat, nu0: f64, tol: &Tolerances) -> Result<EndToEnd> {
    let xi_amb = rotation * pred.xi;
    let h = family.hamiltonian(pred.lambda);
    let k = family.momentum(&xi_amb);
    let heff = Hamiltonian::new(h.sub(&k), family.form.clone())?;
    let hfull = Hamiltonian::new(h, family.form.clone())?;
    let steps = tol.steps_per_period.max(10.0) as usize;
    let opt = StepOptions::new(0.0, tol.inner_iteration).order4();
    let x0 = Vect::from_row_slice(&pred.ambient_state);
    let shot = shooting_refine(
        &heff,
        &x0,
        pred.tau_guess,
        std::slice::from_ref(rotation),
        steps,
        &opt,
        tol.shooting,
        tol.max_iter(),
        tol.trust_radius,
    )?;
    let v = Vect::from_row_slice(&shot.v);
    let cert = certify_rpo(&hfull, &v, shot.tau, &xi_amb, steps, 16, &opt, tol.nontrivial_ratio)?;
    Ok(EndToEnd {
        prediction: pred.clone(),
        period_ratio: shot.tau / (2.0 * std::f64::consts::PI / nu0),
        shooting: shot,
        certificate: cert,
    })
}

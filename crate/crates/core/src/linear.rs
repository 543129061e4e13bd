//! Linear Hamiltonian algebra: symplectic forms, infinitesimally symplectic
//! maps, Jordan–Chevalley splitting and the resonance space U_ν∘.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::mat::{self, rowmajor, CMat, Mat, Vect};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticForm {
    #[serde(with = "rowmajor")]
    pub matrix: Mat,
}

impl SymplecticForm {
    pub fn new(matrix: Mat) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(HopfError::InvalidForm(format!("shape {r}x{c}")));
        }
        let scale = mat::max_abs(&matrix).max(1.0);
        let asym = mat::max_abs(&(&matrix + matrix.transpose()));
        if asym > 1e-12 * scale {
            return Err(HopfError::InvalidForm(format!("not antisymmetric ({asym:.3e})")));
        }
        if mat::rank(&matrix, 1e-12) < r {
            return Err(HopfError::InvalidForm("degenerate".into()));
        }
        Ok(SymplecticForm { matrix })
    }

    /// The standard form J₂ₙ.
    pub fn standard(dim: usize) -> Self {
        SymplecticForm {
            matrix: mat::std_j(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn pair(&self, u: &Vect, v: &Vect) -> f64 {
        (u.transpose() * &self.matrix * v)[(0, 0)]
    }

    /// Π with X_h = Π ∇h and {F, G} = ∇Fᵀ Π ∇G.
    pub fn poisson(&self) -> Mat {
        -self.matrix.clone().try_inverse().expect("nondegenerate form")
    }

    pub fn negated(&self) -> Self {
        SymplecticForm {
            matrix: -&self.matrix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticCheck {
    pub ok: bool,
    pub residual: f64,
}

/// ‖AᵀΩ + ΩA‖∞ against `tol` scaled by max(1, ‖A‖∞·‖Ω‖∞).
pub fn check_infinitesimally_symplectic(a: &Mat, w: &SymplecticForm, tol: f64) -> Result<SymplecticCheck> {
    if a.nrows() != a.ncols() || a.nrows() != w.dim() {
        return Err(HopfError::DimensionMismatch(format!(
            "A is {}x{}, form is {}",
            a.nrows(),
            a.ncols(),
            w.dim()
        )));
    }
    let residual = mat::inf_norm(&(a.transpose() * &w.matrix + &w.matrix * a));
    let scale = (mat::inf_norm(a) * mat::inf_norm(&w.matrix)).max(1.0);
    Ok(SymplecticCheck {
        ok: residual < tol * scale,
        residual,
    })
}

/// Infinitesimally symplectic map together with its form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamMap {
    #[serde(with = "rowmajor")]
    pub matrix: Mat,
    pub form: SymplecticForm,
}

impl HamMap {
    pub fn new(matrix: Mat, form: SymplecticForm, tol: f64) -> Result<Self> {
        let chk = check_infinitesimally_symplectic(&matrix, &form, tol)?;
        if !chk.ok {
            return Err(HopfError::NotHamiltonian(chk.residual));
        }
        Ok(HamMap { matrix, form })
    }

    /// A = Π·H for a symmetric Hessian H.
    pub fn from_hessian(h: &Mat, form: SymplecticForm) -> Self {
        HamMap {
            matrix: form.poisson() * h,
            form,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Hessian H of Q_A(v) = ½ω(Av, v) = ½ vᵀHv, H = sym(AᵀΩ).
pub fn quadratic_hamiltonian(a: &HamMap) -> Mat {
    let m = a.matrix.transpose() * &a.form.matrix;
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCluster {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

impl EigenCluster {
    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanChevalley {
    #[serde(with = "rowmajor")]
    pub semisimple: Mat,
    #[serde(with = "rowmajor")]
    pub nilpotent: Mat,
    pub clusters: Vec<EigenCluster>,
}

impl JordanChevalley {
    pub fn reconstruction_residual(&self, a: &Mat) -> f64 {
        mat::max_abs(&(&self.semisimple + &self.nilpotent - a))
    }

    pub fn commutator_residual(&self) -> f64 {
        mat::max_abs(&mat::commutator(&self.semisimple, &self.nilpotent))
    }

    pub fn nilpotency_residual(&self) -> f64 {
        let n = self.nilpotent.nrows();
        let mut p = Mat::identity(n, n);
        for _ in 0..n {
            p = &p * &self.nilpotent;
        }
        mat::max_abs(&p)
    }
}

/// Cluster eigenvalues by single linkage at distance `tol`.
pub fn cluster_eigenvalues(eigs: &[Complex64], tol: f64) -> Result<Vec<EigenCluster>> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        l[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() < tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    // Reject near-misses: distinct clusters closer than 2·tol.
    for a in 0..groups.len() {
        for b in (a + 1)..groups.len() {
            let d = groups[a]
                .1
                .iter()
                .flat_map(|&i| groups[b].1.iter().map(move |&j| (eigs[i] - eigs[j]).norm()))
                .fold(f64::INFINITY, f64::min);
            if d < 2.0 * tol {
                return Err(HopfError::ClusteringAmbiguity(d));
            }
        }
    }
    let mut clusters: Vec<EigenCluster> = groups
        .iter()
        .map(|(_, idx)| {
            let m: Complex64 = idx.iter().map(|&i| eigs[i]).sum::<Complex64>() / idx.len() as f64;
            EigenCluster {
                re: m.re,
                im: m.im,
                multiplicity: idx.len(),
            }
        })
        .collect();
    // Conjugate-symmetric means, so that real combinations stay real.
    let snapshot = clusters.clone();
    for c in clusters.iter_mut() {
        if let Some(partner) = snapshot
            .iter()
            .find(|d| (d.mean() - c.mean().conj()).norm() < tol && d.multiplicity == c.multiplicity)
        {
            c.re = 0.5 * (c.re + partner.re);
            c.im = 0.5 * (c.im - partner.im);
        }
        if c.im.abs() < tol {
            c.im = 0.0;
        }
    }
    clusters.sort_by(|a, b| {
        a.im.partial_cmp(&b.im)
            .unwrap()
            .then(a.re.partial_cmp(&b.re).unwrap())
    });
    Ok(clusters)
}

fn cpoly_apply(a: &CMat, shift: Complex64, power: usize) -> CMat {
    let n = a.nrows();
    let s = a - CMat::identity(n, n) * shift;
    let mut p = CMat::identity(n, n);
    for _ in 0..power {
        p = &p * &s;
    }
    p
}

/// Spectral projector onto the generalized eigenspace of `clusters[k]`.
///
/// P_k = q_k(A)·r_k(A − μ_k) with q_k = ∏_{j≠k}(x − μ_j)^{m_j} and r_k the
/// Taylor polynomial of 1/q_k at μ_k of degree m_k − 1.
pub fn spectral_projector(a: &Mat, clusters: &[EigenCluster], k: usize) -> CMat {
    let n = a.nrows();
    let ac = mat::to_complex(a);
    let mk = clusters[k].multiplicity;
    let muk = clusters[k].mean();
    // Taylor series of 1/q_k in t = x − μ_k, truncated at degree mk − 1.
    let mut series = vec![Complex64::new(0.0, 0.0); mk];
    series[0] = Complex64::new(1.0, 0.0);
    let mut q = CMat::identity(n, n);
    for (j, c) in clusters.iter().enumerate() {
        if j == k {
            continue;
        }
        let d = muk - c.mean();
        let m = c.multiplicity as i64;
        // (d + t)^{-m} = d^{-m} Σ_i C(-m, i) (t/d)^i
        let mut factor = vec![Complex64::new(0.0, 0.0); mk];
        let mut binom = 1.0;
        for (i, f) in factor.iter_mut().enumerate() {
            if i > 0 {
                binom *= (-m - (i as i64 - 1)) as f64 / i as f64;
            }
            *f = binom * d.powi(-(m as i32) - i as i32);
        }
        let mut next = vec![Complex64::new(0.0, 0.0); mk];
        for a_i in 0..mk {
            for b_i in 0..(mk - a_i) {
                next[a_i + b_i] += series[a_i] * factor[b_i];
            }
        }
        series = next;
        q = &q * cpoly_apply(&ac, c.mean(), c.multiplicity);
    }
    let shifted = &ac - CMat::identity(n, n) * muk;
    let mut r = CMat::zeros(n, n);
    let mut pw = CMat::identity(n, n);
    for s in series.iter() {
        r += &pw * *s;
        pw = &pw * &shifted;
    }
    q * r
}

pub fn jordan_chevalley(a: &Mat, tol: &Tolerances) -> Result<JordanChevalley> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(HopfError::DimensionMismatch("non-square matrix".into()));
    }
    let norm = mat::inf_norm(a).max(f64::MIN_POSITIVE);
    if mat::max_abs(a) == 0.0 {
        return Ok(JordanChevalley {
            semisimple: Mat::zeros(n, n),
            nilpotent: Mat::zeros(n, n),
            clusters: vec![EigenCluster {
                re: 0.0,
                im: 0.0,
                multiplicity: n,
            }],
        });
    }
    let eigs = mat::eigenvalues(a);
    let clusters = cluster_eigenvalues(&eigs, tol.cluster * norm)?;
    let mut s = CMat::zeros(n, n);
    for k in 0..clusters.len() {
        s += spectral_projector(a, &clusters, k) * clusters[k].mean();
    }
    let semisimple = s.map(|z| z.re);
    let nilpotent = a - &semisimple;
    Ok(JordanChevalley {
        semisimple,
        nilpotent,
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceData {
    /// Orthonormal columns spanning U_ν∘ in ambient coordinates.
    #[serde(with = "rowmajor")]
    pub basis: Mat,
    pub nu0: f64,
    pub period: f64,
    #[serde(with = "rowmajor")]
    pub a_s_restricted: Mat,
    #[serde(with = "rowmajor")]
    pub a_n_restricted: Mat,
    pub omega_restricted: SymplecticForm,
    /// Harmonics k with ±ikν∘ in the spectrum.
    pub harmonics: Vec<u32>,
    pub kmax: u32,
    pub jc: JordanChevalley,
    pub form: SymplecticForm,
}

impl ResonanceData {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn a_restricted(&self) -> Mat {
        &self.a_s_restricted + &self.a_n_restricted
    }

    /// Residual of e^{A_s T}|_U − I.
    pub fn period_residual(&self) -> f64 {
        let e = mat::expm(&(&self.a_s_restricted * self.period));
        mat::max_abs(&(e - Mat::identity(self.dim(), self.dim())))
    }
}

pub fn resonance_space(a: &HamMap, nu0: f64, tol: &Tolerances) -> Result<ResonanceData> {
    if !(nu0 > 0.0) {
        return Err(HopfError::Invalid("ν∘ must be positive".into()));
    }
    let jc = jordan_chevalley(&a.matrix, tol)?;
    let norm = mat::inf_norm(&a.matrix);
    let spec_tol = tol.spectral * norm.max(1.0);
    let kmax = if tol.kmax >= 1.0 {
        tol.kmax as u32
    } else {
        (norm / nu0).ceil() as u32 + 1
    };
    let mut resonant = Vec::new();
    let mut harmonics = Vec::new();
    for (idx, c) in jc.clusters.iter().enumerate() {
        for k in 1..=kmax {
            let target = k as f64 * nu0;
            if c.re.abs() < spec_tol && (c.im.abs() - target).abs() < spec_tol {
                resonant.push(idx);
                if !harmonics.contains(&k) {
                    harmonics.push(k);
                }
            }
        }
    }
    harmonics.sort();
    if !harmonics.contains(&1) {
        return Err(HopfError::NotResonant(nu0));
    }
    let n = a.dim();
    let mut p = CMat::zeros(n, n);
    for &k in &resonant {
        p += spectral_projector(&a.matrix, &jc.clusters, k);
    }
    let preal = p.map(|z| z.re);
    let basis = mat::column_space(&preal, 1e-6);
    if basis.ncols() == 0 {
        return Err(HopfError::EmptyKernel);
    }
    let bt = basis.transpose();
    let a_s_restricted = &bt * &jc.semisimple * &basis;
    let a_n_restricted = &bt * &jc.nilpotent * &basis;
    let omega_restricted = SymplecticForm::new({
        let w = &bt * &a.form.matrix * &basis;
        (&w - w.transpose()) * 0.5
    })?;
    let rd = ResonanceData {
        basis,
        nu0,
        period: 2.0 * std::f64::consts::PI / nu0,
        a_s_restricted,
        a_n_restricted,
        omega_restricted,
        harmonics,
        kmax,
        jc,
        form: a.form.clone(),
    };
    let pr = rd.period_residual();
    if pr > 1e-6 {
        return Err(HopfError::NonConvergent(format!(
            "e^(A_s T) differs from identity on U by {pr:.3e}"
        )));
    }
    Ok(rd)
}

/// Ψ_θ = e^{(θ/ν∘) A_s} on U.
pub fn s1_action(r: &ResonanceData, theta: f64) -> Mat {
    mat::expm(&(&r.a_s_restricted * (theta / r.nu0)))
}

/// J(v) = (1/2ν∘) ω|_U(A_s v, v).
pub fn momentum_map_j(r: &ResonanceData, v: &Vect) -> f64 {
    let av = &r.a_s_restricted * v;
    r.omega_restricted.pair(&av, v) / (2.0 * r.nu0)
}

/// Hessian of J on U.
pub fn momentum_map_j_hessian(r: &ResonanceData) -> Mat {
    let m = r.a_s_restricted.transpose() * &r.omega_restricted.matrix / r.nu0;
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupData {
    #[serde(with = "rowmajor::vec", default)]
    pub finite_generators: Vec<Mat>,
    #[serde(with = "rowmajor::vec", default)]
    pub algebra_generators: Vec<Mat>,
    #[serde(default)]
    pub structure_tags: Vec<String>,
}

impl GroupData {
    pub fn trivial() -> Self {
        GroupData::default()
    }

    pub fn validate(&self, w: &SymplecticForm, tol: f64) -> Result<()> {
        let d = w.dim();
        for (i, g) in self.finite_generators.iter().enumerate() {
            if g.shape() != (d, d) {
                return Err(HopfError::DimensionMismatch(format!("finite generator {i}")));
            }
            let r = mat::max_abs(&(g.transpose() * &w.matrix * g - &w.matrix));
            if r > tol.max(1e-12) * mat::max_abs(&w.matrix) {
                return Err(HopfError::NotInvariant(format!(
                    "finite generator {i} is not symplectic ({r:.3e})"
                )));
            }
        }
        for (i, x) in self.algebra_generators.iter().enumerate() {
            if x.shape() != (d, d) {
                return Err(HopfError::DimensionMismatch(format!("algebra generator {i}")));
            }
            let c = check_infinitesimally_symplectic(x, w, tol.max(1e-12))?;
            if !c.ok {
                return Err(HopfError::NotInvariant(format!(
                    "algebra generator {i} is not infinitesimally symplectic ({:.3e})",
                    c.residual
                )));
            }
        }
        Ok(())
    }

    /// Momentum map K^ξ(v) = ½ω(ξv, v) as a Hessian matrix.
    pub fn momentum_hessian(xi: &Mat, w: &SymplecticForm) -> Mat {
        let m = xi.transpose() * &w.matrix;
        (&m + m.transpose()) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub checks: Vec<CheckItem>,
    pub tolerance: f64,
}

impl EquivarianceReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// Appendix invariance properties as residuals, one per generator and check.
pub fn verify_equivariance(r: &ResonanceData, g: &GroupData, tol: f64) -> EquivarianceReport {
    let mut checks = Vec::new();
    let scale = mat::max_abs(&r.jc.semisimple).max(mat::max_abs(&r.jc.nilpotent)).max(1.0);
    let q = &r.basis;
    let proj_perp = Mat::identity(q.nrows(), q.nrows()) - q * q.transpose();
    let thetas = [0.3, 1.1, 2.5, 4.0];
    let mut push = |name: String, res: f64, tol_eff: f64| {
        checks.push(CheckItem {
            name,
            residual: res,
            pass: res < tol_eff,
        })
    };
    for (i, gm) in g.finite_generators.iter().enumerate() {
        let ginv = match gm.clone().try_inverse() {
            Some(x) => x,
            None => {
                push(format!("finite[{i}] invertible"), f64::INFINITY, tol);
                continue;
            }
        };
        let rs = mat::max_abs(&(gm * &r.jc.semisimple * &ginv - &r.jc.semisimple));
        push(format!("finite[{i}] A_s"), rs, tol * scale);
        let rn = mat::max_abs(&(gm * &r.jc.nilpotent * &ginv - &r.jc.nilpotent));
        push(format!("finite[{i}] A_n"), rn, tol * scale);
        let ru = mat::max_abs(&(&proj_perp * gm * q));
        push(format!("finite[{i}] U invariant"), ru, tol);
        let gu = q.transpose() * gm * q;
        let rc = thetas
            .iter()
            .map(|&t| {
                let psi = s1_action(r, t);
                mat::max_abs(&(&gu * &psi - &psi * &gu))
            })
            .fold(0.0, f64::max);
        push(format!("finite[{i}] commutes with S1"), rc, tol);
    }
    for (i, x) in g.algebra_generators.iter().enumerate() {
        let xs = mat::max_abs(x).max(1.0);
        let rs = mat::max_abs(&mat::commutator(x, &r.jc.semisimple));
        push(format!("algebra[{i}] A_s"), rs, tol * scale * xs);
        let rn = mat::max_abs(&mat::commutator(x, &r.jc.nilpotent));
        push(format!("algebra[{i}] A_n"), rn, tol * scale * xs);
        let ru = mat::max_abs(&(&proj_perp * x * q));
        push(format!("algebra[{i}] U invariant"), ru, tol * xs);
        let xu = q.transpose() * x * q;
        let rc = thetas
            .iter()
            .map(|&t| {
                let psi = s1_action(r, t);
                mat::max_abs(&(&xu * &psi - &psi * &xu))
            })
            .fold(0.0, f64::max);
        push(format!("algebra[{i}] commutes with S1"), rc, tol * xs);
    }
    EquivarianceReport {
        checks,
        tolerance: tol,
    }
}

/// Random symplectic matrix for the form J₂ₙ: a product of exponentials of
/// Hamiltonian matrices with entries of size `scale`.
pub fn random_symplectic<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Mat {
    let j = mat::std_j(dim);
    let mut s = Mat::identity(dim, dim);
    for _ in 0..2 {
        let mut h = Mat::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0) * scale);
        h = (&h + h.transpose()) * 0.5;
        s = s * mat::expm(&(&j * h));
    }
    s
}

/// Canonical 1:−1 resonance matrix [[νJ₂ₙ, I₂ₙ],[0, νJ₂ₙ]].
pub fn canonical_matrix(n: usize, nu: f64) -> Mat {
    let j = mat::std_j(2 * n) * nu;
    mat::block2(&j, &Mat::identity(2 * n, 2 * n), &Mat::zeros(2 * n, 2 * n), &j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn symplectic_checks() {
        let w = SymplecticForm::standard(2);
        assert!(check_infinitesimally_symplectic(&mat::std_j(2), &w, 1e-10).unwrap().ok);
        assert!(!check_infinitesimally_symplectic(&Mat::identity(2, 2), &w, 1e-10).unwrap().ok);
        let w4 = SymplecticForm::standard(4);
        assert!(check_infinitesimally_symplectic(&canonical_matrix(1, 1.0), &w4, 1e-10).unwrap().ok);
        assert!(check_infinitesimally_symplectic(&Mat::identity(3, 3), &w, 1e-10).is_err());
    }

    #[test]
    fn quadratic_hamiltonian_examples() {
        let a = HamMap::new(mat::std_j(2), SymplecticForm::standard(2), 1e-10).unwrap();
        assert!(mat::max_abs(&(quadratic_hamiltonian(&a) - Mat::identity(2, 2))) < 1e-15);
        let c = HamMap::new(canonical_matrix(1, 1.0), SymplecticForm::standard(4), 1e-10).unwrap();
        let j = mat::std_j(2);
        let expect = mat::block2(&Mat::zeros(2, 2), &j, &(-&j), &(-Mat::identity(2, 2)));
        assert!(mat::max_abs(&(quadratic_hamiltonian(&c) - expect)) < 1e-15);
        let z = HamMap::new(Mat::zeros(2, 2), SymplecticForm::standard(2), 1e-10).unwrap();
        assert_eq!(mat::max_abs(&quadratic_hamiltonian(&z)), 0.0);
    }

    #[test]
    fn jc_examples() {
        let jc = jordan_chevalley(&mat::std_j(2), &tol()).unwrap();
        assert!(mat::max_abs(&jc.nilpotent) < 1e-12);
        let u = Mat::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let jc = jordan_chevalley(&u, &tol()).unwrap();
        assert!(mat::max_abs(&jc.semisimple) < 1e-12);
        let c = canonical_matrix(1, 1.0);
        let jc = jordan_chevalley(&c, &tol()).unwrap();
        let j = mat::std_j(2);
        assert!(mat::max_abs(&(&jc.semisimple - mat::block_diag(&j, &j))) < 1e-7);
        assert!(jc.nilpotency_residual() < 1e-10);
        assert!(jc.commutator_residual() < 1e-8);
    }

    #[test]
    fn resonance_examples() {
        let c = HamMap::new(canonical_matrix(1, 1.0), SymplecticForm::standard(4), 1e-10).unwrap();
        assert_eq!(resonance_space(&c, 1.0, &tol()).unwrap().dim(), 4);

        let j = mat::std_j(2);
        let perm = |a: Mat| {
            // Interleave two 2x2 blocks into the J₄ ordering (q1, q2, p1, p2).
            let p = Mat::from_row_slice(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]);
            &p * a * p.transpose()
        };
        let a = perm(mat::block_diag(&j, &(&j * 2f64.sqrt())));
        let h = HamMap::new(a, SymplecticForm::standard(4), 1e-10).unwrap();
        let r = resonance_space(&h, 1.0, &tol()).unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(r.harmonics, vec![1]);
        let a = perm(mat::block_diag(&j, &(&j * 3.0)));
        let h = HamMap::new(a, SymplecticForm::standard(4), 1e-10).unwrap();
        let r = resonance_space(&h, 1.0, &tol()).unwrap();
        assert_eq!(r.dim(), 4);
        assert_eq!(r.harmonics, vec![1, 3]);
        assert!(matches!(resonance_space(&h, 0.7, &tol()), Err(HopfError::NotResonant(_))));
    }

    #[test]
    fn s1_and_momentum() {
        let c = HamMap::new(canonical_matrix(1, 1.0), SymplecticForm::standard(4), 1e-10).unwrap();
        let r = resonance_space(&c, 1.0, &tol()).unwrap();
        // Basis is orthonormal but need not be the identity; compare in ambient coordinates.
        let q = &r.basis;
        let psi = q * s1_action(&r, std::f64::consts::PI) * q.transpose();
        assert!(mat::max_abs(&(psi + Mat::identity(4, 4))) < 1e-7);
        let psi0 = s1_action(&r, 0.0);
        assert!(mat::max_abs(&(psi0 - Mat::identity(4, 4))) < 1e-14);
        let hj = q * momentum_map_j_hessian(&r) * q.transpose();
        let j = mat::std_j(2);
        let expect = mat::block2(&Mat::zeros(2, 2), &j, &(-&j), &Mat::zeros(2, 2));
        assert!(mat::max_abs(&(hj - expect)) < 1e-7);
        assert_eq!(momentum_map_j(&r, &Vect::zeros(4)), 0.0);
    }

    #[test]
    fn random_symplectic_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_symplectic(4, 0.4, &mut rng);
        let j = mat::std_j(4);
        assert!(mat::max_abs(&(s.transpose() * &j * &s - j)) < 1e-12);
    }
}

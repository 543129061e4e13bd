//! Equivariant Williamson frame for the 1:−1 resonance and the invariant
//! splitting U_ν∘ = V₀ ⊕ V₁.

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linear::{canonical_matrix, GroupData, ResonanceData};
use crate::mat::{self, rowmajor, Mat, Vect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameCase {
    /// ω = J₄ₙ in frame coordinates.
    Plus,
    /// ω = −J₄ₙ in frame coordinates.
    Minus,
}

impl FrameCase {
    /// Factor turning the frame form into J₄ₙ (and the Hamiltonian into the PLUS convention).
    pub fn sign(self) -> f64 {
        match self {
            FrameCase::Plus => 1.0,
            FrameCase::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResiduals {
    pub canonical_form: f64,
    pub symplectic_form: f64,
    pub complement_solve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFrame {
    /// Columns are the frame vectors in U_ν∘ coordinates.
    #[serde(with = "rowmajor")]
    pub basis: Mat,
    /// The same frame vectors in ambient coordinates.
    #[serde(with = "rowmajor")]
    pub ambient: Mat,
    pub n: usize,
    pub case: FrameCase,
    pub nu0: f64,
    pub residuals: FrameResiduals,
}

impl CanonicalFrame {
    pub fn dim(&self) -> usize {
        4 * self.n
    }

    pub fn inverse(&self) -> Mat {
        self.basis.clone().try_inverse().expect("frame is invertible")
    }

    /// Ambient linear map expressed in frame coordinates.
    pub fn to_frame(&self, r: &ResonanceData, g: &Mat) -> Mat {
        self.inverse() * r.basis.transpose() * g * &r.basis * &self.basis
    }

    /// Frame coordinates → ambient vector.
    pub fn to_ambient(&self, y: &Vect) -> Vect {
        &self.ambient * y
    }

    /// Ambient vector in U_ν∘ → frame coordinates.
    pub fn from_ambient(&self, r: &ResonanceData, x: &Vect) -> Vect {
        self.inverse() * (r.basis.transpose() * x)
    }
}

fn beta(an: &Mat, w: &Mat, x: &Vect, y: &Vect) -> f64 {
    ((an * x).transpose() * w * y)[(0, 0)]
}

/// Solve for c with complement span([c; I]) invariant under every generator
/// and Lagrangian: A c − c B = −X for each generator [[A, X], [·, B]], and
/// W − Mᵀc + cᵀM = 0.
fn invariant_complement(gens: &[Mat], w_hat: &Mat, m2: usize) -> (Mat, f64) {
    let nu = m2 * m2;
    let idx = |i: usize, j: usize| i + j * m2;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for g in gens {
        let a = g.view((0, 0), (m2, m2));
        let x = g.view((0, m2), (m2, m2));
        let b = g.view((m2, m2), (m2, m2));
        for i in 0..m2 {
            for j in 0..m2 {
                let mut row = vec![0.0; nu];
                for k in 0..m2 {
                    row[idx(k, j)] += a[(i, k)];
                    row[idx(i, k)] -= b[(k, j)];
                }
                rows.push(row);
                rhs.push(-x[(i, j)]);
            }
        }
    }
    let w = w_hat.view((m2, m2), (m2, m2));
    let m = w_hat.view((0, m2), (m2, m2));
    for i in 0..m2 {
        for j in (i + 1)..m2 {
            let mut row = vec![0.0; nu];
            for k in 0..m2 {
                row[idx(k, j)] -= m[(k, i)];
                row[idx(k, i)] += m[(k, j)];
            }
            rows.push(row);
            rhs.push(-w[(i, j)]);
        }
    }
    let a = Mat::from_fn(rows.len(), nu, |i, j| rows[i][j]);
    let b = Vect::from_vec(rhs);
    let sol = mat::lstsq(&a, &b, 1e-12);
    let res = (&a * &sol - &b).amax();
    (Mat::from_fn(m2, m2, |i, j| sol[idx(i, j)]), res)
}

/// Williamson frame: 𝒜 = [[νJ₂ₙ, I],[0, νJ₂ₙ]], ω = ±J₄ₙ, with the V₁ block
/// chosen invariant under the supplied group.
pub fn williamson_frame(r: &ResonanceData, g: &GroupData, frame_tol: f64) -> Result<CanonicalFrame> {
    let d = r.dim();
    if d % 4 != 0 {
        return Err(HopfError::H3Violation(format!("dim U = {d} is not a multiple of 4")));
    }
    if r.harmonics != [1] {
        return Err(HopfError::H3Violation(format!(
            "resonance space contains harmonics {:?}",
            r.harmonics
        )));
    }
    let n = d / 4;
    let m2 = 2 * n;
    let nu = r.nu0;
    let a_s = &r.a_s_restricted;
    let a_n = &r.a_n_restricted;
    let w = &r.omega_restricted.matrix;
    let scale = mat::max_abs(&r.a_restricted()).max(1.0);
    let an_rank = mat::rank(a_n, 1e-6);
    if an_rank != m2 || mat::max_abs(&(a_n * a_n)) > 1e-6 * scale * scale {
        return Err(HopfError::H3Violation(format!(
            "nilpotent part has rank {an_rank} (need {m2}) or is not square-zero"
        )));
    }
    let f0 = mat::null_space(a_n, 1e-6);
    if f0.ncols() != m2 {
        return Err(HopfError::H3Violation("ker A_n has wrong dimension".into()));
    }
    let b0 = mat::null_space(&f0.transpose(), 1e-10);
    let basis0 = {
        let mut m = Mat::zeros(d, d);
        m.view_mut((0, 0), (d, m2)).copy_from(&f0);
        m.view_mut((0, m2), (d, m2)).copy_from(&b0);
        m
    };
    let bt = basis0.transpose();
    let mut gens = vec![&bt * (a_s / nu) * &basis0];
    for x in g.finite_generators.iter().chain(g.algebra_generators.iter()) {
        let xu = r.basis.transpose() * x * &r.basis;
        gens.push(&bt * xu * &basis0);
    }
    for (i, gh) in gens.iter().enumerate() {
        let leak = mat::max_abs(&gh.view((m2, 0), (m2, m2)).into_owned());
        if leak > 1e-6 * mat::max_abs(gh).max(1.0) {
            return Err(HopfError::BlockStructureViolation(format!(
                "generator {i} does not preserve ker A_n ({leak:.3e})"
            )));
        }
    }
    let w_hat = &bt * w * &basis0;
    let (c, solve_res) = invariant_complement(&gens, &w_hat, m2);
    if solve_res > 1e-8 {
        return Err(HopfError::NonConvergent(format!(
            "no invariant Lagrangian complement (residual {solve_res:.3e})"
        )));
    }
    let b1 = &b0 + &f0 * &c;

    // β(x, y) = ω(A_n x, y) is symmetric and definite on V₁; orthonormalize
    // in pairs (x, A_s x / ν) in the deterministic column order.
    let s_op = a_s / nu;
    let mut xs: Vec<Vect> = Vec::new();
    let mut ys: Vec<Vect> = Vec::new();
    let mut sign = 0.0;
    for k in 0..m2 {
        if xs.len() == n {
            break;
        }
        let mut v: Vect = b1.column(k).into_owned();
        let vnorm0 = v.norm();
        for _ in 0..2 {
            for u in xs.iter().chain(ys.iter()) {
                let coef = beta(a_n, w, u, &v) / beta(a_n, w, u, u);
                v -= u * coef;
            }
        }
        let bb = beta(a_n, w, &v, &v);
        if v.norm() < 1e-8 * vnorm0 || bb.abs() < 1e-12 * scale * vnorm0 * vnorm0 {
            continue;
        }
        let sg = bb.signum();
        if sign == 0.0 {
            sign = sg;
        } else if sg != sign {
            return Err(HopfError::H3Violation("indefinite Krein form on V₁".into()));
        }
        v /= bb.abs().sqrt();
        let y = &s_op * &v;
        xs.push(v);
        ys.push(y);
    }
    if xs.len() != n {
        return Err(HopfError::NonConvergent("orthonormalization lost rank".into()));
    }
    let bcols: Vec<Vect> = xs.iter().chain(ys.iter()).cloned().collect();
    let bm = Mat::from_columns(&bcols);
    let fm = a_n * &bm;
    let mut frame = Mat::zeros(d, d);
    frame.view_mut((0, 0), (d, m2)).copy_from(&fm);
    frame.view_mut((0, m2), (d, m2)).copy_from(&bm);
    // ω(f_k, b_k) = β(b_k, b_k) = sign; PLUS has ω(f_k, b_k) = −1.
    let case = if sign < 0.0 { FrameCase::Plus } else { FrameCase::Minus };
    let finv = frame
        .clone()
        .try_inverse()
        .ok_or_else(|| HopfError::NonConvergent("singular frame".into()))?;
    let a_frame = &finv * r.a_restricted() * &frame;
    let w_frame = frame.transpose() * w * &frame;
    let canon = canonical_matrix(n, nu);
    let res_a = mat::max_abs(&(&a_frame - &canon));
    let res_w = mat::max_abs(&(&w_frame - mat::std_j(d) * case.sign()));
    let residuals = FrameResiduals {
        canonical_form: res_a,
        symplectic_form: res_w,
        complement_solve: solve_res,
    };
    if res_a > frame_tol * nu.max(1.0) * 10.0 || res_w > frame_tol * 10.0 {
        return Err(HopfError::NonConvergent(format!(
            "frame residuals {res_a:.3e}, {res_w:.3e}"
        )));
    }
    Ok(CanonicalFrame {
        ambient: &r.basis * &frame,
        basis: frame,
        n,
        case,
        nu0: nu,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    #[serde(with = "rowmajor")]
    pub v0_basis: Mat,
    #[serde(with = "rowmajor")]
    pub v1_basis: Mat,
    #[serde(with = "rowmajor")]
    pub projection_p: Mat,
    #[serde(with = "rowmajor")]
    pub l_matrix: Mat,
}

/// V₀ = ker L, V₁ = Im L for L = d²(ĥ_λ∘ − J^ν∘)(0) in frame coordinates.
pub fn split_v0_v1(f: &CanonicalFrame, r: &ResonanceData) -> Splitting {
    let d = f.dim();
    let m2 = 2 * f.n;
    let finv = f.inverse();
    let an = &finv * &r.a_n_restricted * &f.basis;
    let wf = f.basis.transpose() * &r.omega_restricted.matrix * &f.basis * f.case.sign();
    let l = {
        let m = an.transpose() * &wf;
        (&m + m.transpose()) * 0.5
    };
    let v0_basis = mat::null_space(&l, 1e-8);
    let v1_basis = mat::column_space(&l, 1e-8);
    let mut p = Mat::zeros(d, d);
    for i in 0..m2 {
        p[(i, i)] = 1.0;
    }
    Splitting {
        v0_basis,
        v1_basis,
        projection_p: p,
        l_matrix: l,
    }
}

/// A_g from g = diag(A_g, A_g) in frame coordinates.
pub fn check_block_action(f: &CanonicalFrame, g: &Mat, tol: f64) -> Result<Mat> {
    let m2 = 2 * f.n;
    if g.shape() != (2 * m2, 2 * m2) {
        return Err(HopfError::DimensionMismatch("group element vs frame".into()));
    }
    let a = g.view((0, 0), (m2, m2)).into_owned();
    let b = g.view((m2, m2), (m2, m2)).into_owned();
    let off = mat::max_abs(&g.view((0, m2), (m2, m2)).into_owned())
        .max(mat::max_abs(&g.view((m2, 0), (m2, m2)).into_owned()));
    let diag = mat::max_abs(&(&a - &b));
    let orth = mat::max_abs(&(a.transpose() * &a - Mat::identity(m2, m2)));
    let comm = mat::max_abs(&mat::commutator(&a, &mat::std_j(m2)));
    let worst = off.max(diag).max(orth).max(comm);
    if worst > tol {
        return Err(HopfError::BlockStructureViolation(format!(
            "off-diagonal {off:.2e}, diagonal mismatch {diag:.2e}, orthogonality {orth:.2e}, J-commutator {comm:.2e}"
        )));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{random_symplectic, resonance_space, s1_action, HamMap, SymplecticForm};
    use crate::tol::Tolerances;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical_rd(n: usize) -> ResonanceData {
        let h = HamMap::new(canonical_matrix(n, 1.0), SymplecticForm::standard(4 * n), 1e-10).unwrap();
        resonance_space(&h, 1.0, &Tolerances::default()).unwrap()
    }

    #[test]
    fn canonical_input_recovers_canonical_form() {
        let r = canonical_rd(1);
        let f = williamson_frame(&r, &GroupData::trivial(), 1e-8).unwrap();
        assert_eq!(f.case, FrameCase::Plus);
        assert!(f.residuals.canonical_form < 1e-8);
        let sp = split_v0_v1(&f, &r);
        let l_expect = mat::block_diag(&Mat::zeros(2, 2), &(-Mat::identity(2, 2)));
        assert!(mat::max_abs(&(sp.l_matrix - l_expect)) < 1e-8);

        let v1 = Vect::from_vec(vec![0.0, 0.0, 1.0, -2.0]);
        assert!((&sp.projection_p * v1).norm() == 0.0);
    }

    #[test]
    fn conjugates_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2] {
            for _ in 0..5 {
                let s = random_symplectic(4 * n, 0.3, &mut rng);
                let sinv = s.clone().try_inverse().unwrap();
                let a = &sinv * canonical_matrix(n, 1.0) * &s;
                let j = mat::std_j(4 * n);
                let w = SymplecticForm::new(s.transpose() * &j * &s).unwrap();
                let h = HamMap::new(a, w, 1e-9).unwrap();
                let r = resonance_space(&h, 1.0, &Tolerances::default()).unwrap();
                let f = williamson_frame(&r, &GroupData::trivial(), 1e-8).unwrap();
                assert!(f.residuals.canonical_form < 1e-8, "{:?}", f.residuals);
                assert!(f.residuals.symplectic_form < 1e-8, "{:?}", f.residuals);
            }
        }
    }

    #[test]
    fn minus_case_detected() {
        // Reversing the form flips the Krein signature.
        let h = HamMap::new(canonical_matrix(1, 1.0), SymplecticForm::standard(4).negated(), 1e-10).unwrap();
        let r = resonance_space(&h, 1.0, &Tolerances::default()).unwrap();
        let f = williamson_frame(&r, &GroupData::trivial(), 1e-8).unwrap();
        assert_eq!(f.case, FrameCase::Minus);
    }

    #[test]
    fn semisimple_input_violates_h3() {
        let j = mat::std_j(4);
        let h = HamMap::new(j, SymplecticForm::standard(4), 1e-10).unwrap();
        let r = resonance_space(&h, 1.0, &Tolerances::default()).unwrap();
        assert!(matches!(
            williamson_frame(&r, &GroupData::trivial(), 1e-8),
            Err(HopfError::H3Violation(_))
        ));
    }

    #[test]
    fn block_action_of_s1() {
        let r = canonical_rd(1);
        let f = williamson_frame(&r, &GroupData::trivial(), 1e-8).unwrap();
        let psi = f.inverse() * s1_action(&r, 0.7) * &f.basis;
        let a = check_block_action(&f, &psi, 1e-8).unwrap();
        assert!(mat::max_abs(&(a - mat::expm(&(mat::std_j(2) * 0.7)))) < 1e-8);
        let id = check_block_action(&f, &Mat::identity(4, 4), 1e-12).unwrap();
        assert_eq!(id, Mat::identity(2, 2));
        let mut bad = Mat::identity(4, 4);
        bad[(0, 3)] = 0.1;
        assert!(check_block_action(&f, &bad, 1e-8).is_err());
    }
}

//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;
pub type CMat = DMatrix<Complex64>;

/// J₂ₙ = [[0, −Iₙ], [Iₙ, 0]] of size `dim` (even).
pub fn std_j(dim: usize) -> Mat {
    assert!(dim % 2 == 0, "std_j needs an even dimension");
    let n = dim / 2;
    let mut j = Mat::zeros(dim, dim);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut m = Mat::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a);
    m.view_mut((0, c1), (r1, c2)).copy_from(b);
    m.view_mut((r1, 0), (r2, c1)).copy_from(c);
    m.view_mut((r1, c1), (r2, c2)).copy_from(d);
    m
}

pub fn block_diag(a: &Mat, d: &Mat) -> Mat {
    block2(
        a,
        &Mat::zeros(a.nrows(), d.ncols()),
        &Mat::zeros(d.nrows(), a.ncols()),
        d,
    )
}

/// Induced ∞-norm (max absolute row sum).
pub fn inf_norm(m: &Mat) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

/// Eigenvalues of a real square matrix through the real Schur form.
pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

fn svd_full(m: &Mat) -> (Vec<f64>, Mat, Mat) {
    // Pad to a square matrix so that U and Vᵀ are complete orthogonal bases.
    let (r, c) = m.shape();
    let s = r.max(c);
    let mut sq = Mat::zeros(s, s);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    (svd.singular_values.iter().copied().collect(), u, vt)
}

/// Orthonormal basis of the null space, with relative rank tolerance `rtol`.
pub fn null_space(m: &Mat, rtol: f64) -> Mat {
    let c = m.ncols();
    let (sv, _, vt) = svd_full(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let thresh = rtol * smax.max(f64::MIN_POSITIVE);
    let mut cols = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s <= thresh {
            let v: Vect = vt.row(i).transpose().rows(0, c).into_owned();
            cols.push(v);
        }
    }
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Orthonormal basis of the column space.
pub fn column_space(m: &Mat, rtol: f64) -> Mat {
    let r = m.nrows();
    let (sv, u, _) = svd_full(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let thresh = rtol * smax.max(f64::MIN_POSITIVE);
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thresh).collect();
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let cols: Vec<Vect> = idx
        .iter()
        .map(|&i| u.column(i).rows(0, r).into_owned())
        .collect();
    if cols.is_empty() {
        Mat::zeros(r, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

pub fn rank(m: &Mat, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Minimum-norm least-squares solution of m·x = b.
pub fn lstsq(m: &Mat, b: &Vect, rtol: f64) -> Vect {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, rtol * smax.max(f64::MIN_POSITIVE))
        .expect("svd factors present")
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

/// Row-major JSON (de)serialization for matrices.
pub mod rowmajor {
    use super::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err("ragged matrix rows".into());
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err("matrix entries must be finite".into());
        }
        Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
            let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
            all.iter()
                .map(|r| from_rows(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = std_j(6);
        assert!(max_abs(&(&j * &j + Mat::identity(6, 6))) == 0.0);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let j = std_j(2) * std::f64::consts::PI;
        let e = expm(&j);
        assert!(max_abs(&(e + Mat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let n = null_space(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!(max_abs(&(&m * &n)) < 1e-12);
        assert_eq!(rank(&m, 1e-12), 1);
        assert_eq!(column_space(&m, 1e-12).ncols(), 1);
    }
}

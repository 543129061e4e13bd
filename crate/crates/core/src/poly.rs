//! Sparse real polynomials in phase-space coordinates, and jets whose
//! coefficients are polynomials in the parameter λ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mat::{Mat, Vect};

pub type Monomial = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    pub nvars: usize,
    #[serde(with = "term_list")]
    pub terms: BTreeMap<Monomial, f64>,
}

/// JSON-friendly encoding of the term map as `[{"exponents": [..], "coeff": c}]`.
mod term_list {
    use super::Monomial;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Term {
        exponents: Monomial,
        coeff: f64,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<Monomial, f64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Term> = m
            .iter()
            .map(|(e, c)| Term {
                exponents: e.clone(),
                coeff: *c,
            })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Monomial, f64>, D::Error> {
        let v = Vec::<Term>::deserialize(d)?;
        Ok(v.into_iter().map(|t| (t.exponents, t.coeff)).collect())
    }
}

fn mono_degree(m: &Monomial) -> usize {
    m.iter().map(|&e| e as usize).sum()
}

/// All exponent vectors of total degree `d` in `n` variables, lexicographic.
pub fn monomials_of_degree(n: usize, d: usize) -> Vec<Monomial> {
    fn rec(n: usize, d: usize, prefix: &mut Monomial, out: &mut Vec<Monomial>) {
        if prefix.len() == n - 1 {
            prefix.push(d as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e as u8);
            rec(n, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(n, d, &mut Vec::with_capacity(n), &mut out);
    out
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0u8; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    /// ½ vᵀ H v for symmetric H.
    pub fn quadratic(h: &Mat) -> Self {
        let n = h.nrows();
        let mut p = Poly::zero(n);
        for i in 0..n {
            for j in i..n {
                let mut e = vec![0u8; n];
                e[i] += 1;
                e[j] += 1;
                let c = if i == j { 0.5 * h[(i, i)] } else { 0.5 * (h[(i, j)] + h[(j, i)]) };
                p.add_term(e, c);
            }
        }
        p
    }

    /// Linear form a·v.
    pub fn linear(a: &Vect) -> Self {
        let n = a.len();
        let mut p = Poly::zero(n);
        for i in 0..n {
            p = p.add(&Poly::var(n, i).scale(a[i]));
        }
        p
    }

    pub fn add_term(&mut self, e: Monomial, c: f64) {
        debug_assert_eq!(e.len(), self.nvars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(mono_degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.terms.keys().map(mono_degree).min().unwrap_or(0)
    }

    pub fn homogeneous(&self, d: usize) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| mono_degree(k) == d)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn truncate(&self, order: usize) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| mono_degree(k) <= order)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (k, v) in &o.terms {
            p.add_term(k.clone(), *v);
        }
        p
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = Poly::zero(self.nvars);
        for (ka, va) in &self.terms {
            for (kb, vb) in &o.terms {
                let e: Monomial = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                p.add_term(e, va * vb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut p = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = *c;
                for (xi, &ei) in x.iter().zip(e) {
                    if ei > 0 {
                        t *= xi.powi(ei as i32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, c * e[i] as f64);
            }
        }
        p
    }

    pub fn gradient_polys(&self) -> Vec<Poly> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    pub fn gradient(&self, x: &[f64]) -> Vect {
        Vect::from_iterator(self.nvars, (0..self.nvars).map(|i| self.derivative(i).eval(x)))
    }

    pub fn hessian(&self, x: &[f64]) -> Mat {
        let g = self.gradient_polys();
        let mut h = Mat::zeros(self.nvars, self.nvars);
        for i in 0..self.nvars {
            for j in i..self.nvars {
                let v = g[i].derivative(j).eval(x);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// Hessian at the origin, read directly from the quadratic coefficients.
    pub fn hessian_at_zero(&self) -> Mat {
        let n = self.nvars;
        let mut h = Mat::zeros(n, n);
        for (e, c) in &self.terms {
            if mono_degree(e) != 2 {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|&i| e[i] > 0).collect();
            if idx.len() == 1 {
                h[(idx[0], idx[0])] += 2.0 * c;
            } else {
                h[(idx[0], idx[1])] += c;
                h[(idx[1], idx[0])] += c;
            }
        }
        h
    }

    /// Substitute x = M·y, returning a polynomial in y.
    pub fn linear_substitute(&self, m: &Mat) -> Poly {
        assert_eq!(m.nrows(), self.nvars);
        let k = m.ncols();
        let images: Vec<Poly> = (0..self.nvars)
            .map(|i| {
                let mut p = Poly::zero(k);
                for j in 0..k {
                    let mut e = vec![0u8; k];
                    e[j] = 1;
                    p.add_term(e, m[(i, j)]);
                }
                p
            })
            .collect();
        let mut powers: Vec<Vec<Poly>> = images.iter().map(|p| vec![Poly::constant(k, 1.0), p.clone()]).collect();
        let mut out = Poly::zero(k);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(k, *c);
            for (i, &ei) in e.iter().enumerate() {
                let ei = ei as usize;
                while powers[i].len() <= ei {
                    let next = powers[i].last().unwrap().mul(&images[i]);
                    powers[i].push(next);
                }
                if ei > 0 {
                    t = t.mul(&powers[i][ei]);
                }
            }
            out = out.add(&t);
        }
        out.chop(1e-15 * self.coeff_scale().max(1.0))
    }

    /// Restrict to the first `k` variables (others set to zero).
    pub fn restrict_leading(&self, k: usize) -> Poly {
        let mut p = Poly::zero(k);
        for (e, c) in &self.terms {
            if e[k..].iter().all(|&x| x == 0) {
                p.add_term(e[..k].to_vec(), *c);
            }
        }
        p
    }

    pub fn coeff_scale(&self) -> f64 {
        self.terms.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Drop coefficients with |c| ≤ eps.
    pub fn chop(&self, eps: f64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, v)| v.abs() > eps)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Coefficient vector of the degree-d part on `monomials_of_degree(nvars, d)`.
    pub fn coeff_vector(&self, basis: &[Monomial]) -> Vect {
        Vect::from_iterator(
            basis.len(),
            basis.iter().map(|m| self.terms.get(m).copied().unwrap_or(0.0)),
        )
    }

    pub fn from_coeff_vector(nvars: usize, basis: &[Monomial], v: &Vect) -> Poly {
        let mut p = Poly::zero(nvars);
        for (m, c) in basis.iter().zip(v.iter()) {
            p.add_term(m.clone(), *c);
        }
        p
    }

    /// Poisson bracket {F, G} = ∇Fᵀ Π ∇G.
    pub fn bracket(&self, g: &Poly, pi: &Mat) -> Poly {
        let n = self.nvars;
        let df = self.gradient_polys();
        let dg = g.gradient_polys();
        let mut out = Poly::zero(n);
        for i in 0..n {
            if df[i].is_zero() {
                continue;
            }
            let mut s = Poly::zero(n);
            for j in 0..n {
                if pi[(i, j)] != 0.0 && !dg[j].is_zero() {
                    s = s.add(&dg[j].scale(pi[(i, j)]));
                }
            }
            if !s.is_zero() {
                out = out.add(&df[i].mul(&s));
            }
        }
        out
    }

    pub fn max_coeff_diff(&self, o: &Poly) -> f64 {
        self.sub(o).coeff_scale()
    }
}

/// Compiled polynomial map: fast evaluation of value, gradient and Hessian.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    pub poly: Poly,
    grad: Vec<Poly>,
    hess: Vec<Vec<Poly>>,
}

impl CompiledPoly {
    pub fn new(poly: Poly) -> Self {
        let grad = poly.gradient_polys();
        let hess = grad.iter().map(|g| g.gradient_polys()).collect();
        CompiledPoly { poly, grad, hess }
    }

    pub fn nvars(&self) -> usize {
        self.poly.nvars
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vect {
        Vect::from_iterator(self.grad.len(), self.grad.iter().map(|g| g.eval(x)))
    }

    pub fn hessian(&self, x: &[f64]) -> Mat {
        let n = self.nvars();
        Mat::from_fn(n, n, |i, j| self.hess[i][j].eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetTerm {
    pub exponents: Vec<u8>,
    /// Coefficients of 1, λ, λ², …
    pub coeffs: Vec<f64>,
}

/// Polynomial jet with λ-dependent coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJet {
    pub dim: usize,
    pub terms: Vec<JetTerm>,
}

impl PolyJet {
    pub fn new(dim: usize) -> Self {
        PolyJet {
            dim,
            terms: Vec::new(),
        }
    }

    /// Jet constant in λ.
    pub fn from_poly(p: &Poly) -> Self {
        PolyJet {
            dim: p.nvars,
            terms: p
                .terms
                .iter()
                .map(|(e, c)| JetTerm {
                    exponents: e.clone(),
                    coeffs: vec![*c],
                })
                .collect(),
        }
    }

    /// Add p·λ^k.
    pub fn add_poly(&mut self, p: &Poly, k: usize) {
        assert_eq!(p.nvars, self.dim);
        for (e, c) in &p.terms {
            match self.terms.iter_mut().find(|t| &t.exponents == e) {
                Some(t) => {
                    if t.coeffs.len() <= k {
                        t.coeffs.resize(k + 1, 0.0);
                    }
                    t.coeffs[k] += c;
                }
                None => {
                    let mut coeffs = vec![0.0; k + 1];
                    coeffs[k] = *c;
                    self.terms.push(JetTerm {
                        exponents: e.clone(),
                        coeffs,
                    });
                }
            }
        }
        self.terms.sort_by(|a, b| a.exponents.cmp(&b.exponents));
    }

    pub fn at(&self, lambda: f64) -> Poly {
        let mut p = Poly::zero(self.dim);
        for t in &self.terms {
            let c = t.coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c);
            p.add_term(t.exponents.clone(), c);
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| t.coeffs.iter().any(|&c| c != 0.0))
            .map(|t| mono_degree(&t.exponents))
            .max()
            .unwrap_or(0)
    }

    pub fn truncate(&self, order: usize) -> PolyJet {
        PolyJet {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|t| mono_degree(&t.exponents) <= order)
                .cloned()
                .collect(),
        }
    }

    /// Monomials of degree 0 or 1 with a nonzero coefficient (hypothesis H1).
    pub fn low_order_terms(&self) -> Vec<Monomial> {
        self.terms
            .iter()
            .filter(|t| mono_degree(&t.exponents) <= 1 && t.coeffs.iter().any(|&c| c != 0.0))
            .map(|t| t.exponents.clone())
            .collect()
    }
}

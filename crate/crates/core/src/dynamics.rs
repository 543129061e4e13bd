//! Direct integration of the full family: implicit-midpoint flows, the
//! momentum-shift identity, RPO residuals and shooting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linear::SymplecticForm;
use crate::mat::{self, Mat, Vect};
use crate::poly::{CompiledPoly, Poly};

/// Implicit midpoint, or its symmetric triple-jump composition (order 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Midpoint,
    Midpoint4,
}

impl Scheme {
    fn weights(self) -> Vec<f64> {
        match self {
            Scheme::Midpoint => vec![1.0],
            Scheme::Midpoint4 => {
                let c = 2f64.powf(1.0 / 3.0);
                let g1 = 1.0 / (2.0 - c);
                vec![g1, -c * g1, g1]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub poly: Poly,
    compiled: CompiledPoly,
    pub form: SymplecticForm,
    pi: Mat,
}

impl Hamiltonian {
    pub fn new(poly: Poly, form: SymplecticForm) -> Result<Self> {
        if poly.nvars != form.dim() {
            return Err(HopfError::DimensionMismatch("Hamiltonian vs form".into()));
        }
        Ok(Hamiltonian {
            compiled: CompiledPoly::new(poly.clone()),
            pi: form.poisson(),
            poly,
            form,
        })
    }

    pub fn dim(&self) -> usize {
        self.poly.nvars
    }

    pub fn value(&self, x: &Vect) -> f64 {
        self.compiled.value(x.as_slice())
    }

    pub fn field(&self, x: &Vect) -> Vect {
        &self.pi * self.compiled.gradient(x.as_slice())
    }

    pub fn field_jacobian(&self, x: &Vect) -> Mat {
        &self.pi * self.compiled.hessian(x.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub dt: f64,
    pub inner_tol: f64,
    pub scheme: Scheme,
}

impl StepOptions {
    pub fn new(dt: f64, inner_tol: f64) -> Self {
        StepOptions {
            dt,
            inner_tol,
            scheme: Scheme::Midpoint,
        }
    }

    pub fn order4(mut self) -> Self {
        self.scheme = Scheme::Midpoint4;
        self
    }
}

/// y = x + h·f((x + y)/2) by fixed-point iteration.
fn midpoint(h: &Hamiltonian, x: &Vect, dt: f64, tol: f64) -> Result<Vect> {
    let mut y = x + h.field(x) * dt;
    for _ in 0..200 {
        let m = (x + &y) * 0.5;
        let y2 = x + h.field(&m) * dt;
        let d = (&y2 - &y).amax();
        y = y2;
        if d <= tol * (1.0 + y.amax()) {
            return Ok(y);
        }
    }
    Err(HopfError::NonConvergent("implicit midpoint inner iteration".into()))
}

pub fn step(h: &Hamiltonian, x: &Vect, opt: &StepOptions) -> Result<Vect> {
    let mut y = x.clone();
    for w in opt.scheme.weights() {
        y = midpoint(h, &y, w * opt.dt, opt.inner_tol)?;
    }
    Ok(y)
}

/// x after `steps` steps of size `opt.dt`.
pub fn flow(h: &Hamiltonian, x0: &Vect, steps: usize, opt: &StepOptions) -> Result<Vect> {
    let mut x = x0.clone();
    for _ in 0..steps {
        x = step(h, &x, opt)?;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// One series per supplied momentum.
    pub momenta: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    pub fn momentum_drift(&self) -> f64 {
        self.momenta
            .iter()
            .map(|s| s.iter().map(|k| (k - s[0]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> Vect {
        Vect::from_row_slice(self.states.last().unwrap())
    }
}

/// Integrate to t_end with step ≤ dt, storing every `stride`-th state.
pub fn integrate(h: &Hamiltonian, x0: &Vect, t_end: f64, opt: &StepOptions, momenta: &[Poly], stride: usize) -> Result<Trajectory> {
    if !(opt.dt > 0.0) || !(t_end >= 0.0) {
        return Err(HopfError::Invalid("need dt > 0 and t_end ≥ 0".into()));
    }
    let steps = (t_end / opt.dt).ceil().max(1.0) as usize;
    let o = StepOptions {
        dt: t_end / steps as f64,
        ..*opt
    };
    let stride = stride.max(1);
    let mut tr = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        momenta: vec![Vec::new(); momenta.len()],
    };
    let record = |t: f64, x: &Vect, tr: &mut Trajectory| {
        tr.times.push(t);
        tr.states.push(x.as_slice().to_vec());
        tr.energy.push(h.value(x));
        for (k, m) in momenta.iter().enumerate() {
            tr.momenta[k].push(m.eval(x.as_slice()));
        }
    };
    let mut x = x0.clone();
    record(0.0, &x, &mut tr);
    for k in 1..=steps {
        x = step(h, &x, &o)?;
        if k % stride == 0 || k == steps {
            record(k as f64 * o.dt, &x, &mut tr);
        }
    }
    Ok(tr)
}

/// Flow to time T in n equal steps with the exact discrete derivatives
/// ∂x_T/∂x₀ and ∂x_T/∂T.
pub fn flow_with_derivatives(h: &Hamiltonian, x0: &Vect, t: f64, n: usize, opt: &StepOptions) -> Result<(Vect, Mat, Vect)> {
    let d = h.dim();
    let dt = t / n as f64;
    let mut x = x0.clone();
    let mut m = Mat::identity(d, d);
    let mut s = Vect::zeros(d);
    let id = Mat::identity(d, d);
    for _ in 0..n {
        for w in opt.scheme.weights() {
            let hs = w * dt;
            let y = midpoint(h, &x, hs, opt.inner_tol)?;
            let mid = (&x + &y) * 0.5;
            let df = h.field_jacobian(&mid);
            let lhs = (&id - &df * (0.5 * hs)).lu();
            let rhs = &id + &df * (0.5 * hs);
            m = lhs.solve(&(&rhs * &m)).ok_or_else(|| HopfError::NonConvergent("singular step Jacobian".into()))?;
            let ds = &rhs * &s + h.field(&mid) * (w / n as f64);
            s = lhs.solve(&ds).ok_or_else(|| HopfError::NonConvergent("singular step Jacobian".into()))?;
            x = y;
        }
    }
    Ok((x, m, s))
}

/// Largest sampled |{h, K}| / (1 + |x|⁴).
pub fn noether_defect(h: &Hamiltonian, k: &Poly, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = h.form.poisson();
    let kc = CompiledPoly::new(k.clone());
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = Vect::from_fn(h.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let gh = Vect::from_row_slice(h.poly.gradient(x.as_slice()).as_slice());
        let gk = kc.gradient(x.as_slice());
        let b = gh.dot(&(&pi * gk));
        worst = worst.max(b.abs() / (1.0 + x.norm().powi(4)));
    }
    worst
}

/// sup over grid of ‖G_t(v) − exp(−tξ)F_t(v)‖ where G is the flow of h − K^ξ.
pub fn shifted_flow_check(h: &Hamiltonian, xi: &Mat, k_xi: &Poly, v: &Vect, t_end: f64, opt: &StepOptions, noether_tol: f64) -> Result<f64> {
    let nd = noether_defect(h, k_xi, 50, 11);
    if nd > noether_tol {
        return Err(HopfError::NoetherViolation(nd));
    }
    let heff = Hamiltonian::new(h.poly.sub(k_xi), h.form.clone())?;
    let steps = (t_end / opt.dt).ceil().max(1.0) as usize;
    let o = StepOptions {
        dt: t_end / steps as f64,
        ..*opt
    };
    let (mut f, mut g) = (v.clone(), v.clone());
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        f = step(h, &f, &o)?;
        g = step(&heff, &g, &o)?;
        let t = k as f64 * o.dt;
        worst = worst.max((&g - mat::expm(&(xi * -t)) * &f).amax());
    }
    Ok(worst)
}

/// sup over t ∈ {0, Δ, …} of ‖F_{t+τ}(v) − g F_t(v)‖ / max‖F_t(v)‖, using
/// `steps` steps per τ and `samples` grid points spread over one τ.
pub fn rpo_residual(h: &Hamiltonian, v: &Vect, tau: f64, g: &Mat, steps: usize, samples: usize, opt: &StepOptions) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(HopfError::Invalid("τ must be positive".into()));
    }
    let o = StepOptions {
        dt: tau / steps as f64,
        ..*opt
    };
    let samples = samples.max(1);
    let stride = (steps / samples).max(1);
    let total = steps + stride * (samples - 1);
    let mut xs = Vec::with_capacity(total + 1);
    let mut x = v.clone();
    xs.push(x.clone());
    for _ in 0..total {
        x = step(h, &x, &o)?;
        xs.push(x.clone());
    }
    let scale = xs.iter().map(|x| x.amax()).fold(0.0, f64::max).max(1e-300);
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let i = s * stride;
        worst = worst.max((&xs[i + steps] - g * &xs[i]).amax());
    }
    Ok(worst / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub v: Vec<f64>,
    pub tau: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Gauss–Newton (SVD least squares) on Φ_T(x) = x with energy, flow-phase and
/// symmetry-phase conditions at the guess.
pub fn shooting_refine(
    heff: &Hamiltonian,
    v_guess: &Vect,
    tau_guess: f64,
    phase_generators: &[Mat],
    steps: usize,
    opt: &StepOptions,
    tol: f64,
    max_iter: usize,
    trust: f64,
) -> Result<ShootingResult> {
    let d = heff.dim();
    let scale = v_guess.amax();
    if scale < 1e-12 {
        return Err(HopfError::SectionDegenerate("guess is the trivial equilibrium".into()));
    }
    let f0 = heff.field(v_guess);
    if f0.amax() < 1e-12 * scale {
        return Err(HopfError::SectionDegenerate("flow direction vanishes at the guess".into()));
    }
    let e0 = heff.value(v_guess);
    let dirs: Vec<Vect> = phase_generators.iter().map(|g| g * v_guess).filter(|v| v.amax() > 1e-12 * scale).collect();
    let neq = d + 2 + dirs.len();
    let (mut x, mut t) = (v_guess.clone(), tau_guess);
    for it in 0..max_iter {
        let (xt, m, s) = flow_with_derivatives(heff, &x, t, steps, opt)?;
        let mut r = Vect::zeros(neq);
        let mut jac = Mat::zeros(neq, d + 1);
        r.rows_mut(0, d).copy_from(&(&xt - &x));
        jac.view_mut((0, 0), (d, d)).copy_from(&(&m - Mat::identity(d, d)));
        jac.view_mut((0, d), (d, 1)).copy_from(&s);
        r[d] = heff.value(&x) - e0;
        let gh = heff.poly.gradient(x.as_slice());
        for j in 0..d {
            jac[(d, j)] = gh[j];
        }
        let dx = &x - v_guess;
        r[d + 1] = dx.dot(&f0) / f0.norm();
        for j in 0..d {
            jac[(d + 1, j)] = f0[j] / f0.norm();
        }
        for (k, w) in dirs.iter().enumerate() {
            r[d + 2 + k] = dx.dot(w) / w.norm();
            for j in 0..d {
                jac[(d + 2 + k, j)] = w[j] / w.norm();
            }
        }
        let res = r.rows(0, d).amax() / scale;
        if res < tol && r.amax() < tol * scale.max(1.0) {
            return Ok(ShootingResult {
                v: x.as_slice().to_vec(),
                tau: t,
                iterations: it,
                residual: res,
            });
        }
        let mut delta = mat::lstsq(&jac, &(-&r), 1e-12);
        let lim = trust * scale.max(1e-3);
        let dn = delta.rows(0, d).amax();
        if dn > lim {
            delta *= lim / dn;
        }
        x += delta.rows(0, d);
        t += delta[d];
        if !x.iter().all(|v| v.is_finite()) || !(t > 0.0) {
            return Err(HopfError::NewtonDiverged("shooting left the domain".into()));
        }
    }
    Err(HopfError::NewtonDiverged(format!("shooting did not converge in {max_iter} iterations")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpoCertificate {
    pub v: Vec<f64>,
    pub tau: f64,
    #[serde(with = "crate::mat::rowmajor")]
    pub xi: Mat,
    #[serde(with = "crate::mat::rowmajor")]
    pub g: Mat,
    pub residual: f64,
    pub samples: usize,
    /// rpo_residual with g replaced by the identity.
    pub plain_periodicity_residual: f64,
    pub nontrivial: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn certify_rpo(h: &Hamiltonian, v: &Vect, tau: f64, xi: &Mat, steps: usize, samples: usize, opt: &StepOptions, nontrivial_ratio: f64) -> Result<RpoCertificate> {
    let g = mat::expm(&(xi * tau));
    let residual = rpo_residual(h, v, tau, &g, steps, samples, opt)?;
    let plain = rpo_residual(h, v, tau, &Mat::identity(h.dim(), h.dim()), steps, samples, opt)?;
    Ok(RpoCertificate {
        v: v.as_slice().to_vec(),
        tau,
        xi: xi.clone(),
        g,
        residual,
        samples,
        plain_periodicity_residual: plain,
        nontrivial: plain > nontrivial_ratio * residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> Hamiltonian {
        let p = Poly::quadratic(&Mat::identity(2, 2));
        Hamiltonian::new(p, SymplecticForm::standard(2)).unwrap()
    }

    #[test]
    fn harmonic_returns_after_one_period() {
        let h = harmonic();
        let x0 = Vect::from_vec(vec![1.0, 0.0]);
        let opt = StepOptions::new(1e-3, 1e-13);
        let tr = integrate(&h, &x0, 2.0 * std::f64::consts::PI, &opt, &[], 100).unwrap();
        assert!((tr.last() - &x0).amax() < 1e-6);
        let tr4 = integrate(&h, &x0, 2.0 * std::f64::consts::PI, &opt.order4(), &[], 100).unwrap();
        assert!((tr4.last() - &x0).amax() < 1e-10);
    }

    #[test]
    fn quadratic_matches_expm() {
        let hm = Mat::from_row_slice(4, 4, &[2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, 0.4, 0.1, 0.0, 0.4, 1.2]);
        let form = SymplecticForm::standard(4);
        let h = Hamiltonian::new(Poly::quadratic(&hm), form.clone()).unwrap();
        let a = form.poisson() * &hm;
        let x0 = Vect::from_vec(vec![0.3, -0.1, 0.2, 0.5]);
        let opt = StepOptions::new(1e-3, 1e-14).order4();
        let x = flow(&h, &x0, 2000, &opt).unwrap();
        assert!((x - mat::expm(&(a * 2.0)) * &x0).amax() < 1e-10);
    }

    #[test]
    fn variational_matches_finite_differences() {
        let form = SymplecticForm::standard(2);
        let q = Poly::var(2, 0);
        let p = Poly::var(2, 1);
        let poly = q.pow(2).add(&p.pow(2)).scale(0.5).add(&q.pow(4).scale(0.1));
        let h = Hamiltonian::new(poly, form).unwrap();
        let x0 = Vect::from_vec(vec![0.4, 0.1]);
        let opt = StepOptions::new(0.0, 1e-15).order4();
        let (x, m, s) = flow_with_derivatives(&h, &x0, 1.3, 100, &opt).unwrap();
        let e = 1e-6;
        for j in 0..2 {
            let mut xp = x0.clone();
            xp[j] += e;
            let mut xm = x0.clone();
            xm[j] -= e;
            let fp = flow_with_derivatives(&h, &xp, 1.3, 100, &opt).unwrap().0;
            let fm = flow_with_derivatives(&h, &xm, 1.3, 100, &opt).unwrap().0;
            assert!(((fp - fm) / (2.0 * e) - m.column(j)).amax() < 1e-7);
        }
        let fp = flow_with_derivatives(&h, &x0, 1.3 + e, 100, &opt).unwrap().0;
        let fm = flow_with_derivatives(&h, &x0, 1.3 - e, 100, &opt).unwrap().0;
        assert!(((fp - fm) / (2.0 * e) - s).amax() < 1e-7);
        let _ = x;
    }

    #[test]
    fn equilibrium_residual_is_zero() {
        let h = harmonic();
        let z = Vect::zeros(2);
        let r = rpo_residual(&h, &z, 1.0, &Mat::identity(2, 2), 100, 5, &StepOptions::new(0.0, 1e-13)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn zero_guess_is_degenerate() {
        let h = harmonic();
        let opt = StepOptions::new(0.0, 1e-13);
        let r = shooting_refine(&h, &Vect::zeros(2), 6.0, &[], 100, &opt, 1e-11, 20, 0.1);
        assert!(matches!(r, Err(HopfError::SectionDegenerate(_))));
    }
}

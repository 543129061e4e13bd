//! Subcommand execution. Every run produces a deterministic report; wall
//! clock data goes to a separate meta file.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hamhopf::branches::{o2_branches, torus_branches};
use hamhopf::family::HamiltonianFamily;
use hamhopf::linear::{resonance_space, verify_equivariance};
use hamhopf::mat::{self, Mat};
use hamhopf::models::oscillator::{complex_coordinates, coupled_oscillator_family, rotation_generator};
use hamhopf::models::so3::{so3_isotropy_lattice, so3_z3_analysis};
use hamhopf::pipeline::{analyze, o2_predict, o2_reduction, refine_and_certify, Analysis};
use hamhopf::selftest::run_selftest;
use hamhopf::{HopfError, Tolerances};

use crate::config::{tolerance_map, ConfigError, Model, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Analyze,
    Resonance,
    Branches,
    Verify,
    Sweep,
    Selftest,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub xi: Option<f64>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    HypothesisFailure,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub subcommand: Subcommand,
    pub model: Option<String>,
    pub seed: u64,
    pub tolerances: std::collections::BTreeMap<String, f64>,
    pub status: Status,
    pub result: Option<Value>,
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::HypothesisFailure => 2,
            Status::Error => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub struct Outcome {
    pub report: Report,
    pub csv: Option<String>,
}

enum Failure {
    Hopf(HopfError),
    Other { code: String, message: String, hypothesis: bool },
}

impl From<HopfError> for Failure {
    fn from(e: HopfError) -> Self {
        Failure::Hopf(e)
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Other {
        code: "INVALID_INPUT".into(),
        message: msg.into(),
        hypothesis: false,
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn base_report(cmd: Subcommand, model: Option<String>, seed: u64, tol: &Tolerances) -> Report {
    Report {
        tool: "hamhopf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cmd,
        model,
        seed,
        tolerances: tolerance_map(tol),
        status: Status::Ok,
        result: None,
        error: None,
    }
}

/// Report for a configuration that failed validation.
pub fn config_failure(cmd: Subcommand, e: &ConfigError) -> Report {
    let mut r = base_report(cmd, None, 0, &Tolerances::default());
    r.status = if e.is_hypothesis_failure() { Status::HypothesisFailure } else { Status::Error };
    r.error = Some(ErrorInfo {
        code: e.code.clone(),
        message: e.to_string(),
        details: Some(serde_json::to_value(&e.errors).expect("schema errors serialize")),
    });
    r
}

pub fn execute(cmd: Subcommand, cfg: &RunConfig, ov: &Overrides) -> Outcome {
    let seed = ov.seed.unwrap_or(cfg.seed);
    let mut report = base_report(cmd, Some(cfg.model.name().to_string()), seed, &cfg.tolerances);
    let mut csv = None;
    let res = match cmd {
        Subcommand::Analyze => run_analyze(cfg, seed),
        Subcommand::Resonance => run_resonance(cfg),
        Subcommand::Branches => run_branches(cfg, ov, seed),
        Subcommand::Verify => run_verify(cfg, ov),
        Subcommand::Sweep => run_sweep(cfg, ov).map(|(v, c)| {
            csv = Some(c);
            v
        }),
        Subcommand::Selftest => run_selftest(seed, &cfg.tolerances).map_err(Failure::from).and_then(|r| {
            let v = serde_json::to_value(&r).expect("selftest serializes");
            if r.pass() {
                Ok(v)
            } else {
                report.result = Some(v);
                Err(Failure::Other {
                    code: "SELFTEST_FAILED".into(),
                    message: format!("{} property failures", r.failures()),
                    hypothesis: false,
                })
            }
        }),
    };
    match res {
        Ok(v) => report.result = Some(v),
        Err(f) => {
            let (code, message, hyp) = match f {
                Failure::Hopf(e) => (e.code().to_string(), e.to_string(), e.is_hypothesis_failure()),
                Failure::Other { code, message, hypothesis } => (code, message, hypothesis),
            };
            report.status = if hyp { Status::HypothesisFailure } else { Status::Error };
            report.error = Some(ErrorInfo {
                code,
                message,
                details: None,
            });
        }
    }
    Outcome { report, csv }
}

fn family_of(cfg: &RunConfig) -> Res<HamiltonianFamily> {
    match &cfg.model {
        Model::Oscillator(p) => Ok(coupled_oscillator_family(p)?),
        Model::Inline { family, .. } => Ok(family.clone()),
        Model::So3(_) => Err(invalid("so3_rep5 is a fixed-parameter equivariant model; this subcommand needs a λ-family")),
    }
}

fn o2_data(cfg: &RunConfig) -> Res<(Mat, Mat)> {
    match &cfg.model {
        Model::Oscillator(_) => Ok((complex_coordinates(), rotation_generator())),
        Model::Inline { o2: Some(o), .. } => Ok((o.zmap.clone(), o.rotation.clone())),
        _ => Err(invalid("O(2) data missing: inline models need model.inline.o2 {zmap, rotation}")),
    }
}

fn analysis(cfg: &RunConfig) -> Res<Analysis> {
    Ok(analyze(&family_of(cfg)?, cfg.lambda_interval, &cfg.tolerances)?)
}

fn analysis_json(an: &Analysis) -> Value {
    let c = &an.coefficients;
    json!({
        "dim": an.family.dim(),
        "collision": an.collision,
        "hopf_events": [an.event],
        "lambda0": an.lambda0(),
        "nu0": an.nu0(),
        "n": c.n,
        "frame_case": c.case,
        "frame_residuals": an.frame.residuals,
        "coefficients": {
            "at_lambda0": c.at_lambda0,
            "d1": c.d1,
            "d2": c.d2,
            "sigma_prime": c.sigma_prime_0,
            "psi_prime": c.psi_prime_0,
            "max_fit_residual": c.max_fit_residual,
        },
        "hypotheses": an.hypotheses,
        "normal_form_homological_residual": an.normal_form.homological_residual,
        "spectrum_check": an.spectrum_check,
        "canonical_hessian_residual": an.canonical_hessian_residual,
    })
}

fn run_analyze(cfg: &RunConfig, seed: u64) -> Res<Value> {
    if let Model::So3(m) = &cfg.model {
        let z3 = so3_z3_analysis(m, seed)?;
        return Ok(json!({
            "params": m,
            "z3_torus": z3,
            "isotropy_lattice": so3_isotropy_lattice(),
        }));
    }
    let an = analysis(cfg)?;
    let mut v = analysis_json(&an);
    if let Ok((zmap, rot)) = o2_data(cfg) {
        let o2 = o2_reduction(&an, &zmap, &rot)?;
        v["o2"] = json!({ "a": o2.coefficients.a, "b": o2.coefficients.b, "a_minus_b": o2.coefficients.a - o2.coefficients.b });
    }
    Ok(v)
}

fn run_resonance(cfg: &RunConfig) -> Res<Value> {
    let fam = family_of(cfg)?;
    let an = analysis(cfg)?;
    let r = resonance_space(&fam.linearization(an.lambda0()), an.nu0(), &cfg.tolerances)?;
    let eq = verify_equivariance(&r, &fam.group, cfg.tolerances.equivariance);
    Ok(json!({
        "lambda0": an.lambda0(),
        "nu0": r.nu0,
        "period": r.period,
        "dim": r.basis.ncols(),
        "harmonics": r.harmonics,
        "kmax": r.kmax,
        "jordan_chevalley": {
            "reconstruction": r.jc.reconstruction_residual(&fam.linearization(an.lambda0()).matrix),
            "commutator": r.jc.commutator_residual(),
            "nilpotency": r.jc.nilpotency_residual(),
        },
        "equivariance": { "pass": eq.pass(), "max_residual": eq.max_residual(), "checks": eq.checks },
    }))
}

fn run_branches(cfg: &RunConfig, ov: &Overrides, seed: u64) -> Res<Value> {
    let b = &cfg.branches;
    if let Model::So3(m) = &cfg.model {
        if b.psi.len() != 2 {
            return Err(invalid("branches.psi must have 2 entries for the Z3~ torus"));
        }
        let z3 = so3_z3_analysis(m, seed)?;
        let chat = Mat::from_fn(2, 2, |i, j| z3.chat[i][j]);
        let pi_n: Vec<f64> = b.radii.iter().map(|r| r * r).collect();
        let torus = torus_branches(&[z3.c1], &chat, &b.psi, &pi_n)?;
        return Ok(json!({
            "isotropy": "Z3~",
            "chat": z3.chat,
            "c1": z3.c1,
            "theorem_applies": z3.theorem_applies,
            "torus": torus,
        }));
    }
    let an = analysis(cfg)?;
    let (zmap, rot) = o2_data(cfg)?;
    let o2 = o2_reduction(&an, &zmap, &rot)?;
    let pairs: Vec<(f64, f64)> = if ov.xi.is_some() || ov.alpha.is_some() {
        vec![(ov.alpha.unwrap_or(0.0), ov.xi.unwrap_or(0.0))]
    } else {
        b.alpha_xi.clone()
    };
    let preds = o2_branches(&o2.coefficients, &pairs, &b.radii, cfg.tolerances.trust_radius)?;
    Ok(json!({
        "lambda0": an.lambda0(),
        "o2": o2.coefficients,
        "branches": preds,
    }))
}

fn run_verify(cfg: &RunConfig, ov: &Overrides) -> Res<Value> {
    let an = analysis(cfg)?;
    let (zmap, rot) = o2_data(cfg)?;
    let o2 = o2_reduction(&an, &zmap, &rot)?;
    let v = &cfg.verify;
    let (r, alpha, xi) = (ov.r.unwrap_or(v.r), ov.alpha.unwrap_or(v.alpha), ov.xi.unwrap_or(v.xi));
    let pred = o2_predict(&an, &o2, r, alpha, xi)?;
    let e = refine_and_certify(&an.family, &pred, &rot, an.nu0(), &cfg.tolerances)?;
    let pass = e.certificate.residual < cfg.tolerances.rpo;
    let out = json!({
        "prediction": e.prediction,
        "shooting": { "tau": e.shooting.tau, "iterations": e.shooting.iterations, "residual": e.shooting.residual, "v": e.shooting.v },
        "certificate": {
            "residual": e.certificate.residual,
            "samples": e.certificate.samples,
            "plain_periodicity_residual": e.certificate.plain_periodicity_residual,
            "nontrivial": e.certificate.nontrivial,
            "tau": e.certificate.tau,
        },
        "period_ratio": e.period_ratio,
        "threshold": cfg.tolerances.rpo,
        "pass": pass,
    });
    if pass {
        Ok(out)
    } else {
        Err(Failure::Other {
            code: "RPO_NOT_CERTIFIED".into(),
            message: format!("residual {:.3e} above {:.3e}", e.certificate.residual, cfg.tolerances.rpo),
            hypothesis: false,
        })
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn run_sweep(cfg: &RunConfig, ov: &Overrides) -> Res<(Value, String)> {
    let an = analysis(cfg)?;
    let model = an.model();
    let fam = &an.family;
    let (lo, hi) = cfg.lambda_interval;
    let npts = cfg.sweep.points;
    let grid: Vec<f64> = (0..npts).map(|i| lo + (hi - lo) * i as f64 / (npts - 1) as f64).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ov.jobs.unwrap_or(0))
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    let rows: Vec<(Vec<f64>, [f64; 5])> = pool.install(|| {
        grid.par_iter()
            .map(|&l| {
                let mut ev = mat::eigenvalues(&fam.linearization(l).matrix);
                ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
                let spec: Vec<f64> = ev.iter().flat_map(|z| [z.re, z.im]).collect();
                let (c, _) = model.fit(l);
                (spec, [c.sigma, c.rho, c.tau, c.psi, c.f1()])
            })
            .collect()
    });
    let dim = fam.dim();
    let mut csv = String::from("lambda");
    for k in 1..=dim {
        let _ = write!(csv, ",re_mu{k},im_mu{k}");
    }
    csv.push_str(",sigma,rho,tau,psi,f1\n");
    for (l, (spec, c)) in grid.iter().zip(&rows) {
        let cells: Vec<String> = std::iter::once(*l).chain(spec.iter().cloned()).chain(c.iter().cloned()).map(fmt).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let sign_changes = rows.windows(2).filter(|w| w[0].1[4].signum() != w[1].1[4].signum()).count();
    Ok((
        json!({
            "lambda0": an.lambda0(),
            "points": npts,
            "f1_sign_changes": sign_changes,
            "columns": csv.lines().next().unwrap_or("").split(',').collect::<Vec<_>>(),
            "rows": rows.iter().zip(&grid).map(|((s, c), l)| json!({"lambda": l, "spectrum": s, "sigma": c[0], "rho": c[1], "tau": c[2], "psi": c[3], "f1": c[4]})).collect::<Vec<_>>(),
        }),
        csv,
    ))
}

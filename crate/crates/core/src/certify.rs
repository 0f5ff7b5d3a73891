//! End-to-end cluster certification: the seven-stage pipeline, the
//! certificate format and its independent checker, mixed-norm balls, and a
//! small Newton oracle for validating results at low dimension.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    dominated, epsilon_interval, min_on_sphere, q_enclosure, realify, remainder_bound, BoundMethod, BoundOptions,
    EpsilonInterval, RealifiedQuartic, SphereBound, DEFAULT_MAX_BOXES, DEFAULT_SAFETY,
};
use crate::error::{Error, Result};
use crate::interval::{mul_down, mul_up, Interval};
use crate::numlinalg::{numerical_kernel, DEFAULT_TAU};
use crate::pipeline::{
    inflate_system, normalize, quadratic_part, singularize, NormalizeError, QuadraticSystem, NORMALIZE_TOL,
};
use crate::poly::{AffineMap, ComplexMatrix, IPolySystem, Point, PolyJson, PolySystem};
use crate::sos::{verify_certificate, SosCertificate, SosCertificateJson};

pub const DEFAULT_EPS_RANGE: (f64, f64) = (1e-6, 10.0);

/// Random directions tried by [`check_certificate`] before the subdivision re-run.
pub const CHECK_SAMPLES: usize = 10_000;
const CHECK_SEED: u64 = 0x5eed_c0de;
const UNITARY_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// mixed-norm balls

/// `√(Σ_{i<κ} |u_i|² + Σ_{i≥κ} |u_i|)`.
pub fn mixed_norm(u: &[Complex64], kappa: usize) -> f64 {
    let s: f64 = u
        .iter()
        .enumerate()
        .map(|(i, z)| if i < kappa { z.norm_sqr() } else { z.norm() })
        .sum();
    s.sqrt()
}

/// The image `A(𝔅_κ(ε))` of the mixed-norm ball under an affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedBall {
    pub kappa: usize,
    pub eps: f64,
    pub map: AffineMap,
}

impl MixedBall {
    pub fn new(kappa: usize, eps: f64, map: AffineMap) -> Result<Self> {
        if kappa > map.n() {
            return Err(Error::Input(format!("kappa = {kappa} exceeds n = {}", map.n())));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Input(format!("radius must be positive and finite, got {eps}")));
        }
        Ok(MixedBall { kappa, eps, map })
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        z.len() == self.n() && mixed_norm(&self.map.pull_back(z), self.kappa) <= self.eps
    }

    /// Radius `ρ` with `‖ρ·d‖_(κ) = ε` along a real unit direction `d`.
    fn radius_along(&self, d: &[f64]) -> f64 {
        let a: f64 = d.iter().take(self.kappa).map(|v| v * v).sum();
        let b: f64 = d.iter().skip(self.kappa).map(|v| v.abs()).sum();
        let e2 = self.eps * self.eps;
        // root of a ρ² + b ρ = ε², in the form without cancellation
        2.0 * e2 / (b + (b * b + 4.0 * a * e2).sqrt())
    }

    /// Closed curve of `count` points on the boundary of the real slice
    /// through the `(i, j)` coordinate plane, mapped through `A`.
    pub fn profile(&self, i: usize, j: usize, count: usize) -> Vec<Point> {
        let n = self.n();
        (0..count)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / count as f64;
                let mut d = vec![0.0; n];
                d[i] = theta.cos();
                d[j] = theta.sin();
                let rho = self.radius_along(&d);
                let u: Vec<Complex64> = d.iter().map(|v| Complex64::new(rho * v, 0.0)).collect();
                self.map.apply(&u)
            })
            .collect()
    }

    /// Boundary of the real slice for planar (`n = 2`) plotting.
    pub fn region_boundary(&self, count: usize) -> Result<Vec<Point>> {
        if self.n() != 2 {
            return Err(Error::Unsupported(format!(
                "planar boundary needs n = 2, got n = {}; use axis profiles",
                self.n()
            )));
        }
        Ok(self.profile(0, 1, count))
    }

    /// One boundary profile per coordinate plane `(i, j)`, `i < j`.
    pub fn axis_profiles(&self, count: usize) -> Vec<((usize, usize), Vec<Point>)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(((i, j), self.profile(i, j, count)));
            }
        }
        out
    }

    /// Per-coordinate radii of a `u`-box enclosing the ball.
    fn box_radii(&self) -> Vec<f64> {
        (0..self.n()).map(|i| if i < self.kappa { self.eps } else { self.eps * self.eps }).collect()
    }
}

// ---------------------------------------------------------------------------
// pipeline

/// The seven stages of the pipeline, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Kernel,
    Singularize,
    Normalize,
    Inflate,
    SphereBound,
    Radius,
    Output,
}

impl Stage {
    pub fn number(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Kernel => "approximate kernel",
            Stage::Singularize => "singularize",
            Stage::Normalize => "normalize",
            Stage::Inflate => "inflate",
            Stage::SphereBound => "sphere bound",
            Stage::Radius => "radius",
            Stage::Output => "output",
        };
        write!(f, "step {} ({name})", self.number())
    }
}

/// Why a run stopped, with the quantities measured at that point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub stage: Stage,
    pub step: usize,
    pub message: String,
    pub measured: BTreeMap<String, f64>,
}

impl PipelineFailure {
    fn new(stage: Stage, message: impl Into<String>, measured: &[(&str, f64)]) -> Self {
        PipelineFailure {
            stage,
            step: stage.number(),
            message: message.into(),
            measured: measured.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.message)?;
        for (k, v) in &self.measured {
            write!(f, "; {k} = {v:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    Invalid(#[from] Error),
    #[error("{0}")]
    Failed(PipelineFailure),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub tau: f64,
    /// Required `c`; without it the bounder stops at its default relative gap.
    pub target_c: Option<f64>,
    pub max_boxes: usize,
    pub eps_range: (f64, f64),
    pub safety: f64,
    /// Use this radius instead of the geometric mean of the feasible interval.
    pub epsilon: Option<f64>,
    #[serde(skip)]
    pub threads: usize,
    /// Take `c` from this SOS certificate instead of subdividing.
    #[serde(skip)]
    pub sos: Option<SosCertificate>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            tau: DEFAULT_TAU,
            target_c: None,
            max_boxes: DEFAULT_MAX_BOXES,
            eps_range: DEFAULT_EPS_RANGE,
            safety: DEFAULT_SAFETY,
            epsilon: None,
            threads: 1,
            sos: None,
        }
    }
}

impl PipelineOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Input(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Input(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        let (lo, hi) = self.eps_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Input(format!("epsilon range must satisfy 0 < lo < hi < inf, got ({lo}, {hi})")));
        }
        if self.max_boxes == 0 {
            return Err(Error::Input("max_boxes must be positive".into()));
        }
        if let Some(c) = self.target_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Input(format!("target c must be positive, got {c}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Input(format!("epsilon must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

/// The isolation claim: `f` has exactly `multiplicity` zeros, counted with
/// multiplicity, in `A(𝔅_κ(ε))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterCertificate {
    pub kappa: usize,
    pub map: AffineMap,
    pub epsilon: f64,
    pub epsilon_interval: EpsilonInterval,
    pub bound: SphereBound,
    pub q: QuadraticSystem,
    pub multiplicity: u64,
    pub options: PipelineOptions,
    pub sos: Option<SosCertificate>,
    pub digest: String,
}

impl ClusterCertificate {
    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn region(&self) -> MixedBall {
        MixedBall { kappa: self.kappa, eps: self.epsilon, map: self.map.clone() }
    }

    pub fn to_json(&self) -> CertificateJson {
        let pair = |z: &Complex64| [z.re, z.im];
        let n = self.n();
        CertificateJson {
            n,
            kappa: self.kappa,
            epsilon: self.epsilon,
            epsilon_interval: [self.epsilon_interval.lo, self.epsilon_interval.hi],
            c: self.bound.c,
            q_lower: self.bound.q_lower,
            safety: self.epsilon_interval.safety,
            bound: BoundJson { method: self.bound.method, effort: self.bound.effort },
            a: AffineJson {
                translation: self.map.translation.iter().map(pair).collect(),
                unitary: (0..n).map(|i| (0..n).map(|j| pair(&self.map.linear[(i, j)])).collect()).collect(),
            },
            q: self.q.system().to_json(),
            multiplicity: self.multiplicity,
            options: self.options.clone(),
            sos: self.sos.as_ref().map(SosCertificate::to_json),
            digest: self.digest.clone(),
        }
    }

    pub fn from_json(j: &CertificateJson) -> Result<Self> {
        let n = j.n;
        let bad = |msg: String| Error::Certificate(msg);
        if j.a.translation.len() != n {
            return Err(bad(format!("A.translation has length {}, expected {n}", j.a.translation.len())));
        }
        if j.a.unitary.len() != n || j.a.unitary.iter().any(|r| r.len() != n) {
            return Err(bad(format!("A.unitary must be {n} rows of {n} entries")));
        }
        let translation: Point = j.a.translation.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        let linear = ComplexMatrix::from_fn(n, n, |i, k| Complex64::new(j.a.unitary[i][k][0], j.a.unitary[i][k][1]));
        let map = AffineMap::new(translation, linear)?;
        let q = QuadraticSystem::new(PolySystem::from_json(&j.q)?)?;
        if q.n() != n {
            return Err(bad(format!("Q has {} components, expected {n}", q.n())));
        }
        let bound = SphereBound {
            c: j.c,
            q_lower: j.q_lower,
            q_upper: None,
            method: j.bound.method,
            effort: j.bound.effort,
            target_missed: false,
        };
        let sos = j.sos.as_ref().map(SosCertificate::from_json).transpose()?;
        Ok(ClusterCertificate {
            kappa: j.kappa,
            map,
            epsilon: j.epsilon,
            epsilon_interval: EpsilonInterval { lo: j.epsilon_interval[0], hi: j.epsilon_interval[1], safety: j.safety },
            bound,
            q,
            multiplicity: j.multiplicity,
            options: j.options.clone(),
            sos,
            digest: j.digest.clone(),
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("certificate serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }

    /// SHA-256 over the canonical JSON of `f` and every certificate field except the digest.
    pub fn compute_digest(&self, f: &PolySystem) -> String {
        let mut j = self.to_json();
        j.digest.clear();
        let bytes = serde_json::to_vec(&(f.to_json(), j)).expect("certificate serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineJson {
    pub translation: Vec<[f64; 2]>,
    /// Rows of `U`, entries as `[re, im]`.
    pub unitary: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundJson {
    pub method: BoundMethod,
    pub effort: usize,
}

/// On-disk certificate layout.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateJson {
    pub n: usize,
    pub kappa: usize,
    pub epsilon: f64,
    pub epsilon_interval: [f64; 2],
    pub c: f64,
    pub q_lower: f64,
    pub safety: f64,
    pub bound: BoundJson,
    #[serde(rename = "A")]
    pub a: AffineJson,
    #[serde(rename = "Q")]
    pub q: Vec<PolyJson>,
    pub multiplicity: u64,
    pub options: PipelineOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sos: Option<SosCertificateJson>,
    pub digest: String,
}

/// Intermediate objects of a successful run, for inspection and tests.
#[derive(Clone, Debug)]
pub struct PipelineTrace {
    pub singular_values: Vec<f64>,
    pub g: PolySystem,
    pub inflated: PolySystem,
    pub constant_norm: f64,
    pub linear_norm: f64,
    /// `f∘A∘S_κ − Q` in interval arithmetic.
    pub remainder: IPolySystem,
}

/// `inflate(f∘A, κ) − Q` with every coefficient enclosed.
pub fn remainder_system(f: &PolySystem, map: &AffineMap, kappa: usize, q: &QuadraticSystem) -> Result<IPolySystem> {
    let fa = f.to_interval().compose_affine(map)?;
    Ok(fa.inflate(kappa).sub(&q.system().to_interval()))
}

pub fn run_pipeline(
    f: &PolySystem,
    y: &[Complex64],
    opts: &PipelineOptions,
) -> std::result::Result<ClusterCertificate, PipelineError> {
    run_pipeline_traced(f, y, opts).map(|(c, _)| c)
}

pub fn run_pipeline_traced(
    f: &PolySystem,
    y: &[Complex64],
    opts: &PipelineOptions,
) -> std::result::Result<(ClusterCertificate, PipelineTrace), PipelineError> {
    use PipelineError::Failed;
    opts.validate()?;
    let n = f.n();
    if n == 0 {
        return Err(Error::Input("empty system".into()).into());
    }
    if y.len() != n {
        return Err(Error::Dimension { expected: n, found: y.len() }.into());
    }
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Input("point has a non-finite coordinate".into()).into());
    }

    // (1) approximate kernel of Df(y)
    let jac = f.jacobian(y)?;
    let kd = numerical_kernel(&jac, opts.tau)
        .map_err(|e| Failed(PipelineFailure::new(Stage::Kernel, e.to_string(), &[])))?;
    let kappa = kd.kappa;

    // (2) g = f − f(y) − Df(y)·π_V(x − y)
    let g = singularize(f, y, &kd.basis)
        .map_err(|e| Failed(PipelineFailure::new(Stage::Singularize, e.to_string(), &[("kappa", kappa as f64)])))?;

    // (3) A = (y, U)
    let (ga, map) = normalize(&g, y, &kd).map_err(|e| {
        let measured = match &e {
            NormalizeError::NotAZero { residual, limit } => vec![("g_at_y", *residual), ("limit", *limit)],
            NormalizeError::KernelResidual { residual, limit } => vec![("kernel_column_norm", *residual), ("limit", *limit)],
            NormalizeError::Other(_) => vec![],
        };
        Failed(PipelineFailure::new(Stage::Normalize, e.to_string(), &measured))
    })?;

    // (4) g∘A∘S_κ has no constant or linear part
    let inflated = inflate_system(&ga, kappa, map.clone());
    let limit = NORMALIZE_TOL * g.coeff_sup().max(1.0);
    let diag = inflated.diagnostics;
    if diag.constant_norm > limit || diag.linear_norm > limit {
        return Err(Failed(PipelineFailure::new(
            Stage::Inflate,
            "inflated system keeps constant or linear terms",
            &[("constant_norm", diag.constant_norm), ("linear_norm", diag.linear_norm), ("limit", limit)],
        )));
    }
    let q = quadratic_part(&inflated.h);

    // (5) c > 0 with ‖Q‖ ≥ c on the unit sphere
    let rq = realify(&q);
    let (bound, sos) = match &opts.sos {
        Some(cert) => {
            let mut cert = cert.clone();
            let v = verify_certificate(&rq, &mut cert)
                .map_err(|e| Failed(PipelineFailure::new(Stage::SphereBound, e.to_string(), &[])))?;
            match v.sphere_bound() {
                Some(b) => (b, Some(cert)),
                None => {
                    return Err(Failed(PipelineFailure::new(
                        Stage::SphereBound,
                        "SOS certificate rejected",
                        &[
                            ("c_claimed", v.c_claimed),
                            ("verified_bound", v.verified_bound),
                            ("residual", v.residual),
                            ("psd_margin", v.psd_margin),
                        ],
                    )))
                }
            }
        }
        None => {
            let bo = BoundOptions {
                target: opts.target_c.map(|c| mul_up(c, c)),
                max_boxes: opts.max_boxes,
                threads: opts.threads.max(1),
                ..BoundOptions::default()
            };
            (min_on_sphere(&rq, &bo), None)
        }
    };
    if let Some(t) = opts.target_c {
        if bound.c < t {
            return Err(Failed(PipelineFailure::new(
                Stage::SphereBound,
                "target c not certified",
                &[("c", bound.c), ("target_c", t), ("q_lower", bound.q_lower), ("effort", bound.effort as f64)],
            )));
        }
    }
    if bound.c <= 0.0 {
        let mut measured = vec![("c", bound.c), ("q_lower", bound.q_lower), ("effort", bound.effort as f64)];
        if let Some(u) = bound.q_upper {
            measured.push(("q_sampled_min", u));
        }
        return Err(Failed(PipelineFailure::new(
            Stage::SphereBound,
            "no positive lower bound for |Q| on the unit sphere",
            &measured,
        )));
    }

    // (6) radii where ‖f∘A∘S_κ − Q‖ < c ε² on the sphere of radius ε
    let remainder = remainder_system(f, &map, kappa, &q)?;
    let Some(interval) = epsilon_interval(&remainder, bound.c, opts.eps_range, opts.safety) else {
        let (lo, hi) = opts.eps_range;
        let ratio = |e: f64| remainder_bound(&remainder, e) / (opts.safety * bound.c * e * e);
        let best = crate::bounds::scan_points(opts.eps_range)
            .into_iter()
            .map(ratio)
            .fold(f64::INFINITY, f64::min);
        return Err(Failed(PipelineFailure::new(
            Stage::Radius,
            "remainder is not dominated by c·ε² anywhere in the radius range",
            &[
                ("c", bound.c),
                ("eps_lo", lo),
                ("eps_hi", hi),
                ("remainder_at_lo", remainder_bound(&remainder, lo)),
                ("remainder_at_hi", remainder_bound(&remainder, hi)),
                ("best_ratio", best),
            ],
        )));
    };

    // (7) the region A(𝔅_κ(ε)) holds 2^κ zeros
    let epsilon = opts.epsilon.unwrap_or_else(|| interval.geometric_mean());
    if !interval.contains(epsilon) || !dominated(&remainder, bound.c, epsilon, opts.safety) {
        return Err(Failed(PipelineFailure::new(
            Stage::Output,
            "requested radius is outside the certified interval",
            &[("epsilon", epsilon), ("eps_lo", interval.lo), ("eps_hi", interval.hi)],
        )));
    }
    let mut recorded = opts.clone();
    recorded.threads = 1;
    recorded.sos = None;
    let mut cert = ClusterCertificate {
        kappa,
        map,
        epsilon,
        epsilon_interval: interval,
        bound: SphereBound { q_upper: None, target_missed: false, ..bound },
        q,
        multiplicity: 1u64 << kappa,
        options: recorded,
        sos,
        digest: String::new(),
    };
    cert.digest = cert.compute_digest(f);
    let trace = PipelineTrace {
        singular_values: kd.singular_values,
        g,
        inflated: inflated.h,
        constant_norm: diag.constant_norm,
        linear_norm: diag.linear_norm,
        remainder,
    };
    Ok((cert, trace))
}

// ---------------------------------------------------------------------------
// independent re-verification

/// The first check a certificate failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub check: &'static str,
    pub detail: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

fn reject(check: &'static str, detail: impl Into<String>) -> std::result::Result<(), Rejection> {
    Err(Rejection { check, detail: detail.into() })
}

/// Re-derives every claim in `cert` from `f` alone; see [`check_certificate`].
pub fn verify_cluster_certificate(f: &PolySystem, cert: &ClusterCertificate) -> std::result::Result<(), Rejection> {
    let n = f.n();
    if cert.n() != n || cert.q.n() != n {
        return reject("dimension", format!("certificate has n = {}, system has n = {n}", cert.n()));
    }
    let expected = cert.compute_digest(f);
    if expected != cert.digest {
        return reject("digest", format!("expected {expected}, found {}", cert.digest));
    }
    if cert.kappa > n || cert.multiplicity != 1u64 << cert.kappa {
        return reject("multiplicity", format!("kappa = {}, multiplicity = {}", cert.kappa, cert.multiplicity));
    }
    let defect = cert.map.unitarity_defect();
    if defect.is_nan() || defect > UNITARY_TOL {
        return reject("unitary", format!("|U†U − I| = {defect:e}"));
    }
    let iv = cert.epsilon_interval;
    if !(iv.safety > 0.0 && iv.safety <= 1.0) {
        return reject("safety", format!("safety = {}", iv.safety));
    }
    if !(iv.lo > 0.0 && iv.lo <= iv.hi && iv.contains(cert.epsilon)) {
        return reject("radius", format!("epsilon {} outside [{}, {}]", cert.epsilon, iv.lo, iv.hi));
    }
    let c = cert.bound.c;
    if !(c > 0.0 && c.is_finite() && mul_up(c, c) <= cert.bound.q_lower) {
        return reject("bound", format!("c = {c} is not supported by q_lower = {}", cert.bound.q_lower));
    }

    let remainder = match remainder_system(f, &cert.map, cert.kappa, &cert.q) {
        Ok(r) => r,
        Err(e) => return reject("remainder", e.to_string()),
    };
    for e in [cert.epsilon, iv.lo, iv.hi] {
        if !dominated(&remainder, c, e, iv.safety) {
            return reject(
                "domination",
                format!(
                    "at epsilon = {e}: remainder bound {:e} vs {:e}",
                    remainder_bound(&remainder, e),
                    iv.safety * c * e * e
                ),
            );
        }
    }

    let rq = realify(&cert.q);
    let c2 = mul_up(c, c);
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    let mut x = vec![0.0; rq.dim()];
    for _ in 0..CHECK_SAMPLES {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let s = x.iter().fold(Interval::ZERO, |acc, &v| acc + Interval::point(v).sqr());
        let norm4 = s.sqr().lo;
        let value = q_enclosure(&rq, &x);
        if value.hi < mul_down(c2, norm4) {
            return reject("sampling", format!("|Q|² below c² at a sampled direction (value ≤ {:e})", value.hi / norm4));
        }
    }

    match (cert.bound.method, &cert.sos) {
        (BoundMethod::Sos, Some(sos)) => revalidate_sos(&rq, sos, cert.bound.q_lower),
        (BoundMethod::Sos, None) => reject("bound", "SOS bound without an embedded SOS certificate"),
        (BoundMethod::Subdivision, _) => revalidate_subdivision(&rq, cert.bound.q_lower, cert.bound.effort),
    }
}

fn revalidate_sos(rq: &RealifiedQuartic, sos: &SosCertificate, q_lower: f64) -> std::result::Result<(), Rejection> {
    let mut sos = sos.clone();
    match verify_certificate(rq, &mut sos) {
        Ok(v) if v.accepted() && v.verified_bound >= q_lower => Ok(()),
        Ok(v) => reject("sos", format!("verified bound {:e} does not support q_lower = {q_lower:e}", v.verified_bound)),
        Err(e) => reject("sos", e.to_string()),
    }
}

fn revalidate_subdivision(rq: &RealifiedQuartic, q_lower: f64, effort: usize) -> std::result::Result<(), Rejection> {
    let budget = effort.saturating_mul(4).saturating_add(1000).min(DEFAULT_MAX_BOXES);
    let opts = BoundOptions { target: Some(q_lower), max_boxes: budget, ..BoundOptions::default() };
    let fresh = min_on_sphere(rq, &opts);
    if fresh.q_lower >= q_lower {
        Ok(())
    } else {
        reject(
            "subdivision",
            format!("fresh run reached q_lower = {:e} < {q_lower:e} within {budget} boxes", fresh.q_lower),
        )
    }
}

/// True iff every claim in `cert` re-verifies against `f`: the digest, the
/// multiplicity, the Rouché domination at ε and the interval endpoints in
/// directed rounding, and the sphere bound by sampling plus either a fresh
/// subdivision run or the embedded SOS certificate.
pub fn check_certificate(f: &PolySystem, cert: &ClusterCertificate) -> bool {
    verify_cluster_certificate(f, cert).is_ok()
}

// ---------------------------------------------------------------------------
// Newton oracle

/// Singular values below this fraction of the largest count towards the corank of a found zero.
pub const ORACLE_RANK_TOL: f64 = 1e-6;
const ORACLE_RESIDUAL: f64 = 1e-12;
const NEWTON_ITERATIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct OracleZero {
    pub point: Point,
    pub residual: f64,
    /// Length of the last Newton step; the accuracy of `point` at singular zeros.
    pub last_step: f64,
    pub corank: usize,
}

impl OracleZero {
    /// `2^corank`, the multiplicity of a zero that inflates to a regular quadratic zero.
    pub fn multiplicity_estimate(&self) -> u64 {
        1u64 << self.corank
    }
}

struct Newton {
    f: PolySystem,
    derivs: Vec<Vec<crate::poly::Poly>>,
}

impl Newton {
    fn new(f: &PolySystem) -> Result<Self> {
        let n = f.n();
        let derivs = f
            .components()
            .iter()
            .map(|p| (0..n).map(|i| p.diff(i)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Newton { f: f.clone(), derivs })
    }

    fn jacobian(&self, x: &[Complex64]) -> ComplexMatrix {
        let n = x.len();
        ComplexMatrix::from_fn(n, n, |j, i| self.derivs[j][i].eval(x).expect("dimension checked"))
    }

    fn residual(&self, x: &[Complex64]) -> (DVector<Complex64>, f64) {
        let v = DVector::from_vec(self.f.eval(x).expect("dimension checked"));
        let r = v.norm();
        (v, r)
    }

    /// Returns `(point, residual, last step)`, or `None` on divergence.
    fn solve(&self, seed: Point) -> Option<(Point, f64, f64)> {
        let mut x = seed;
        let (mut fx, mut res) = self.residual(&x);
        let mut step = f64::INFINITY;
        for _ in 0..NEWTON_ITERATIONS {
            if res == 0.0 {
                step = 0.0;
                break;
            }
            let delta = self.jacobian(&x).lu().solve(&fx)?;
            step = delta.norm();
            if !step.is_finite() {
                return None;
            }
            for (xi, d) in x.iter_mut().zip(delta.iter()) {
                *xi -= d;
            }
            let scale = x.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if scale > 1e8 {
                return None;
            }
            (fx, res) = self.residual(&x);
            if step <= 1e-15 * scale {
                break;
            }
        }
        res.is_finite().then_some((x, res, step))
    }
}

/// Newton's method from a grid of `grid^(2n)` seeds over a box enclosing the
/// region; converged points are deduplicated and filtered by membership.
/// Intended for `n ≤ 3`.
pub fn oracle_solve(f: &PolySystem, region: &MixedBall, grid: usize) -> Vec<OracleZero> {
    let n = f.n();
    if n != region.n() || grid == 0 {
        return Vec::new();
    }
    let Ok(newton) = Newton::new(f) else {
        return Vec::new();
    };
    let radii = region.box_radii();
    let tol = ORACLE_RESIDUAL * f.coeff_sup().max(1.0);
    let coords = |r: f64| -> Vec<f64> {
        (0..grid).map(|k| -r + (2 * k + 1) as f64 * r / grid as f64).collect()
    };
    let axes: Vec<Vec<f64>> = radii.iter().map(|&r| coords(r)).collect();

    let mut seeds = vec![vec![Complex64::new(0.0, 0.0); n]];
    let total = grid.pow(2 * n as u32);
    for mut idx in 0..total {
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for (i, ui) in u.iter_mut().enumerate() {
            let re = axes[i][idx % grid];
            idx /= grid;
            let im = axes[i][idx % grid];
            idx /= grid;
            *ui = Complex64::new(re, im);
        }
        seeds.push(u);
    }

    let mut found: Vec<OracleZero> = Vec::new();
    for u in seeds {
        let Some((x, res, step)) = newton.solve(region.map.apply(&u)) else {
            continue;
        };
        if res > tol {
            continue;
        }
        let dup = found.iter_mut().find(|z| {
            let d = z.point.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            d <= 1e-8 + 10.0 * (z.last_step + step)
        });
        match dup {
            Some(z) if res < z.residual => {
                z.point = x;
                z.residual = res;
                z.last_step = step;
            }
            Some(_) => {}
            None => found.push(OracleZero { point: x, residual: res, last_step: step, corank: 0 }),
        }
    }
    found.retain(|z| region.contains(&z.point));
    for z in &mut found {
        z.corank = numerical_kernel(&newton.jacobian(&z.point), ORACLE_RANK_TOL).map(|k| k.kappa).unwrap_or(0);
    }
    found.sort_by(|a, b| {
        let key = |z: &OracleZero| z.point.iter().map(|c| (c.re, c.im)).collect::<Vec<_>>();
        key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    found
}

/// The oracle agrees with a certified count when it finds exactly that many
/// distinct zeros, or fewer whose rank-based multiplicities add up to it.
pub fn oracle_consistent(zeros: &[OracleZero], multiplicity: u64) -> bool {
    let distinct = zeros.len() as u64;
    distinct == multiplicity
        || (distinct < multiplicity && zeros.iter().map(OracleZero::multiplicity_estimate).sum::<u64>() == multiplicity)
}

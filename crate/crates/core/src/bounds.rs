//! Rigorous scalar bounds for the two Rouché conditions.
//!
//! * [`min_on_sphere`] certifies `c` with `‖Q(x)‖ ≥ c` on the unit sphere by
//!   interval branch-and-bound. Since `q` is homogeneous of degree 4 and
//!   invariant under a common phase, every sphere point is represented on a
//!   face `x_k = 1` with `|x_j| ≤ 1` (the full `4n`-face cube cover is also
//!   available). Each box gets a Taylor expansion of `q` around its center;
//!   the bound is the largest `t` with `q − t‖x‖⁴ ≥ 0` certified on the box.
//! * [`remainder_bound`] and [`epsilon_interval`] find the radii `ε` where the
//!   remainder is dominated by `c ε²`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interval::{add_down, add_up, div_down, mul_down, mul_up, sqrt_down, sqrt_up, sub_down, sub_up, Interval};
use crate::pipeline::QuadraticSystem;
use crate::poly::{Coeff, IPoly, Monomial, Poly, PolySystem};

pub const DEFAULT_MAX_BOXES: usize = 200_000;
pub const DEFAULT_REL_GAP: f64 = 0.01;
pub const DEFAULT_SAFETY: f64 = 0.999;

/// Boxes split per round; fixed so the result does not depend on the thread count.
const BATCH: usize = 32;

/// `q(a, b) = ‖Q(a + ib)‖²` as a sum of squares of `2n` real quadratic forms.
///
/// Variables are ordered `(a_1..a_n, b_1..b_n)`. Each form is stored as a
/// dense symmetric matrix; entries are exact (every entry receives a single
/// coefficient, possibly halved).
#[derive(Clone, Debug, PartialEq)]
pub struct RealifiedQuartic {
    n: usize,
    forms: Vec<Vec<f64>>,
}

impl RealifiedQuartic {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real variables, `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Symmetric matrices of the real forms, row-major; `Re Q_j` then `Im Q_j`.
    pub fn forms(&self) -> &[Vec<f64>] {
        &self.forms
    }

    fn form_value(&self, k: usize, x: &[f64]) -> f64 {
        let d = self.dim();
        let m = &self.forms[k];
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += m[i * d + j] * x[j];
            }
            s += x[i] * row;
        }
        s
    }

    /// Floating-point value of `q` at a real point.
    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.forms.len()).map(|k| self.form_value(k, x).powi(2)).sum()
    }

    /// `q(x) / ‖x‖⁴`.
    pub fn normalized_value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum();
        self.value(x) / (s * s)
    }

    /// One real form as a polynomial in `2n` variables.
    pub fn form_poly(&self, k: usize) -> Poly<Complex64> {
        let d = self.dim();
        let m = &self.forms[k];
        let mut p = Poly::zero(d);
        for i in 0..d {
            for j in i..d {
                let v = if i == j { m[i * d + i] } else { 2.0 * m[i * d + j] };
                p.add_term(Monomial::var(d, i).mul(&Monomial::var(d, j)), Complex64::new(v, 0.0));
            }
        }
        p
    }

    /// `q` expanded as an interval polynomial.
    pub fn quartic_poly(&self) -> IPoly {
        let mut q = IPoly::zero(self.dim());
        for k in 0..self.forms.len() {
            let f = self.form_poly(k).to_interval();
            q = &q + &(&f * &f);
        }
        q
    }
}

fn add_sym(m: &mut [f64], d: usize, p: usize, q: usize, k: f64) {
    if p == q {
        m[p * d + p] += k;
    } else {
        m[p * d + q] += 0.5 * k;
        m[q * d + p] += 0.5 * k;
    }
}

/// Substitutes `x_i = a_i + i b_i` and splits every component into its real
/// and imaginary quadratic forms.
pub fn realify(q: &QuadraticSystem) -> RealifiedQuartic {
    let n = q.n();
    let d = 2 * n;
    let mut forms = Vec::with_capacity(2 * n);
    for p in q.components() {
        let mut re = vec![0.0; d * d];
        let mut im = vec![0.0; d * d];
        for (m, c) in p.terms() {
            let e = m.exponents();
            let (i, j) = match e.iter().position(|&v| v == 2) {
                Some(i) => (i, i),
                None => {
                    let mut it = e.iter().enumerate().filter(|(_, &v)| v == 1).map(|(k, _)| k);
                    let i = it.next().expect("degree-2 monomial");
                    (i, it.next().expect("degree-2 monomial"))
                }
            };
            let (ai, aj, bi, bj) = (i, j, n + i, n + j);
            // x_i x_j = (a_i a_j − b_i b_j) + i (a_i b_j + a_j b_i)
            add_sym(&mut re, d, ai, aj, c.re);
            add_sym(&mut re, d, bi, bj, -c.re);
            add_sym(&mut im, d, ai, aj, c.im);
            add_sym(&mut im, d, bi, bj, -c.im);
            if i == j {
                add_sym(&mut re, d, ai, bi, -2.0 * c.im);
                add_sym(&mut im, d, ai, bi, 2.0 * c.re);
            } else {
                add_sym(&mut re, d, ai, bj, -c.im);
                add_sym(&mut re, d, aj, bi, -c.im);
                add_sym(&mut im, d, ai, bj, c.re);
                add_sym(&mut im, d, aj, bi, c.re);
            }
        }
        forms.push(re);
        forms.push(im);
    }
    RealifiedQuartic { n, forms }
}

/// Validating variant of [`realify`] for an arbitrary system.
pub fn realify_system(q: &PolySystem) -> Result<RealifiedQuartic> {
    Ok(realify(&QuadraticSystem::new(q.clone())?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    Subdivision,
    Sos,
}

/// Certified lower bound on `‖Q‖` over the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereBound {
    /// `c ≤ min ‖Q‖`, equal to `√q_lower` rounded down.
    pub c: f64,
    /// `q_lower ≤ min ‖Q‖²`.
    pub q_lower: f64,
    /// Smallest sampled value of `‖Q‖²` (an upper bound on the minimum), if any.
    pub q_upper: Option<f64>,
    pub method: BoundMethod,
    /// Boxes evaluated, or the relaxation level for SOS.
    pub effort: usize,
    pub target_missed: bool,
}

impl SphereBound {
    pub fn from_q_lower(q_lower: f64, q_upper: Option<f64>, method: BoundMethod, effort: usize, target_missed: bool) -> Self {
        SphereBound { c: sqrt_down(q_lower.max(0.0)), q_lower, q_upper, method, effort, target_missed }
    }
}

/// How the unit sphere is covered by boxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereCover {
    /// The `4n` facets of `[-1, 1]^{2n}`; each sphere point is the radial
    /// projection of a facet point.
    CubeFaces,
    /// `n` boxes `{x_k = 1, |Re x_j|, |Im x_j| ≤ 1}` of dimension `2n − 2`.
    /// Valid because `q(e^{iθ}x) = q(x)`: rotating the largest coordinate of
    /// a sphere point to the positive real axis and rescaling lands in box `k`.
    #[default]
    PhaseReduced,
}

#[derive(Clone, Debug)]
pub struct BoundOptions {
    /// Stop as soon as `q_lower ≥ target`.
    pub target: Option<f64>,
    pub max_boxes: usize,
    /// Without a target, stop once `q_lower ≥ (1 − rel_gap)·q_upper`.
    pub rel_gap: f64,
    pub threads: usize,
    pub cover: SphereCover,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            target: None,
            max_boxes: DEFAULT_MAX_BOXES,
            rel_gap: DEFAULT_REL_GAP,
            threads: 1,
            cover: SphereCover::default(),
        }
    }
}

fn initial_boxes(n: usize, cover: SphereCover) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = 2 * n;
    let mut out = Vec::new();
    match cover {
        SphereCover::CubeFaces => {
            for k in 0..d {
                for s in [-1.0, 1.0] {
                    let mut lo = vec![-1.0; d];
                    let mut hi = vec![1.0; d];
                    lo[k] = s;
                    hi[k] = s;
                    out.push((lo, hi));
                }
            }
        }
        SphereCover::PhaseReduced => {
            for k in 0..n {
                let mut lo = vec![-1.0; d];
                let mut hi = vec![1.0; d];
                lo[k] = 1.0;
                hi[k] = 1.0;
                lo[n + k] = 0.0;
                hi[n + k] = 0.0;
                out.push((lo, hi));
            }
        }
    }
    out
}

/// In the phase-reduced cover only `|x_j| ≤ 1` is needed; a box where some
/// pair `(a_j, b_j)` lies entirely outside the unit disk can be dropped.
fn outside_disk(n: usize, lo: &[f64], hi: &[f64]) -> bool {
    let min_sq = |i: usize| {
        let m = if lo[i] > 0.0 {
            lo[i]
        } else if hi[i] < 0.0 {
            -hi[i]
        } else {
            0.0
        };
        mul_down(m, m)
    };
    (0..n).any(|j| add_down(min_sq(j), min_sq(n + j)) > 1.0)
}

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bound: f64,
    id: u64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    // max-heap on the reversed key: smallest bound first, then oldest
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then_with(|| o.id.cmp(&self.id))
    }
}

/// `γ_k = k u / (1 − k u)`, the standard bound for `k` roundings.
fn gamma(k: usize) -> f64 {
    let ku = k as f64 * (f64::EPSILON / 2.0);
    ku / (1.0 - ku)
}

/// One contribution `c_α · mult · m^γ` to the Taylor coefficient of `d^β`
/// in `q(m + d) = Σ_α c_α (m + d)^α`.
struct TaylorEntry {
    coeff: usize,
    mult: f64,
    gamma: Vec<(usize, u32)>,
    target: usize,
}

/// Precomputed Taylor-shift table of `q`, built from its monomial
/// coefficients so that box bounds depend only on `q` and not on the forms
/// it was assembled from.
struct QuarticModel {
    d: usize,
    cmid: Vec<f64>,
    crad: Vec<f64>,
    entries: Vec<TaylorEntry>,
    // per target: number of summands and, for cubic targets, the exponents
    counts: Vec<usize>,
    cubic: Vec<Vec<(usize, u32)>>,
}

impl QuarticModel {
    // target layout: constant, d linear, d(d+1)/2 quadratic (i ≤ j), cubic
    fn quad_index(d: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        1 + d + i * d - i * (i + 1) / 2 + j
    }

    fn new(rq: &RealifiedQuartic) -> Self {
        let d = rq.dim();
        let q = rq.quartic_poly();
        let mut cmid = Vec::new();
        let mut crad = Vec::new();
        let mut entries = Vec::new();
        let nquad = d * (d + 1) / 2;
        let mut cubic_index = std::collections::BTreeMap::new();
        let mut cubic = Vec::new();
        for (mono, c) in q.terms() {
            let k = cmid.len();
            let re = c.re;
            let mid = re.mid();
            cmid.push(mid);
            crad.push(sub_up(re.hi, mid).max(sub_up(mid, re.lo)));
            let alpha = mono.exponents();
            // enumerate β ≤ α with |β| ≤ 3
            let mut beta = vec![0u32; d];
            loop {
                let deg: u32 = beta.iter().sum();
                if deg <= 3 {
                    let mut mult = 1.0;
                    let mut gamma = Vec::new();
                    for i in 0..d {
                        mult *= binomial(alpha[i], beta[i]);
                        if alpha[i] > beta[i] {
                            gamma.push((i, alpha[i] - beta[i]));
                        }
                    }
                    let vars: Vec<usize> = (0..d).flat_map(|i| std::iter::repeat_n(i, beta[i] as usize)).collect();
                    let target = match vars.len() {
                        0 => 0,
                        1 => 1 + vars[0],
                        2 => Self::quad_index(d, vars[0], vars[1]),
                        _ => {
                            let key: Vec<(usize, u32)> =
                                (0..d).filter(|&i| beta[i] > 0).map(|i| (i, beta[i])).collect();
                            let next = cubic_index.len();
                            let idx = *cubic_index.entry(key.clone()).or_insert_with(|| {
                                cubic.push(key);
                                next
                            });
                            1 + d + nquad + idx
                        }
                    };
                    entries.push(TaylorEntry { coeff: k, mult, gamma, target });
                }
                // odometer increment bounded by α
                let mut i = 0;
                while i < d && beta[i] == alpha[i] {
                    beta[i] = 0;
                    i += 1;
                }
                if i == d {
                    break;
                }
                beta[i] += 1;
            }
        }
        let mut counts = vec![0usize; 1 + d + nquad + cubic.len()];
        for e in &entries {
            counts[e.target] += 1;
        }
        QuarticModel { d, cmid, crad, entries, counts, cubic }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    ((0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)) as f64
}

/// Taylor data of `q` and `‖x‖⁴` around a box center, as intervals:
/// `q(m + d) = q0 + g·d + dᵀ H d + C(d) + q(d)` with `q(d) ≥ 0`.
struct BoxExpansion {
    radius: Vec<f64>,
    h2: f64,
    q0: Interval,
    grad_q: Vec<Interval>,
    hess_q: Vec<Interval>,
    // upper bound of |C(d)| over the box
    cubic_q: f64,
    w0: Interval,
    grad_w: Vec<Interval>,
    hess_w: Vec<Interval>,
    // upper bound of the cubic and quartic terms of `‖m + d‖⁴`
    cubic_w: f64,
}

impl BoxExpansion {
    fn new(model: &QuarticModel, lo: &[f64], hi: &[f64]) -> Self {
        let d = model.d;
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| if l == h { l } else { 0.5 * l + 0.5 * h }).collect();
        let radius: Vec<f64> = (0..d).map(|i| sub_up(mid[i], lo[i]).max(sub_up(hi[i], mid[i]))).collect();

        // powers m_i^e for e ≤ 4, each with at most 3 roundings
        let pw: Vec<[f64; 5]> = mid.iter().map(|&v| [1.0, v, v * v, v * v * v, (v * v) * (v * v)]).collect();
        let nt = model.counts.len();
        let mut val = vec![0.0; nt];
        let mut abs = vec![0.0; nt];
        let mut rad = vec![0.0; nt];
        for e in &model.entries {
            let mut g = e.mult;
            for &(i, k) in &e.gamma {
                g *= pw[i][k as usize];
            }
            let term = model.cmid[e.coeff] * g;
            val[e.target] += term;
            abs[e.target] += term.abs();
            rad[e.target] += model.crad[e.coeff] * g.abs();
        }
        // each term carries ≤ 3·4 + 4 + 1 roundings, the sum one per summand
        let coef = |t: usize| {
            let gm = gamma(17 + model.counts[t] + 2);
            let err = gm * (abs[t] + rad[t]) * 2.0 + rad[t] * (1.0 + gm) * 1.0000001
                + (model.counts[t] as f64 + 1.0) * 64.0 * f64::MIN_POSITIVE;
            Interval::new(sub_down(val[t], err), add_up(val[t], err))
        };
        let q0 = coef(0);
        let grad_q: Vec<Interval> = (0..d).map(|i| coef(1 + i)).collect();
        let mut hess_q = vec![Interval::ZERO; d * d];
        for i in 0..d {
            for j in i..d {
                let c = coef(QuarticModel::quad_index(d, i, j));
                if i == j {
                    hess_q[i * d + i] = c;
                } else {
                    let half = c.scale(0.5);
                    hess_q[i * d + j] = half;
                    hess_q[j * d + i] = half;
                }
            }
        }
        let base = 1 + d + d * (d + 1) / 2;
        let mut cubic_q = 0.0;
        for (k, key) in model.cubic.iter().enumerate() {
            let c = coef(base + k);
            let mut hb = c.mag();
            for &(i, e) in key {
                for _ in 0..e {
                    hb = mul_up(hb, radius[i]);
                }
            }
            cubic_q = add_up(cubic_q, hb);
        }

        let m: Vec<Interval> = mid.iter().map(|&v| Interval::point(v)).collect();
        let sm = m.iter().fold(Interval::ZERO, |acc, mi| acc + mi.sqr());
        let w0 = sm.sqr();
        let grad_w: Vec<Interval> = m.iter().map(|&mi| Interval::point(4.0) * sm * mi).collect();
        let mut hess_w = vec![Interval::ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = Interval::point(4.0) * m[i] * m[j];
                if i == j {
                    v = v + sm.scale(2.0);
                }
                hess_w[i * d + j] = v;
            }
        }
        let mut h2 = 0.0;
        let mut mh = 0.0;
        for i in 0..d {
            h2 = add_up(h2, mul_up(radius[i], radius[i]));
            mh = add_up(mh, mul_up(mid[i].abs(), radius[i]));
        }
        let cubic_w = add_up(mul_up(4.0, mul_up(mh, h2)), mul_up(h2, h2));

        BoxExpansion { radius, h2, q0, grad_q, hess_q, cubic_q, w0, grad_w, hess_w, cubic_w }
    }

    fn hessian(&self, t: f64) -> Vec<Interval> {
        let ti = Interval::point(t);
        self.hess_q.iter().zip(&self.hess_w).map(|(&a, &b)| a - ti * b).collect()
    }

    /// Interval lower bound of `dᵀ H d` over the box.
    fn quad_interval(&self, h: &[Interval]) -> f64 {
        let d = self.radius.len();
        let mut acc = Interval::ZERO;
        for i in 0..d {
            let hi2 = mul_up(self.radius[i], self.radius[i]);
            acc = acc + h[i * d + i] * Interval::new(0.0, hi2);
            for j in (i + 1)..d {
                let hij = mul_up(self.radius[i], self.radius[j]);
                acc = acc + h[i * d + j].scale(2.0) * Interval::symmetric(hij);
            }
        }
        acc.lo
    }

    /// Lower bound of `q − t‖x‖⁴` over the box given a lower bound `quad`
    /// of the second-order term.
    fn lower(&self, t: f64, quad: f64) -> f64 {
        let ti = Interval::point(t);
        let mut lin = 0.0;
        for i in 0..self.radius.len() {
            let g = self.grad_q[i] - ti * self.grad_w[i];
            lin = add_up(lin, mul_up(g.mag(), self.radius[i]));
        }
        let acc = self.q0 - ti * self.w0 - Interval::point(lin) + Interval::point(quad.min(0.0))
            - Interval::point(self.cubic_q)
            - ti * Interval::new(0.0, self.cubic_w);
        acc.lo
    }

    /// Largest `t ∈ [t_a, t_b]` certified by `q − t‖x‖⁴ ≥ 0`, given that
    /// `t_a` is already certified.
    ///
    /// Both lower bounds of the second-order term (interval evaluation and
    /// `λ_min·‖d‖²`) are concave in `t`, so chords between the endpoint
    /// values are valid lower bounds in between.
    fn best_threshold(&self, t_a: f64, t_b: f64) -> f64 {
        if t_b.is_nan() || t_b <= t_a {
            return t_a;
        }
        let (ha, hb) = (self.hessian(t_a), self.hessian(t_b));
        let iv = (self.quad_interval(&ha), self.quad_interval(&hb));
        let chord = |t: f64, (a, b): (f64, f64)| {
            let theta = ((t - t_a) / (t_b - t_a)).clamp(0.0, 1.0);
            // the interpolation is not exactly rounded; shave a relative margin
            (1.0 - theta) * a + theta * b - 1e-12 * (a.abs() + b.abs()) - f64::MIN_POSITIVE
        };
        if self.lower(t_b, iv.1) >= 0.0 {
            return t_b;
        }
        let d = self.radius.len();
        let eig = (
            mul_down(lambda_min_lower(&ha, d).min(0.0), self.h2),
            mul_down(lambda_min_lower(&hb, d).min(0.0), self.h2),
        );
        let eval = |t: f64| self.lower(t, chord(t, iv).max(chord(t, eig)));
        if eval(t_b) >= 0.0 {
            return t_b;
        }
        let (mut ok, mut bad) = (t_a, t_b);
        for _ in 0..32 {
            let mid = 0.5 * (ok + bad);
            if eval(mid) >= 0.0 {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        ok
    }
}

/// Lower bound of `q/‖x‖⁴` over the box and the value at its center.
fn evaluate_box(rq: &RealifiedQuartic, model: &QuarticModel, lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let ex = BoxExpansion::new(model, lo, hi);
    let center: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| if l == h { l } else { 0.5 * l + 0.5 * h }).collect();
    let center_value = rq.normalized_value(&center);

    let q_lo = ex.lower(0.0, ex.quad_interval(&ex.hess_q)).max(0.0);
    let mut s_hi = 0.0;
    for (&l, &h) in lo.iter().zip(hi) {
        let m = l.abs().max(h.abs());
        s_hi = add_up(s_hi, mul_up(m, m));
    }
    let ratio = div_down(q_lo, mul_up(s_hi, s_hi));
    (ex.best_threshold(ratio, center_value), center_value)
}

/// Float dot product with a rigorous bound on its rounding error.
fn dot_with_error(x: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut v, mut a, mut n) = (0.0, 0.0, 0usize);
    for (p, q) in x {
        v += p * q;
        a += (p * q).abs();
        n += 1;
    }
    // |fl(xᵀy) − xᵀy| ≤ γ_n |x|ᵀ|y|; the extra terms absorb the rounding of
    // the computed |x|ᵀ|y| and possible underflow
    let u = f64::EPSILON / 2.0;
    let k = (2 * n + 2) as f64 * u;
    let gamma = k / (1.0 - k);
    (v, gamma * a * (1.0 + gamma) + n as f64 * f64::MIN_POSITIVE)
}

/// Rigorous lower bound on the smallest eigenvalue of a symmetric interval
/// matrix (row-major, `d × d`).
///
/// Approximate eigenvectors `V` of the midpoint give `B = VᵀHV`, whose
/// Gershgorin bound transfers back to `H` through the singular values of `V`.
pub(crate) fn lambda_min_lower(h: &[Interval], d: usize) -> f64 {
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || h[i * d + j].is_point_zero()));
    if diagonal {
        return (0..d).map(|i| h[i * d + i].lo).fold(f64::INFINITY, f64::min);
    }
    let mid = nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * h[i * d + j].mid() + 0.5 * h[j * d + i].mid());
    let mut err = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let hij = h[i * d + j];
            err = err.max(sub_up(hij.hi, mid[(i, j)])).max(sub_up(mid[(i, j)], hij.lo));
        }
    }
    if !mid.iter().all(|v| v.is_finite()) || !err.is_finite() {
        return f64::NEG_INFINITY;
    }
    let v = nalgebra::SymmetricEigen::new(mid.clone()).eigenvectors;
    // T = H_mid V with entrywise error radius
    let mut t = vec![0.0; d * d];
    let mut tr = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let (val, e) = dot_with_error((0..d).map(|k| (mid[(i, k)], v[(k, j)])));
            t[i * d + j] = val;
            tr[i * d + j] = e;
        }
    }
    let mut beta = f64::INFINITY;
    let mut eta = 0.0;
    for i in 0..d {
        let mut diag = Interval::ZERO;
        let mut off = 0.0;
        for j in 0..d {
            // B = Vᵀ T
            let (b, e) = dot_with_error((0..d).map(|k| (v[(k, i)], t[k * d + j])));
            let spill = (0..d).fold(0.0, |acc, k| add_up(acc, mul_up(v[(k, i)].abs(), tr[k * d + j])));
            let rad = add_up(e, spill);
            // G = VᵀV − I
            let (g, ge) = dot_with_error((0..d).map(|k| (v[(k, i)], v[(k, j)])));
            let gmag = add_up(if i == j { (g - 1.0).abs() } else { g.abs() }, ge);
            let gmag = if i == j { add_up(gmag, f64::EPSILON) } else { gmag };
            eta = add_up(eta, mul_up(gmag, gmag));
            if i == j {
                diag = Interval::new(sub_down(b, rad), add_up(b, rad));
            } else {
                off = add_up(off, add_up(b.abs(), rad));
            }
        }
        beta = beta.min(sub_down(diag.lo, off));
    }
    let eta = sqrt_up(eta);
    if eta >= 0.5 {
        return f64::NEG_INFINITY;
    }
    // eigenvalues of B are those of H_mid scaled by factors in [1 − η, 1 + η]
    let lam_mid = if beta >= 0.0 { div_down(beta, add_up(1.0, eta)) } else { div_down(beta, sub_down(1.0, eta)) };
    // ‖H − H_mid‖₂ ≤ d · max entry error
    sub_down(lam_mid, mul_up(d as f64, err))
}

fn split(cell: &Cell) -> [(Vec<f64>, Vec<f64>); 2] {
    let mut k = 0;
    let mut w = -1.0;
    for i in 0..cell.lo.len() {
        let wi = cell.hi[i] - cell.lo[i];
        if wi > w {
            w = wi;
            k = i;
        }
    }
    let mid = 0.5 * cell.lo[k] + 0.5 * cell.hi[k];
    let mut left_hi = cell.hi.clone();
    left_hi[k] = mid;
    let mut right_lo = cell.lo.clone();
    right_lo[k] = mid;
    [(cell.lo.clone(), left_hi), (right_lo, cell.hi.clone())]
}

/// Evaluates boxes on the worker pool when one is configured.
struct Evaluator {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Evaluator {
    fn new(_threads: usize) -> Self {
        Evaluator {
            #[cfg(feature = "parallel")]
            pool: if _threads > 1 { rayon::ThreadPoolBuilder::new().num_threads(_threads).build().ok() } else { None },
        }
    }

    fn run(&self, rq: &RealifiedQuartic, model: &QuarticModel, boxes: &[(Vec<f64>, Vec<f64>)]) -> Vec<(f64, f64)> {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| boxes.par_iter().map(|(l, h)| evaluate_box(rq, model, l, h)).collect());
        }
        boxes.iter().map(|(l, h)| evaluate_box(rq, model, l, h)).collect()
    }
}

/// Certified lower bound on `min q` over the unit sphere of `ℝ^{2n}`.
///
/// Never returns a value above the true minimum; when the budget runs out
/// before `target` is reached the best bound is returned with
/// `target_missed` set.
pub fn min_on_sphere(rq: &RealifiedQuartic, opts: &BoundOptions) -> SphereBound {
    let d = rq.dim();
    if d == 0 {
        return SphereBound::from_q_lower(0.0, None, BoundMethod::Subdivision, 0, opts.target.is_some());
    }
    let eval = Evaluator::new(opts.threads);
    let model = QuarticModel::new(rq);
    let mut next_id = 0u64;
    let mut heap = BinaryHeap::new();
    let initial = initial_boxes(rq.n(), opts.cover);
    let mut upper = f64::INFINITY;
    let mut effort = 0usize;
    for ((lo, hi), (bound, cv)) in initial.iter().cloned().zip(eval.run(rq, &model, &initial)) {
        upper = upper.min(cv);
        heap.push(Cell { lo, hi, bound, id: next_id });
        next_id += 1;
        effort += 1;
    }

    let stop_level = |upper: f64| match opts.target {
        Some(t) => t,
        None => (1.0 - opts.rel_gap) * upper,
    };

    loop {
        let lower = heap.peek().map(|c| c.bound).unwrap_or(0.0);
        if let Some(t) = opts.target {
            if lower >= t || upper < t {
                break;
            }
        } else if lower >= stop_level(upper) || upper <= 0.0 {
            break;
        }
        if effort >= opts.max_boxes {
            break;
        }
        let level = stop_level(upper);
        let room = (opts.max_boxes.saturating_sub(effort) / 2).clamp(1, BATCH);
        let mut batch = Vec::with_capacity(room);
        while batch.len() < room {
            match heap.peek() {
                Some(c) if c.bound < level || batch.is_empty() => batch.push(heap.pop().unwrap()),
                _ => break,
            }
        }
        let children: Vec<(Vec<f64>, Vec<f64>, f64)> = batch
            .iter()
            .flat_map(|c| split(c).into_iter().map(move |(l, h)| (l, h, c.bound)))
            .collect();
        let plain: Vec<(Vec<f64>, Vec<f64>)> = children.iter().map(|(l, h, _)| (l.clone(), h.clone())).collect();
        let results = eval.run(rq, &model, &plain);
        for ((lo, hi, parent), (bound, cv)) in children.into_iter().zip(results) {
            upper = upper.min(cv);
            effort += 1;
            if opts.cover == SphereCover::PhaseReduced && outside_disk(rq.n(), &lo, &hi) {
                continue;
            }
            // a sub-box inherits its parent's bound
            heap.push(Cell { lo, hi, bound: bound.max(parent), id: next_id });
            next_id += 1;
        }
    }

    let q_lower = heap.peek().map(|c| c.bound).unwrap_or(0.0).min(upper);
    let q_lower = if q_lower.is_finite() { q_lower } else { 0.0 };
    let target_missed = opts.target.is_some_and(|t| q_lower < t);
    SphereBound::from_q_lower(q_lower, Some(upper), BoundMethod::Subdivision, effort, target_missed)
}

/// Upper bound of `max ‖R‖₂` over the sphere of radius `ε`:
/// `√(Σ_j B_j(ε)²)` with `B_j` the coefficient bound of component `j`.
pub fn remainder_bound<C: Coeff>(r: &PolySystem<C>, eps: f64) -> f64 {
    let mut s = 0.0;
    for p in r.components() {
        let b = p.sphere_coeff_bound(eps);
        s = add_up(s, mul_up(b, b));
    }
    sqrt_up(s)
}

/// Radii where `remainder_bound(R, ε) ≤ safety·c·ε²` holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonInterval {
    pub lo: f64,
    pub hi: f64,
    pub safety: f64,
}

impl EpsilonInterval {
    pub fn contains(&self, eps: f64) -> bool {
        self.lo <= eps && eps <= self.hi
    }

    pub fn geometric_mean(&self) -> f64 {
        (self.lo * self.hi).sqrt().clamp(self.lo, self.hi)
    }
}

/// The Rouché domination test at one radius, in directed rounding.
pub fn dominated<C: Coeff>(r: &PolySystem<C>, c: f64, eps: f64, safety: f64) -> bool {
    let rhs = mul_down(mul_down(safety, c), mul_down(eps, eps));
    remainder_bound(r, eps) < rhs
}

pub const SCAN_POINTS: usize = 64;
const BISECTION_STEPS: usize = 50;

/// Log-spaced scan points over the range (a zero lower end is replaced by `hi·10⁻¹²`).
pub fn scan_points(range: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = range;
    let lo = if lo > 0.0 { lo } else { hi * 1e-12 };
    let ratio = (hi / lo).ln();
    (0..SCAN_POINTS)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == SCAN_POINTS - 1 {
                hi
            } else {
                lo * (ratio * k as f64 / (SCAN_POINTS - 1) as f64).exp()
            }
        })
        .collect()
}

/// Feasibility of every scan point.
pub fn scan_feasibility<C: Coeff>(r: &PolySystem<C>, c: f64, range: (f64, f64), safety: f64) -> Vec<(f64, bool)> {
    scan_points(range).into_iter().map(|e| (e, dominated(r, c, e, safety))).collect()
}

/// Finds the feasible radius interval inside `range`, or `None` when no scan
/// point is feasible. The feasible set is a single interval because
/// `(s c ε²)² − Σ_j B_j(ε)²` has at most two coefficient sign changes.
pub fn epsilon_interval<C: Coeff>(r: &PolySystem<C>, c: f64, range: (f64, f64), safety: f64) -> Option<EpsilonInterval> {
    assert!(safety > 0.0 && safety <= 1.0, "safety must lie in (0, 1]");
    let scan = scan_feasibility(r, c, range, safety);
    let first = scan.iter().position(|s| s.1)?;
    let last = scan.iter().rposition(|s| s.1)?;
    let lo = if first == 0 {
        scan[0].0
    } else {
        let (mut bad, mut ok) = (scan[first - 1].0, scan[first].0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (bad + ok);
            if dominated(r, c, mid, safety) {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        ok
    };
    let hi = if last == scan.len() - 1 {
        scan[last].0
    } else {
        let (mut ok, mut bad) = (scan[last].0, scan[last + 1].0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (bad + ok);
            if dominated(r, c, mid, safety) {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        ok
    };
    Some(EpsilonInterval { lo, hi, safety })
}

/// Real point `(a, b)` → complex point `a + ib`.
pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[n + i])).collect()
}

/// Checks the sign-change structure claimed by [`epsilon_interval`]: every
/// feasible scan point lies inside the interval and every scan point inside
/// it is feasible.
pub fn is_single_interval(scan: &[(f64, bool)], iv: &EpsilonInterval) -> bool {
    scan.iter().all(|&(e, ok)| ok == iv.contains(e))
}

/// Smallest normalized value of `q` over `count` random directions; an upper
/// bound on the true minimum used to sanity-check certified lower bounds.
pub fn sampled_minimum<R: Rng>(rq: &RealifiedQuartic, count: usize, rng: &mut R) -> f64 {
    let d = rq.dim();
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; d];
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        best = best.min(rq.normalized_value(&x));
    }
    best
}

/// Interval enclosure of `q` at a real point (for sampling checks in certified mode).
pub fn q_enclosure(rq: &RealifiedQuartic, x: &[f64]) -> Interval {
    let d = rq.dim();
    let xi: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
    let mut acc = Interval::ZERO;
    for form in rq.forms() {
        let mut s = Interval::ZERO;
        for i in 0..d {
            for j in 0..d {
                s = s + Interval::point(form[i * d + j]) * xi[i] * xi[j];
            }
        }
        acc = acc + s.sqr();
    }
    acc
}

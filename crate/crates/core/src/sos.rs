//! Sums-of-squares relaxation of `min q` on the unit sphere.
//!
//! Level `r` searches for `c`, a Gram matrix `G ⪰ 0` over the monomials of
//! degree `≤ r`, and a multiplier `λ` of degree `≤ 2r − 2` with
//!
//! ```text
//! q − c − λ·(s − 1) = vᵀ G v,    s = Σ x_i².
//! ```
//!
//! The problem is written in SDPA sparse format for an external solver; the
//! returned certificate is verified here with directed rounding.
//!
//! # SDPA layout
//!
//! The file encodes the dual form `max F0•Y  s.t.  F_i•Y = c_i, Y ⪰ 0` with
//! `Y = diag(G, D)`:
//!
//! * block 1 is `G` (`N × N`, `N` = size of the monomial basis, in graded
//!   order);
//! * block 2 is diagonal of size `2 + 2L`: `c⁺, c⁻` and then `λ_k⁺, λ_k⁻` for
//!   the `L` multiplier monomials, so `c = c⁺ − c⁻` and `λ_k = λ_k⁺ − λ_k⁻`;
//! * constraint `i` matches the coefficient of the `i`-th monomial of degree
//!   `≤ 2r` and its right-hand side is the coefficient of `q`.
//!
//! Comment lines at the top record the level, the variable count and the
//! multiplier monomials.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{lambda_min_lower, BoundMethod, RealifiedQuartic, SphereBound};
use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, sub_down, CInterval, Interval};
use crate::poly::{Monomial, Poly, PolyJson};

pub const DEFAULT_LEVEL: usize = 2;

/// A certificate is rejected when verification strips more than this
/// fraction off its claimed bound: its equations do not hold.
pub const CLAIM_TOLERANCE: f64 = 1e-3;

/// All monomials in `d` variables of degree `≤ r`, in graded order.
pub fn monomials_up_to(d: usize, r: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut e = vec![0u32; d];
    fn rec(i: usize, left: u32, e: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if i == e.len() {
            out.push(Monomial::new(e.clone()));
            return;
        }
        for k in 0..=left {
            e[i] = k;
            rec(i + 1, left - k, e, out);
        }
        e[i] = 0;
    }
    rec(0, r as u32, &mut e, &mut out);
    out.sort();
    out
}

/// One entry of an SDPA constraint matrix (1-based, upper triangle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpaEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// A semidefinite program in SDPA sparse form.
#[derive(Clone, Debug, PartialEq)]
pub struct Sdpa {
    pub comments: Vec<String>,
    pub m: usize,
    /// Positive sizes are dense symmetric blocks, negative sizes diagonal ones.
    pub blocks: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl Sdpa {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "* {c}");
        }
        let _ = writeln!(s, "{}", self.m);
        let _ = writeln!(s, "{}", self.blocks.len());
        let blocks: Vec<String> = self.blocks.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", blocks.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {} {:e}", e.matrix, e.block, e.i, e.j, e.value);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Sdpa> {
        let mut comments = Vec::new();
        let mut header: Vec<(usize, String)> = Vec::new();
        let mut entries = Vec::new();
        let mut entry_lines = Vec::new();
        let err = |line: usize, msg: &str| Error::Sdpa { line, msg: msg.to_string() };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if header.is_empty() && (t.starts_with('*') || t.starts_with('"')) {
                comments.push(t[1..].trim().to_string());
                continue;
            }
            let cleaned: String = t.chars().map(|ch| if "{}(),".contains(ch) { ' ' } else { ch }).collect();
            if header.len() < 4 {
                header.push((line, cleaned));
                continue;
            }
            let f: Vec<&str> = cleaned.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(line, "expected `matrix block i j value`"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(line, &format!("bad index `{s}`")));
            let value = f[4].parse::<f64>().map_err(|_| err(line, &format!("bad value `{}`", f[4])))?;
            entries.push(SdpaEntry { matrix: int(f[0])?, block: int(f[1])?, i: int(f[2])?, j: int(f[3])?, value });
            entry_lines.push(line);
        }
        if header.len() < 4 {
            return Err(err(text.lines().count(), "truncated header"));
        }
        let first = |(line, s): &(usize, String)| -> Result<usize> {
            s.split_whitespace()
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(*line, "expected an integer"))
        };
        let m = first(&header[0])?;
        let nblocks = first(&header[1])?;
        let blocks: Vec<i64> = header[2]
            .1
            .split_whitespace()
            .map(|v| v.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(header[2].0, "bad block structure"))?;
        if blocks.len() != nblocks || blocks.contains(&0) {
            return Err(err(header[2].0, "block structure does not match the block count"));
        }
        let c: Vec<f64> = header[3]
            .1
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(header[3].0, "bad objective vector"))?;
        if c.len() != m {
            return Err(err(header[3].0, "objective vector length differs from m"));
        }
        for (e, &line) in entries.iter().zip(&entry_lines) {
            let size = blocks.get(e.block.wrapping_sub(1)).map(|b| b.unsigned_abs() as usize);
            let ok = e.matrix <= m
                && size.is_some_and(|s| e.i >= 1 && e.j >= 1 && e.i <= s && e.j <= s)
                && (blocks[e.block - 1] > 0 || e.i == e.j);
            if !ok {
                return Err(err(line, "entry outside the declared blocks"));
            }
        }
        Ok(Sdpa { comments, m, blocks, c, entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Sdpa> {
        Sdpa::parse(&std::fs::read_to_string(path)?)
    }
}

/// The level-`r` relaxation of `min q` on the sphere.
#[derive(Clone, Debug)]
pub struct SosProblem {
    pub dim: usize,
    pub level: usize,
    /// Gram basis `v`, degree `≤ r`.
    pub basis: Vec<Monomial>,
    /// Multiplier monomials, degree `≤ 2r − 2`.
    pub lambda_basis: Vec<Monomial>,
    /// Matched monomials, degree `≤ 2r`.
    pub constraints: Vec<Monomial>,
    /// Coefficients of `q` on the matched monomials (midpoints).
    pub rhs: Vec<f64>,
}

pub fn assemble(rq: &RealifiedQuartic, r: usize) -> Result<SosProblem> {
    if r < 2 {
        return Err(Error::RelaxationLevel(r));
    }
    let d = rq.dim();
    let q = rq.quartic_poly();
    let basis = monomials_up_to(d, r);
    let lambda_basis = monomials_up_to(d, 2 * r - 2);
    let constraints = monomials_up_to(d, 2 * r);
    let rhs = constraints.iter().map(|m| q.coeff(m.exponents()).re.mid()).collect();
    Ok(SosProblem { dim: d, level: r, basis, lambda_basis, constraints, rhs })
}

impl SosProblem {
    pub fn gram_size(&self) -> usize {
        self.basis.len()
    }

    pub fn to_sdpa(&self) -> Sdpa {
        let index: BTreeMap<&Monomial, usize> = self.constraints.iter().enumerate().map(|(k, m)| (m, k + 1)).collect();
        let mut entries = Vec::new();
        // objective: c⁺ − c⁻
        entries.push(SdpaEntry { matrix: 0, block: 2, i: 1, j: 1, value: 1.0 });
        entries.push(SdpaEntry { matrix: 0, block: 2, i: 2, j: 2, value: -1.0 });

        let mut per_constraint: Vec<Vec<SdpaEntry>> = vec![Vec::new(); self.constraints.len() + 1];
        for (a, ma) in self.basis.iter().enumerate() {
            for (b, mb) in self.basis.iter().enumerate().skip(a) {
                let k = index[&ma.mul(mb)];
                per_constraint[k].push(SdpaEntry { matrix: k, block: 1, i: a + 1, j: b + 1, value: 1.0 });
            }
        }
        let one = index[&Monomial::one(self.dim)];
        per_constraint[one].push(SdpaEntry { matrix: one, block: 2, i: 1, j: 1, value: 1.0 });
        per_constraint[one].push(SdpaEntry { matrix: one, block: 2, i: 2, j: 2, value: -1.0 });
        for (l, mu) in self.lambda_basis.iter().enumerate() {
            // λ_k μ_k (s − 1)
            let mut contrib: BTreeMap<usize, f64> = BTreeMap::new();
            for i in 0..self.dim {
                let sq = Monomial::var(self.dim, i).mul(&Monomial::var(self.dim, i));
                *contrib.entry(index[&mu.mul(&sq)]).or_default() += 1.0;
            }
            *contrib.entry(index[mu]).or_default() -= 1.0;
            let p = 3 + 2 * l;
            for (k, v) in contrib {
                if v != 0.0 {
                    per_constraint[k].push(SdpaEntry { matrix: k, block: 2, i: p, j: p, value: v });
                    per_constraint[k].push(SdpaEntry { matrix: k, block: 2, i: p + 1, j: p + 1, value: -v });
                }
            }
        }
        for mut list in per_constraint.into_iter().skip(1) {
            list.sort_by_key(|e| (e.block, e.i, e.j));
            entries.extend(list);
        }

        let lambda: Vec<String> = self
            .lambda_basis
            .iter()
            .map(|m| m.exponents().iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        Sdpa {
            comments: vec![
                format!("sos level {} variables {}", self.level, self.dim),
                format!("lambda {}", lambda.join(" ")),
            ],
            m: self.constraints.len(),
            blocks: vec![self.basis.len() as i64, -(2 + 2 * self.lambda_basis.len() as i64)],
            c: self.rhs.clone(),
            entries,
        }
    }
}

pub fn export_problem(p: &SosProblem, path: &Path) -> Result<()> {
    p.to_sdpa().write(path)
}

/// A solver's answer: claimed bound, Gram matrix and multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct SosCertificate {
    pub c_claimed: f64,
    pub gram: DMatrix<f64>,
    pub lambda: Poly,
    /// Filled in by [`verify_certificate`].
    pub verified_bound: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SosCertificateJson {
    pub c: f64,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub lambda: PolyJson,
}

impl SosCertificate {
    pub fn from_json(j: &SosCertificateJson) -> Result<Self> {
        let n = j.g.len();
        if let Some((k, row)) = j.g.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Certificate(format!("G row {k} has length {}, expected {n}", row.len())));
        }
        let gram = DMatrix::from_fn(n, n, |i, k| j.g[i][k]);
        let lambda = Poly::from_json(&j.lambda)?;
        Ok(SosCertificate { c_claimed: j.c, gram, lambda, verified_bound: None })
    }

    pub fn to_json(&self) -> SosCertificateJson {
        let n = self.gram.nrows();
        SosCertificateJson {
            c: self.c_claimed,
            g: (0..n).map(|i| (0..n).map(|k| self.gram[(i, k)]).collect()).collect(),
            lambda: self.lambda.to_json(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let j: SosCertificateJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        SosCertificate::from_json(&j)
    }
}

/// Outcome of [`verify_certificate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SosVerification {
    pub level: usize,
    pub c_claimed: f64,
    pub verified_bound: f64,
    /// `Σ |ρ_α|`, upper bound.
    pub residual: f64,
    /// Lower bound on `λ_min(G)`.
    pub psd_margin: f64,
}

impl SosVerification {
    /// Positive, and within [`CLAIM_TOLERANCE`] of the claim.
    pub fn accepted(&self) -> bool {
        self.verified_bound > 0.0 && self.c_claimed - self.verified_bound <= CLAIM_TOLERANCE * self.c_claimed.abs()
    }

    /// The certified bound on `q`, if accepted.
    pub fn sphere_bound(&self) -> Option<SphereBound> {
        self.accepted()
            .then(|| SphereBound::from_q_lower(self.verified_bound, None, BoundMethod::Sos, self.level, false))
    }
}

/// Rigorously checks `q ≥ verified_bound` on the unit sphere.
///
/// On the sphere `q − c = vᵀGv + ρ` with `ρ = q − c − vᵀGv − λ(s − 1)`,
/// every monomial has modulus `≤ 1` and `‖v‖² ≤ r + 1`, so
/// `q ≥ c − Σ|ρ_α| − max(0, −μ)(r + 1)` with `μ ≤ λ_min(G)`.
pub fn verify_certificate(rq: &RealifiedQuartic, cert: &mut SosCertificate) -> Result<SosVerification> {
    let d = rq.dim();
    let n = cert.gram.nrows();
    if cert.gram.ncols() != n {
        return Err(Error::Certificate("G is not square".into()));
    }
    let mut level = 2;
    while basis_size(d, level) < n {
        level += 1;
    }
    if basis_size(d, level) != n {
        return Err(Error::Certificate(format!("G has size {n}, which is not a basis size for {d} variables")));
    }
    if cert.lambda.nvars() != d {
        return Err(Error::Dimension { expected: d, found: cert.lambda.nvars() });
    }
    if cert.lambda.degree() as usize > 2 * level - 2 {
        return Err(Error::Certificate(format!("lambda has degree {} > {}", cert.lambda.degree(), 2 * level - 2)));
    }
    if cert.lambda.terms().any(|(_, c)| c.im != 0.0) {
        return Err(Error::Certificate("lambda must have real coefficients".into()));
    }
    if !cert.gram.iter().all(|v| v.is_finite()) || !cert.c_claimed.is_finite() {
        return Err(Error::NonFinite);
    }
    for i in 0..n {
        for k in (i + 1)..n {
            if cert.gram[(i, k)] != cert.gram[(k, i)] {
                return Err(Error::Certificate(format!("G is not symmetric at ({i}, {k})")));
            }
        }
    }

    let basis = monomials_up_to(d, level);
    let mut rho = rq.quartic_poly();
    rho.add_term(Monomial::one(d), CInterval::real(-cert.c_claimed));
    for (a, ma) in basis.iter().enumerate() {
        for (b, mb) in basis.iter().enumerate() {
            let g = cert.gram[(a, b)];
            if g != 0.0 {
                rho.add_term(ma.mul(mb), CInterval::real(-g));
            }
        }
    }
    let mut s_minus_one = Poly::constant(d, Complex64::new(-1.0, 0.0));
    for i in 0..d {
        s_minus_one.add_term(Monomial::var(d, i).mul(&Monomial::var(d, i)), Complex64::new(1.0, 0.0));
    }
    let h = &cert.lambda.to_interval() * &s_minus_one.to_interval();
    let rho = &rho - &h;
    let residual = rho.terms().fold(0.0, |acc, (_, c)| add_up(acc, c.abs_upper()));

    let g: Vec<Interval> = cert.gram.iter().map(|&v| Interval::point(v)).collect();
    let psd_margin = if n == 0 { 0.0 } else { lambda_min_lower(&g, n) };
    let penalty = mul_up((-psd_margin).max(0.0), (level + 1) as f64);
    let verified_bound = sub_down(sub_down(cert.c_claimed, residual), penalty);
    let verified_bound = if verified_bound.is_nan() { f64::NEG_INFINITY } else { verified_bound };
    cert.verified_bound = Some(verified_bound);
    Ok(SosVerification { level, c_claimed: cert.c_claimed, verified_bound, residual, psd_margin })
}

/// Number of monomials of degree `≤ r` in `d` variables.
pub fn basis_size(d: usize, r: usize) -> usize {
    // C(d + r, r)
    (1..=r).fold(1usize, |acc, k| acc * (d + k) / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{min_on_sphere, realify, sampled_minimum, BoundOptions};
    use crate::pipeline::QuadraticSystem;
    use crate::poly::{real_poly, PolySystem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> RealifiedQuartic {
        let p = real_poly(1, &[(&[2], 1.0)]);
        realify(&QuadraticSystem::new(PolySystem::new(vec![p]).unwrap()).unwrap())
    }

    fn worked() -> RealifiedQuartic {
        realify(
            &QuadraticSystem::new(
                PolySystem::new(vec![
                    real_poly(2, &[(&[2, 0], 0.5), (&[0, 2], -0.001414)]),
                    real_poly(2, &[(&[2, 0], -1.5e-5), (&[0, 2], -1.414)]),
                ])
                .unwrap(),
            )
            .unwrap(),
        )
    }

    /// `q = s²`, so `q − 1 = (s + 1)(s − 1)` with `G = 0`.
    fn exact_square_certificate(c: f64) -> SosCertificate {
        SosCertificate {
            c_claimed: c,
            gram: DMatrix::zeros(6, 6),
            lambda: real_poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], 1.0)]),
            verified_bound: None,
        }
    }

    #[test]
    fn basis_counts() {
        assert_eq!(monomials_up_to(2, 2).len(), 6);
        assert_eq!(basis_size(2, 2), 6);
        assert_eq!(basis_size(4, 2), 15);
        assert_eq!(basis_size(4, 4), 70);
        let b = monomials_up_to(2, 2);
        assert_eq!(b[0], Monomial::one(2));
        assert!(b.windows(2).all(|w| w[0] < w[1] && w[0].degree() <= w[1].degree()));
    }

    #[test]
    fn assemble_small_problem() {
        let p = assemble(&square(), 2).unwrap();
        assert_eq!(p.gram_size(), 6);
        assert_eq!(p.lambda_basis.len(), 6);
        assert_eq!(p.constraints.len(), 15);
        // q = a⁴ + 2a²b² + b⁴
        let coeff = |e: [u32; 2]| p.rhs[p.constraints.iter().position(|m| m.exponents() == e).unwrap()];
        assert_eq!(coeff([4, 0]), 1.0);
        assert_eq!(coeff([2, 2]), 2.0);
        assert_eq!(coeff([0, 4]), 1.0);
        assert_eq!(coeff([0, 0]), 0.0);
        let s = p.to_sdpa();
        assert_eq!(s.blocks, vec![6, -14]);
        assert_eq!(s.m, 15);
    }

    #[test]
    fn level_below_two_rejected() {
        assert!(matches!(assemble(&square(), 1), Err(Error::RelaxationLevel(1))));
    }

    #[test]
    fn sdpa_round_trip() {
        for rq in [square(), worked()] {
            let s = assemble(&rq, 2).unwrap().to_sdpa();
            let back = Sdpa::parse(&s.to_text()).unwrap();
            assert_eq!(back, s);
        }
        let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/worked_sos.dat-s");
        assert_eq!(std::fs::read_to_string(golden).unwrap(), assemble(&worked(), 2).unwrap().to_sdpa().to_text());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.dat-s");
        let p = assemble(&worked(), 2).unwrap();
        export_problem(&p, &path).unwrap();
        assert_eq!(Sdpa::read(&path).unwrap(), p.to_sdpa());
    }

    #[test]
    fn zero_quartic_still_exports() {
        let rq = realify(&QuadraticSystem::new(PolySystem::new(vec![Poly::zero(1)]).unwrap()).unwrap());
        let p = assemble(&rq, 2).unwrap();
        assert!(p.rhs.iter().all(|&v| v == 0.0));
        let s = p.to_sdpa();
        assert_eq!(Sdpa::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn sdpa_parse_errors_name_the_line() {
        let bad = "* x\n2\n1\n2\n1.0 2.0\n1 1 1 1 zz\n";
        match Sdpa::parse(bad) {
            Err(Error::Sdpa { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        assert!(Sdpa::parse("1\n1\n").is_err());
        // punctuation in the header is tolerated
        let ok = "\"comment\n1\n1\n{2}\n(3.5)\n1 1 1 2 1.0\n";
        assert_eq!(Sdpa::parse(ok).unwrap().c, vec![3.5]);
    }

    /// The SDPA constraints hold for a certificate built by hand.
    #[test]
    fn sdpa_constraints_match_exact_certificate() {
        let p = assemble(&square(), 2).unwrap();
        let s = p.to_sdpa();
        // Y: G = 0; c⁺ = 1; λ = s + 1 split into positive parts
        let mut diag = vec![0.0; 2 + 2 * p.lambda_basis.len()];
        diag[0] = 1.0;
        for (l, mu) in p.lambda_basis.iter().enumerate() {
            let e = mu.exponents();
            if e == [0, 0] || e == [2, 0] || e == [0, 2] {
                diag[2 + 2 * l] = 1.0;
            }
        }
        let mut lhs = vec![0.0; s.m + 1];
        for e in &s.entries {
            if e.block == 2 {
                lhs[e.matrix] += e.value * diag[e.i - 1];
            }
        }
        assert_eq!(lhs[0], 1.0);
        for (k, (got, want)) in lhs.iter().skip(1).zip(&s.c).enumerate() {
            assert_eq!(got, want, "constraint {}", k + 1);
        }
    }

    #[test]
    fn exact_certificate_verifies_to_one() {
        let mut cert = exact_square_certificate(1.0);
        let v = verify_certificate(&square(), &mut cert).unwrap();
        assert_eq!(v.verified_bound, 1.0);
        assert_eq!(v.residual, 0.0);
        assert!(v.accepted());
        assert_eq!(cert.verified_bound, Some(1.0));
        let b = v.sphere_bound().unwrap();
        assert_eq!(b.method, BoundMethod::Sos);
        assert_eq!(b.q_lower, 1.0);
        assert_eq!(b.effort, 2);
    }

    #[test]
    fn overclaimed_certificate_is_rejected() {
        let mut cert = exact_square_certificate(1.1);
        let v = verify_certificate(&square(), &mut cert).unwrap();
        // the residual is exactly the overclaim, ρ = −0.1
        assert!((v.residual - 0.1).abs() < 1e-15);
        assert!(v.verified_bound <= 1.0);
        assert!(!v.accepted());
        assert!(v.sphere_bound().is_none());
        let mut cert = exact_square_certificate(2.5);
        assert!(!verify_certificate(&square(), &mut cert).unwrap().accepted());
    }

    #[test]
    fn residual_noise_is_deducted() {
        let mut cert = exact_square_certificate(1.0);
        let mut noisy = cert.lambda.clone();
        let lb = monomials_up_to(2, 2);
        for m in &lb {
            noisy.add_term(m.clone(), Complex64::new(1e-9, 0.0));
        }
        cert.lambda = noisy;
        let v = verify_certificate(&square(), &mut cert).unwrap();
        // (1 + a + b + a² + ab + b²)(a² + b² − 1) has 13 monomials with
        // coefficient sum 14 (a² and b² cancel, a²b² appears twice)
        let expected = 14e-9;
        assert!(v.residual >= expected * (1.0 - 1e-6) && v.residual <= expected * 1.01, "{}", v.residual);
        assert!((1.0 - v.verified_bound - v.residual).abs() < 1e-15);
        assert!(v.accepted());
    }

    #[test]
    fn negative_eigenvalue_costs_stated_margin() {
        // G = −1e-6 · e₁e₁ᵀ on the constant monomial is compensated by
        // c = 1 + 1e-6, keeping q − c − vᵀGv − λ(s − 1) = 0
        let mut cert = exact_square_certificate(1.0 + 1e-6);
        cert.gram[(0, 0)] = -1e-6;
        let v = verify_certificate(&square(), &mut cert).unwrap();
        assert!(v.residual < 1e-15);
        assert!((v.psd_margin + 1e-6).abs() < 1e-12);
        // margin formula: c − Σ|ρ| − max(0, −μ)(r + 1)
        let want = 1.0 + 1e-6 - 1e-6 * 3.0;
        assert!((v.verified_bound - want).abs() < 1e-12 && v.verified_bound <= want);
        assert!(v.accepted());
    }

    #[test]
    fn malformed_certificates_are_errors() {
        let mut c = exact_square_certificate(1.0);
        c.gram = DMatrix::zeros(5, 5);
        assert!(verify_certificate(&square(), &mut c).is_err());
        let mut c = exact_square_certificate(1.0);
        c.gram[(0, 1)] = 1.0;
        assert!(verify_certificate(&square(), &mut c).is_err());
        let mut c = exact_square_certificate(1.0);
        c.lambda = real_poly(3, &[(&[0, 0, 0], 1.0)]);
        assert!(verify_certificate(&square(), &mut c).is_err());
        let mut c = exact_square_certificate(1.0);
        c.lambda = real_poly(2, &[(&[4, 0], 1.0)]);
        assert!(verify_certificate(&square(), &mut c).is_err());
    }

    #[test]
    fn certificate_json_round_trip() {
        let c = exact_square_certificate(1.0);
        let text = serde_json::to_string(&c.to_json()).unwrap();
        let j: SosCertificateJson = serde_json::from_str(&text).unwrap();
        assert_eq!(SosCertificate::from_json(&j).unwrap(), c);
        let bad = r#"{"c": 1, "G": [[1, 2], [3]], "lambda": {"n": 2, "terms": []}}"#;
        let j: SosCertificateJson = serde_json::from_str(bad).unwrap();
        assert!(SosCertificate::from_json(&j).is_err());
    }

    /// Golden certificate produced by an interior-point solver for the
    /// worked example (see `scripts/solve_sdpa.py`).
    #[test]
    fn golden_worked_certificate() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/worked_sos_cert.json");
        let mut cert = SosCertificate::read(&path).unwrap();
        let rq = worked();
        let v = verify_certificate(&rq, &mut cert).unwrap();
        assert!(v.accepted(), "{v:?}");
        assert!(v.verified_bound >= 0.22 && v.verified_bound <= 0.2221, "{v:?}");
        let sub = min_on_sphere(&rq, &BoundOptions::default());
        let sampled = sampled_minimum(&rq, 10_000, &mut ChaCha8Rng::seed_from_u64(4));
        assert!(v.verified_bound <= sampled && sub.q_lower <= sampled);
        assert!(sub.q_lower > 0.0);
    }
}

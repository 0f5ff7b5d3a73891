//! Sparse multivariate polynomials with complex coefficients.
//!
//! A [`Poly`] is generic over its coefficient carrier: plain [`Complex64`]
//! for fast floating-point work, or [`CInterval`] when every coefficient must
//! enclose the exact value (all downstream certified inequalities are computed
//! from interval polynomials).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, CInterval};

pub type Point = Vec<Complex64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Coefficient carrier for [`Poly`].
pub trait Coeff:
    Clone
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_complex(z: Complex64) -> Self;
    /// True only for an exact zero; interval coefficients straddling zero are kept.
    fn is_zero(&self) -> bool;
    /// Upper bound on the modulus.
    fn abs_upper(&self) -> f64;
    fn midpoint(&self) -> Complex64;

    fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn abs_upper(&self) -> f64 {
        if self.im == 0.0 {
            return self.re.abs();
        }
        if self.re == 0.0 {
            return self.im.abs();
        }
        // hypot is faithful to within one ulp
        self.re.hypot(self.im).next_up()
    }
    fn midpoint(&self) -> Complex64 {
        *self
    }
}

impl Coeff for CInterval {
    fn zero() -> Self {
        CInterval::ZERO
    }
    fn from_complex(z: Complex64) -> Self {
        CInterval::point(z)
    }
    fn is_zero(&self) -> bool {
        self.is_point_zero()
    }
    fn abs_upper(&self) -> f64 {
        CInterval::abs_upper(self)
    }
    fn midpoint(&self) -> Complex64 {
        self.mid()
    }
}

/// Exponent vector of a monomial. Ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in `n` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C: Coeff = Complex64> {
    n: usize,
    terms: BTreeMap<Monomial, C>,
}

/// Interval-coefficient polynomial.
pub type IPoly = Poly<CInterval>;

impl<C: Coeff> Poly<C> {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    /// The coordinate function `x_i` (0-based).
    pub fn var(n: usize, i: usize) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::var(n, i), C::from_real(1.0));
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Vec<u32>, C)>) -> Result<Self> {
        let mut p = Self::zero(n);
        for (exp, c) in terms {
            if exp.len() != n {
                return Err(Error::Dimension { expected: n, found: exp.len() });
            }
            p.add_term(Monomial(exp), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exp: &[u32]) -> C {
        self.terms.get(&Monomial(exp.to_vec())).cloned().unwrap_or_else(C::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Accumulates `c·m`, removing the term if it cancels exactly.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert_eq!(m.nvars(), self.n);
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&m) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(m, s);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.clone() * k.clone());
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.n, C::from_real(1.0));
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::<D>::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn midpoint(&self) -> Poly<Complex64> {
        self.map_coeffs(|c| c.midpoint())
    }

    fn check_point(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension { expected: self.n, found: len });
        }
        Ok(())
    }

    /// Evaluates at a point given in the coefficient carrier.
    pub fn eval_in(&self, x: &[C]) -> Result<C> {
        self.check_point(x.len())?;
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(m.exponents()) {
                for _ in 0..e {
                    t = t * xi.clone();
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Value at a complex point; an enclosure in interval mode.
    pub fn eval(&self, x: &[Complex64]) -> Result<C> {
        let xs: Vec<C> = x.iter().map(|&z| C::from_complex(z)).collect();
        self.eval_in(&xs)
    }

    /// Formal partial derivative with respect to `x_i` (0-based).
    pub fn diff(&self, i: usize) -> Result<Self> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let e = m.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut exp = m.exponents().to_vec();
            exp[i] -= 1;
            out.add_term(Monomial(exp), c.clone() * C::from_real(e as f64));
        }
        Ok(out)
    }

    /// Expands `p(t + U x)`.
    pub fn compose_affine(&self, map: &AffineMap) -> Result<Self> {
        if map.n() != self.n {
            return Err(Error::Dimension { expected: self.n, found: map.n() });
        }
        let n = self.n;
        // linear forms t_i + Σ_j U_ij x_j, and their powers on demand
        let forms: Vec<Self> = (0..n)
            .map(|i| {
                let mut p = Self::constant(n, C::from_complex(map.translation[i]));
                for j in 0..n {
                    p.add_term(Monomial::var(n, j), C::from_complex(map.linear[(i, j)]));
                }
                p
            })
            .collect();
        let mut powers: Vec<Vec<Self>> = forms
            .iter()
            .map(|f| vec![Self::constant(n, C::from_real(1.0)), f.clone()])
            .collect();
        let mut out = Self::zero(n);
        for (m, c) in &self.terms {
            let mut t = Self::constant(n, c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &forms[i];
                    powers[i].push(next);
                }
                t = &t * &powers[i][e as usize];
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Substitutes `x_i -> x_i²` for every 0-based index `i >= kappa`.
    pub fn inflate(&self, kappa: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let exp = m
                .exponents()
                .iter()
                .enumerate()
                .map(|(i, &e)| if i >= kappa { 2 * e } else { e })
                .collect();
            out.add_term(Monomial(exp), c.clone());
        }
        out
    }

    /// Sum of the terms of total degree exactly `d`.
    pub fn graded_part(&self, d: u32) -> Self {
        Poly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn is_homogeneous(&self, d: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == d)
    }

    /// Upper bound of `|p|` on the closed polydisk `|x_i| <= eps`:
    /// `Σ |c_m| eps^deg(m)`, every step rounded up.
    pub fn sphere_coeff_bound(&self, eps: f64) -> f64 {
        let mut pows = vec![1.0f64];
        let mut total = 0.0f64;
        for (m, c) in &self.terms {
            let d = m.degree() as usize;
            while pows.len() <= d {
                let last = *pows.last().unwrap();
                pows.push(mul_up(last, eps));
            }
            total = add_up(total, mul_up(c.abs_upper(), pows[d]));
        }
        total
    }

    /// Maximum coefficient modulus (upper bound).
    pub fn coeff_sup(&self) -> f64 {
        self.terms.values().map(|c| c.abs_upper()).fold(0.0, f64::max)
    }
}

impl Poly<Complex64> {
    pub fn to_interval(&self) -> IPoly {
        self.map_coeffs(|&c| CInterval::point(c))
    }

    /// Drops terms with modulus at or below `threshold`. Float mode only;
    /// certified computations never prune.
    pub fn prune(&self, threshold: f64) -> Self {
        Poly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.norm() > threshold)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermJson { exp: m.0.clone(), re: c.re, im: c.im })
                .collect(),
        }
    }

    pub fn from_json(j: &PolyJson) -> Result<Self> {
        let mut p = Self::zero(j.n);
        for (k, t) in j.terms.iter().enumerate() {
            if t.exp.len() != j.n {
                return Err(Error::Input(format!(
                    "terms[{k}].exp has length {}, expected n = {}",
                    t.exp.len(),
                    j.n
                )));
            }
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::Input(format!("terms[{k}] has a non-finite coefficient")));
            }
            p.add_term(Monomial(t.exp.clone()), Complex64::new(t.re, t.im));
        }
        Ok(p)
    }
}

impl IPoly {
    /// True when every exact coefficient enclosed here could equal `p`'s.
    pub fn encloses(&self, p: &Poly<Complex64>) -> bool {
        if self.n != p.n {
            return false;
        }
        let all: std::collections::BTreeSet<&Monomial> = self.terms.keys().chain(p.terms.keys()).collect();
        all.into_iter().all(|m| {
            let iv = self.terms.get(m).copied().unwrap_or(CInterval::ZERO);
            let c = p.terms.get(m).copied().unwrap_or_default();
            iv.contains(c)
        })
    }
}

impl<C: Coeff> Add for &Poly<C> {
    type Output = Poly<C>;
    fn add(self, o: &Poly<C>) -> Poly<C> {
        assert_eq!(self.n, o.n, "variable count mismatch");
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<C: Coeff> Sub for &Poly<C> {
    type Output = Poly<C>;
    fn sub(self, o: &Poly<C>) -> Poly<C> {
        assert_eq!(self.n, o.n, "variable count mismatch");
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<C: Coeff> Neg for &Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        self.map_coeffs(|c| -c.clone())
    }
}

impl<C: Coeff> Mul for &Poly<C> {
    type Output = Poly<C>;
    fn mul(self, o: &Poly<C>) -> Poly<C> {
        assert_eq!(self.n, o.n, "variable count mismatch");
        let mut out = Poly::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }
}

impl fmt::Display for Poly<Complex64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

/// Square system: as many components as variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySystem<C: Coeff = Complex64> {
    components: Vec<Poly<C>>,
}

pub type IPolySystem = PolySystem<CInterval>;

impl<C: Coeff> PolySystem<C> {
    pub fn new(components: Vec<Poly<C>>) -> Result<Self> {
        let n = components.len();
        for (j, p) in components.iter().enumerate() {
            if p.nvars() != n {
                return Err(Error::NotSquare { component: j, nvars: p.nvars(), ncomponents: n });
            }
        }
        Ok(PolySystem { components })
    }

    pub(crate) fn from_components_unchecked(components: Vec<Poly<C>>) -> Self {
        PolySystem { components }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly<C>] {
        &self.components
    }

    pub fn map(&self, f: impl Fn(&Poly<C>) -> Poly<C>) -> Self {
        PolySystem { components: self.components.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&Poly<C>) -> Result<Poly<C>>) -> Result<Self> {
        Ok(PolySystem { components: self.components.iter().map(f).collect::<Result<_>>()? })
    }

    pub fn eval(&self, x: &[Complex64]) -> Result<Vec<C>> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    pub fn compose_affine(&self, map: &AffineMap) -> Result<Self> {
        self.try_map(|p| p.compose_affine(map))
    }

    pub fn inflate(&self, kappa: usize) -> Self {
        self.map(|p| p.inflate(kappa))
    }

    pub fn graded_part(&self, d: u32) -> Self {
        self.map(|p| p.graded_part(d))
    }

    pub fn sub(&self, other: &Self) -> Self {
        PolySystem {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn coeff_sup(&self) -> f64 {
        self.components.iter().map(Poly::coeff_sup).fold(0.0, f64::max)
    }
}

impl PolySystem<Complex64> {
    pub fn to_interval(&self) -> IPolySystem {
        PolySystem { components: self.components.iter().map(Poly::to_interval).collect() }
    }

    /// Jacobian matrix with entry `(j, i) = ∂F_j/∂x_i (x)`.
    pub fn jacobian(&self, x: &[Complex64]) -> Result<ComplexMatrix> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::Dimension { expected: n, found: x.len() });
        }
        let mut m = ComplexMatrix::zeros(n, n);
        for (j, p) in self.components.iter().enumerate() {
            for i in 0..n {
                m[(j, i)] = p.diff(i)?.eval(x)?;
            }
        }
        Ok(m)
    }

    pub fn eval_norm(&self, x: &[Complex64]) -> Result<f64> {
        Ok(self.eval(x)?.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
    }

    pub fn to_json(&self) -> Vec<PolyJson> {
        self.components.iter().map(Poly::to_json).collect()
    }

    pub fn from_json(polys: &[PolyJson]) -> Result<Self> {
        let comps = polys
            .iter()
            .enumerate()
            .map(|(j, p)| Poly::from_json(p).map_err(|e| Error::Input(format!("system[{j}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }
}

/// Affine map `x ↦ translation + linear·x`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub translation: Point,
    pub linear: ComplexMatrix,
}

impl AffineMap {
    pub fn new(translation: Point, linear: ComplexMatrix) -> Result<Self> {
        let n = translation.len();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::Dimension { expected: n, found: linear.nrows() });
        }
        Ok(AffineMap { translation, linear })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap { translation: vec![Complex64::new(0.0, 0.0); n], linear: ComplexMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Point {
        let v = &self.linear * nalgebra::DVector::from_column_slice(x);
        v.iter().zip(&self.translation).map(|(a, b)| a + b).collect()
    }

    /// `U†(z - t)`; the exact inverse when the linear part is unitary.
    pub fn pull_back(&self, z: &[Complex64]) -> Point {
        let d = nalgebra::DVector::from_iterator(z.len(), z.iter().zip(&self.translation).map(|(a, b)| a - b));
        (self.linear.adjoint() * d).iter().copied().collect()
    }

    /// Inverse map of a unitary affine map: `x ↦ U†x − U†t`.
    pub fn unitary_inverse(&self) -> AffineMap {
        let ua = self.linear.adjoint();
        let t = nalgebra::DVector::from_column_slice(&self.translation);
        let nt = -(&ua * t);
        AffineMap { translation: nt.iter().copied().collect(), linear: ua }
    }

    /// Frobenius norm of `U†U − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n();
        (self.linear.adjoint() * &self.linear - ComplexMatrix::identity(n, n)).norm()
    }
}

/// JSON term encoding `{"exp": [...], "re": .., "im": ..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// JSON polynomial encoding `{"n": .., "terms": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyJson {
    pub n: usize,
    pub terms: Vec<TermJson>,
}

/// Real-coefficient shorthand used throughout tests and examples.
pub fn real_poly(n: usize, terms: &[(&[u32], f64)]) -> Poly<Complex64> {
    Poly::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), Complex64::new(*c, 0.0))))
        .expect("exponent length matches n")
}

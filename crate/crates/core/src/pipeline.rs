//! System transformations: singularize at the approximate center, move the
//! center to the origin with the kernel on the leading axes, inflate, and
//! extract the quadratic part.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlinalg::{orthonormality_defect, unitary_from_kernel, KernelData};
use crate::poly::{AffineMap, ComplexMatrix, Monomial, Poly, PolySystem};

/// Relative tolerance for `g(y) ≈ 0` and for the kernel columns of `D(g∘A)(0)`.
pub const NORMALIZE_TOL: f64 = 1e-8;

/// Norms of the constant and linear graded parts of an inflated system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationDiagnostics {
    pub constant_norm: f64,
    pub linear_norm: f64,
}

/// `g∘A∘S_κ` together with the data that produced it.
#[derive(Clone, Debug)]
pub struct InflatedSystem {
    pub h: PolySystem,
    pub kappa: usize,
    pub map: AffineMap,
    pub diagnostics: InflationDiagnostics,
}

/// A square system of quadratic forms.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSystem(PolySystem);

impl QuadraticSystem {
    pub fn new(system: PolySystem) -> Result<Self> {
        for (j, p) in system.components().iter().enumerate() {
            if !p.is_homogeneous(2) {
                return Err(Error::NotQuadratic(format!("component {j} has a term of degree != 2")));
            }
        }
        Ok(QuadraticSystem(system))
    }

    pub fn system(&self) -> &PolySystem {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn components(&self) -> &[Poly] {
        self.0.components()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NormalizeError {
    #[error("center is not a zero of the singularized system: |g(y)| = {residual:e} (limit {limit:e})")]
    NotAZero { residual: f64, limit: f64 },
    #[error("kernel directions are not annihilated: max column norm {residual:e} (limit {limit:e})")]
    KernelResidual { residual: f64, limit: f64 },
    #[error(transparent)]
    Other(#[from] Error),
}

/// `g(x) = f(x) − f(y) − Df(y)·π_V(x − y)` with `π_V = V V†`.
pub fn singularize(f: &PolySystem, y: &[Complex64], v: &ComplexMatrix) -> Result<PolySystem> {
    let n = f.n();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, found: y.len() });
    }
    if v.nrows() != n {
        return Err(Error::Dimension { expected: n, found: v.nrows() });
    }
    let defect = orthonormality_defect(v);
    if defect > 1e-10 {
        return Err(Error::NotOrthonormal(defect));
    }
    let jac = f.jacobian(y)?;
    let lin = &jac * v * v.adjoint();
    let fy = f.eval(y)?;
    let comps = f
        .components()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut g = p.clone();
            // −f_j(y) + Σ_i L_ji y_i − Σ_i L_ji x_i
            let mut constant = -fy[j];
            for i in 0..n {
                constant += lin[(j, i)] * y[i];
                g.add_term(Monomial::var(n, i), -lin[(j, i)]);
            }
            g.add_term(Monomial::one(n), constant);
            g
        })
        .collect();
    Ok(PolySystem::from_components_unchecked(comps))
}

/// Builds `A = (y, U)` with `U` completing the kernel basis and returns `(g∘A, A)`.
pub fn normalize(
    g: &PolySystem,
    y: &[Complex64],
    kd: &KernelData,
) -> std::result::Result<(PolySystem, AffineMap), NormalizeError> {
    let n = g.n();
    if y.len() != n || kd.n() != n {
        return Err(Error::Dimension { expected: n, found: y.len().min(kd.n()) }.into());
    }
    let scale = g.coeff_sup().max(1.0);
    let limit = NORMALIZE_TOL * scale;
    let residual = g.eval_norm(y)?;
    if residual > limit {
        return Err(NormalizeError::NotAZero { residual, limit });
    }
    let u = unitary_from_kernel(kd)?;
    let map = AffineMap::new(y.to_vec(), u)?;
    let ga = g.compose_affine(&map)?;
    let origin = vec![Complex64::new(0.0, 0.0); n];
    let jac = ga.jacobian(&origin)?;
    let worst = (0..kd.kappa).map(|i| jac.column(i).norm()).fold(0.0, f64::max);
    if worst > limit {
        return Err(NormalizeError::KernelResidual { residual: worst, limit });
    }
    Ok((ga, map))
}

fn graded_norm(h: &PolySystem, d: u32) -> f64 {
    h.components()
        .iter()
        .flat_map(|p| p.graded_part(d).terms().map(|(_, c)| c.norm_sqr()).collect::<Vec<_>>())
        .sum::<f64>()
        .sqrt()
}

/// Applies `S_κ` componentwise. Residual constant and linear terms are kept
/// and only reported.
pub fn inflate_system(h: &PolySystem, kappa: usize, map: AffineMap) -> InflatedSystem {
    let inflated = h.inflate(kappa);
    let diagnostics = InflationDiagnostics {
        constant_norm: graded_norm(&inflated, 0),
        linear_norm: graded_norm(&inflated, 1),
    };
    InflatedSystem { h: inflated, kappa, map, diagnostics }
}

pub fn quadratic_part(h: &PolySystem) -> QuadraticSystem {
    QuadraticSystem(h.graded_part(2))
}

/// Pointwise `S_κ`.
pub fn inflation_map(x: &[Complex64], kappa: usize) -> Vec<Complex64> {
    x.iter().enumerate().map(|(i, z)| if i >= kappa { z * z } else { *z }).collect()
}

/// Maximum column norm of `Df(y)·V`.
pub fn kernel_residual(f: &PolySystem, y: &[Complex64], v: &ComplexMatrix) -> Result<f64> {
    let jv = f.jacobian(y)? * v;
    Ok((0..jv.ncols()).map(|i| jv.column(i).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlinalg::{numerical_kernel, random_unitary, DEFAULT_TAU};
    use crate::poly::real_poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn worked_f() -> PolySystem {
        PolySystem::new(vec![
            real_poly(2, &[(&[2, 0], 1.0), (&[0, 0], -1e-4)]),
            real_poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0), (&[3, 0], -0.01)]),
        ])
        .unwrap()
    }

    fn worked_y() -> Vec<Complex64> {
        vec![c(0.001), c(-0.001)]
    }

    /// `[(x1−y1)², (x2−y2) − α(x1−y1)²((x1−y1) + 3y1)]`, built by polynomial arithmetic.
    fn exact_double(alpha: f64, y1: f64, y2: f64) -> PolySystem {
        let n = 2;
        let d1 = &Poly::var(n, 0) - &Poly::constant(n, c(y1));
        let d2 = &Poly::var(n, 1) - &Poly::constant(n, c(y2));
        let sq = d1.pow(2);
        let inner = &d1 + &Poly::constant(n, c(3.0 * y1));
        let g2 = &d2 - &(&sq * &inner).scale(&c(alpha));
        PolySystem::new(vec![sq, g2]).unwrap()
    }

    #[test]
    fn singularize_worked_example() {
        let f = worked_f();
        let y = worked_y();
        let kd = numerical_kernel(&f.jacobian(&y).unwrap(), DEFAULT_TAU).unwrap();
        let g = singularize(&f, &y, &kd.basis).unwrap();
        let g1 = &g.components()[0];
        assert!((g1.coeff(&[2, 0]) - c(1.0)).norm() < 1e-12);
        assert!((g1.coeff(&[1, 0]) - c(-1e-3)).norm() < 1e-8);
        // the x2 sign is forced by g(y) = 0
        assert!((g1.coeff(&[0, 1]) - c(1e-3)).norm() < 1e-8);
        assert!((g1.coeff(&[0, 0]) - c(1e-6)).norm() < 1e-11);
        let g2 = &g.components()[1];
        assert!((g2.coeff(&[1, 0]) - c(1.0)).norm() < 1e-5);
        assert!((g2.coeff(&[0, 1]) - c(1.0)).norm() < 1e-5);
        assert!((g2.coeff(&[3, 0]) - c(-0.01)).norm() < 1e-15);
        assert!((g2.coeff(&[0, 0]) - c(-2e-9)).norm() < 1e-10);

        assert!(g.eval_norm(&y).unwrap() < 1e-12);
        assert!(kernel_residual(&g, &y, &kd.basis).unwrap() < 1e-10 * kd.singular_values[0]);
    }

    #[test]
    fn singularize_with_empty_kernel_subtracts_value() {
        let f = worked_f();
        let y = worked_y();
        let g = singularize(&f, &y, &ComplexMatrix::zeros(2, 0)).unwrap();
        let fy = f.eval(&y).unwrap();
        for (j, (gp, fp)) in g.components().iter().zip(f.components()).enumerate() {
            let expect = fp - &Poly::constant(2, fy[j]);
            assert_eq!(gp, &expect);
        }
    }

    #[test]
    fn singularize_at_exact_singular_zero_keeps_zero_and_enlarges_kernel() {
        let f = exact_double(1.0, 0.5, 0.3);
        let y = vec![c(0.5), c(0.3)];
        let v = ComplexMatrix::from_column_slice(2, 1, &[c(1.0), c(0.0)]);
        let g = singularize(&f, &y, &v).unwrap();
        assert!(g.eval_norm(&y).unwrap() < 1e-15);
        assert!(kernel_residual(&g, &y, &v).unwrap() < 1e-15);
    }

    #[test]
    fn normalize_worked_example() {
        let f = worked_f();
        let y = worked_y();
        let kd = numerical_kernel(&f.jacobian(&y).unwrap(), DEFAULT_TAU).unwrap();
        let g = singularize(&f, &y, &kd.basis).unwrap();
        let (ga, map) = normalize(&g, &y, &kd).unwrap();
        assert_eq!(map.translation, y);
        let c1 = &ga.components()[0];
        let c2 = &ga.components()[1];
        assert!((c1.coeff(&[0, 1]) - c(-0.001414)).norm() < 1e-6);
        assert!((c2.coeff(&[0, 1]) - c(-1.414)).norm() < 1e-3);
        assert!((c1.coeff(&[2, 0]) - c(0.5)).norm() < 1e-5);
        assert!((c1.coeff(&[1, 1]) - c(1.0)).norm() < 1e-5);
        assert!((c2.coeff(&[3, 0]) - c(0.003536)).norm() < 1e-6);
        assert!((c2.coeff(&[2, 0]) - c(-1.5e-5)).norm() < 1e-8);
        // kernel direction carries no linear term
        assert!(c1.coeff(&[1, 0]).norm() < 1e-12 && c2.coeff(&[1, 0]).norm() < 1e-12);
    }

    #[test]
    fn normalize_trivial_case_is_identity() {
        let g = PolySystem::new(vec![
            real_poly(2, &[(&[2, 0], 1.0)]),
            real_poly(2, &[(&[0, 1], 1.0), (&[2, 0], -2.0)]),
        ])
        .unwrap();
        let kd = numerical_kernel(&g.jacobian(&[c(0.0), c(0.0)]).unwrap(), DEFAULT_TAU).unwrap();
        let (ga, map) = normalize(&g, &[c(0.0), c(0.0)], &kd).unwrap();
        assert_eq!(map.linear, ComplexMatrix::identity(2, 2));
        assert_eq!(ga, g);
    }

    #[test]
    fn normalize_rejects_non_zero_center() {
        let f = worked_f();
        let y = worked_y();
        let kd = numerical_kernel(&f.jacobian(&y).unwrap(), DEFAULT_TAU).unwrap();
        match normalize(&f, &y, &kd) {
            Err(NormalizeError::NotAZero { residual, .. }) => assert!(residual > 9e-5),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn normalize_undoes_a_unitary_scramble() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            // a system whose singular zero at the origin has kernel e1
            let base = PolySystem::new(vec![
                real_poly(2, &[(&[2, 0], 1.0), (&[1, 1], 0.3)]),
                real_poly(2, &[(&[0, 1], 1.0), (&[2, 0], -0.7), (&[3, 0], 0.2)]),
            ])
            .unwrap();
            let w = random_unitary(2, &mut rng);
            let shift = vec![Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), c(0.2)];
            // f(x) = base(W†(x − shift)) has the zero at `shift`
            let scramble = AffineMap::new(shift.clone(), w).unwrap().unitary_inverse();
            let f = base.compose_affine(&scramble).unwrap();
            let kd = numerical_kernel(&f.jacobian(&shift).unwrap(), DEFAULT_TAU).unwrap();
            assert_eq!(kd.kappa, 1);
            let g = singularize(&f, &shift, &kd.basis).unwrap();
            let (ga, _) = normalize(&g, &shift, &kd).unwrap();
            // up to a phase on each variable, ga equals base
            let q = quadratic_part(&inflate_system(&ga, 1, AffineMap::identity(2)).h.map(|p| p.prune(1e-12)));
            let qb = quadratic_part(&base.inflate(1));
            for (a, b) in q.components().iter().zip(qb.components()) {
                let ma: Vec<f64> = a.terms().map(|(_, c)| c.norm()).collect();
                let mb: Vec<f64> = b.terms().map(|(_, c)| c.norm()).collect();
                assert_eq!(ma.len(), mb.len());
                for (x, y) in ma.iter().zip(&mb) {
                    assert!((x - y).abs() < 1e-10, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn inflate_system_examples() {
        let g = exact_double(1.0, 0.5, 0.0);
        // at y = (0.5, 0) translate to the origin by hand
        let a = AffineMap::new(vec![c(0.5), c(0.0)], ComplexMatrix::identity(2, 2)).unwrap();
        let h = g.compose_affine(&a).unwrap();
        let inf = inflate_system(&h, 1, a);
        let expect = vec![
            real_poly(2, &[(&[2, 0], 1.0)]),
            real_poly(2, &[(&[0, 2], 1.0), (&[3, 0], -1.0), (&[2, 0], -1.5)]),
        ];
        for (got, want) in inf.h.components().iter().zip(&expect) {
            assert!((got - want).coeff_sup() < 1e-15, "{got}");
        }
        assert!(inf.diagnostics.constant_norm < 1e-15 && inf.diagnostics.linear_norm < 1e-15);

        let id = inflate_system(&h, 2, AffineMap::identity(2));
        assert_eq!(id.h, h);
    }

    #[test]
    fn quadratic_part_examples() {
        for alpha in [1.0, 0.3] {
            let (y1, y2) = (0.5, 0.3);
            let g = exact_double(alpha, y1, y2);
            let y = vec![c(y1), c(y2)];
            let kd = numerical_kernel(&g.jacobian(&y).unwrap(), DEFAULT_TAU).unwrap();
            assert_eq!(kd.kappa, 1);
            let gs = singularize(&g, &y, &kd.basis).unwrap();
            let (ga, map) = normalize(&gs, &y, &kd).unwrap();
            let inf = inflate_system(&ga, kd.kappa, map);
            let q = quadratic_part(&inf.h);
            let want = [
                real_poly(2, &[(&[2, 0], 1.0)]),
                real_poly(2, &[(&[0, 2], 1.0), (&[2, 0], -3.0 * alpha * y1)]),
            ];
            for (got, w) in q.components().iter().zip(&want) {
                assert!((got - w).coeff_sup() <= 1e-12, "{got}");
            }
            assert!(inf.diagnostics.constant_norm <= 1e-14);
            assert!(inf.diagnostics.linear_norm <= 1e-14);
        }
        let zero = PolySystem::new(vec![Poly::zero(2), Poly::zero(2)]).unwrap();
        assert!(quadratic_part(&zero).components().iter().all(Poly::is_zero));
    }

    #[test]
    fn composed_inflation_matches_pointwise_evaluation() {
        let f = worked_f();
        let y = worked_y();
        let kd = numerical_kernel(&f.jacobian(&y).unwrap(), DEFAULT_TAU).unwrap();
        let u = unitary_from_kernel(&kd).unwrap();
        let a = AffineMap::new(y.clone(), u).unwrap();
        let fas = f.compose_affine(&a).unwrap().inflate(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: Vec<Complex64> = (0..2)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let direct = f.eval(&a.apply(&inflation_map(&x, 1))).unwrap();
            let composed = fas.eval(&x).unwrap();
            for (d, p) in direct.iter().zip(&composed) {
                assert!((d - p).norm() <= 1e-10 * (1.0 + d.norm()));
            }
        }
    }
}

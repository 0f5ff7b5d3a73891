//! Complex SVD, numerical kernels and unitary completion.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::poly::ComplexMatrix;

/// Default relative threshold for counting a singular value as "small".
pub const DEFAULT_TAU: f64 = 0.01;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Singular values (descending) and the matching right singular vectors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub values: Vec<f64>,
    /// Column `i` is the right singular vector of `values[i]`.
    pub right_vectors: ComplexMatrix,
}

/// Numerical-rank analysis of a square matrix.
#[derive(Clone, Debug)]
pub struct KernelData {
    pub kappa: usize,
    pub singular_values: Vec<f64>,
    /// `n × kappa`, orthonormal columns spanning the approximate kernel.
    pub basis: ComplexMatrix,
}

impl KernelData {
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }
}

/// Rotates a vector so its largest-modulus entry is real and positive.
fn normalize_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        v *= phase;
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
    v
}

pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Svd { values: vec![], right_vectors: ComplexMatrix::zeros(0, 0) });
    }
    let dec = m.clone().svd(false, true);
    let v_t = dec.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let values: Vec<f64> = order.iter().map(|&i| dec.singular_values[i]).collect();
    let mut right_vectors = ComplexMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        // rows of V† are conjugated right singular vectors
        let v = DVector::from_iterator(n, v_t.row(i).iter().map(|z| z.conj()));
        right_vectors.set_column(k, &normalize_phase(v));
    }
    Ok(Svd { values, right_vectors })
}

/// Counts singular values at or below `tau · σ_max` and returns their right
/// singular vectors as the approximate kernel basis.
pub fn numerical_kernel(m: &ComplexMatrix, tau: f64) -> Result<KernelData> {
    let dec = svd(m)?;
    let n = dec.values.len();
    let smax = dec.values.first().copied().unwrap_or(0.0);
    let kappa = if smax == 0.0 {
        n
    } else {
        dec.values.iter().filter(|&&s| s <= tau * smax).count()
    };
    let basis = dec.right_vectors.columns(n - kappa, kappa).into_owned();
    Ok(KernelData { kappa, singular_values: dec.values, basis })
}

/// Frobenius norm of `B†B − I`.
pub fn orthonormality_defect(b: &ComplexMatrix) -> f64 {
    let k = b.ncols();
    (b.adjoint() * b - ComplexMatrix::identity(k, k)).norm()
}

/// Completes the kernel basis to a unitary matrix whose first `kappa`
/// columns are the basis. Completion columns come from Gram–Schmidt on the
/// coordinate vectors (largest residual first); when there is any freedom the
/// last column is rotated so that `det U = 1`.
pub fn unitary_from_kernel(kd: &KernelData) -> Result<ComplexMatrix> {
    let n = kd.n();
    let defect = orthonormality_defect(&kd.basis);
    if defect > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal(defect));
    }
    let mut cols: Vec<DVector<Complex64>> = kd.basis.column_iter().map(|c| c.into_owned()).collect();
    let mut used = vec![false; n];
    while cols.len() < n {
        let mut best: Option<(usize, DVector<Complex64>, f64)> = None;
        for i in (0..n).filter(|&i| !used[i]) {
            let mut r = DVector::from_element(n, Complex64::new(0.0, 0.0));
            r[i] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&r);
                    r -= c * proj;
                }
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((i, r, norm));
            }
        }
        let (i, r, norm) = best.expect("a coordinate vector outside the span exists");
        used[i] = true;
        cols.push(r / Complex64::new(norm, 0.0));
    }
    let mut u = ComplexMatrix::from_columns(&cols);
    if kd.kappa < n && n > 0 {
        let det = u.determinant();
        if det.norm() > 0.0 {
            let phase = det.conj() / det.norm();
            let mut last = u.column_mut(n - 1);
            last *= phase;
        }
    }
    Ok(u)
}

/// Haar-ish random unitary: QR of a complex Gaussian matrix with the
/// diagonal phases of R divided out.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            let mut col = q.column_mut(j);
            col *= ph;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn example_jacobian() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0.002), c(0.0), c(1.0), c(1.0)])
    }

    #[test]
    #[allow(clippy::approx_constant)] // printed values
    fn svd_of_worked_example() {
        let s = svd(&example_jacobian()).unwrap();
        assert!((s.values[0] - 1.4142).abs() / 1.4142 < 1e-4, "{:?}", s.values);
        assert!((s.values[1] - 0.0014142).abs() / 0.0014142 < 1e-3, "{:?}", s.values);
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&ComplexMatrix::identity(3, 3)).unwrap();
        assert!(s.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let d = ComplexMatrix::from_row_slice(2, 2, &[c(3.0), c(0.0), c(0.0), c(0.0)]);
        let s = svd(&d).unwrap();
        assert!((s.values[0] - 3.0).abs() < 1e-14 && s.values[1].abs() < 1e-14);
        let v = s.right_vectors.column(1);
        assert!((v[1] - c(1.0)).norm() < 1e-14 && v[0].norm() < 1e-14);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let m = ComplexMatrix::from_row_slice(1, 1, &[c(f64::NAN)]);
        assert!(matches!(svd(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn kernel_of_worked_example() {
        let kd = numerical_kernel(&example_jacobian(), DEFAULT_TAU).unwrap();
        assert_eq!(kd.kappa, 1);
        let v = kd.basis.column(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - c(-h)).norm() < 1e-3 && (v[1] - c(h)).norm() < 1e-3, "{v}");
    }

    #[test]
    fn kernel_edge_cases() {
        let kd = numerical_kernel(&ComplexMatrix::identity(2, 2), DEFAULT_TAU).unwrap();
        assert_eq!(kd.kappa, 0);
        let kd = numerical_kernel(&ComplexMatrix::zeros(3, 3), DEFAULT_TAU).unwrap();
        assert_eq!(kd.kappa, 3);
        assert!(orthonormality_defect(&kd.basis) < 1e-12);
    }

    #[test]
    fn unitary_completion_examples() {
        let kd = numerical_kernel(&example_jacobian(), DEFAULT_TAU).unwrap();
        let u = unitary_from_kernel(&kd).unwrap();
        assert!(orthonormality_defect(&u) < 1e-12);
        assert!((u.column(0) - kd.basis.column(0)).norm() < 1e-14);
        assert!((u.determinant() - c(1.0)).norm() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[(0, 1)] - c(-h)).norm() < 1e-3 && (u[(1, 1)] - c(-h)).norm() < 1e-3, "{u}");

        let e1 = KernelData {
            kappa: 1,
            singular_values: vec![1.0, 0.0],
            basis: ComplexMatrix::from_column_slice(2, 1, &[c(1.0), c(0.0)]),
        };
        assert_eq!(unitary_from_kernel(&e1).unwrap(), ComplexMatrix::identity(2, 2));

        let empty = KernelData { kappa: 0, singular_values: vec![1.0; 3], basis: ComplexMatrix::zeros(3, 0) };
        assert_eq!(unitary_from_kernel(&empty).unwrap(), ComplexMatrix::identity(3, 3));

        let bad = KernelData {
            kappa: 1,
            singular_values: vec![1.0, 0.0],
            basis: ComplexMatrix::from_column_slice(2, 1, &[c(1.0), c(1.0)]),
        };
        assert!(matches!(unitary_from_kernel(&bad), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            for _ in 0..20 {
                let m = ComplexMatrix::from_fn(n, n, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let s = svd(&m).unwrap();
                assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
                assert!(orthonormality_defect(&s.right_vectors) < 1e-10);
                let smax = s.values[0];
                for i in 0..n {
                    let mv = (&m * s.right_vectors.column(i)).norm();
                    assert!((mv - s.values[i]).abs() <= 1e-8 * smax);
                }
                // M V V† = M reconstructs via the right factor alone
                let rec = &m * &s.right_vectors * s.right_vectors.adjoint();
                assert!((rec - &m).norm() <= 1e-8 * m.norm());
            }
        }
    }

    #[test]
    fn kernel_is_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 3;
            // rank-deficient: two well-separated singular values and one tiny one
            let l = random_unitary(n, &mut rng);
            let r = random_unitary(n, &mut rng);
            let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(0.7), c(1e-5)]));
            let m = &l * d * r.adjoint();
            let kd = numerical_kernel(&m, DEFAULT_TAU).unwrap();
            let w1 = random_unitary(n, &mut rng);
            let w2 = random_unitary(n, &mut rng);
            let m2 = &w1 * &m * &w2;
            let kd2 = numerical_kernel(&m2, DEFAULT_TAU).unwrap();
            assert_eq!(kd.kappa, 1);
            assert_eq!(kd2.kappa, 1);
            // span of kd2 must equal W2† span(kd)
            let mapped = w2.adjoint() * &kd.basis;
            let overlap = (kd2.basis.adjoint() * mapped)[(0, 0)].norm();
            let angle = overlap.min(1.0).acos();
            assert!(angle < 1e-6, "angle {angle}");
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..5 {
            assert!(orthonormality_defect(&random_unitary(n, &mut rng)) < 1e-12);
        }
    }
}

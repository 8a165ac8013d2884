//! Reduction of a general non-central complex Gaussian quadratic form to
//! spectral coordinates.
//!
//! For `Q = v† A v` with `v ~ CN(v̄, L)`, a Cholesky factor `L = C C†` and a
//! unitary diagonalization `C† A C = U Λ U†` turn `Q` into
//! `(y + h̄)† Λ (y + h̄)` with `y ~ CN(0, I)` and `h̄ = U† C⁻¹ v̄`. The pair
//! `(λᵢ, μᵢ = |h̄ᵢ|²)` is a sufficient statistic for the distribution of `Q`
//! and is all downstream modules consume.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as Hermitian.
const TOL_HERM: f64 = 1e-12;

/// Relative floor on |eigenvalue| of `C†AC` below which `A` is treated as
/// singular.
const TOL_EIG: f64 = 1e-9;

/// Off-diagonal reduction target of the Jacobi sweep, relative to the
/// Frobenius norm.
const JACOBI_TOL: f64 = 1e-14;

const MAX_SWEEPS: usize = 60;

/// An indefinite non-central complex Gaussian quadratic form `v† A v`,
/// `v ~ CN(v̄, L)`.
///
/// Construction validates the invariants: `A` and `L` Hermitian (inputs are
/// symmetrized as `(H + H†)/2` after a tolerance check), `L` positive
/// definite, and `A` non-singular. Rank-deficient `L` is rejected rather
/// than auto-reduced.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    a: DMatrix<Complex64>,
    l: DMatrix<Complex64>,
    v_bar: DVector<Complex64>,
}

impl QuadraticForm {
    pub fn new(
        a: DMatrix<Complex64>,
        l: DMatrix<Complex64>,
        v_bar: DVector<Complex64>,
    ) -> Result<Self> {
        let n = v_bar.len();
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if a.nrows() != n || a.ncols() != n || l.nrows() != n || l.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: A is {}x{}, L is {}x{}, v_bar has length {}",
                a.nrows(),
                a.ncols(),
                l.nrows(),
                l.ncols(),
                n
            )));
        }
        let a = hermitize(&a, "A")?;
        let l = hermitize(&l, "L")?;
        let qf = QuadraticForm { a, l, v_bar };
        // Full validation: L must factor and the spectrum of C†AC must stay
        // away from zero.
        qf.reduce_impl()?;
        Ok(qf)
    }

    pub fn dim(&self) -> usize {
        self.v_bar.len()
    }

    pub fn a(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn l(&self) -> &DMatrix<Complex64> {
        &self.l
    }

    pub fn v_bar(&self) -> &DVector<Complex64> {
        &self.v_bar
    }

    fn reduce_impl(&self) -> Result<SpectralForm> {
        let c = cholesky(&self.l)?;
        let m = c.adjoint() * &self.a * &c;
        let m = hermitize(&m, "C†AC")?;
        let (u, lambda) = eigh(&m)?;
        let max_abs = lambda.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let min_abs = lambda.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if max_abs == 0.0 || min_abs < TOL_EIG * max_abs {
            return Err(Error::InvalidInput(format!(
                "A is numerically singular: |lambda| range [{min_abs:.3e}, {max_abs:.3e}]"
            )));
        }
        let w = c
            .clone()
            .solve_lower_triangular(&self.v_bar)
            .ok_or_else(|| Error::InvalidInput("Cholesky factor not invertible".into()))?;
        let h_bar = u.adjoint() * w;
        let mu: Vec<f64> = h_bar.iter().map(|h| h.norm_sqr()).collect();
        Ok(SpectralForm { lambda, mu, chol: c, u, h_bar })
    }
}

/// Spectral form of a quadratic form: eigenvalues of `LA` and squared
/// magnitudes of the transformed mean.
#[derive(Debug, Clone)]
pub struct SpectralForm {
    /// Signed eigenvalues of `LA`, ascending.
    pub lambda: Vec<f64>,
    /// Non-centralities `μᵢ = |h̄ᵢ|²`, aligned with `lambda`.
    pub mu: Vec<f64>,
    /// Lower-triangular Cholesky factor of `L`.
    pub chol: DMatrix<Complex64>,
    /// Unitary eigenvector matrix of `C†AC`.
    pub u: DMatrix<Complex64>,
    /// Transformed mean `U† C⁻¹ v̄`.
    pub h_bar: DVector<Complex64>,
}

impl SpectralForm {
    /// Build directly from `(λ, μ)` pairs; used by synthetic test systems
    /// where no matrix realization is needed.
    pub fn from_spectrum(lambda: Vec<f64>, mu: Vec<f64>) -> Self {
        assert_eq!(lambda.len(), mu.len());
        let n = lambda.len();
        let h_bar = DVector::from_iterator(
            n,
            mu.iter().map(|&m| Complex64::new(m.sqrt(), 0.0)),
        );
        SpectralForm {
            lambda,
            mu,
            chol: DMatrix::identity(n, n),
            u: DMatrix::identity(n, n),
            h_bar,
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `E[Q] = Σ λᵢ (1 + μᵢ)`.
    pub fn mean(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l * (1.0 + m)).sum()
    }

    /// `E[Q²] = (Σ λᵢ(1+μᵢ))² + Σ λᵢ²(1+2μᵢ)`.
    pub fn second_moment(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .lambda
            .iter()
            .zip(&self.mu)
            .map(|(l, m)| l * l * (1.0 + 2.0 * m))
            .sum();
        mean * mean + var
    }
}

fn hermitize(h: &DMatrix<Complex64>, name: &str) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    let scale = h.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let tol = TOL_HERM * scale.max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i..n {
            let d = (h[(i, j)] - h[(j, i)].conj()).norm();
            if d > tol {
                return Err(Error::InvalidInput(format!(
                    "{name} is not Hermitian: entry ({i},{j}) deviates by {d:.3e}"
                )));
            }
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (h[(i, j)] + h[(j, i)].conj());
        }
    }
    Ok(out)
}

/// Cholesky factorization `L = C C†` of a Hermitian positive-definite
/// matrix, `C` lower triangular with real non-negative diagonal.
pub fn cholesky(l: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = l.nrows();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(l[(i, i)].re.abs()));
    let pivot_floor = 1e-14 * max_diag.max(f64::MIN_POSITIVE);
    let mut c: DMatrix<Complex64> = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= c[(j, k)].norm_sqr();
        }
        if d <= pivot_floor {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        c[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = l[(i, j)];
            for k in 0..j {
                s -= c[(i, k)] * c[(j, k)].conj();
            }
            c[(i, j)] = s / djj;
        }
    }
    Ok(c)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(U, λ)` with `H U = U diag(λ)`, eigenvalues ascending, and the
/// phase of each eigenvector fixed so that its largest-magnitude entry is
/// real positive. The sweep order is fixed, so the output is deterministic
/// for identical input.
pub fn eigh(h: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::InvalidInput("eigh requires a square matrix".into()));
    }
    let mut a = hermitize(h, "H")?;
    let mut u: DMatrix<Complex64> = DMatrix::identity(n, n);

    let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok((u, vec![0.0; n]));
    }
    let target = JACOBI_TOL * norm;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| 2.0 * a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                // small root of t^2 - 2 tau t - 1 = 0
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sigma = t * c;
                // s carries the conjugate phase of a_pq
                let s = sigma * phase.conj();

                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // rows p and q: A <- V† A
                for r in 0..n {
                    let arp = a[(p, r)];
                    let arq = a[(q, r)];
                    a[(p, r)] = c * arp + s.conj() * arq;
                    a[(q, r)] = -s * arp + c * arq;
                }
                // columns p and q: A <- A V, and accumulate U <- U V
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp + s * arq;
                    a[(r, q)] = -s.conj() * arp + c * arq;

                    let urp = u[(r, p)];
                    let urq = u[(r, q)];
                    u[(r, p)] = c * urp + s * urq;
                    u[(r, q)] = -s.conj() * urp + c * urq;
                }
                // enforce exact symmetry of the touched block
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(
                    c * c * app + 2.0 * c * sigma * mag + sigma * sigma * aqq,
                    0.0,
                );
                a[(q, q)] = Complex64::new(
                    sigma * sigma * app - 2.0 * c * sigma * mag + c * c * aqq,
                    0.0,
                );
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Jacobi eigendecomposition",
            iterations: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).expect("finite"));
    let lambda: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut u_sorted = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
    }
    // phase convention: largest-magnitude entry real positive
    for j in 0..n {
        let mut best = 0;
        let mut best_mag = 0.0;
        for i in 0..n {
            let m = u_sorted[(i, j)].norm();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let rot = u_sorted[(best, j)].conj() / best_mag;
            for i in 0..n {
                u_sorted[(i, j)] *= rot;
            }
        }
    }
    Ok((u_sorted, lambda))
}

/// Full reduction of a quadratic form to its spectral form.
pub fn reduce(qf: &QuadraticForm) -> Result<SpectralForm> {
    qf.reduce_impl()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cplx, random_hermitian, random_spd};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = DMatrix::identity(2, 2);
        let c = cholesky(&l).unwrap();
        assert!((&c - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);

        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![cplx(4.0, 0.0), cplx(9.0, 0.0)]));
        let c = cholesky(&l).unwrap();
        assert!((c[(0, 0)] - cplx(2.0, 0.0)).norm() < 1e-15);
        assert!((c[(1, 1)] - cplx(3.0, 0.0)).norm() < 1e-15);
        assert_eq!(c[(0, 1)], cplx(0.0, 0.0));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let l = random_spd(3, &mut rng);
            let c = cholesky(&l).unwrap();
            let r = &c * c.adjoint();
            for i in 0..3 {
                assert!(c[(i, i)].im == 0.0 && c[(i, i)].re > 0.0);
                for j in 0..3 {
                    assert!(
                        (r[(i, j)] - l[(i, j)]).norm() < 1e-12 * l.norm(),
                        "entry ({i},{j})"
                    );
                    if j > i {
                        assert_eq!(c[(i, j)], cplx(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut l = DMatrix::identity(2, 2);
        l[(1, 1)] = cplx(-1.0, 0.0);
        match cholesky(&l) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn eigh_diagonal_and_symmetric_inputs() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![cplx(-1.0, 0.0), cplx(2.0, 0.0)]));
        let (u, lambda) = eigh(&h).unwrap();
        assert_eq!(lambda, vec![-1.0, 2.0]);
        assert!((&u - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-14);

        let mut h = DMatrix::zeros(2, 2);
        h[(0, 1)] = cplx(1.0, 0.0);
        h[(1, 0)] = cplx(1.0, 0.0);
        let (_, lambda) = eigh(&h).unwrap();
        assert!((lambda[0] + 1.0).abs() < 1e-14);
        assert!((lambda[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_trace_det_and_residual() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..25 {
            let h = random_hermitian(4, &mut rng);
            let (u, lambda) = eigh(&h).unwrap();

            let tr: f64 = (0..4).map(|i| h[(i, i)].re).sum();
            let sum: f64 = lambda.iter().sum();
            assert!((tr - sum).abs() < 1e-10 * tr.abs().max(1.0));

            let det = h.clone().determinant();
            let prod: f64 = lambda.iter().product();
            assert!((det.re - prod).abs() < 1e-10 * det.norm().max(1.0));
            assert!(det.im.abs() < 1e-9 * det.norm().max(1.0));

            // columns orthonormal, HU = U diag(lambda)
            let gram = u.adjoint() * &u;
            assert!((&gram - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-12);
            let lam = DMatrix::from_diagonal(&DVector::from_iterator(
                4,
                lambda.iter().map(|&l| cplx(l, 0.0)),
            ));
            assert!((&h * &u - &u * lam).norm() < 1e-11 * h.norm());

            // ascending order
            for w in lambda.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eigh_deterministic_output() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let h = random_hermitian(5, &mut rng);
        let (u1, l1) = eigh(&h).unwrap();
        let (u2, l2) = eigh(&h).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(u1, u2);
    }

    #[test]
    fn reduce_scalar_cases() {
        let one = DMatrix::from_element(1, 1, cplx(1.0, 0.0));
        let qf = QuadraticForm::new(one.clone(), one.clone(), DVector::from_vec(vec![cplx(0.0, 0.0)]))
            .unwrap();
        let sf = reduce(&qf).unwrap();
        assert_eq!(sf.lambda, vec![1.0]);
        assert_eq!(sf.mu, vec![0.0]);

        let qf =
            QuadraticForm::new(one.clone(), one, DVector::from_vec(vec![cplx(2.0, 0.0)])).unwrap();
        let sf = reduce(&qf).unwrap();
        assert_eq!(sf.lambda, vec![1.0]);
        assert!((sf.mu[0] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn reduce_preserves_trace_and_mean_identities() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a = random_hermitian(3, &mut rng);
            let l = random_spd(3, &mut rng);
            let v = DVector::from_iterator(
                3,
                (0..3).map(|_| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
            );
            let qf = match QuadraticForm::new(a.clone(), l.clone(), v.clone()) {
                Ok(qf) => qf,
                // random A may be near-singular; skip those draws
                Err(Error::InvalidInput(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            let sf = reduce(&qf).unwrap();

            let la = &l * &a;
            let tr: f64 = (0..3).map(|i| la[(i, i)].re).sum();
            let sum_l: f64 = sf.lambda.iter().sum();
            assert!((tr - sum_l).abs() < 1e-10 * tr.abs().max(1.0));

            let vav = (v.adjoint() * &a * &v)[(0, 0)];
            let sum_lm: f64 = sf.lambda.iter().zip(&sf.mu).map(|(l, m)| l * m).sum();
            assert!((vav.re - sum_lm).abs() < 1e-10 * vav.re.abs().max(1.0));
            assert!(vav.im.abs() < 1e-10);

            for &m in &sf.mu {
                assert!(m >= 0.0);
            }
        }
    }

    #[test]
    fn reduce_rejects_singular_a() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![cplx(1.0, 0.0), cplx(0.0, 0.0)]));
        let l = DMatrix::identity(2, 2);
        let v = DVector::from_vec(vec![cplx(0.0, 0.0), cplx(0.0, 0.0)]);
        assert!(QuadraticForm::new(a, l, v).is_err());
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = cplx(1.0, 0.0);
        let l = DMatrix::identity(2, 2);
        let v = DVector::from_vec(vec![cplx(0.0, 0.0), cplx(0.0, 0.0)]);
        assert!(matches!(QuadraticForm::new(a, l, v), Err(Error::InvalidInput(_))));
    }
}

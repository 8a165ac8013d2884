//! Shared helpers for unit tests: seeded random matrices and quadrature.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha12Rng) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = cplx(rng.gen_range(-2.0..2.0), 0.0);
        for j in (i + 1)..n {
            let z = cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

pub fn random_spd(n: usize, rng: &mut ChaCha12Rng) -> DMatrix<Complex64> {
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let mut l = &b * b.adjoint();
    for i in 0..n {
        l[(i, i)] += cplx(0.5 * n as f64, 0.0);
    }
    l
}

pub fn random_mean(n: usize, rng: &mut ChaCha12Rng) -> DVector<Complex64> {
    DVector::from_iterator(
        n,
        (0..n).map(|_| cplx(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))),
    )
}

/// Composite Simpson rule with an even number of panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

//! Small dense linear-algebra helpers shared by the engines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

/// How an operand enters a complex matrix product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Plain,
    /// Conjugate transpose.
    Adjoint,
    Transpose,
    Conj,
}

fn strides(m: &DMatrix<C64>, transpose: bool) -> (usize, usize, isize, isize) {
    let (r, c) = (m.nrows(), m.ncols());
    // column-major storage: element (i, j) at i + j * r
    if transpose {
        (c, r, r as isize, 1)
    } else {
        (r, c, 1, r as isize)
    }
}

/// `op(a) * op(b)` using a blocked complex kernel.
pub fn zgemm(a: &DMatrix<C64>, opa: Op, b: &DMatrix<C64>, opb: Op) -> DMatrix<C64> {
    let conj_a;
    let a = if matches!(opa, Op::Conj | Op::Adjoint) {
        conj_a = a.map(|z| z.conj());
        &conj_a
    } else {
        a
    };
    let conj_b;
    let b = if matches!(opb, Op::Conj | Op::Adjoint) {
        conj_b = b.map(|z| z.conj());
        &conj_b
    } else {
        b
    };
    let (m, k, rsa, csa) = strides(a, matches!(opa, Op::Transpose | Op::Adjoint));
    let (kb, n, rsb, csb) = strides(b, matches!(opb, Op::Transpose | Op::Adjoint));
    assert_eq!(k, kb, "zgemm: inner dimensions differ");
    let mut c = DMatrix::<C64>::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    use matrixmultiply::CGemmOption::Standard;
    // SAFETY: Complex<f64> is #[repr(C)] with two f64 fields, so it has the
    // layout of [f64; 2]; strides describe the column-major buffers above.
    unsafe {
        matrixmultiply::zgemm(
            Standard,
            Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Spectral decomposition of a Hermitian matrix, using a real solver when
/// the input is real.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(m: &DMatrix<C64>) -> Self {
        if m.iter().all(|z| z.im == 0.0) {
            let eig = SymmetricEigen::new(m.map(|z| z.re));
            Self { values: eig.eigenvalues, vectors: eig.eigenvectors.map(|x| C64::new(x, 0.0)) }
        } else {
            let eig = SymmetricEigen::new(m.clone());
            Self { values: eig.eigenvalues, vectors: eig.eigenvectors }
        }
    }

    /// `V f(E) V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (k, &e) in self.values.iter().enumerate() {
            let fe = f(e);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= fe;
            }
        }
        zgemm(&scaled, Op::Plain, &self.vectors, Op::Adjoint)
    }
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for k in j + 1..n {
            let avg = (m[(j, k)] + m[(k, j)].conj()) * 0.5;
            m[(j, k)] = avg;
            m[(k, j)] = avg.conj();
        }
    }
}

/// Frobenius norm squared.
pub fn frobenius_sq(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

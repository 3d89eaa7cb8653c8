//! Floating-point scalar abstraction shared by the tensor math, the model
//! and the evaluation metrics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// floating point: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Conversion from an f64 literal. Implementations must be exact
    /// whenever the value is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Left-to-right sum.
    fn total<I: IntoIterator<Item = Self>>(values: I) -> Self {
        values.into_iter().fold(Self::zero(), |acc, v| acc + v)
    }

    /// `c += a * b` with `c` a dense row-major `m x n` matrix and `a`
    /// (`m x k`), `b` (`k x n`) given as strided views.
    fn gemm_acc(m: usize, k: usize, n: usize, a: MatRef<'_, Self>, b: MatRef<'_, Self>, c: &mut [Self]) {
        check_gemm(m, k, n, &a, &b, c);
        for i in 0..m {
            let row = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                let av = a.data[i * a.row_stride + p * a.col_stride];
                let b_row = p * b.row_stride;
                for (j, d) in row.iter_mut().enumerate() {
                    *d += av * b.data[b_row + j * b.col_stride];
                }
            }
        }
    }
}

/// Read-only strided matrix view: element `(i, j)` is
/// `data[i * row_stride + j * col_stride]`.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, T> {
    pub data: &'a [T],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T> MatRef<'a, T> {
    pub fn row_major(data: &'a [T], cols: usize) -> Self {
        Self { data, row_stride: cols, col_stride: 1 }
    }

    /// The transpose of a row-major matrix with `cols` columns.
    pub fn transposed(data: &'a [T], cols: usize) -> Self {
        Self { data, row_stride: 1, col_stride: cols }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        rows == 0 || cols == 0 || (rows - 1) * self.row_stride + (cols - 1) * self.col_stride < self.data.len()
    }
}

fn check_gemm<T>(m: usize, k: usize, n: usize, a: &MatRef<'_, T>, b: &MatRef<'_, T>, c: &[T]) {
    assert!(a.fits(m, k) && b.fits(k, n) && c.len() == m * n, "gemm operands do not match {m}x{k}x{n}");
}

macro_rules! blas_like {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm_acc(m: usize, k: usize, n: usize, a: MatRef<'_, Self>, b: MatRef<'_, Self>, c: &mut [Self]) {
                check_gemm(m, k, n, &a, &b, c);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: check_gemm bounds every index the kernel touches.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.data.as_ptr(),
                        a.row_stride as isize,
                        a.col_stride as isize,
                        b.data.as_ptr(),
                        b.row_stride as isize,
                        b.col_stride as isize,
                        1.0,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    )
                }
            }
        }
    };
}

blas_like!(f32, matrixmultiply::sgemm);
blas_like!(f64, matrixmultiply::dgemm);

/// Double-double arithmetic (about 106 significand bits), used where f64
/// roundoff would swamp the quantity being measured.
pub type DoubleDouble = twofloat::TwoFloat;

impl Scalar for DoubleDouble {
    // the crate's `FromPrimitive::from_f64` goes through an integer
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_paths_agree() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let bt: Vec<f64> = (0..n * k).map(|i| b[(i % k) * n + i / k]).collect();
        let expect = naive(m, k, n, &a, &b);

        let mut c = vec![0.0; m * n];
        f64::gemm_acc(m, k, n, MatRef::row_major(&a, k), MatRef::transposed(&bt, k), &mut c);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-14);
        }

        let ad: Vec<DoubleDouble> = a.iter().map(|&v| DoubleDouble::lit(v)).collect();
        let bd: Vec<DoubleDouble> = b.iter().map(|&v| DoubleDouble::lit(v)).collect();
        let mut cd = vec![DoubleDouble::lit(1.0); m * n];
        DoubleDouble::gemm_acc(m, k, n, MatRef::row_major(&ad, k), MatRef::row_major(&bd, n), &mut cd);
        for (x, y) in cd.iter().zip(&expect) {
            assert!((x.as_f64() - 1.0 - y).abs() < 1e-14);
        }
    }

    #[test]
    fn double_double_literals_are_exact() {
        let x = DoubleDouble::lit(0.3);
        assert_eq!(x.as_f64(), 0.3);
        let e = DoubleDouble::lit(1e-5);
        let step = (DoubleDouble::lit(0.5) + e) - (DoubleDouble::lit(0.5) - e);
        assert_eq!(step, e + e);
    }
}

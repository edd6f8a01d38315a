//! Scalar abstraction shared by every numeric module.
//!
//! The math is written once against [`Scalar`]; `f64` is the working
//! precision of the toolkit and `f32` is supported for inference and
//! objective evaluation.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the numeric core is generic over.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and physical constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Lossy conversion to `f64`, used for reporting and persistence.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// `c = a · b` for strided row/column layouts (`c` is fully overwritten).
    ///
    /// `a` is `m×k`, `b` is `k×n`, `c` is `m×n`; `rs*`/`cs*` are row and
    /// column strides in elements. The default is a plain triple loop;
    /// `f32`/`f64` dispatch to a blocked kernel.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    ) {
        for i in 0..m {
            for j in 0..n {
                c[i * rsc + j * csc] = Self::zero();
            }
            for l in 0..k {
                let av = a[i * rsa + l * csa];
                if av == Self::zero() {
                    continue;
                }
                for j in 0..n {
                    c[i * rsc + j * csc] += av * b[l * rsb + j * csb];
                }
            }
        }
    }
}

/// Largest index touched by an `rows×cols` view with the given strides, plus one.
fn span(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! blocked_gemm {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: usize,
                csa: usize,
                b: &[Self],
                rsb: usize,
                csb: usize,
                c: &mut [Self],
                rsc: usize,
                csc: usize,
            ) {
                assert!(a.len() >= span(m, k, rsa, csa), "gemm: lhs too short");
                assert!(b.len() >= span(k, n, rsb, csb), "gemm: rhs too short");
                assert!(c.len() >= span(m, n, rsc, csc), "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    for i in 0..m {
                        for j in 0..n {
                            c[i * rsc + j * csc] = 0.0;
                        }
                    }
                    return;
                }
                // SAFETY: the asserts above bound every strided access of the
                // three views inside their slices; with beta = 0 the kernel
                // never reads `c`.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        0.0,
                        c.as_mut_ptr(),
                        rsc as isize,
                        csc as isize,
                    );
                }
            }
        }
    };
}

blocked_gemm!(f64, matrixmultiply::dgemm);
blocked_gemm!(f32, matrixmultiply::sgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_kernel_matches_triple_loop() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut fast = vec![f64::NAN; m * n];
        f64::gemm(m, k, n, &a, k, 1, &b, n, 1, &mut fast, n, 1);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|l| a[i * k + l] * b[l * n + j]).sum();
                assert!((fast[i * n + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_strides() {
        // a stored as k×m, read as its transpose
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [1.0f32, 1.0]; // 2×1
        let mut c = [0.0f32; 3];
        f32::gemm(3, 2, 1, &a, 1, 3, &b, 1, 1, &mut c, 1, 1);
        assert_eq!(c, [5.0, 7.0, 9.0]);
    }

    #[test]
    fn conversions() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(2.0f64.to_f64_lossy(), 2.0);
    }
}

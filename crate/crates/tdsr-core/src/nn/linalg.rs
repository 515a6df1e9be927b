//! Small dense kernels behind the convolution layers. Loops are shaped
//! so the inner updates run over contiguous independent lanes, which the
//! compiler vectorizes without needing float reassociation.

use super::Real;

/// `c[m][n] += a[m][k] * b[k][n]`, all row-major.
pub fn gemm_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

/// Dot product with eight independent accumulators so the reduction
/// vectorizes despite strict float semantics.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xs, ys) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += xs[l] * ys[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    let mut s = T::zero();
    for &v in &acc {
        s += v;
    }
    s + tail
}

/// `out[j][i] = a[i][j]` for an `m x n` row-major `a`.
pub fn transpose<T: Real>(m: usize, n: usize, a: &[T], out: &mut Vec<T>) {
    debug_assert_eq!(a.len(), m * n);
    out.clear();
    out.resize(m * n, T::zero());
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
}

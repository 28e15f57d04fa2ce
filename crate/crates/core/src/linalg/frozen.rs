//! A large matrix that stays fixed while it is multiplied, many times, by
//! narrow right-hand sides.
//!
//! General GEMM repacks both operands on every call, which dominates when one
//! side is thousands of columns wide and the other a handful. Here the wide
//! operand is stored once at single precision and streamed row by row;
//! accumulation is in `f64`.

use rayon::prelude::*;

use super::Matrix;
use crate::error::{Error, Result};

/// Rows handled per task. Partial sums of the transposed product are formed
/// per block and added in block order, so results do not depend on the
/// number of threads.
const BLOCK_ROWS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct FrozenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FrozenMatrix {
    pub fn new(m: &Matrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// The stored values, widened back to `f64`.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| f64::from(x)).collect(),
        )
        .expect("shape is consistent")
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.rows() != self.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let h = rhs.cols();
        let mut out = Matrix::zeros(self.rows, h);
        if h == 0 || self.cols == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(BLOCK_ROWS * h)
            .enumerate()
            .for_each(|(b, dst)| {
                let lo = b * BLOCK_ROWS;
                let src = &self.data[lo * self.cols..(lo + dst.len() / h) * self.cols];
                kernels::rows_times(src, self.cols, rhs.as_slice(), h, dst);
            });
        Ok(out)
    }

    /// `selfᵀ · rhs`
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if rhs.rows() != self.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let h = rhs.cols();
        let width = self.cols * h;
        if width == 0 || self.rows == 0 {
            return Ok(Matrix::zeros(self.cols, h));
        }
        let partials: Vec<Vec<f64>> = (0..self.rows.div_ceil(BLOCK_ROWS))
            .into_par_iter()
            .map(|b| {
                let lo = b * BLOCK_ROWS;
                let hi = (lo + BLOCK_ROWS).min(self.rows);
                let mut acc = vec![0.0; width];
                kernels::rows_transpose_times(
                    &self.data[lo * self.cols..hi * self.cols],
                    self.cols,
                    &rhs.as_slice()[lo * h..hi * h],
                    h,
                    &mut acc,
                );
                acc
            })
            .collect();
        let mut total = vec![0.0; width];
        for p in &partials {
            for (t, x) in total.iter_mut().zip(p) {
                *t += x;
            }
        }
        Matrix::from_vec(self.cols, h, total)
    }
}

mod kernels {
    //! Entry points pick an AVX2/FMA build of the same loops when the CPU
    //! supports it.

    #[inline(always)]
    fn madd<const FUSED: bool>(a: f64, b: f64, c: f64) -> f64 {
        if FUSED {
            a.mul_add(b, c)
        } else {
            a * b + c
        }
    }

    #[inline(always)]
    fn flush_subnormal(x: f64) -> f64 {
        if x.abs() < f64::MIN_POSITIVE {
            0.0
        } else {
            x
        }
    }

    /// `dst = src · rhs` for a block of `src` rows, in column tiles of `L`.
    #[inline(always)]
    fn rows_times_impl<const FUSED: bool, const L: usize, const ROWS: usize>(
        src: &[f32],
        cols: usize,
        rhs: &[f64],
        h: usize,
        dst: &mut [f64],
    ) {
        let n = dst.len() / h;
        let full = h / L * L;
        let mut r = 0;
        while r < n {
            let rows = ROWS.min(n - r);
            let s: [&[f32]; ROWS] =
                std::array::from_fn(|i| &src[(r + i.min(rows - 1)) * cols..][..cols]);
            for j0 in (0..full).step_by(L) {
                let mut acc = [[0.0f64; L]; ROWS];
                for (k, wrow) in rhs.chunks_exact(h).enumerate().take(cols) {
                    let w: &[f64; L] = wrow[j0..j0 + L].try_into().expect("tile");
                    let x: [f64; ROWS] = std::array::from_fn(|i| f64::from(s[i][k]));
                    for i in 0..ROWS {
                        for l in 0..L {
                            acc[i][l] = madd::<FUSED>(x[i], w[l], acc[i][l]);
                        }
                    }
                }
                for (i, a) in acc.iter().enumerate().take(rows) {
                    dst[(r + i) * h + j0..][..L].copy_from_slice(a);
                }
            }
            for j in full..h {
                for i in 0..rows {
                    let mut t = 0.0;
                    for k in 0..cols {
                        t = madd::<FUSED>(f64::from(s[i][k]), rhs[k * h + j], t);
                    }
                    dst[(r + i) * h + j] = t;
                }
            }
            r += rows;
        }
    }

    /// `acc += srcᵀ · rhs` for a block of `src` rows and matching `rhs` rows.
    #[inline(always)]
    fn rows_transpose_times_impl<const FUSED: bool, const L: usize, const ROWS: usize>(
        src: &[f32],
        cols: usize,
        rhs: &[f64],
        h: usize,
        acc: &mut [f64],
    ) {
        let n = rhs.len() / h;
        let full = h / L * L;
        let mut r = 0;
        while r < n {
            let rows = ROWS.min(n - r);
            let s: [&[f32]; ROWS] =
                std::array::from_fn(|i| &src[(r + i.min(rows - 1)) * cols..][..cols]);
            for j0 in (0..full).step_by(L) {
                // Rows past the end of the block get zero weight. Subnormal
                // inputs, which arise from saturated softmax gradients, are
                // flushed to zero: arithmetic on them is very slow.
                let d: [[f64; L]; ROWS] = std::array::from_fn(|i| {
                    if i < rows {
                        let tile: [f64; L] = rhs[(r + i) * h + j0..][..L].try_into().expect("tile");
                        tile.map(flush_subnormal)
                    } else {
                        [0.0; L]
                    }
                });
                for (k, arow) in acc.chunks_exact_mut(h).enumerate().take(cols) {
                    let out: &mut [f64; L] = (&mut arow[j0..j0 + L]).try_into().expect("tile");
                    let x: [f64; ROWS] = std::array::from_fn(|i| f64::from(s[i][k]));
                    let mut t = *out;
                    for i in 0..ROWS {
                        for l in 0..L {
                            t[l] = madd::<FUSED>(x[i], d[i][l], t[l]);
                        }
                    }
                    *out = t;
                }
            }
            for j in full..h {
                for k in 0..cols {
                    let mut t = acc[k * h + j];
                    for i in 0..rows {
                        t = madd::<FUSED>(f64::from(s[i][k]), rhs[(r + i) * h + j], t);
                    }
                    acc[k * h + j] = t;
                }
            }
            r += rows;
        }
    }

    #[cfg(target_arch = "x86_64")]
    mod x86 {
        #[target_feature(enable = "avx512f,avx2,fma")]
        pub(super) fn rows_times_512(
            src: &[f32],
            cols: usize,
            rhs: &[f64],
            h: usize,
            dst: &mut [f64],
        ) {
            super::rows_times_impl::<true, 16, 4>(src, cols, rhs, h, dst);
        }

        #[target_feature(enable = "avx512f,avx2,fma")]
        pub(super) fn rows_transpose_times_512(
            src: &[f32],
            cols: usize,
            rhs: &[f64],
            h: usize,
            acc: &mut [f64],
        ) {
            super::rows_transpose_times_impl::<true, 16, 8>(src, cols, rhs, h, acc);
        }

        #[target_feature(enable = "avx2,fma")]
        pub(super) fn rows_times_256(
            src: &[f32],
            cols: usize,
            rhs: &[f64],
            h: usize,
            dst: &mut [f64],
        ) {
            super::rows_times_impl::<true, 8, 4>(src, cols, rhs, h, dst);
        }

        #[target_feature(enable = "avx2,fma")]
        pub(super) fn rows_transpose_times_256(
            src: &[f32],
            cols: usize,
            rhs: &[f64],
            h: usize,
            acc: &mut [f64],
        ) {
            super::rows_transpose_times_impl::<true, 8, 4>(src, cols, rhs, h, acc);
        }

        pub(super) fn has_512() -> bool {
            is_x86_feature_detected!("avx512f") && has_256()
        }

        pub(super) fn has_256() -> bool {
            is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
        }
    }

    pub(super) fn rows_times(src: &[f32], cols: usize, rhs: &[f64], h: usize, dst: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        {
            // SAFETY: each branch runs only after its CPU features were detected.
            if h >= 16 && x86::has_512() {
                return unsafe { x86::rows_times_512(src, cols, rhs, h, dst) };
            }
            if x86::has_256() {
                return unsafe { x86::rows_times_256(src, cols, rhs, h, dst) };
            }
        }
        rows_times_impl::<false, 4, 4>(src, cols, rhs, h, dst);
    }

    pub(super) fn rows_transpose_times(
        src: &[f32],
        cols: usize,
        rhs: &[f64],
        h: usize,
        acc: &mut [f64],
    ) {
        #[cfg(target_arch = "x86_64")]
        {
            // SAFETY: each branch runs only after its CPU features were detected.
            if h >= 16 && x86::has_512() {
                return unsafe { x86::rows_transpose_times_512(src, cols, rhs, h, acc) };
            }
            if x86::has_256() {
                return unsafe { x86::rows_transpose_times_256(src, cols, rhs, h, acc) };
            }
        }
        rows_transpose_times_impl::<false, 4, 4>(src, cols, rhs, h, acc);
    }
}

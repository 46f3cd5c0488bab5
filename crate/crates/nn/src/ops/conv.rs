//! 3×3, stride 1, zero-padding 1 convolution via im2col + GEMM.

use crate::scalar::{gemm, MatMut, MatRef, Scalar};

pub const K: usize = 3;
const KK: usize = K * K;

/// Unfolds one `[cin, h, w]` image into `col` of shape `[cin*9, h*w]`.
pub fn im2col<T: Scalar>(x: &[T], cin: usize, h: usize, w: usize, col: &mut [T]) {
    let hw = h * w;
    debug_assert_eq!(x.len(), cin * hw);
    debug_assert_eq!(col.len(), cin * KK * hw);
    for c in 0..cin {
        let plane = &x[c * hw..(c + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut col[((c * KK) + ky * K + kx) * hw..][..hw];
                for y in 0..h {
                    let out = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            out[0] = T::zero();
                            out[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => out.copy_from_slice(src),
                        _ => {
                            out[..w - 1].copy_from_slice(&src[1..]);
                            out[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `col` back into `dx` (accumulating).
pub fn col2im_add<T: Scalar>(col: &[T], cin: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for c in 0..cin {
        let plane = &mut dx[c * hw..(c + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &col[((c * KK) + ky * K + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, &s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, &s)| *d += s),
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConvDims {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
}

impl ConvDims {
    fn in_len(&self) -> usize {
        self.cin * self.h * self.w
    }
    fn out_len(&self) -> usize {
        self.cout * self.h * self.w
    }
}

pub fn forward<T: Scalar>(d: ConvDims, x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let hw = d.h * d.w;
    let krows = d.cin * KK;
    let mut col = vec![T::zero(); krows * hw];
    let mut out = vec![T::zero(); d.batch * d.out_len()];
    for n in 0..d.batch {
        im2col(
            &x[n * d.in_len()..(n + 1) * d.in_len()],
            d.cin,
            d.h,
            d.w,
            &mut col,
        );
        let y = &mut out[n * d.out_len()..(n + 1) * d.out_len()];
        for (co, row) in y.chunks_mut(hw).enumerate() {
            row.fill(bias[co]);
        }
        gemm(
            T::one(),
            MatRef::dense(weight, 0, d.cout, krows),
            MatRef::dense(&col, 0, krows, hw),
            T::one(),
            MatMut::dense(y, 0, d.cout, hw),
        );
    }
    out
}

/// Accumulates gradients into whichever of `dx`, `dw`, `db` are requested.
pub fn backward<T: Scalar>(
    d: ConvDims,
    x: &[T],
    weight: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let hw = d.h * d.w;
    let krows = d.cin * KK;
    let mut col = vec![T::zero(); krows * hw];
    let mut dcol = if dx.is_some() {
        vec![T::zero(); krows * hw]
    } else {
        Vec::new()
    };
    for n in 0..d.batch {
        let g = &dy[n * d.out_len()..(n + 1) * d.out_len()];
        if let Some(db) = db.as_deref_mut() {
            for (co, row) in g.chunks(hw).enumerate() {
                db[co] += row.iter().copied().sum::<T>();
            }
        }
        if let Some(dw) = dw.as_deref_mut() {
            im2col(
                &x[n * d.in_len()..(n + 1) * d.in_len()],
                d.cin,
                d.h,
                d.w,
                &mut col,
            );
            gemm(
                T::one(),
                MatRef::dense(g, 0, d.cout, hw),
                MatRef::dense(&col, 0, krows, hw).t(),
                T::one(),
                MatMut::dense(dw, 0, d.cout, krows),
            );
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(
                T::one(),
                MatRef::dense(weight, 0, d.cout, krows).t(),
                MatRef::dense(g, 0, d.cout, hw),
                T::zero(),
                MatMut::dense(&mut dcol, 0, krows, hw),
            );
            col2im_add(
                &dcol,
                d.cin,
                d.h,
                d.w,
                &mut dx[n * d.in_len()..(n + 1) * d.in_len()],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(d: ConvDims, x: &[f64], wt: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d.batch * d.cout * d.h * d.w];
        for n in 0..d.batch {
            for co in 0..d.cout {
                for y in 0..d.h {
                    for xx in 0..d.w {
                        let mut s = b[co];
                        for ci in 0..d.cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let sy = y as isize + ky as isize - 1;
                                    let sx = xx as isize + kx as isize - 1;
                                    if sy < 0 || sx < 0 || sy >= d.h as isize || sx >= d.w as isize
                                    {
                                        continue;
                                    }
                                    s += wt[((co * d.cin + ci) * 3 + ky) * 3 + kx]
                                        * x[((n * d.cin + ci) * d.h + sy as usize) * d.w
                                            + sx as usize];
                                }
                            }
                        }
                        out[((n * d.cout + co) * d.h + y) * d.w + xx] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_convolution() {
        let d = ConvDims {
            batch: 2,
            cin: 3,
            cout: 4,
            h: 5,
            w: 6,
        };
        let x: Vec<f64> = (0..d.batch * d.cin * 30)
            .map(|i| ((i * 37 % 11) as f64) - 5.0)
            .collect();
        let wt: Vec<f64> = (0..d.cout * d.cin * 9)
            .map(|i| ((i * 13 % 7) as f64) * 0.25 - 0.7)
            .collect();
        let b = vec![0.5, -1.0, 2.0, 0.0];
        let (got, want) = (forward(d, &x, &wt, &b), naive(d, &x, &wt, &b));
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let d = ConvDims {
            batch: 1,
            cin: 1,
            cout: 1,
            h: 3,
            w: 3,
        };
        let y = forward(d, &[1.0f64; 9], &[1.0; 9], &[0.0]);
        assert_eq!(y, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)>
        let (cin, h, w) = (2, 4, 3);
        let x: Vec<f64> = (0..cin * h * w).map(|i| (i as f64).sin()).collect();
        let c: Vec<f64> = (0..cin * 9 * h * w)
            .map(|i| (i as f64 * 0.7).cos())
            .collect();
        let mut col = vec![0.0; c.len()];
        im2col(&x, cin, h, w, &mut col);
        let lhs: f64 = col.iter().zip(&c).map(|(a, b)| a * b).sum();
        let mut dx = vec![0.0; x.len()];
        col2im_add(&c, cin, h, w, &mut dx);
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

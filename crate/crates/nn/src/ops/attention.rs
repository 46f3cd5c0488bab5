//! Multi-head scaled dot-product attention core (projections live outside).

use crate::scalar::{gemm, MatMut, MatRef, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct AttnDims {
    pub batch: usize,
    pub tq: usize,
    pub tk: usize,
    pub dim: usize,
    pub heads: usize,
    pub causal: bool,
}

impl AttnDims {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    fn scale<T: Scalar>(&self) -> T {
        T::one() / T::from_f64(self.head_dim() as f64).sqrt()
    }

    fn head_view<'a, T>(&self, data: &'a [T], b: usize, t: usize, h: usize) -> MatRef<'a, T> {
        MatRef {
            data,
            offset: b * t * self.dim + h * self.head_dim(),
            rows: t,
            cols: self.head_dim(),
            row_stride: self.dim,
            col_stride: 1,
        }
    }

    fn head_view_mut<'a, T>(
        &self,
        data: &'a mut [T],
        b: usize,
        t: usize,
        h: usize,
    ) -> MatMut<'a, T> {
        MatMut {
            data,
            offset: b * t * self.dim + h * self.head_dim(),
            rows: t,
            cols: self.head_dim(),
            row_stride: self.dim,
            col_stride: 1,
        }
    }
}

/// Returns the concatenated head outputs `[B, Tq, D]` and the attention
/// probabilities `[B, H, Tq, Tk]`.
pub fn forward<T: Scalar>(d: AttnDims, q: &[T], k: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
    let mut out = vec![T::zero(); d.batch * d.tq * d.dim];
    let mut probs = vec![T::zero(); d.batch * d.heads * d.tq * d.tk];
    let block = d.tq * d.tk;
    for b in 0..d.batch {
        for h in 0..d.heads {
            let p = &mut probs[(b * d.heads + h) * block..][..block];
            gemm(
                d.scale(),
                d.head_view(q, b, d.tq, h),
                d.head_view(k, b, d.tk, h).t(),
                T::zero(),
                MatMut::dense(p, 0, d.tq, d.tk),
            );
            for (i, row) in p.chunks_mut(d.tk).enumerate() {
                softmax_row(row, if d.causal { i + 1 } else { d.tk });
            }
            gemm(
                T::one(),
                MatRef::dense(p, 0, d.tq, d.tk),
                d.head_view(v, b, d.tk, h),
                T::zero(),
                d.head_view_mut(&mut out, b, d.tq, h),
            );
        }
    }
    (out, probs)
}

/// In-place softmax over `row[..visible]`; masked tail set to zero.
fn softmax_row<T: Scalar>(row: &mut [T], visible: usize) {
    let visible = visible.min(row.len());
    let max = row[..visible]
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in &mut row[..visible] {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in &mut row[..visible] {
        *x = *x / sum;
    }
    row[visible..].fill(T::zero());
}

#[allow(clippy::too_many_arguments)]
pub fn backward<T: Scalar>(
    d: AttnDims,
    q: &[T],
    k: &[T],
    v: &[T],
    probs: &[T],
    dout: &[T],
    mut dq: Option<&mut [T]>,
    mut dk: Option<&mut [T]>,
    mut dv: Option<&mut [T]>,
) {
    let block = d.tq * d.tk;
    let scale: T = d.scale();
    let mut ds = vec![T::zero(); block];
    for b in 0..d.batch {
        for h in 0..d.heads {
            let p = &probs[(b * d.heads + h) * block..][..block];
            let g = d.head_view(dout, b, d.tq, h);
            if let Some(dv) = dv.as_deref_mut() {
                gemm(
                    T::one(),
                    MatRef::dense(p, 0, d.tq, d.tk).t(),
                    g,
                    T::one(),
                    d.head_view_mut(dv, b, d.tk, h),
                );
            }
            if dq.is_none() && dk.is_none() {
                continue;
            }
            // dP = dO · Vᵀ, then softmax Jacobian row by row.
            gemm(
                T::one(),
                g,
                d.head_view(v, b, d.tk, h).t(),
                T::zero(),
                MatMut::dense(&mut ds, 0, d.tq, d.tk),
            );
            for (prow, drow) in p.chunks(d.tk).zip(ds.chunks_mut(d.tk)) {
                let dot = prow
                    .iter()
                    .zip(drow.iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<T>();
                for (x, &pp) in drow.iter_mut().zip(prow) {
                    *x = pp * (*x - dot);
                }
            }
            if let Some(dq) = dq.as_deref_mut() {
                gemm(
                    scale,
                    MatRef::dense(&ds, 0, d.tq, d.tk),
                    d.head_view(k, b, d.tk, h),
                    T::one(),
                    d.head_view_mut(dq, b, d.tq, h),
                );
            }
            if let Some(dk) = dk.as_deref_mut() {
                gemm(
                    scale,
                    MatRef::dense(&ds, 0, d.tq, d.tk).t(),
                    d.head_view(q, b, d.tq, h),
                    T::one(),
                    d.head_view_mut(dk, b, d.tk, h),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic_and_causal() {
        let d = AttnDims {
            batch: 2,
            tq: 5,
            tk: 5,
            dim: 8,
            heads: 2,
            causal: true,
        };
        let q: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let k: Vec<f64> = (0..80).map(|i| (i as f64 * 0.11).cos()).collect();
        let (_, p) = forward(d, &q, &k, &q);
        for (r, row) in p.chunks(5).enumerate() {
            let i = r % 5;
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row[i + 1..].iter().all(|&x| x == 0.0));
        }
        // first query position can only see itself
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn single_position_copies_value() {
        let d = AttnDims {
            batch: 1,
            tq: 1,
            tk: 1,
            dim: 4,
            heads: 2,
            causal: false,
        };
        let v = [1.0f64, 2.0, 3.0, 4.0];
        let (o, p) = forward(d, &[0.3, 0.1, -0.2, 0.5], &[1.0, 1.0, 1.0, 1.0], &v);
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(o, v.to_vec());
    }
}

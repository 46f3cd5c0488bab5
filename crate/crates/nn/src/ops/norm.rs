//! Layer normalization over the last dimension.

use crate::scalar::Scalar;

pub const EPS: f64 = 1e-5;

pub struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub fn forward<T: Scalar>(
    x: &[T],
    dim: usize,
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, LayerNormCache<T>) {
    let rows = x.len() / dim;
    let n = T::from_f64(dim as f64);
    let eps = T::from_f64(EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let xs = &x[r * dim..(r + 1) * dim];
        let mean = xs.iter().copied().sum::<T>() / n;
        let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..dim {
            let h = (xs[j] - mean) * rs;
            xhat[r * dim + j] = h;
            y[r * dim + j] = h * gamma[j] + beta[j];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

pub fn backward<T: Scalar>(
    dy: &[T],
    dim: usize,
    gamma: &[T],
    cache: &LayerNormCache<T>,
    mut dx: Option<&mut [T]>,
    mut dgamma: Option<&mut [T]>,
    mut dbeta: Option<&mut [T]>,
) {
    let rows = dy.len() / dim;
    let n = T::from_f64(dim as f64);
    let mut dxhat = vec![T::zero(); dim];
    for r in 0..rows {
        let g = &dy[r * dim..(r + 1) * dim];
        let h = &cache.xhat[r * dim..(r + 1) * dim];
        if let Some(dg) = dgamma.as_deref_mut() {
            for j in 0..dim {
                dg[j] += g[j] * h[j];
            }
        }
        if let Some(db) = dbeta.as_deref_mut() {
            for j in 0..dim {
                db[j] += g[j];
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            for j in 0..dim {
                dxhat[j] = g[j] * gamma[j];
            }
            let mean_d = dxhat.iter().copied().sum::<T>() / n;
            let mean_dh = dxhat.iter().zip(h).map(|(&a, &b)| a * b).sum::<T>() / n;
            let rs = cache.rstd[r];
            for j in 0..dim {
                dx[r * dim + j] += rs * (dxhat[j] - mean_d - h[j] * mean_dh);
            }
        }
    }
}

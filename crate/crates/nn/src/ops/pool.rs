//! 2×2 max pooling, stride 2.

use crate::scalar::Scalar;

/// Returns pooled values and, per output cell, the flat input index of the
/// maximum. Ties resolve to the first window position in row-major order.
pub fn forward<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let i0 = base + 2 * y * w + 2 * xx;
                let mut best = i0;
                for i in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

pub fn backward<T: Scalar>(dy: &[T], argmax: &[u32], dx: &mut [T]) {
    for (&g, &i) in dy.iter().zip(argmax) {
        dx[i as usize] += g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_max() {
        let (y, a) = forward(&[1.0f64, 2.0, 3.0, 4.0], 1, 2, 2);
        assert_eq!(y, vec![4.0]);
        assert_eq!(a, vec![3]);
    }

    #[test]
    fn ties_route_to_first_index() {
        let x = [5.0f64; 16];
        let (y, a) = forward(&x, 1, 4, 4);
        assert_eq!(y, vec![5.0; 4]);
        assert_eq!(a, vec![0, 2, 8, 10]);
        let mut dx = vec![0.0; 16];
        backward(&[1.0, 1.0, 1.0, 1.0], &a, &mut dx);
        assert_eq!(dx.iter().sum::<f64>(), 4.0);
        assert_eq!(dx[0], 1.0);
        assert_eq!(dx[1], 0.0);
    }
}

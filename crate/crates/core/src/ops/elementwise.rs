use crate::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Rescales to `[0, 1]` using the global min and max. A flat map becomes all
/// zeros.
pub fn minmax_normalize(input: &Tensor) -> Tensor {
    let (lo, hi) = (input.min(), input.max());
    let range = hi as f64 - lo as f64;
    if !(range > 0.0) || !range.is_finite() {
        return input.map(|_| 0.0);
    }
    input.map(|v| ((v as f64 - lo as f64) / range) as f32)
}

/// Nearest-neighbour resize. Output pixel `i` samples the source pixel that
/// contains its centre, `floor((i + 0.5) * in / out)`.
pub fn resize_nn(input: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (c, h, w) = input.dims();
    if (h, w) == (out_h, out_w) {
        return input.clone();
    }
    let src_y = |i: usize| ((2 * i + 1) * h / (2 * out_h)).min(h - 1);
    let src_x = |j: usize| ((2 * j + 1) * w / (2 * out_w)).min(w - 1);
    Tensor::from_fn(c, out_h, out_w, |ch, i, j| input.get(ch, src_y(i), src_x(j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_examples() {
        let t = Tensor::from_vec(1, 1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::filled(2, 3, 3, -0.5);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Tensor::from_fn(3, 6, 6, |_, _, _| rng.random_range(-2.0..2.0));
        let out = relu(&t);
        assert!(out.min() >= 0.0);
        for (o, i) in out.data().iter().zip(t.data()) {
            if *i > 0.0 {
                assert_eq!(o, i);
            } else {
                assert_eq!(*o, 0.0);
            }
        }
    }

    #[test]
    fn minmax_reference_point() {
        let t = Tensor::from_vec(1, 1, 3, vec![255590.0, 412454.0, 415261.0]).unwrap();
        let n = minmax_normalize(&t);
        assert!((n.data()[1] - 0.982).abs() < 5e-4);
    }

    #[test]
    fn minmax_flat_map_is_zero() {
        let n = minmax_normalize(&Tensor::filled(1, 4, 4, 7.0));
        assert!(n.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn minmax_spans_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = Tensor::from_fn(1, 9, 9, |_, _, _| rng.random_range(-50.0..80.0));
        let n = minmax_normalize(&t);
        assert_eq!(n.min(), 0.0);
        assert_eq!(n.max(), 1.0);
        let again = minmax_normalize(&n);
        for (a, b) in again.data().iter().zip(n.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn resize_identity_and_constant() {
        let t = Tensor::from_fn(2, 3, 5, |c, y, x| (c * 31 + y * 7 + x) as f32);
        assert_eq!(resize_nn(&t, 3, 5), t);
        let k = Tensor::filled(1, 7, 3, 2.0);
        assert!(resize_nn(&k, 2, 11).data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn resize_4x4_to_2x2_picks_centre_pixels() {
        let t = Tensor::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f32);
        // Output pixel centres map to source coordinates 1 and 3.
        assert_eq!(resize_nn(&t, 2, 2).data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn resize_matches_centre_mapping_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (h, w) = (rng.random_range(1..20), rng.random_range(1..20));
            let (oh, ow) = (rng.random_range(1..20), rng.random_range(1..20));
            let t = Tensor::from_fn(1, h, w, |_, _, _| rng.random::<f32>());
            let out = resize_nn(&t, oh, ow);
            for i in 0..oh {
                for j in 0..ow {
                    let sy = (((i as f64 + 0.5) * h as f64 / oh as f64).floor() as usize).min(h - 1);
                    let sx = (((j as f64 + 0.5) * w as f64 / ow as f64).floor() as usize).min(w - 1);
                    assert_eq!(out.get(0, i, j), t.get(0, sy, sx));
                }
            }
        }
    }
}

use chainhoi_nn::layers::sinusoidal;
use chainhoi_nn::{AdamW, GraphConv, Linear, Mask, Module, MultiHeadAttention, Tensor};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random(rng: &mut StdRng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).unwrap()
}

#[test]
fn masked_keys_do_not_influence_attention() {
    let mut rng = StdRng::seed_from_u64(1);
    let att = MultiHeadAttention::new(8, 2, &mut rng).unwrap();
    let q = random(&mut rng, &[2, 3, 8]);
    let m = random(&mut rng, &[2, 5, 8]);
    let allow = vec![
        true, false, true, false, false, //
        false, true, true, true, false, //
        true, true, true, true, false,
    ];
    let mask = Mask::new(allow.clone(), &[3, 5]).unwrap();
    let base = att.forward(&q, &m, Some(&mask)).unwrap();
    // key 4 is masked for every query; rewrite it entirely
    let mut data = m.to_vec();
    for b in 0..2 {
        for v in &mut data[(b * 5 + 4) * 8..(b * 5 + 5) * 8] {
            *v = rng.gen_range(-50.0..50.0);
        }
    }
    let moved = att.forward(&q, &Tensor::from_vec(data, &[2, 5, 8]).unwrap(), Some(&mask)).unwrap();
    assert_eq!(base.data(), moved.data());
    // per query: masked keys get exactly zero weight and zero gradient
    let (_, w) = att.forward_with_weights(&q, &m, Some(&mask)).unwrap();
    for (k, &v) in w.data().iter().enumerate() {
        let (qi, ki) = ((k / 5) % 3, k % 5);
        assert_eq!(v == 0.0, !allow[qi * 5 + ki]);
    }
    let leaf = m.requires_grad_leaf();
    let out = att.forward(&q, &leaf, Some(&mask)).unwrap();
    let seed: Vec<f64> = (0..48).map(|i| if (i / 8) % 3 == 0 { 1.0 } else { 0.0 }).collect();
    let g = out.backward_with(seed).unwrap().get_or_zeros(&leaf);
    for b in 0..2 {
        for key in [1, 3, 4] {
            assert!(g[(b * 5 + key) * 8..(b * 5 + key + 1) * 8].iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn fully_masked_row_is_an_error() {
    let x = Tensor::zeros(&[2, 3]);
    let mask = Mask::new(vec![true, false, false, false, false, false], &[2, 3]).unwrap();
    assert!(x.masked_softmax_last(&mask).is_err());
}

#[test]
fn graph_conv_matches_loop_oracle() {
    let mut rng = StdRng::seed_from_u64(2);
    let n = 5;
    let adj: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let gc = GraphConv::new(&adj, n, 3, 4, false, &mut rng).unwrap();
    let x = random(&mut rng, &[2, 6, n, 3]);
    let y = gc.forward(&x).unwrap();
    assert_eq!(y.shape(), &[2, 6, n, 4]);
    let (w, b, xd) = (gc.weight.data(), gc.bias.data(), x.data());
    for f in 0..12 {
        for i in 0..n {
            for o in 0..4 {
                let mut want = b[o];
                for j in 0..n {
                    for c in 0..3 {
                        want += adj[i * n + j] * xd[(f * n + j) * 3 + c] * w[c * 4 + o];
                    }
                }
                let got = y.data()[(f * n + i) * 4 + o];
                assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
            }
        }
    }
}

#[test]
fn temporal_conv_matches_loop_oracle() {
    let mut rng = StdRng::seed_from_u64(3);
    let (l, n, ci, co, d) = (7, 2, 3, 2, 2);
    let x = random(&mut rng, &[l, n, ci]);
    let k = random(&mut rng, &[3, ci, co]);
    let y = x.temporal_conv(&k, d).unwrap();
    for t in 0..l {
        for v in 0..n {
            for o in 0..co {
                let mut want = 0.0;
                for tap in 0..3 {
                    let src = t as isize + (tap as isize - 1) * d as isize;
                    if src < 0 || src >= l as isize {
                        continue;
                    }
                    for c in 0..ci {
                        want += x.data()[(src as usize * n + v) * ci + c] * k.data()[(tap * ci + c) * co + o];
                    }
                }
                assert!((y.data()[(t * n + v) * co + o] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn adamw_first_step_moves_by_lr() {
    // with bias correction the first update is lr * sign(g) (up to eps)
    let mut lin = Linear::from_tensors(
        Tensor::param(vec![0.5, -0.5], &[1, 2]).unwrap(),
        Tensor::param(vec![0.0, 0.0], &[2]).unwrap(),
    )
    .unwrap();
    let x = Tensor::from_vec(vec![2.0], &[1, 1]).unwrap();
    let g = lin.forward(&x).unwrap().sum_all().backward().unwrap();
    let mut opt = AdamW::new(0.1).with_weight_decay(0.0);
    opt.step(&mut lin, &g);
    for (got, want) in lin.weight.data().iter().zip([0.4, -0.6]) {
        assert!((got - want).abs() < 1e-8);
    }
    assert_eq!(opt.steps_taken(), 1);
    assert_eq!(lin.param_count(), 4);
}

#[test]
fn sinusoidal_rows_have_unit_pairs() {
    let s = sinusoidal(&[0.0, 3.0, 17.5], 6);
    for row in s.data().chunks(6) {
        for pair in row.chunks(2) {
            assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(vals in proptest::collection::vec(-30.0f64..30.0, 12)) {
        let y = Tensor::from_vec(vals, &[3, 4]).unwrap().softmax_last().unwrap();
        for row in y.data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn permute_then_inverse_is_identity(vals in proptest::collection::vec(-5.0f64..5.0, 24)) {
        let x = Tensor::from_vec(vals, &[2, 3, 4]).unwrap();
        let y = x.permute(&[1, 2, 0]).unwrap().permute(&[2, 0, 1]).unwrap();
        prop_assert_eq!(x.data(), y.data());
    }

    #[test]
    fn layer_norm_rows_are_standardized(vals in proptest::collection::vec(-10.0f64..10.0, 16)) {
        prop_assume!(vals.chunks(8).all(|r| r.iter().any(|&v| (v - r[0]).abs() > 1e-3)));
        let y = Tensor::from_vec(vals, &[2, 8]).unwrap().layer_norm_last(1e-12).unwrap();
        for row in y.data().chunks(8) {
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn matmul_is_associative(a in proptest::collection::vec(-2.0f64..2.0, 6), b in proptest::collection::vec(-2.0f64..2.0, 6), c in proptest::collection::vec(-2.0f64..2.0, 12)) {
        let (a, b, c) = (
            Tensor::from_vec(a, &[3, 2]).unwrap(),
            Tensor::from_vec(b, &[2, 3]).unwrap(),
            Tensor::from_vec(c, &[3, 4]).unwrap(),
        );
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sum_gradient_is_ones(vals in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
        let n = vals.len();
        let x = Tensor::param(vals, &[n]).unwrap();
        let g = x.sum_all().backward().unwrap();
        let ones = vec![1.0; n];
        prop_assert_eq!(g.get(&x).unwrap(), ones.as_slice());
    }
}

use flowcast_autodiff::{Array, Graph, ParamStore, Var};
use flowcast_nn::attention::{log_count, sample_keys, select_queries, sparsity_measure};
use flowcast_nn::{attention, MultiHeadAttention, Sparsity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_array(rng: &mut ChaCha8Rng, shape: &[usize]) -> Array {
    let n = shape.iter().product();
    Array::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn run(q: &Array, k: &Array, v: &Array, sparsity: Sparsity, causal: bool, seed: u64) -> Array {
    let mut g = Graph::new();
    let (q, k, v) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let out = attention(&mut g, q, k, v, sparsity, causal, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    g.value(out).clone()
}

/// Scaled dot-product attention written out directly, for `[1, L, d]` inputs.
fn dense_oracle(q: &Array, k: &Array, v: &Array, causal: bool) -> Vec<f64> {
    let (lq, lk, d) = (q.shape()[1], k.shape()[1], q.shape()[2]);
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let mut out = vec![0.0; lq * d];
    for i in 0..lq {
        let visible = if causal { i + 1 } else { lk };
        let s: Vec<f64> = (0..visible)
            .map(|j| (0..d).map(|c| qd[i * d + c] * kd[j * d + c]).sum::<f64>() / (d as f64).sqrt())
            .collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for (j, w) in e.iter().enumerate() {
            for c in 0..d {
                out[i * d + c] += w / z * vd[j * d + c];
            }
        }
    }
    out
}

#[test]
fn measure_examples() {
    let same = [0.3, -0.2, 0.3, -0.2, 0.3, -0.2];
    assert!(sparsity_measure(&[1.0, 2.0], &same, 2, &[0, 1, 2]).abs() < 1e-15);
    assert_eq!(sparsity_measure(&[1.0, 2.0], &[0.5, 0.5], 2, &[0]), 0.0);
    let m = sparsity_measure(&[1.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 2, &[0, 1]);
    assert!((m - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
    assert!((m - 0.3536).abs() < 1e-4);
}

#[test]
fn counts_follow_the_log_rule() {
    assert_eq!(log_count(5.0, 96), 23);
    assert_eq!(log_count(5.0, 168), 26);
    assert_eq!(log_count(5.0, 3), 3);
    assert_eq!(log_count(5.0, 1), 1);
    assert_eq!(Sparsity::Sparse { c: 1.0 }.counts(10, 20), Some((3, 3)));
    assert_eq!(Sparsity::Fixed { u: 50, samples: 50 }.counts(10, 20), Some((10, 20)));
    assert_eq!(Sparsity::Fixed { u: 0, samples: 4 }.counts(10, 20), Some((0, 4)));
    assert_eq!(Sparsity::Dense.counts(10, 20), None);
}

#[test]
fn key_samples_are_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        let s = sample_keys(30, 7, &mut rng);
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && s[6] < 30);
    }
    assert_eq!(sample_keys(4, 9, &mut rng), vec![0, 1, 2, 3]);
}

#[test]
fn single_position_returns_its_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (q, k, v) = (rand_array(&mut rng, &[2, 1, 3]), rand_array(&mut rng, &[2, 1, 3]), rand_array(&mut rng, &[2, 1, 3]));
    for s in [Sparsity::Dense, Sparsity::Sparse { c: 5.0 }] {
        assert_eq!(run(&q, &k, &v, s, false, 0).data(), v.data());
    }
}

#[test]
fn no_selected_queries_gives_value_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (q, k, v) = (rand_array(&mut rng, &[1, 4, 2]), rand_array(&mut rng, &[1, 5, 2]), rand_array(&mut rng, &[1, 5, 2]));
    let out = run(&q, &k, &v, Sparsity::Fixed { u: 0, samples: 5 }, false, 0);
    let vd = v.data();
    let mean = [(0..5).map(|j| vd[2 * j]).sum::<f64>() / 5.0, (0..5).map(|j| vd[2 * j + 1]).sum::<f64>() / 5.0];
    for row in out.data().chunks(2) {
        assert!((row[0] - mean[0]).abs() < 1e-14 && (row[1] - mean[1]).abs() < 1e-14);
    }

    let k = rand_array(&mut rng, &[1, 4, 2]);
    let v = rand_array(&mut rng, &[1, 4, 2]);
    let out = run(&q, &k, &v, Sparsity::Fixed { u: 0, samples: 4 }, true, 0);
    let vd = v.data();
    for i in 0..4 {
        for c in 0..2 {
            let m = (0..=i).map(|j| vd[2 * j + c]).sum::<f64>() / (i + 1) as f64;
            assert!((out.data()[2 * i + c] - m).abs() < 1e-14);
        }
    }
}

#[test]
fn attention_rows_are_stochastic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // With V the identity, each output row is that row's attention weights.
    let l = 12;
    let mut eye = vec![0.0; l * l];
    (0..l).for_each(|i| eye[i * l + i] = 1.0);
    let v = Array::new(vec![1, l, l], eye).unwrap();
    for trial in 0..50 {
        let q = rand_array(&mut rng, &[1, l, l]);
        let k = rand_array(&mut rng, &[1, l, l]);
        let causal = trial % 2 == 0;
        for s in [Sparsity::Dense, Sparsity::Sparse { c: 1.0 }, Sparsity::Fixed { u: 4, samples: 5 }] {
            let out = run(&q, &k, &v, s, causal, trial);
            for (i, row) in out.data().chunks(l).enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&w| w >= 0.0));
                if causal {
                    assert!(row[i + 1..].iter().all(|&w| w == 0.0));
                }
            }
        }
    }
}

#[test]
fn selection_ignores_shared_key_offsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (lq, lk, d) = (rng.random_range(2..20), rng.random_range(2..20), rng.random_range(1..6));
        let q: Vec<f64> = (0..lq * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..lk * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let shifted: Vec<f64> = k.iter().enumerate().map(|(i, x)| x + shift[i % d]).collect();
        let u = rng.random_range(1..=lq);
        let a = select_queries(&q, &k, lq, lk, d, u, lk, &mut rng);
        let b = select_queries(&q, &shifted, lq, lk, d, u, lk, &mut rng);
        assert_eq!(a.len(), u);
        // Near-ties may reorder under rounding; compare measures instead of indices when they do.
        if a != b {
            let all: Vec<usize> = (0..lk).collect();
            let m: Vec<f64> = (0..lq).map(|i| sparsity_measure(&q[i * d..(i + 1) * d], &k, d, &all)).collect();
            let last_a = a.iter().map(|&i| m[i]).fold(f64::INFINITY, f64::min);
            let last_b = b.iter().map(|&i| m[i]).fold(f64::INFINITY, f64::min);
            assert!((last_a - last_b).abs() < 1e-12);
        }
    }
}

#[test]
fn ties_prefer_lower_indices() {
    let q = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    let k = [1.0, 0.0, 0.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(select_queries(&q, &k, 4, 2, 2, 2, 2, &mut rng), vec![0, 1]);
}

#[test]
fn shape_errors() {
    let mut g = Graph::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let q = g.constant(Array::zeros(&[1, 3, 2]));
    let k = g.constant(Array::zeros(&[1, 4, 2]));
    let bad = g.constant(Array::zeros(&[1, 4, 3]));
    assert!(attention(&mut g, q, k, bad, Sparsity::Dense, false, &mut rng).is_err());
    assert!(attention(&mut g, q, k, k, Sparsity::Dense, true, &mut rng).is_err());
    let mut store = ParamStore::new();
    assert!(MultiHeadAttention::new(&mut store, "a", 6, 4, &mut rng).is_err());
    assert!(MultiHeadAttention::new(&mut store, "b", 6, 0, &mut rng).is_err());
}

fn mha_run(mha: &MultiHeadAttention, store: &ParamStore, xq: &Array, xkv: &Array, s: Sparsity) -> Array {
    let mut g = Graph::new();
    let (a, b): (Var, Var) = (g.constant(xq.clone()), g.constant(xkv.clone()));
    let y = mha.forward(&mut g, store, a, b, s, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    g.value(y).clone()
}

#[test]
fn one_head_identity_projections_equal_plain_attention() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = 5;
    let mut store = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut store, "a", d, 1, &mut rng).unwrap();
    for w in [mha.wq, mha.wk, mha.wv, mha.wo] {
        let data = store.get_mut(w).data_mut();
        data.fill(0.0);
        (0..d).for_each(|i| data[i * d + i] = 1.0);
    }
    for b in [mha.bq, mha.bk, mha.bv, mha.bo] {
        store.get_mut(b).data_mut().fill(0.0);
    }
    let xq = rand_array(&mut rng, &[2, 6, d]);
    let xkv = rand_array(&mut rng, &[2, 9, d]);
    for s in [Sparsity::Dense, Sparsity::Fixed { u: 3, samples: 9 }] {
        let a = mha_run(&mha, &store, &xq, &xkv, s);
        let b = run(&xq, &xkv, &xkv, s, false, 0);
        assert_eq!(a.shape(), xq.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn heads_are_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (d, heads) = (8, 4);
    let dh = d / heads;
    let mut store = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut store, "a", d, heads, &mut rng).unwrap();
    let perm = [2, 0, 3, 1];
    let mut permuted = store.clone();
    let col = |c: usize| perm[c / dh] * dh + c % dh;
    for (w, b) in [(mha.wq, mha.bq), (mha.wk, mha.bk), (mha.wv, mha.bv)] {
        let (src_w, src_b) = (store.get(w).data().to_vec(), store.get(b).data().to_vec());
        let dw = permuted.get_mut(w).data_mut();
        for r in 0..d {
            for c in 0..d {
                dw[r * d + c] = src_w[r * d + col(c)];
            }
        }
        let dbias = permuted.get_mut(b).data_mut();
        for c in 0..d {
            dbias[c] = src_b[col(c)];
        }
    }
    let src_o = store.get(mha.wo).data().to_vec();
    let dwo = permuted.get_mut(mha.wo).data_mut();
    for r in 0..d {
        for c in 0..d {
            dwo[r * d + c] = src_o[col(r) * d + c];
        }
    }
    let xq = rand_array(&mut rng, &[2, 7, d]);
    let xkv = rand_array(&mut rng, &[2, 10, d]);
    for s in [Sparsity::Dense, Sparsity::Fixed { u: 3, samples: 10 }] {
        let a = mha_run(&mha, &store, &xq, &xkv, s);
        let b = mha_run(&mha, &permuted, &xq, &xkv, s);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn full_selection_equals_dense(lq in 1usize..=32, lk in 1usize..=32, d in 1usize..=32, causal in any::<bool>(), seed in any::<u64>()) {
        let lk = if causal { lq } else { lk };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (q, k, v) = (rand_array(&mut rng, &[1, lq, d]), rand_array(&mut rng, &[1, lk, d]), rand_array(&mut rng, &[1, lk, d]));
        let sparse = run(&q, &k, &v, Sparsity::Fixed { u: lq, samples: lk }, causal, seed);
        let dense = run(&q, &k, &v, Sparsity::Dense, causal, seed);
        let oracle = dense_oracle(&q, &k, &v, causal);
        for ((s, t), o) in sparse.data().iter().zip(dense.data()).zip(&oracle) {
            prop_assert!((s - o).abs() < 1e-6 && (t - o).abs() < 1e-6);
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::Error;

fn rand_tensor(rng: &mut impl Rng, r: usize, c: usize) -> Tensor<f64> {
    Tensor::new(
        r,
        c,
        (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Scalarizes `y` as `sum(y * w)` with a fixed random `w` so every output
/// coordinate contributes a distinct weight.
fn weighted_sum(g: &mut Graph<f64>, y: Var, seed: u64) -> Var {
    let (r, c) = g.shape(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(rand_tensor(&mut rng, r, c));
    let p = g.mul(y, w).unwrap();
    g.sum(p)
}

fn check_unary(build: impl Fn(&mut Graph<f64>, Var) -> Var, shape: (usize, usize)) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, shape.0, shape.1));
    let rep = grad_check(
        |g, s| {
            let xv = g.param(s, x);
            let y = build(g, xv);
            Ok(weighted_sum(g, y, 99))
        },
        &mut store,
        1e-6,
    )
    .unwrap();
    assert!(rep.max_rel_err < 1e-4, "{rep:?}");
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let mut g = Graph::<f64>::new(false);
    let x = g.constant(Tensor::zeros(1, 3));
    let y = g.softmax_rows(x);
    for &p in &g.value(y).data {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn relu_backward_gates() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::row_vector(vec![-1.0, 2.0]));
    let mut g = Graph::<f64>::new(false);
    let xv = g.param(&store, x);
    let y = g.relu(xv);
    let l = g.sum(y);
    g.backward(l, &mut store).unwrap();
    assert_eq!(store.grad(x).data, vec![0.0, 1.0]);
}

#[test]
fn matmul_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let a = store.add("a", rand_tensor(&mut rng, 2, 3));
    let b = store.add("b", rand_tensor(&mut rng, 3, 4));
    let rep = grad_check(
        |g, s| {
            let (av, bv) = (g.param(s, a), g.param(s, b));
            let c = g.matmul(av, bv)?;
            Ok(weighted_sum(g, c, 5))
        },
        &mut store,
        1e-6,
    )
    .unwrap();
    assert_eq!(rep.checked, 18);
    assert!(rep.max_rel_err < 1e-4, "{rep:?}");
}

#[test]
fn square_at_three() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::full(1, 1, 3.0));
    let mut g = Graph::new(false);
    let xv = g.param(&store, x);
    let y = g.mul(xv, xv).unwrap();
    g.backward(y, &mut store).unwrap();
    assert!((store.grad(x).data[0] - 6.0).abs() < 1e-12);
    let rep = grad_check(
        |g, s| {
            let xv = g.param(s, x);
            g.mul(xv, xv)
        },
        &mut store,
        1e-6,
    )
    .unwrap();
    let (_, _, a, fd) = rep.worst.unwrap();
    assert_eq!(a, 6.0);
    assert!((fd - 6.0).abs() < 1e-6);
}

#[test]
fn constant_function_has_zero_gradient() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::full(2, 2, 1.5));
    let rep = grad_check(
        |g, s| {
            let _ = g.param(s, x);
            Ok(g.constant(Tensor::full(1, 1, 4.0)))
        },
        &mut store,
        1e-6,
    )
    .unwrap();
    assert_eq!(rep.max_rel_err, 0.0);
    let (_, _, a, fd) = rep.worst.unwrap();
    assert_eq!((a, fd), (0.0, 0.0));
}

#[test]
fn elementwise_ops_match_finite_differences() {
    check_unary(|g, x| g.sigmoid(x), (3, 4));
    check_unary(|g, x| g.tanh(x), (3, 4));
    check_unary(|g, x| g.exp(x), (3, 4));
    check_unary(|g, x| g.cos(x), (3, 4));
    check_unary(|g, x| g.sin(x), (3, 4));
    check_unary(|g, x| g.relu(x), (3, 4));
    check_unary(|g, x| g.softmax_rows(x), (3, 5));
    check_unary(|g, x| g.affine(x, -2.5, 1.0), (2, 2));
    check_unary(|g, x| g.mul(x, x).unwrap(), (2, 3));
    check_unary(
        |g, x| g.sub(x, x).map(|d| g.add(d, x).unwrap()).unwrap(),
        (2, 3),
    );
    check_unary(
        |g, x| {
            let m = g.mean(x);
            g.affine(m, 3.0, 0.0)
        },
        (4, 3),
    );
}

#[test]
fn structural_ops_match_finite_differences() {
    check_unary(
        |g, x| {
            let y = g.tanh(x);
            g.concat_cols(&[x, y, x]).unwrap()
        },
        (3, 2),
    );
    check_unary(
        |g, x| {
            let y = g.sin(x);
            g.interleave(x, y).unwrap()
        },
        (2, 3),
    );
    check_unary(|g, x| g.gather_rows(x, &[2, 0, 2, 1]).unwrap(), (3, 4));
    check_unary(
        |g, x| {
            let rows = g.gather_rows(x, &[0, 1]).unwrap();
            let rows = g.tanh(rows);
            g.scatter_rows(x, &[3, 0], rows).unwrap()
        },
        (4, 3),
    );
    check_unary(
        |g, x| {
            let b = g.gather_rows(x, &[0]).unwrap();
            g.add_row(x, b).unwrap()
        },
        (3, 4),
    );
}

#[test]
fn segment_ops_match_finite_differences() {
    let seg = Segments::from_lengths([2, 0, 3, 1]);
    check_unary(|g, x| g.segment_softmax(x, &seg).unwrap(), (6, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let v = store.add("v", rand_tensor(&mut rng, 6, 3));
    let w = store.add("w", rand_tensor(&mut rng, 6, 2));
    let rep = grad_check(
        |g, s| {
            let (vv, wv) = (g.param(s, v), g.param(s, w));
            let a = g.segment_softmax(wv, &seg)?;
            let o = g.segment_weighted_sum(vv, a, &seg)?;
            Ok(weighted_sum(g, o, 8))
        },
        &mut store,
        1e-6,
    )
    .unwrap();
    assert!(rep.max_rel_err < 1e-4, "{rep:?}");
}

#[test]
fn empty_segment_gives_zero_row() {
    let seg = Segments::from_lengths([1, 0]);
    let mut g = Graph::<f64>::new(false);
    let v = g.constant(Tensor::full(1, 2, 3.0));
    let w = g.constant(Tensor::full(1, 1, 0.0));
    let a = g.segment_softmax(w, &seg).unwrap();
    assert_eq!(g.value(a).data, vec![1.0]);
    let o = g.segment_weighted_sum(v, a, &seg).unwrap();
    assert_eq!(g.value(o).data, vec![3.0, 3.0, 0.0, 0.0]);
}

#[test]
fn losses_match_finite_differences() {
    let targets = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    check_unary(move |g, x| g.bce_with_logits(x, &targets).unwrap(), (3, 2));
    check_unary(
        |g, x| g.softmax_cross_entropy(x, &[2, 0, 1]).unwrap(),
        (3, 4),
    );
}

#[test]
fn bce_is_stable_and_correct() {
    let mut g = Graph::<f64>::new(false);
    let x = g.constant(Tensor::row_vector(vec![0.0, 800.0, -800.0]));
    let l = g.bce_with_logits(x, &[1.0, 1.0, 0.0]).unwrap();
    assert!((g.scalar(l) - std::f64::consts::LN_2 / 3.0).abs() < 1e-12);
}

#[test]
fn shape_errors_name_both_shapes() {
    let mut g = Graph::<f64>::new(false);
    let a = g.constant(Tensor::zeros(2, 3));
    let b = g.constant(Tensor::zeros(2, 4));
    match g.matmul(a, b) {
        Err(Error::Shape { op, lhs, rhs }) => {
            assert_eq!((op, lhs, rhs), ("matmul", (2, 3), (2, 4)));
        }
        other => panic!("{other:?}"),
    }
    let msg = g.add(a, b).unwrap_err().to_string();
    assert!(msg.contains("(2, 3)") && msg.contains("(2, 4)"), "{msg}");
}

#[test]
fn dropout_inverted_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut g = Graph::<f64>::new(true);
    let x = g.constant(Tensor::full(1, 100_000, 1.0));
    let y = g.dropout(x, 0.3, &mut rng);
    let mean = g.value(y).data.iter().sum::<f64>() / 100_000.0;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
    let mut g = Graph::<f64>::new(false);
    let x = g.constant(Tensor::full(1, 4, 1.0));
    assert_eq!(g.dropout(x, 0.3, &mut rng), x);
}

#[test]
fn param_recorded_once_per_tape() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::full(1, 1, 2.0));
    let mut g = Graph::new(false);
    let a = g.param(&store, x);
    let b = g.param(&store, x);
    assert_eq!(a, b);
    let y = g.add(a, b).unwrap();
    g.backward(y, &mut store).unwrap();
    assert_eq!(store.grad(x).data, vec![2.0]);
}

#[test]
fn adam_minimizes_quadratic() {
    let mut store = ParamStore::<f64>::new();
    let x = store.add("x", Tensor::row_vector(vec![3.0, -2.0]));
    let mut opt = Adam::new(0.05);
    for _ in 0..2_000 {
        let mut g = Graph::new(false);
        let xv = g.param(&store, x);
        let sq = g.mul(xv, xv).unwrap();
        let l = g.sum(sq);
        g.backward(l, &mut store).unwrap();
        opt.step(&mut store);
    }
    assert!(
        store.value(x).data.iter().all(|v| v.abs() < 1e-3),
        "{:?}",
        store.value(x)
    );
}

#[test]
fn blob_round_trip_and_cross_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::<f32>::new();
    store.add_glorot("w", 3, 4, &mut rng);
    store.add_zeros("b", 1, 4);
    let mut buf = Vec::new();
    store.write_blob(&mut buf).unwrap();
    let back = ParamStore::<f32>::read_blob(&mut buf.as_slice()).unwrap();
    assert_eq!(back, store);
    let wide = ParamStore::<f64>::read_blob(&mut buf.as_slice()).unwrap();
    assert_eq!(
        wide.value(wide.id("w").unwrap()).data[0] as f32,
        store.value(store.id("w").unwrap()).data[0]
    );
}

#[test]
fn glorot_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::<f64>::new();
    let w = store.add_glorot("w", 10, 20, &mut rng);
    let lim = (6.0f64 / 30.0).sqrt();
    assert!(store.value(w).data.iter().all(|v| v.abs() <= lim));
}

#[test]
fn forward_and_backward_are_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::<f32>::new();
        let w = store.add_glorot("w", 8, 8, &mut rng);
        let mut g = Graph::new(true);
        let x = g.constant(Tensor::full(5, 8, 0.3));
        let wv = g.param(&store, w);
        let h = g.matmul(x, wv).unwrap();
        let h = g.dropout(h, 0.2, &mut rng);
        let h = g.tanh(h);
        let l = g.mean(h);
        g.backward(l, &mut store).unwrap();
        (
            g.scalar(l).to_bits(),
            store
                .grad(w)
                .data
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
        )
    };
    assert_eq!(run(), run());
}

proptest::proptest! {
    #[test]
    fn softmax_rows_are_distributions(v in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let mut g = Graph::<f64>::new(false);
        let x = g.constant(Tensor::new(3, 4, v).unwrap());
        let y = g.softmax_rows(x);
        let t = g.value(y);
        for r in 0..3 {
            let s: f64 = t.row(r).iter().sum();
            proptest::prop_assert!((s - 1.0).abs() < 1e-6);
            proptest::prop_assert!(t.row(r).iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

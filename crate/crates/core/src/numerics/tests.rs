use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::check_gradients;
use super::*;

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::zeros(1, 3));
    let y = t.softmax(x).unwrap();
    for v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut t = Tape::new();
    let x = t.constant(rand_matrix(&mut rng, 7, 11));
    let x = t.scale(x, 30.0).unwrap();
    let y = t.softmax(x).unwrap();
    for row in t.value(y).data().chunks(11) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn identity_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = rand_matrix(&mut rng, 3, 4);
    let mut t = Tape::new();
    let i = t.constant(Tensor::identity(3));
    let av = t.constant(a.clone());
    let out = t.matmul(i, av).unwrap();
    assert_eq!(t.value(out), &a);
}

#[test]
fn square_of_mean() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::row(vec![1.0, 3.0]));
    let m = t.mean(x).unwrap();
    let s = t.square(m).unwrap();
    assert_eq!(t.value(s).item(), 4.0);
}

#[test]
fn shape_errors_name_the_op() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::zeros(2, 3));
    let b = t.constant(Tensor::zeros(2, 3));
    let e = t.matmul(a, b).unwrap_err();
    assert!(e.to_string().starts_with("matmul"), "{e}");
    assert!(e.to_string().contains("[2, 3] x [2, 3]"));
    let c = t.constant(Tensor::zeros(3, 2));
    assert!(t.add(a, c).unwrap_err().to_string().starts_with("add"));
}

#[test]
fn non_finite_is_an_error() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::scalar(1e200));
    let e = t.square(a).unwrap_err();
    assert!(matches!(e, NumericsError::NonFinite { op: "square" }));
}

#[test]
fn sum_of_squares_gradient() {
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::row(vec![1.0, 2.0])).unwrap();
    let mut t = Tape::new();
    let xv = t.param(&store, x);
    let sq = t.square(xv).unwrap();
    let l = t.sum(sq).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn constant_loss_has_no_gradients() {
    let mut t = Tape::new();
    let c = t.constant(Tensor::scalar(3.0));
    assert!(t.backward(c).unwrap().is_empty());
}

#[test]
fn backward_rejects_non_scalar() {
    let mut t = Tape::new();
    let c = t.constant(Tensor::zeros(2, 2));
    assert!(matches!(t.backward(c), Err(NumericsError::NonScalarLoss(_))));
}

fn store_with(rng: &mut ChaCha8Rng, shapes: &[(&str, usize, usize)]) -> (ParamStore, Vec<ParamId>) {
    let mut s = ParamStore::new();
    let ids = shapes.iter().map(|&(n, r, c)| s.add(n, rand_matrix(rng, r, c)).unwrap()).collect();
    (s, ids)
}

#[test]
fn softmax_matmul_chain_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut store, ids) = store_with(&mut rng, &[("a", 3, 4), ("b", 4, 5), ("w", 5, 2)]);
    let target = rand_matrix(&mut rng, 3, 2);
    let report = check_gradients(&mut store, None, 1e-5, 1e-8, |s| {
        let mut t = Tape::new();
        let a = t.param(s, ids[0]);
        let b = t.param(s, ids[1]);
        let w = t.param(s, ids[2]);
        let ab = t.matmul(a, b)?;
        let p = t.softmax(ab)?;
        let o = t.matmul(p, w)?;
        let tg = t.constant(target.clone());
        let d = t.sub(o, tg)?;
        let sq = t.square(d)?;
        let l = t.sum(sq)?;
        Ok((t, l))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

/// Every op composed once into a scalar, checked against central differences.
#[test]
fn all_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut store, ids) = store_with(
        &mut rng,
        &[
            ("x", 4, 3),
            ("y", 4, 3),
            ("bias", 1, 3),
            ("gamma", 1, 3),
            ("beta", 1, 3),
            ("alpha_t", 1, 2),
            ("beta_t", 1, 2),
            ("mu", 1, 3),
            ("log_sigma", 1, 3),
            ("z", 2, 3),
        ],
    );
    // Keep the kernel bank in a well-conditioned range.
    store.tensor_mut(ids[5]).data_mut().iter_mut().for_each(|v| *v = 1.0 + 0.2 * *v);
    store.tensor_mut(ids[7]).data_mut().copy_from_slice(&[1.0, 2.0, 3.0]);
    let dist = [0.5, 1.7, 2.2, 3.1];
    let types = [0, 1, 1, 0];
    let report = check_gradients(&mut store, None, 1e-5, 1e-7, |s| {
        let mut t = Tape::new();
        let v: Vec<Var> = ids.iter().map(|&id| t.param(s, id)).collect();
        let a = t.mul(v[0], v[1])?;
        let a = t.add_row(a, v[2])?;
        let a = t.layer_norm(a, v[3], v[4])?;
        let g = t.gaussian(&dist, &types, v[5], v[6], v[7], v[8])?;
        let g = t.scale(g, 3.0)?;
        let a = t.add(a, g)?;
        let r = t.relu(a)?;
        let sp = t.softplus(a)?;
        let c = t.concat_cols(&[r, sp])?;
        let c = t.slice_cols(c, 1, 4)?;
        let tr = t.transpose(c)?;
        let rs = t.reshape(tr, 2, 8)?;
        let top = t.slice_rows(rs, 1, 1)?;
        let top = t.reshape(top, 2, 4)?;
        let pa = t.pair_add(v[9], v[0])?;
        let pm = t.pair_mul(v[9], v[1])?;
        let p = t.sub(pa, pm)?;
        let p = t.gather_rows(p, &[0, 3, 3, 7, 2])?;
        let p = t.concat_rows(&[p, v[9]])?;
        let sm = t.softmax(p)?;
        let smp = t.mul(sm, p)?;
        let s1 = t.sum(smp)?;
        let rt = t.transpose(r)?;
        let pt = t.matmul(p, rt)?;
        let s2 = t.mean(pt)?;
        let s3 = t.sum(top)?;
        let l = t.add(s1, s2)?;
        let l = t.add(l, s3)?;
        let l = t.square(l)?;
        Ok((t, l))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn gaussian_matches_closed_form() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::row(vec![1.0])).unwrap();
    let b = store.add("b", Tensor::row(vec![0.0])).unwrap();
    let mu = store.add("mu", Tensor::row(vec![2.0, 5.0])).unwrap();
    let ls = store.add("ls", Tensor::row(vec![0.5f64.ln(), 1.5f64.ln()])).unwrap();
    let mut t = Tape::new();
    let v: Vec<Var> = [a, b, mu, ls].iter().map(|&id| t.param(&store, id)).collect();
    let g = t.gaussian(&[2.0, 6.5], &[0, 0], v[0], v[1], v[2], v[3]).unwrap();
    let out = t.value(g);
    let root = (2.0 * std::f64::consts::PI).sqrt();
    assert!((out.get(0, 0) - 1.0 / (0.5 * root)).abs() < 1e-14);
    assert!((out.get(1, 1) - (-0.5f64).exp() / (1.5 * root)).abs() < 1e-14);
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![0.3, -2.0])).unwrap();
    let before = store.clone();
    let mut grads = Gradients::new();
    grads.accumulate(w, &[1, 2], &[0.0, 0.0]);
    let mut opt = Adam::new(0.1);
    opt.step(&mut store, &grads);
    assert_eq!(store, before);
}

#[test]
fn adam_first_step_is_sign_scaled() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![1.0, 1.0])).unwrap();
    let mut grads = Gradients::new();
    grads.accumulate(w, &[1, 2], &[0.5, -3.0]);
    let mut opt = Adam::new(0.01);
    opt.step(&mut store, &grads);
    let d = store.tensor(w).data();
    assert!((d[0] - (1.0 - 0.01)).abs() < 1e-9);
    assert!((d[1] - (1.0 + 0.01)).abs() < 1e-9);
}

#[test]
fn adam_two_steps_on_quadratic() {
    // f(w) = w², w0 = 1, lr = 0.1. Hand simulation:
    // t=1: g=2, m=0.2, v=0.004, mhat=2, vhat=4 -> w = 1 - 0.1 = 0.9
    // t=2: g=1.8, m=0.36, v=0.0072360, mhat=1.894737, vhat=3.619810 -> w ≈ 0.800412
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(1.0)).unwrap();
    let mut opt = Adam::new(0.1);
    let mut values = vec![1.0];
    for _ in 0..2 {
        let mut t = Tape::new();
        let x = t.param(&store, w);
        let l = t.square(x).unwrap();
        let g = t.backward(l).unwrap();
        opt.step(&mut store, &g);
        values.push(store.tensor(w).item());
    }
    assert!((values[1] - 0.9).abs() < 1e-8);
    assert!((values[2] - 0.800412).abs() < 1e-6, "{values:?}");
    assert!(values[2] * values[2] < 1.0);
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (store, _) = store_with(&mut rng, &[("a", 2, 3), ("b", 1, 3)]);
    let ck = Checkpoint::from_store(&store, serde_json::json!({"d_model": 3}));
    let text = ck.to_json();
    let back = Checkpoint::from_json(&text).unwrap();
    let (mut other, _) = store_with(&mut rng, &[("a", 2, 3), ("b", 1, 3)]);
    back.load_into(&mut other).unwrap();
    assert_eq!(other, store);

    let (mut wrong, _) = store_with(&mut rng, &[("a", 3, 3), ("b", 1, 3)]);
    let e = back.load_into(&mut wrong).unwrap_err().to_string();
    assert!(e.contains("shape mismatch") && e.contains("[2, 3]"), "{e}");
    assert!(Checkpoint::from_json(&text.replace("\"version\":1", "\"version\":9")).is_err());
}

#[test]
fn duplicate_names_rejected() {
    let mut s = ParamStore::new();
    s.add("w", Tensor::scalar(0.0)).unwrap();
    assert!(matches!(s.add("w", Tensor::scalar(1.0)), Err(NumericsError::DuplicateParam(_))));
}

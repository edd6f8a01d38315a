use std::sync::Arc;

use proptest::prelude::*;

use super::*;

fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
    Tensor::new(rows, cols, data.to_vec()).unwrap()
}

/// Central-difference gradient of `f` at `x`.
fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn assert_close(a: &[f64], b: &[f64], rel: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        let scale = x.abs().max(y.abs()).max(1.0);
        assert!((x - y).abs() <= rel * scale, "entry {i}: {x} vs {y}");
    }
}

#[test]
fn square_derivative() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(3.0));
    let y = tape.mul(x, x).unwrap();
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[6.0]);
}

#[test]
fn product_derivative() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(2.0));
    let y = tape.param(Tensor::scalar(5.0));
    let z = tape.mul(x, y).unwrap();
    tape.backward(z).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[5.0]);
    assert_eq!(tape.grad(y).unwrap(), &[2.0]);
}

#[test]
fn sigmoid_at_zero() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(0.0));
    let y = tape.sigmoid(x);
    assert_eq!(tape.value(y).item().unwrap(), 0.5);
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.25]);
}

#[test]
fn sigmoid_saturates_without_nan() {
    let mut tape = Tape::new();
    let x = tape.param(t(1, 3, &[-800.0, 800.0, 1e-3]));
    let y = tape.sigmoid(x);
    let v = tape.value(y).data();
    assert_eq!(v[0], 0.0);
    assert_eq!(v[1], 1.0);
    let s = tape.sum_all(y);
    tape.backward(s).unwrap();
    assert!(tape.grad(x).unwrap().iter().all(|g| g.is_finite()));
}

#[test]
fn matmul_matches_finite_differences() {
    let a0: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
    let b0: Vec<f64> = (0..8).map(|i| (i as f64 * 0.71).cos()).collect();
    let w: Vec<f64> = (0..6).map(|i| 1.0 + i as f64 * 0.25).collect();
    let loss = |a: &[f64], b: &[f64]| {
        let c = t(3, 4, a).matmul(&t(4, 2, b)).unwrap();
        c.data().iter().zip(&w).map(|(x, y)| x * y).sum::<f64>()
    };

    let mut tape = Tape::new();
    let a = tape.param(t(3, 4, &a0));
    let b = tape.param(t(4, 2, &b0));
    let weights = tape.constant(t(3, 2, &w));
    let c = tape.matmul(a, b).unwrap();
    let cw = tape.mul(c, weights).unwrap();
    let l = tape.sum_all(cw);
    tape.backward(l).unwrap();

    let ga = numeric_grad(|x| loss(x, &b0), &a0, 1e-6);
    let gb = numeric_grad(|x| loss(&a0, x), &b0, 1e-6);
    assert_close(tape.grad(a).unwrap(), &ga, 1e-4);
    assert_close(tape.grad(b).unwrap(), &gb, 1e-4);
    assert!(tape.grad(weights).is_none());
}

#[test]
fn singleton_sum_pool_is_identity() {
    let mut tape = Tape::new();
    let x = tape.param(t(1, 3, &[1.0, -2.0, 4.0]));
    let p = tape.sum_pool(x, Arc::from(vec![0]), 1).unwrap();
    assert_eq!(tape.value(p).data(), &[1.0, -2.0, 4.0]);
}

#[test]
fn empty_groups_pool_to_zero() {
    let mut tape = Tape::new();
    let x = tape.param(t(2, 1, &[-1.0, -3.0]));
    let s = tape.sum_pool(x, Arc::from(vec![2, 2]), 3).unwrap();
    let m = tape.max_pool(x, Arc::from(vec![2, 2]), 3).unwrap();
    assert_eq!(tape.value(s).data(), &[0.0, 0.0, -4.0]);
    assert_eq!(tape.value(m).data(), &[0.0, 0.0, -1.0]);
}

#[test]
fn max_pool_gradient_goes_to_first_maximum() {
    let mut tape = Tape::new();
    let x = tape.param(t(3, 2, &[1.0, 5.0, 2.0, 5.0, 2.0, 0.0]));
    let m = tape.max_pool(x, Arc::from(vec![0, 0, 0]), 1).unwrap();
    assert_eq!(tape.value(m).data(), &[2.0, 5.0]);
    let s = tape.sum_all(m);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn pooling_ignores_member_order() {
    let rows = [[1.0, 2.0], [-3.0, 0.5], [4.0, -1.0], [0.0, 7.0]];
    let group = [1, 0, 1, 1];
    let order = [3, 1, 0, 2];
    let run = |perm: &[usize]| {
        let data: Vec<f64> = perm.iter().flat_map(|&i| rows[i]).collect();
        let labels: Vec<usize> = perm.iter().map(|&i| group[i]).collect();
        let mut tape = Tape::new();
        let x = tape.constant(t(4, 2, &data));
        let s = tape.sum_pool(x, Arc::from(labels.clone()), 2).unwrap();
        let m = tape.max_pool(x, Arc::from(labels), 2).unwrap();
        (tape.value(s).clone(), tape.value(m).clone())
    };
    assert_eq!(run(&[0, 1, 2, 3]), run(&order));
}

#[test]
fn gather_accumulates_repeated_rows() {
    let mut tape = Tape::new();
    let x = tape.param(t(2, 1, &[1.0, 2.0]));
    let g = tape.gather_rows(x, Arc::from(vec![1, 1, 0])).unwrap();
    assert_eq!(tape.value(g).data(), &[2.0, 2.0, 1.0]);
    let s = tape.sum_all(g);
    tape.backward(s).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0, 2.0]);
}

#[test]
fn shape_errors() {
    let mut tape = Tape::new();
    let a = tape.param(Tensor::<f64>::zeros(2, 3));
    let b = tape.param(Tensor::zeros(2, 3));
    assert!(matches!(tape.matmul(a, b), Err(AutodiffError::ShapeMismatch(_))));
    let c = tape.param(Tensor::zeros(1, 2));
    assert!(tape.add_row(a, c).is_err());
    assert!(matches!(
        tape.gather_rows(a, Arc::from(vec![2])),
        Err(AutodiffError::IndexOutOfRange { index: 2, len: 2 })
    ));
    assert!(matches!(tape.backward(a), Err(AutodiffError::NonScalarLoss(2, 3))));
    assert!(Tensor::new(2, 2, vec![0.0; 3]).is_err());
}

#[test]
fn repeated_backward_is_reproducible() {
    let build = || {
        let mut tape = Tape::new();
        let x = tape.param(t(2, 2, &[0.1, -0.4, 0.9, 0.3]));
        let y = tape.sigmoid(x);
        let z = tape.matmul(y, x).unwrap();
        let l = tape.sum_all(z);
        tape.backward(l).unwrap();
        tape.grad(x).unwrap().to_vec()
    };
    assert_eq!(build(), build());
}

/// A composite graph touching every op: the analytic gradient must agree
/// with central differences.
fn composite(tape: &mut Tape<f64>, x: Var, w: Var, bias: Var) -> Var {
    let h = tape.matmul(x, w).unwrap();
    let h = tape.add_row(h, bias).unwrap();
    let r = tape.relu(h);
    let s = tape.sigmoid(h);
    let both = tape.concat_cols(r, s).unwrap();
    let stacked = tape.concat_rows(both, both).unwrap();
    let gathered = tape.gather_rows(stacked, Arc::from(vec![0, 3, 1, 2, 2])).unwrap();
    let pooled = tape.sum_pool(gathered, Arc::from(vec![0, 1, 0, 1, 1]), 2).unwrap();
    let maxed = tape.max_pool(gathered, Arc::from(vec![1, 1, 0, 0, 1]), 2).unwrap();
    let prod = tape.mul(pooled, maxed).unwrap();
    let sq = tape.mul(prod, prod).unwrap();
    let shifted = tape.add_scalar(sq, 0.5);
    let lg = tape.log2_1p(shifted);
    let scaled = tape.scale(lg, -1.5);
    let diff = tape.sub(scaled, prod).unwrap();
    let sum = tape.add(diff, pooled).unwrap();
    tape.sum_all(sum)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composite_gradient_matches_finite_differences(
        x0 in proptest::collection::vec(-2.0f64..2.0, 6),
        w0 in proptest::collection::vec(-2.0f64..2.0, 6),
        b0 in proptest::collection::vec(-2.0f64..2.0, 2),
    ) {
        let eval = |x: &[f64], w: &[f64], b: &[f64]| {
            let mut tape = Tape::new();
            let (xv, wv, bv) = (tape.constant(t(2, 3, x)), tape.constant(t(3, 2, w)), tape.constant(t(1, 2, b)));
            let l = composite(&mut tape, xv, wv, bv);
            tape.value(l).item().unwrap()
        };
        let mut tape = Tape::new();
        let (xv, wv, bv) = (tape.param(t(2, 3, &x0)), tape.param(t(3, 2, &w0)), tape.param(t(1, 2, &b0)));
        let l = composite(&mut tape, xv, wv, bv);
        tape.backward(l).unwrap();

        // kinks of relu / max make FD meaningless near ties; skip those draws
        let h = 1e-6;
        let gx = numeric_grad(|v| eval(v, &w0, &b0), &x0, h);
        let gw = numeric_grad(|v| eval(&x0, v, &b0), &w0, h);
        let gb = numeric_grad(|v| eval(&x0, &w0, v), &b0, h);
        let hx = numeric_grad(|v| eval(v, &w0, &b0), &x0, 1e-4);
        let smooth = gx.iter().chain(&gw).chain(&gb)
            .zip(hx.iter().chain(&numeric_grad(|v| eval(&x0, v, &b0), &w0, 1e-4)).chain(&numeric_grad(|v| eval(&x0, &w0, v), &b0, 1e-4)))
            .all(|(a, b)| (a - b).abs() <= 1e-3 * a.abs().max(1.0));
        prop_assume!(smooth);
        assert_close(&tape.grad_tensor(xv).into_data(), &gx, 1e-4);
        assert_close(&tape.grad_tensor(wv).into_data(), &gw, 1e-4);
        assert_close(&tape.grad_tensor(bv).into_data(), &gb, 1e-4);
    }
}

mod support;

use support::{check_gradients, composed_model_error, contract, op_gradient_errors, random_tensor, rng};
use tsad_core::{Graph, Result, Tensor, Var};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Checks `op` against finite differences after a random contraction.
fn check_op(inputs: Vec<Tensor<f64>>, seed: u64, op: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>) -> f64 {
    let mut probe = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| probe.variable(x.clone()).unwrap()).collect();
    let out = op(&mut probe, &vars).unwrap();
    let weights = random_tensor(probe.value(out).shape(), 1.0, &mut rng(seed));
    check_gradients(&inputs, H, |g, v| {
        let o = op(g, v)?;
        contract(g, o, &weights)
    })
}

fn t(shape: &[usize], seed: u64) -> Tensor<f64> {
    random_tensor(shape, 1.0, &mut rng(seed))
}

#[test]
fn matmul_gradient() {
    let e = check_op(vec![t(&[3, 4], 1), t(&[4, 5], 2)], 3, |g, v| g.matmul(v[0], v[1]));
    assert!(e < TOL, "{e}");
}

#[test]
fn matmul_transposed_gradient() {
    let e = check_op(vec![t(&[3, 4], 4), t(&[5, 4], 5)], 6, |g, v| g.matmul_t(v[0], v[1]));
    assert!(e < TOL, "{e}");
}

#[test]
fn add_and_row_bias_gradients() {
    let e = check_op(vec![t(&[3, 4], 7), t(&[3, 4], 8)], 9, |g, v| g.add(v[0], v[1]));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![t(&[3, 4], 10), t(&[4], 11)], 12, |g, v| g.add_row(v[0], v[1]));
    assert!(e < TOL, "{e}");
}

#[test]
fn scale_gradient() {
    let e = check_op(vec![t(&[2, 3], 13)], 14, |g, v| g.scale(v[0], -0.37));
    assert!(e < TOL, "{e}");
}

#[test]
fn softmax_gradient() {
    let e = check_op(vec![random_tensor(&[4, 6], 3.0, &mut rng(15))], 16, |g, v| g.softmax_rows(v[0]));
    assert!(e < TOL, "{e}");
}

#[test]
fn layer_norm_gradient() {
    let e = check_op(vec![t(&[4, 6], 17), t(&[6], 18), t(&[6], 19)], 20, |g, v| {
        g.layer_norm(v[0], v[1], v[2])
    });
    assert!(e < TOL, "{e}");
}

#[test]
fn gelu_and_sigmoid_gradients() {
    let x = random_tensor(&[3, 5], 3.0, &mut rng(21));
    let e = check_op(vec![x.clone()], 22, |g, v| g.gelu(v[0]));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![x], 23, |g, v| g.sigmoid(v[0]));
    assert!(e < TOL, "{e}");
}

#[test]
fn bce_gradient() {
    let mut r = rng(24);
    let scores = Tensor::new(&[12], (0..12).map(|_| rand::Rng::random_range(&mut r, 0.05..0.95)).collect()).unwrap();
    let labels: Vec<f64> = (0..12).map(|i| f64::from(i % 3 == 0)).collect();
    let e = check_gradients(&[scores], H, |g, v| g.bce(v[0], &labels));
    assert!(e < TOL, "{e}");
}

#[test]
fn structural_op_gradients() {
    let e = check_op(vec![t(&[3, 4], 25)], 26, |g, v| g.reshape(v[0], &[2, 6]));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![t(&[5, 6], 27)], 28, |g, v| g.block(v[0], 1..4, 2..5));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![t(&[3, 2], 29), t(&[3, 4], 30)], 31, |g, v| g.concat_cols(&[v[0], v[1]]));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![t(&[2, 3], 32), t(&[4, 3], 33)], 34, |g, v| g.concat_rows(&[v[0], v[1]]));
    assert!(e < TOL, "{e}");
    let e = check_op(vec![t(&[9], 35)], 36, |g, v| g.toeplitz(v[0], 5));
    assert!(e < TOL, "{e}");
}

#[test]
fn reused_node_gradient() {
    // x feeds both operands, so its gradient is the sum of two paths
    let e = check_op(vec![t(&[3, 3], 37)], 38, |g, v| {
        let y = g.matmul(v[0], v[0])?;
        g.add(y, v[0])
    });
    assert!(e < TOL, "{e}");
}

#[test]
fn composed_tiny_model_gradient() {
    for seed in [1, 2] {
        let e = composed_model_error(seed, H);
        assert!(e < 1e-3, "seed {seed}: {e}");
    }
}

#[test]
fn op_table_within_tolerance() {
    for (name, e) in op_gradient_errors() {
        assert!(e < TOL, "{name}: {e}");
    }
}

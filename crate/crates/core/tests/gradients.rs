//! Reverse-mode gradients against central differences, in 64-bit.

use gmsam::encoders::{GmaBlock, GmaBlockConfig};
use gmsam::numerics::{gradient_check, Graph, Tensor, Var};
use gmsam::Result;

const TOL: f64 = 1e-4;

/// Deterministic values in roughly `[-scale, scale]`, away from kinks.
fn wave(shape: &[usize], phase: f64, scale: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.7137 + phase).sin() * scale)
        .collect();
    Tensor::from_f64(shape, &data).unwrap()
}

/// Reduces `y` to a scalar through fixed weights so every output element
/// contributes a distinct gradient.
fn weighted_sum(g: &mut Graph<f64>, y: Var) -> Result<Var> {
    let w = g.constant(wave(g.shape(y), 0.3, 1.0));
    let prod = g.mul(y, w)?;
    g.sum(prod)
}

fn check(name: &str, inputs: &[Tensor<f64>], f: impl Fn(&mut Graph<f64>, &[Var]) -> Result<Var>) {
    let err = gradient_check(
        |g, v| {
            let y = f(g, v)?;
            weighted_sum(g, y)
        },
        inputs,
    )
    .unwrap();
    assert!(err < TOL, "{name}: relative error {err:e}");
}

#[test]
fn matmul_2d_and_batched() {
    check(
        "matmul",
        &[wave(&[3, 4], 0.0, 1.0), wave(&[4, 2], 1.0, 1.0)],
        |g, v| g.matmul(v[0], v[1]),
    );
    check(
        "bmm",
        &[wave(&[2, 3, 4], 0.0, 1.0), wave(&[2, 4, 5], 1.0, 1.0)],
        |g, v| g.matmul(v[0], v[1]),
    );
}

#[test]
fn elementwise_binary() {
    let ins = [wave(&[2, 3], 0.0, 1.0), wave(&[2, 3], 2.0, 1.0)];
    check("add", &ins, |g, v| g.add(v[0], v[1]));
    check("sub", &ins, |g, v| g.sub(v[0], v[1]));
    check("mul", &ins, |g, v| g.mul(v[0], v[1]));
}

#[test]
fn scale_and_bias() {
    check("scale", &[wave(&[5], 0.0, 1.0)], |g, v| g.scale(v[0], -1.7));
    check(
        "add_bias",
        &[wave(&[3, 4], 0.0, 1.0), wave(&[4], 1.0, 1.0)],
        |g, v| g.add_bias(v[0], v[1]),
    );
}

#[test]
fn conv2d_variants() {
    // dense, padded, strided, grouped, with and without bias
    let cases: [(usize, usize, usize, usize, usize, bool); 4] = [
        (2, 3, 3, 1, 1, true),
        (2, 4, 3, 2, 1, false),
        (4, 4, 3, 1, 1, false),
        (3, 2, 2, 2, 0, true),
    ];
    for (cin, cout, k, stride, pad, bias) in cases {
        let groups = if cin == cout && cin == 4 { 4 } else { 1 };
        let mut ins = vec![
            wave(&[2, cin, 5, 5], 0.0, 1.0),
            wave(&[cout, cin / groups, k, k], 1.0, 0.5),
        ];
        if bias {
            ins.push(wave(&[cout], 2.0, 1.0));
        }
        check("conv2d", &ins, |g, v| {
            g.conv2d(v[0], v[1], v.get(2).copied(), groups, stride, pad)
        });
    }
}

#[test]
fn softmax_on_every_axis() {
    for axis in 0..3 {
        check("softmax", &[wave(&[2, 3, 4], 0.0, 2.0)], |g, v| {
            g.softmax(v[0], axis)
        });
    }
}

#[test]
fn layer_norm_with_affine() {
    let ins = [
        wave(&[3, 6], 0.0, 2.0),
        wave(&[6], 1.0, 1.0),
        wave(&[6], 2.0, 1.0),
    ];
    check("layer_norm", &ins, |g, v| {
        g.layer_norm(v[0], v[1], v[2], 1e-6)
    });
}

#[test]
fn activations() {
    check("gelu", &[wave(&[10], 0.0, 3.0)], |g, v| g.gelu(v[0]));
    // `wave` never lands within the step size of the kink at zero
    check("relu", &[wave(&[10], 0.0, 3.0)], |g, v| g.relu(v[0]));
}

#[test]
fn shape_ops() {
    let x = [wave(&[2, 3, 4], 0.0, 1.0)];
    check("reshape", &x, |g, v| g.reshape(v[0], &[6, 4]));
    check("permute", &x, |g, v| g.permute(v[0], &[2, 0, 1]));
    check("narrow", &x, |g, v| g.narrow(v[0], 2, 1, 2));
    let pair = [wave(&[2, 3, 4], 0.0, 1.0), wave(&[2, 1, 4], 1.0, 1.0)];
    check("concat", &pair, |g, v| g.concat(&[v[0], v[1]], 1));
}

#[test]
fn reductions_and_loss() {
    let x = [wave(&[3, 4], 0.0, 1.0)];
    check("sum", &x, |g, v| g.sum(v[0]));
    check("mean", &x, |g, v| g.mean(v[0]));
    // residuals straddle delta, covering both branches
    let pair = [wave(&[4, 5], 0.0, 2.0), wave(&[4, 5], 1.5, 0.5)];
    check("huber", &pair, |g, v| g.huber_loss(v[0], v[1], 1.0));
}

#[test]
fn full_gma_block() {
    let cfg = GmaBlockConfig::new(8, 2, &[1, 3], 2.0).unwrap();
    let block = GmaBlock::<f64>::build(cfg, 11).unwrap();
    // perturb every parameter away from its structured initial value
    let mut inputs = vec![wave(&[1, 8, 4, 4], 0.0, 1.0)];
    for (i, (_, t)) in block.params().iter().enumerate() {
        let noise = wave(t.shape(), i as f64, 0.3);
        let data: Vec<f64> = t
            .to_f64_vec()
            .iter()
            .zip(noise.to_f64_vec())
            .map(|(a, b)| a + b)
            .collect();
        inputs.push(Tensor::from_f64(t.shape(), &data).unwrap());
    }
    let err = gradient_check(
        |g, v| {
            let y = block.forward(g, &v[1..], v[0])?.output;
            weighted_sum(g, y)
        },
        &inputs,
    )
    .unwrap();
    assert!(err < TOL, "GMA block relative error {err:e}");
}

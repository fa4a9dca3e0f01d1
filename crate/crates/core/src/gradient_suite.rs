//! Finite-difference checks of every differentiable op and of a whole
//! network, at 64-bit precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{forward, ArchConfig, ModelParams, ParamMap};
use crate::tensor::{grad_check, Activation, Backend, CheckReport, Combine, GradCheck, Padding, Shape, Tensor};

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub seed: u64,
    pub report: CheckReport,
}

/// Checks the full network for `arch` with respect to every parameter (up to
/// `max_samples` elements each) and the RGB input. Biases are randomised so
/// their paths carry signal.
pub fn network_grad_check(arch: &ArchConfig, seed: u64, tolerance: f64, max_samples: usize) -> CheckReport {
    let params = match ModelParams::<f64>::init(arch, seed) {
        Ok(p) => p,
        Err(e) => {
            return GradCheck::default().run(move |_, _| Err(crate::Error::config(e.to_string())), vec![], seed);
        }
    };
    let names: Vec<String> = params.tensors.keys().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    let mut inputs: Vec<Tensor<f64>> = params
        .tensors
        .iter()
        .map(|(name, t)| {
            if name.ends_with(".bias") {
                Tensor::uniform(t.shape(), -0.1, 0.1, &mut rng)
            } else {
                t.clone()
            }
        })
        .collect();
    inputs.push(Tensor::uniform([1, arch.in_channels, 16, 16], 0.0, 1.0, &mut rng));
    let check = GradCheck {
        tolerance,
        max_samples,
        ..GradCheck::default()
    };
    check.run(
        |g, vars| {
            let (rgb, rest) = vars.split_last().expect("input is last");
            let bound: ParamMap<_> = names.iter().cloned().zip(rest.iter().copied()).collect();
            forward(g, arch, &bound, rgb)
        },
        inputs,
        seed,
    )
}

fn shapes(list: &[[usize; 4]]) -> Vec<Shape> {
    list.iter().map(|&d| d.into()).collect()
}

/// Every op check plus the tiny end-to-end network, once per seed.
pub fn gradient_suite(seeds: &[u64], tolerance: f64) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for &seed in seeds {
        let mut push = |name, report| out.push(SuiteEntry { name, seed, report });
        let tol = tolerance;
        push(
            "conv2d reflect",
            grad_check(
                |g, v| g.conv2d(&v[0], &v[1], &v[2], 1, Padding::Reflect),
                &shapes(&[[1, 2, 4, 4], [3, 2, 3, 3], [3, 1, 1, 1]]),
                seed,
                tol,
            ),
        );
        push(
            "conv2d zero",
            grad_check(
                |g, v| g.conv2d(&v[0], &v[1], &v[2], 1, Padding::Zero),
                &shapes(&[[1, 2, 4, 4], [3, 2, 3, 3], [3, 1, 1, 1]]),
                seed,
                tol,
            ),
        );
        push(
            "conv2d stride 2",
            grad_check(
                |g, v| g.conv2d(&v[0], &v[1], &v[2], 2, Padding::Reflect),
                &shapes(&[[2, 2, 5, 6], [2, 2, 3, 3], [2, 1, 1, 1]]),
                seed,
                tol,
            ),
        );
        push(
            "pixel_shuffle",
            grad_check(|g, v| g.pixel_shuffle(&v[0], 2), &shapes(&[[1, 8, 2, 3]]), seed, tol),
        );
        push(
            "pixel_unshuffle",
            grad_check(|g, v| g.pixel_unshuffle(&v[0], 2), &shapes(&[[1, 2, 4, 6]]), seed, tol),
        );
        push(
            "leaky_relu",
            grad_check(|g, v| Ok(g.activation(&v[0], Activation::LeakyRelu(0.2))), &shapes(&[[1, 2, 3, 3]]), seed, tol),
        );
        push(
            "sigmoid",
            grad_check(|g, v| Ok(g.activation(&v[0], Activation::Sigmoid)), &shapes(&[[1, 2, 3, 3]]), seed, tol),
        );
        push(
            "global_avg_pool",
            grad_check(|g, v| Ok(g.global_avg_pool(&v[0])), &shapes(&[[2, 3, 4, 5]]), seed, tol),
        );
        push(
            "linear",
            grad_check(
                |g, v| g.linear(&v[0], &v[1], &v[2]),
                &shapes(&[[2, 5, 1, 1], [3, 5, 1, 1], [3, 1, 1, 1]]),
                seed,
                tol,
            ),
        );
        push(
            "add",
            grad_check(|g, v| g.combine(&v[0], &v[1], Combine::Add), &shapes(&[[1, 2, 3, 3], [1, 2, 3, 3]]), seed, tol),
        );
        push(
            "mul",
            grad_check(|g, v| g.combine(&v[0], &v[1], Combine::Mul), &shapes(&[[1, 2, 3, 3], [1, 2, 3, 3]]), seed, tol),
        );
        push(
            "mul channel broadcast",
            grad_check(|g, v| g.combine(&v[0], &v[1], Combine::Mul), &shapes(&[[2, 3, 3, 4], [2, 3, 1, 1]]), seed, tol),
        );
        push(
            "concat",
            grad_check(
                |g, v| g.combine(&v[0], &v[1], Combine::ConcatChannels),
                &shapes(&[[2, 2, 3, 3], [2, 1, 3, 3]]),
                seed,
                tol,
            ),
        );
        push(
            "l1 loss",
            grad_check(|g, v| g.mean_abs_diff(v[0], v[1]), &shapes(&[[1, 2, 3, 3], [1, 2, 3, 3]]), seed, tol),
        );
        push("tiny network", network_grad_check(&ArchConfig::tiny(), seed, tol, 3));
    }
    out
}

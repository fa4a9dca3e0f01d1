//! Central finite-difference verification of reverse-mode gradients.
//!
//! The op under test may produce any output shape; it is reduced to a scalar
//! by a fixed random projection so that every output element contributes.
//! A stencil that straddles a kink (LeakyReLU at zero, the L1 subgradient) is
//! detected exactly by comparing the graph's kink pattern at both ends with
//! the unperturbed one. Such probes are retried with shorter steps and only
//! reported as nonsmooth when no step down to `step / 1000` is kink-free.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Backend, Combine, Graph, Shape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub nonsmooth_skipped: usize,
    pub pass: bool,
    /// Set when the op itself failed to evaluate.
    pub error: Option<String>,
}

impl CheckReport {
    fn failed(e: Error) -> Self {
        Self {
            max_rel_err: f64::INFINITY,
            checked: 0,
            nonsmooth_skipped: 0,
            pass: false,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    /// Largest number of elements probed per input; larger inputs are sampled.
    pub max_samples: usize,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    /// Multiplies analytic gradients by `1 + corrupt`. Only useful as a negative control.
    pub corrupt: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-4,
            tolerance: 1e-3,
            max_samples: 64,
            abs_floor: 1e-6,
            corrupt: 0.0,
        }
    }
}

fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

type Op<'a> = dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var> + 'a;

fn projected_loss(op: &Op<'_>, inputs: &[Tensor<f64>], proj: &Tensor<f64>, track: bool) -> Result<(Graph<f64>, Vec<Var>, Var)> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), track)).collect();
    let out = op(&mut g, &vars)?;
    let p = g.constant(proj.clone());
    let weighted = g.combine(&out, &p, Combine::Mul)?;
    let loss = g.sum(weighted);
    Ok((g, vars, loss))
}

impl GradCheck {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    /// Checks `op` at the given input values.
    pub fn run<F>(&self, op: F, inputs: Vec<Tensor<f64>>, seed: u64) -> CheckReport
    where
        F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
    {
        self.try_run(&op, inputs, seed).unwrap_or_else(CheckReport::failed)
    }

    fn try_run(&self, op: &Op<'_>, mut inputs: Vec<Tensor<f64>>, seed: u64) -> Result<CheckReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_9c4e_cc00_0001);
        let out_shape = {
            let mut g = Graph::new();
            let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
            let out = op(&mut g, &vars)?;
            g.value(out).shape()
        };
        let proj = Tensor::uniform(out_shape, -1.0, 1.0, &mut rng);

        let (graph, vars, loss) = projected_loss(op, &inputs, &proj, true)?;
        let grads = graph.backward(loss)?;
        let pattern = graph.kink_pattern();
        drop(graph);

        let eval = |inputs: &[Tensor<f64>]| -> Result<(f64, bool)> {
            let (g, _, loss) = projected_loss(op, inputs, &proj, false)?;
            Ok((g.value(loss).data()[0], g.kink_pattern() == pattern))
        };
        // Central difference, or None when the stencil crosses a kink.
        let central = |inputs: &mut Vec<Tensor<f64>>, i: usize, j: usize, h: f64| -> Result<Option<f64>> {
            let x0 = inputs[i].data()[j];
            inputs[i].data_mut()[j] = x0 + h;
            let (up, up_smooth) = eval(inputs)?;
            inputs[i].data_mut()[j] = x0 - h;
            let (down, down_smooth) = eval(inputs)?;
            inputs[i].data_mut()[j] = x0;
            Ok((up_smooth && down_smooth).then(|| (up - down) / (2.0 * h)))
        };

        let mut report = CheckReport {
            max_rel_err: 0.0,
            checked: 0,
            nonsmooth_skipped: 0,
            pass: true,
            error: None,
        };
        for (i, var) in vars.iter().enumerate() {
            let len = inputs[i].data().len();
            let zeros;
            let analytic = match grads.get(*var) {
                Some(t) => t,
                None => {
                    zeros = Tensor::zeros(inputs[i].shape());
                    &zeros
                }
            };
            let picks: Vec<usize> = if len <= self.max_samples {
                (0..len).collect()
            } else {
                let mut v = index::sample(&mut rng, len, self.max_samples).into_vec();
                v.sort_unstable();
                v
            };
            for j in picks {
                let a = analytic.data()[j] * (1.0 + self.corrupt);
                let mut fd = None;
                let mut h = self.step;
                for _ in 0..4 {
                    fd = central(&mut inputs, i, j, h)?;
                    if fd.is_some() {
                        break;
                    }
                    h /= 10.0;
                }
                let Some(fd) = fd else {
                    report.nonsmooth_skipped += 1;
                    continue;
                };
                report.checked += 1;
                report.max_rel_err = report.max_rel_err.max(rel_err(a, fd, self.abs_floor));
            }
        }
        // A check that skipped most of its probes has not verified anything.
        report.pass = report.max_rel_err <= self.tolerance
            && report.checked > 0
            && report.nonsmooth_skipped * 10 <= report.checked + report.nonsmooth_skipped;
        Ok(report)
    }
}

/// Checks `op` on inputs drawn uniformly from `[-1, 1)` with the given shapes.
pub fn grad_check<F>(op: F, input_shapes: &[Shape], seed: u64, tolerance: f64) -> CheckReport
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = input_shapes
        .iter()
        .map(|&s| Tensor::uniform(s, -1.0, 1.0, &mut rng))
        .collect();
    GradCheck::with_tolerance(tolerance).run(op, inputs, seed)
}

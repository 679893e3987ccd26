//! Tape-based reverse-mode autodiff over dense f32/f64 tensors, with the
//! operator set the networks need, Adam, Kaiming init, finite-difference
//! checking, and one level of differentiation-through-backward for the
//! discriminator gradient penalty.

pub mod check;
mod elem;
pub mod ops;
mod optim;
mod tape;
mod tensor;

pub use elem::Elem;
pub use ops::UnaryFn;
pub use optim::{adam_step, kaiming_init, OptimConfig, ParamSet, Parameter};
pub use tape::{Gradients, Tape};
pub use tensor::Tensor;

use crate::error::Result;

/// Gradient of a scalar `root` w.r.t. one tensor, kept on the tape so it can
/// be differentiated once more. Returns zeros when `root` does not depend
/// on `wrt`.
pub fn input_gradient<T: Elem>(tape: &Tape<T>, root: &Tensor<T>, wrt: &Tensor<T>) -> Result<Tensor<T>> {
    let grads = tape.backward(root, true)?;
    Ok(match grads.wrt(wrt) {
        Some(g) => g.clone(),
        None => Tensor::zeros(wrt.shape().to_vec()),
    })
}

/// ||∇_wrt root||² as a differentiable scalar: backpropagating through it
/// yields the parameter gradients of the squared input-gradient norm.
pub fn grad_of_grad_norm<T: Elem>(
    tape: &Tape<T>,
    root: &Tensor<T>,
    wrt: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = input_gradient(tape, root, wrt)?;
    ops::squared_l2(&g)
}

#[cfg(test)]
mod tests {
    use super::check::{central_diff_gradient, max_rel_err};
    use super::ops::{self, UnaryFn};
    use super::*;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn fd_check<F>(f: F, inputs: &[(Vec<f64>, Vec<usize>)], tol: f64)
    where
        F: Fn(&Tape<f64>, &[Tensor<f64>]) -> Result<Tensor<f64>>,
    {
        let f = &f;
        let tape = Tape::new();
        let leaves: Vec<Tensor<f64>> = inputs
            .iter()
            .map(|(d, s)| tape.leaf(d.clone(), s.clone()))
            .collect();
        let out = f(&tape, &leaves).unwrap();
        let grads = tape.backward(&out, false).unwrap();
        let analytic: Vec<Vec<f64>> = leaves
            .iter()
            .map(|l| {
                grads
                    .wrt(l)
                    .map(|g| g.to_f64_vec())
                    .unwrap_or_else(|| vec![0.0; l.numel()])
            })
            .collect();

        let shapes: Vec<Vec<usize>> = inputs.iter().map(|(_, s)| s.clone()).collect();
        let mut eval = |bufs: &[Vec<f64>]| -> f64 {
            let tape = Tape::new();
            let leaves: Vec<Tensor<f64>> = bufs
                .iter()
                .zip(&shapes)
                .map(|(d, s)| tape.leaf(d.clone(), s.clone()))
                .collect();
            f(&tape, &leaves).unwrap().scalar_value()
        };
        let raw: Vec<Vec<f64>> = inputs.iter().map(|(d, _)| d.clone()).collect();
        let numeric = central_diff_gradient(&mut eval, &raw, 1e-5);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err <= tol, "gradient mismatch: rel err {err}");
    }

    fn randv(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeedStream::new(seed).stream("fd");
        (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    // weights y with a fixed constant so reductions have non-uniform pull
    fn weighted_sum(y: &Tensor<f64>) -> Result<Tensor<f64>> {
        let w: Vec<f64> = (0..y.numel()).map(|i| 0.3 + 0.1 * i as f64).collect();
        ops::sum_all(&ops::mul(y, &Tensor::from_vec(w, y.shape().to_vec()))?)
    }

    #[test]
    fn matmul_identity() {
        let eye = Tensor::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![3, 3]);
        let a = Tensor::from_vec(randv(12, 1), vec![3, 4]);
        let out = ops::matmul::<f64>(&eye, &a).unwrap();
        assert_eq!(out.values(), a.values());
    }

    #[test]
    fn elu_values() {
        let x = Tensor::from_vec(vec![2.0, -1.0, 0.0], vec![3]);
        let y = x.elu().unwrap();
        assert_eq!(y.values()[0], 2.0);
        assert!((y.values()[1] - ((-1.0f64).exp() - 1.0)).abs() < 1e-12);
        assert!((y.values()[1] + 0.6321).abs() < 1e-4);
        assert_eq!(y.values()[2], 0.0);
    }

    #[test]
    fn elu_is_c1_at_zero() {
        let h = 1e-7f64;
        let elu = |x: f64| if x > 0.0 { x } else { x.exp() - 1.0 };
        let left = (elu(0.0) - elu(-h)) / h;
        let right = (elu(h) - elu(0.0)) / h;
        assert!((left - right).abs() < 1e-6);
    }

    #[test]
    fn backward_sum_gives_ones() {
        let tape = Tape::new();
        let p = tape.leaf(randv(5, 2), vec![5]);
        let s = p.sum_all().unwrap();
        let grads = tape.backward(&s, false).unwrap();
        assert_eq!(grads.wrt(&p).unwrap().values(), &[1.0; 5]);
    }

    #[test]
    fn backward_squared_l2() {
        let tape = Tape::new();
        let p = tape.leaf(vec![3.0, 4.0], vec![2]);
        let s = ops::squared_l2(&p).unwrap();
        assert_eq!(s.scalar_value(), 25.0);
        let grads = tape.backward(&s, false).unwrap();
        assert_eq!(grads.wrt(&p).unwrap().values(), &[6.0, 8.0]);
    }

    #[test]
    fn diamond_graph_accumulates() {
        let tape = Tape::new();
        let p = tape.leaf(vec![1.5, -2.0], vec![2]);
        let a = p.mul(&p).unwrap();
        let b = p.mul(&p).unwrap();
        let y = a.add(&b).unwrap().sum_all().unwrap();
        let grads = tape.backward(&y, false).unwrap();
        let g = grads.wrt(&p).unwrap();
        assert_eq!(g.values(), &[4.0 * 1.5, 4.0 * -2.0]);
    }

    #[test]
    fn accumulation_is_order_independent() {
        let vals = randv(6, 3);
        let run = |perm: &[usize]| -> Vec<f64> {
            let tape = Tape::<f64>::new();
            let p = tape.leaf(vals.clone(), vec![6]);
            let branches: Vec<Tensor<f64>> = (0..3)
                .map(|k| p.scalar_mul(1.0 + k as f64).unwrap().mul(&p).unwrap())
                .collect();
            let mut total = branches[perm[0]].clone();
            for &i in &perm[1..] {
                total = total.add(&branches[i]).unwrap();
            }
            let root = total.sum_all().unwrap();
            let grads = tape.backward(&root, false).unwrap();
            grads.wrt(&p).unwrap().to_f64_vec()
        };
        let a = run(&[0, 1, 2]);
        let b = run(&[2, 0, 1]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn gather_scatter_preserves_grad_mass() {
        let tape = Tape::new();
        let x = tape.leaf(randv(8, 4), vec![4, 2]);
        let idx = vec![0usize, 2, 2, 3, 0];
        let y = ops::gather_rows(&x, &idx).unwrap();
        let w: Vec<f64> = (0..y.numel()).map(|i| 1.0 + i as f64).collect();
        let root = ops::sum_all(&ops::mul(&y, &Tensor::from_vec(w.clone(), y.shape().to_vec())).unwrap()).unwrap();
        let grads = tape.backward(&root, false).unwrap();
        let gx = grads.wrt(&x).unwrap();
        let total_in: f64 = w.iter().sum();
        let total_out: f64 = gx.values().iter().sum();
        assert_eq!(total_in, total_out);
    }

    #[test]
    fn every_op_passes_fd_checks() {
        // binary elementwise + scalar variants
        fd_check(
            |_, xs| weighted_sum(&xs[0].add(&xs[1])?),
            &[(randv(6, 10), vec![2, 3]), (randv(6, 11), vec![2, 3])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&xs[0].sub(&xs[1])?),
            &[(randv(6, 12), vec![2, 3]), (randv(6, 13), vec![2, 3])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&xs[0].mul(&xs[1])?),
            &[(randv(6, 14), vec![2, 3]), (randv(6, 15), vec![2, 3])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&xs[0].scalar_mul(-1.7)?.add_scalar(0.3)?),
            &[(randv(4, 16), vec![4])],
            1e-6,
        );
        // matmul
        fd_check(
            |_, xs| weighted_sum(&xs[0].matmul(&xs[1])?),
            &[(randv(6, 17), vec![2, 3]), (randv(12, 18), vec![3, 4])],
            1e-6,
        );
        // gather / reshape / reductions
        fd_check(
            |_, xs| weighted_sum(&ops::gather_rows(&xs[0], &[2, 0, 1, 2])?),
            &[(randv(6, 19), vec![3, 2])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&xs[0].reshape(vec![3, 2])?),
            &[(randv(6, 20), vec![2, 3])],
            1e-6,
        );
        fd_check(|_, xs| weighted_sum(&xs[0].sum_axis0()?), &[(randv(6, 21), vec![2, 3])], 1e-6);
        fd_check(|_, xs| weighted_sum(&xs[0].sum_axis1()?), &[(randv(6, 22), vec![2, 3])], 1e-6);
        fd_check(|_, xs| xs[0].sum_all(), &[(randv(6, 23), vec![2, 3])], 1e-6);
        fd_check(|_, xs| xs[0].mean_all(), &[(randv(6, 24), vec![6])], 1e-6);
        // broadcasts and segment ops
        fd_check(
            |_, xs| weighted_sum(&ops::broadcast_rows(&xs[0], 3)?),
            &[(randv(4, 25), vec![4])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::broadcast_cols(&xs[0], 3)?),
            &[(randv(4, 26), vec![4])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::segment_sum(&xs[0], 2)?),
            &[(randv(8, 27), vec![4, 2])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::repeat_rows(&xs[0], 3)?),
            &[(randv(4, 28), vec![2, 2])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::tile_rows(&xs[0], 3)?),
            &[(randv(4, 29), vec![2, 2])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::fold_rows(&xs[0], 2)?),
            &[(randv(8, 30), vec![4, 2])],
            1e-6,
        );
        // unaries (log, sqrt, recip need safe input)
        for f in [UnaryFn::Relu, UnaryFn::Elu, UnaryFn::Sigmoid, UnaryFn::Softplus, UnaryFn::Abs] {
            fd_check(
                move |_, xs| weighted_sum(&ops::unary(&xs[0], f)?),
                &[(randv(6, 31).iter().map(|v| v + 2.0).collect(), vec![6])],
                1e-5,
            );
        }
        for f in [UnaryFn::Log, UnaryFn::Sqrt, UnaryFn::Recip] {
            fd_check(
                move |_, xs| weighted_sum(&ops::unary(&xs[0], f)?),
                &[(randv(6, 32).iter().map(|v| v.abs() + 0.5).collect(), vec![6])],
                1e-5,
            );
        }
        // concat / slice / pad
        fd_check(
            |_, xs| weighted_sum(&ops::concat(&[&xs[0], &xs[1]], 1)?),
            &[(randv(4, 33), vec![2, 2]), (randv(6, 34), vec![2, 3])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::concat(&[&xs[0], &xs[1]], 0)?),
            &[(randv(4, 35), vec![2, 2]), (randv(6, 36), vec![3, 2])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::slice(&xs[0], 1, 1, 2)?),
            &[(randv(8, 37), vec![2, 4])],
            1e-6,
        );
        fd_check(
            |_, xs| weighted_sum(&ops::pad(&xs[0], 0, 1, 4)?),
            &[(randv(4, 38), vec![2, 2])],
            1e-6,
        );
        // fill
        fd_check(
            |_, xs| weighted_sum(&ops::fill(&xs[0], vec![2, 3])?),
            &[(vec![0.37], vec![])],
            1e-6,
        );
        // l1 away from the kink
        fd_check(
            |_, xs| ops::l1_norm(&xs[0]),
            &[(randv(6, 39).iter().map(|v| v + 3.0).collect(), vec![6])],
            1e-6,
        );
    }

    #[test]
    fn sparse_apply_fd_check() {
        let mat = std::rc::Rc::new(crate::mesh::SparseMat::from_triplets(
            2,
            3,
            vec![(0, 0, 0.5), (0, 2, 0.5), (1, 1, 1.0)],
        ));
        let m2 = mat.clone();
        fd_check(
            move |_, xs| weighted_sum(&ops::sparse_apply(&xs[0], m2.clone(), false, 2)?),
            &[(randv(12, 40), vec![6, 2])],
            1e-6,
        );
        let m3 = mat.clone();
        fd_check(
            move |_, xs| weighted_sum(&ops::sparse_apply(&xs[0], m3.clone(), true, 1)?),
            &[(randv(4, 41), vec![2, 2])],
            1e-6,
        );
    }

    #[test]
    fn log_rejects_nonpositive() {
        let x = Tensor::from_vec(vec![1.0, -0.5], vec![2]);
        assert!(matches!(x.log(), Err(crate::Error::DomainError { .. })));
    }

    #[test]
    fn gather_rejects_out_of_range() {
        let x = Tensor::<f64>::from_vec(vec![1.0, 2.0], vec![2, 1]);
        assert!(matches!(
            ops::gather_rows(&x, &[0, 5]),
            Err(crate::Error::GatherOutOfRange { .. })
        ));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let tape = Tape::new();
        let p = tape.leaf(vec![1.0, 2.0], vec![2]);
        assert!(matches!(
            tape.backward(&p, false),
            Err(crate::Error::NonScalarRoot(_))
        ));
    }

    #[test]
    fn tape_consumed_after_plain_backward() {
        let tape = Tape::new();
        let p = tape.leaf(vec![1.0], vec![]);
        let y = p.mul(&p).unwrap();
        tape.backward(&y, false).unwrap();
        assert!(matches!(tape.backward(&y, false), Err(crate::Error::TapeConsumed)));
    }

    #[test]
    fn detached_tensor_gets_no_gradient() {
        let tape = Tape::new();
        let p = tape.leaf(vec![2.0], vec![]);
        let d = p.detach();
        let y = d.mul(&d).unwrap();
        assert!(!y.is_tracked());
        let grads = tape.backward(&p.mul(&p).unwrap(), false).unwrap();
        assert!(grads.wrt(&d).is_none());
    }

    #[test]
    fn no_grad_pauses_recording() {
        let tape = Tape::new();
        let p = tape.leaf(vec![2.0], vec![]);
        let y = tape.no_grad(|| p.mul(&p).unwrap());
        assert!(!y.is_tracked());
    }

    #[test]
    fn grad_norm_linear_closed_form() {
        // d = w . x  =>  ||grad_x d||^2 = ||w||^2, and its w-gradient is 2w
        let tape = Tape::new();
        let w = tape.leaf(vec![0.5, -1.5, 2.0], vec![1, 3]);
        let x = tape.leaf(vec![0.3, 0.7, -0.2], vec![3, 1]);
        let d = w.matmul(&x).unwrap().sum_all().unwrap();
        let penalty = grad_of_grad_norm(&tape, &d, &x).unwrap();
        let expected: f64 = [0.5, -1.5, 2.0].iter().map(|v| v * v).sum();
        assert!((penalty.scalar_value() - expected).abs() < 1e-10);
        let grads = tape.backward(&penalty, false).unwrap();
        let gw = grads.wrt(&w).unwrap();
        for (g, wv) in gw.values().iter().zip([0.5, -1.5, 2.0]) {
            assert!((g - 2.0 * wv).abs() < 1e-10);
        }
    }

    #[test]
    fn grad_norm_sigmoid_matches_fd() {
        // penalty(w) = ||grad_x sigmoid(w.x)||^2; check dpenalty/dw by FD
        let x0 = vec![0.4, -0.3];
        let w0 = vec![0.8, 0.6];
        let penalty_of = |w: &[f64]| -> f64 {
            let tape = Tape::new();
            let wt = tape.leaf(w.to_vec(), vec![1, 2]);
            let xt = tape.leaf(x0.clone(), vec![2, 1]);
            let d = wt.matmul(&xt).unwrap().sigmoid().unwrap().sum_all().unwrap();
            grad_of_grad_norm(&tape, &d, &xt).unwrap().scalar_value()
        };
        let tape = Tape::new();
        let wt = tape.leaf(w0.clone(), vec![1, 2]);
        let xt = tape.leaf(x0.clone(), vec![2, 1]);
        let d = wt.matmul(&xt).unwrap().sigmoid().unwrap().sum_all().unwrap();
        let penalty = grad_of_grad_norm(&tape, &d, &xt).unwrap();
        let grads = tape.backward(&penalty, false).unwrap();
        let analytic = grads.wrt(&wt).unwrap().to_f64_vec();
        let mut eval = |bufs: &[Vec<f64>]| penalty_of(&bufs[0]);
        let numeric = central_diff_gradient(&mut eval, &[w0.clone()], 1e-5);
        assert!(max_rel_err(&[analytic], &numeric) < 1e-3);
    }

    #[test]
    fn constant_root_yields_zero_penalty() {
        let tape = Tape::new();
        let x = tape.leaf(vec![1.0, 2.0], vec![2, 1]);
        let d = Tensor::scalar(3.0);
        let penalty = grad_of_grad_norm(&tape, &d, &x).unwrap();
        assert_eq!(penalty.scalar_value(), 0.0);
    }

    #[test]
    fn second_order_unsupported_is_reported() {
        let tape = Tape::new();
        let x = tape.leaf(vec![0.5, -0.5], vec![2, 1]);
        let w = tape.leaf(vec![1.0, 2.0], vec![1, 2]);
        let d = w.matmul(&x).unwrap().relu().unwrap().sum_all().unwrap();
        let penalty = grad_of_grad_norm(&tape, &d, &x).unwrap();
        let err = tape.backward(&penalty, false).unwrap_err();
        assert!(matches!(err, crate::Error::SecondOrderUnsupported("relu_grad")));
    }

    #[test]
    fn adam_zero_lr_is_noop() {
        let mut params = ParamSet::new();
        params.insert(Parameter::new("p", vec![1.0f64, -2.0], vec![2]));
        params.get_mut(0).grad = Some(vec![0.5, 0.5]);
        let before = params.get(0).data.as_ref().clone();
        let cfg = OptimConfig { learning_rate: 0.0, weight_decay: 0.0, ..Default::default() };
        adam_step(&mut params, &cfg).unwrap();
        assert_eq!(params.get(0).data.as_ref(), &before);
        assert!(params.get(0).grad.is_none());
    }

    #[test]
    fn adam_all_zero_grads_is_noop() {
        let mut params = ParamSet::new();
        params.insert(Parameter::new("p", vec![0.7f64, -0.3], vec![2]));
        params.get_mut(0).grad = Some(vec![0.0, 0.0]);
        let before = params.get(0).data.as_ref().clone();
        let cfg = OptimConfig { weight_decay: 0.0, ..Default::default() };
        adam_step(&mut params, &cfg).unwrap();
        assert_eq!(params.get(0).data.as_ref(), &before);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let mut params = ParamSet::new();
        params.insert(Parameter::new("p", vec![1.0f64, -1.0, 0.25], vec![3]));
        params.get_mut(0).grad = Some(vec![0.3, -7.0, 0.001]);
        let cfg = OptimConfig {
            learning_rate: 0.01,
            weight_decay: 0.0,
            epsilon: 1e-12,
            ..Default::default()
        };
        let before = params.get(0).data.as_ref().clone();
        adam_step(&mut params, &cfg).unwrap();
        for (b, a) in before.iter().zip(params.get(0).data.iter()) {
            assert!(((b - a).abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_matches_scripted_reference() {
        // three steps on f(p) = p^2 from p=1, lr=0.1; reference is an
        // independent scalar transcription of the update rule
        let mut p = 1.0f64;
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * p;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
            expected.push(p);
        }

        let mut params = ParamSet::new();
        params.insert(Parameter::new("p", vec![1.0f64], vec![]));
        let cfg = OptimConfig { learning_rate: 0.1, weight_decay: 0.0, ..Default::default() };
        let mut got = Vec::new();
        for _ in 0..3 {
            let cur = params.get(0).data[0];
            params.get_mut(0).grad = Some(vec![2.0 * cur]);
            adam_step(&mut params, &cfg).unwrap();
            got.push(params.get(0).data[0]);
        }
        for (e, g) in expected.iter().zip(&got) {
            assert!((e - g).abs() < 1e-12, "{expected:?} vs {got:?}");
        }
    }

    #[test]
    fn adam_missing_grad_lists_names() {
        let mut params = ParamSet::new();
        params.insert(Parameter::new("layer.w", vec![1.0f64], vec![]));
        params.insert(Parameter::new("layer.b", vec![1.0f64], vec![]));
        params.get_mut(0).grad = Some(vec![0.1]);
        let err = adam_step(&mut params, &OptimConfig::default()).unwrap_err();
        match err {
            crate::Error::MissingGradient(names) => assert!(names.contains("layer.b")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kaiming_statistics_and_determinism() {
        let seeds = SeedStream::new(7);
        let a: Tensor<f64> = kaiming_init(vec![100_000], 50, &seeds, "w");
        let b: Tensor<f64> = kaiming_init(vec![100_000], 50, &seeds, "w");
        assert_eq!(a.values(), b.values());
        let mean: f64 = a.values().iter().sum::<f64>() / a.numel() as f64;
        let var: f64 =
            a.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / a.numel() as f64;
        let target = (2.0f64 / 50.0).sqrt();
        assert!((var.sqrt() - target).abs() / target < 0.02);

        let mut stds = Vec::new();
        for fan in [10usize, 100, 1000] {
            let t: Tensor<f64> = kaiming_init(vec![1000], fan, &seeds, "mono");
            let v: f64 = t.values().iter().map(|x| x * x).sum::<f64>() / 1000.0;
            stds.push(v.sqrt());
        }
        assert!(stds[0] > stds[1] && stds[1] > stds[2]);
    }

    #[test]
    fn f32_gradients_within_loose_tolerance() {
        let tape = Tape::<f32>::new();
        let x = tape.leaf(vec![0.5f32, -0.25, 1.5, 0.75], vec![2, 2]);
        let w = tape.leaf(vec![0.3f32, -0.6, 0.9, 0.1], vec![2, 2]);
        let y = x.matmul(&w).unwrap().elu().unwrap().sum_all().unwrap();
        let grads = tape.backward(&y, false).unwrap();
        let gx32 = grads.wrt(&x).unwrap().to_f64_vec();

        let tape64 = Tape::<f64>::new();
        let x64 = tape64.leaf(vec![0.5, -0.25, 1.5, 0.75], vec![2, 2]);
        let w64 = tape64.leaf(vec![0.3, -0.6, 0.9, 0.1], vec![2, 2]);
        let y64 = x64.matmul(&w64).unwrap().elu().unwrap().sum_all().unwrap();
        let grads64 = tape64.backward(&y64, false).unwrap();
        let gx64 = grads64.wrt(&x64).unwrap().to_f64_vec();
        assert!(max_rel_err(&[gx32], &[gx64]) < 1e-2);
    }
}

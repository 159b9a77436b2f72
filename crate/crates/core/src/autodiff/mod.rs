//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Calling
//! [`Tape::backward`] on a scalar walks the tape in reverse creation order
//! and accumulates gradients into every reachable node.
//!
//! Broadcasting is deliberately narrow: the right-hand operand of a binary op
//! may be a one-element tensor or match a suffix of the left-hand shape.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_with_floor, GradCheckReport, DEFAULT_REL_FLOOR};
pub use tape::{Sigmoid, Tape, Var};
pub use tensor::Tensor;

#[allow(unused_imports)]
pub(crate) use tape::logistic;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn add_elementwise_and_identity() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.leaf(Tensor::vector(vec![3.0, 4.0]));
        assert_eq!(a.add(b).unwrap().value().data(), &[4.0, 6.0]);
        let zero = tape.constant(Tensor::vector(vec![0.0, 0.0]));
        assert_eq!(a.add(zero).unwrap().value(), a.value());
    }

    #[test]
    fn add_gradient_is_ones() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![2, 3], vec![0.5; 6]).unwrap());
        let b = tape.leaf(Tensor::new(vec![2, 3], vec![1.5; 6]).unwrap());
        let loss = a.add(b).unwrap().sum_all();
        tape.backward(loss).unwrap();
        assert_eq!(a.grad(), Tensor::ones(&[2, 3]));
    }

    #[test]
    fn add_broadcasts_along_leading_dims() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.leaf(Tensor::vector(vec![10.0, 20.0]));
        let c = a.add(b).unwrap();
        assert_eq!(c.value().data(), &[11.0, 22.0, 13.0, 24.0]);
        tape.backward(c.sum_all()).unwrap();
        assert_eq!(b.grad().data(), &[2.0, 2.0]);

        let bad = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(a.add(bad).is_err());
    }

    #[test]
    fn matmul_hand_values() {
        let tape = Tape::new();
        let m = tape.leaf(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = tape.leaf(Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap());
        assert_eq!(m.matmul(ones).unwrap().value().data(), &[3.0, 7.0]);
        let eye = tape.leaf(Tensor::identity(2));
        assert_eq!(eye.matmul(m).unwrap().value(), m.value());
        let wrong = tape.leaf(Tensor::new(vec![3, 1], vec![1.0; 3]).unwrap());
        assert!(m.matmul(wrong).is_err());
    }

    #[test]
    fn matmul_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&[3, 4], &mut rng);
        let b = random(&[4, 2], &mut rng);
        let w = random(&[3, 2], &mut rng);
        let report = grad_check(
            |tape, v| {
                let weights = tape.constant(w.clone());
                Ok(v[0].matmul(v[1])?.mul(weights)?.sum_all())
            },
            &[a, b],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn batched_matmul_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random(&[2, 3, 3], &mut rng);
        let b = random(&[2, 3, 3], &mut rng);
        let shared = random(&[3, 2], &mut rng);
        let w = random(&[2, 3, 2], &mut rng);
        let report = grad_check(
            |tape, v| {
                let weights = tape.constant(w.clone());
                Ok(v[0].matmul(v[1])?.matmul(v[2])?.mul(weights)?.sum_all())
            },
            &[a, b, shared],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn elementwise_values_and_gradients() {
        let tape = Tape::new();
        let one = tape.leaf(Tensor::scalar(1.0));
        assert_eq!(one.log().unwrap().item(), 0.0);

        let x = tape.leaf(Tensor::vector(vec![-2.0, 0.0, 3.0]));
        let r = x.relu();
        assert_eq!(r.value().data(), &[0.0, 0.0, 3.0]);
        tape.backward(r.sum_all()).unwrap();
        assert_eq!(x.grad().data(), &[0.0, 0.0, 1.0]);

        let neg = tape.leaf(Tensor::vector(vec![1.0, -1.0]));
        assert!(neg.log().is_err());
        assert!(neg.clamp(1e-12, f64::INFINITY).is_err());
        assert_eq!(neg.clamp(1e-12, 1.0).unwrap().log().unwrap().value().data()[1], 1e-12f64.ln());
    }

    #[test]
    fn mul_and_smooth_ops_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for shape in [[2, 3], [4, 1], [1, 5]] {
            let a = random(&shape, &mut rng);
            let b = random(&shape, &mut rng);
            let report = grad_check(
                |_, v| {
                    let prod = v[0].mul(v[1])?;
                    let smooth = prod.exp().add(v[0].softplus())?.sub(v[1].neg())?;
                    let pos = smooth.mul(smooth)?.offset(0.5).log()?;
                    Ok(pos.scale(0.3).sum_all())
                },
                &[a, b],
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(report.passed, "{shape:?}: {}", report.max_rel_error);
        }
    }

    #[test]
    fn reductions() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 2], vec![1.0, 1.0, 2.0, 2.0]).unwrap());
        assert_eq!(x.sum(1).unwrap().value().data(), &[2.0, 4.0]);
        assert_eq!(x.sum(0).unwrap().value().data(), &[3.0, 3.0]);
        assert!(x.sum(2).is_err());
        let c = tape.leaf(Tensor::full(&[3, 4], 2.5));
        assert_eq!(c.mean(0).unwrap().mean(0).unwrap().item(), 2.5);
        assert_eq!(c.mean_all().item(), 2.5);

        let s = x.sum(1).unwrap().sum_all();
        tape.backward(s).unwrap();
        assert_eq!(x.grad(), Tensor::ones(&[2, 2]));
    }

    #[test]
    fn reduction_and_logsumexp_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random(&[2, 3, 4], &mut rng);
        let w = random(&[2, 4], &mut rng);
        let report = grad_check(
            |tape, v| {
                let weights = tape.constant(w.clone());
                let m = v[0].mean(1)?.mul(weights)?;
                m.log_sum_exp()?.sum_all().add(v[0].sum(2)?.transpose()?.sum_all())
            },
            &[a],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{}", report.max_rel_error);
    }

    #[test]
    fn logistic_relaxation() {
        let tape = Tape::new();
        for beta in [0.1, 1.0, 7.0] {
            let z = tape.leaf(Tensor::scalar(0.0));
            assert_eq!(z.sigma_logistic(beta).unwrap().item(), 0.5);
        }
        let two = tape.leaf(Tensor::scalar(2.0));
        assert_abs_diff_eq!(two.sigma_logistic(1.0).unwrap().item(), 0.880797, epsilon = 1e-6);
        let s = Sigmoid::Logistic { beta: 1.3 };
        for x in [-40.0, -3.0, -0.2, 0.7, 5.0, 700.0] {
            assert_abs_diff_eq!(s.eval(x) + s.eval(-x), 1.0, epsilon = 1e-12);
        }
        assert!(two.sigma_logistic(0.0).is_err());
    }

    #[test]
    fn cauchy_relaxation() {
        let tape = Tape::new();
        let z = tape.leaf(Tensor::scalar(0.0));
        assert_eq!(z.sigma_cauchy(3.0).unwrap().item(), 0.5);
        let big = tape.leaf(Tensor::scalar(1e9));
        assert!(big.sigma_cauchy(1.0).unwrap().item() > 1.0 - 1e-6);
        assert!(big.sigma_cauchy(-1.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[6], &mut rng);
        let report = grad_check(
            |_, v| Ok(v[0].sigma_cauchy(2.5)?.sum_all()),
            &[x],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{}", report.max_rel_error);
    }

    #[test]
    fn swap_matrix_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random(&[2, 5], &mut rng);
        let w = random(&[2, 5, 5], &mut rng);
        for s in [Sigmoid::Logistic { beta: 2.0 }, Sigmoid::Cauchy { beta: 3.0 }] {
            let report = grad_check(
                |tape, v| {
                    let weights = tape.constant(w.clone());
                    let m = tape.swap_matrix(v[0], &[(0, 3), (1, 2)], s)?;
                    Ok(m.mul(weights)?.sum_all())
                },
                std::slice::from_ref(&a),
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(report.passed, "{s:?}: {}", report.max_rel_error);
        }
    }

    #[test]
    fn swap_matrix_rejects_bad_layers() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![0.0; 4]));
        let s = Sigmoid::Logistic { beta: 1.0 };
        assert!(tape.swap_matrix(a, &[(1, 0)], s).is_err());
        assert!(tape.swap_matrix(a, &[(0, 4)], s).is_err());
        assert!(tape.swap_matrix(a, &[(0, 1), (1, 2)], s).is_err());
    }

    #[test]
    fn backward_on_constant_and_sum() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let c = tape.constant(Tensor::scalar(4.0));
        tape.backward(c).unwrap();
        assert_eq!(x.grad(), Tensor::zeros(&[3]));

        let s = x.sum_all();
        tape.backward(s).unwrap();
        assert_eq!(x.grad(), Tensor::ones(&[3]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn backward_twice_doubles_then_reset_zeroes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let tape = Tape::new();
        let x = tape.leaf(random(&[3, 3], &mut rng));
        let loss = x.mul(x).unwrap().exp().mean_all();
        tape.backward(loss).unwrap();
        let once = x.grad();
        tape.backward(loss).unwrap();
        let twice = x.grad();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert_eq!(2.0 * a, *b);
        }
        tape.reset_grads();
        assert_eq!(x.grad(), Tensor::zeros(&[3, 3]));
    }

    #[test]
    fn deterministic_replay() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(14);
            let tape = Tape::new();
            let a = tape.leaf(random(&[4, 4], &mut rng));
            let b = tape.leaf(random(&[4, 4], &mut rng));
            let loss = a.matmul(b).unwrap().softplus().sum_all();
            tape.backward(loss).unwrap();
            (loss.item().to_bits(), a.grad(), b.grad())
        };
        let (l1, ga1, gb1) = run();
        let (l2, ga2, gb2) = run();
        assert_eq!(l1, l2);
        assert_eq!(ga1, ga2);
        assert_eq!(gb1, gb2);
    }

    #[test]
    fn grad_check_utility() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random(&[5], &mut rng);
        let report = grad_check(|_, v| Ok(v[0].mul(v[0])?.sum_all()), &[x], 1e-3, 1e-8).unwrap();
        assert!(report.passed);
        assert!(report.max_rel_error < 1e-8);

        // A jump at zero: the analytic slope is 1, the difference quotient explodes.
        let report = grad_check(
            |tape, v| {
                let jump = if v[0].item() >= 0.0 { 1.0 } else { 0.0 };
                Ok(v[0].add(tape.constant(Tensor::scalar(jump)))?.sum_all())
            },
            &[Tensor::scalar(0.0)],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed);

        let blowup = grad_check(|_, v| Ok(v[0].scale(1e308).exp().sum_all()), &[Tensor::scalar(1.0)], 1e-5, 1e-4);
        assert!(blowup.is_err());
        assert!(grad_check(|_, v| Ok(v[0].sum_all()), &[Tensor::scalar(1.0)], 0.0, 1e-4).is_err());
    }
}

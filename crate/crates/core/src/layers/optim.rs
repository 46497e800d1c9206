use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Plain gradient descent: `p <- p - lr * g` for every parameter tensor.
pub fn sgd_step<T: Element>(params: Vec<&mut Tensor<T>>, grads: &[&Tensor<T>], lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
    }
    if params.len() != grads.len() {
        return Err(Error::shape(format!(
            "sgd_step: {} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        p.check_same_shape(g)?;
    }
    let lr = T::from_f64(lr);
    for (p, g) in params.into_iter().zip(grads) {
        for (v, &d) in p.data_mut().iter_mut().zip(g.data()) {
            *v -= lr * d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::full(Shape::new(1, 1, 1, 1).unwrap(), v)
    }

    #[test]
    fn single_step() {
        let mut p = scalar(1.0);
        sgd_step(vec![&mut p], &[&scalar(2.0)], 0.1).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_lr_and_shapes() {
        let mut p = scalar(1.0);
        assert!(sgd_step(vec![&mut p], &[&scalar(2.0)], 0.0).is_err());
        let g = Tensor::zeros(Shape::new(1, 2, 1, 1).unwrap());
        assert!(sgd_step(vec![&mut p], &[&g], 0.1).is_err());
    }

    #[test]
    fn quadratic_converges() {
        // loss = (p - 3)^2, grad = 2(p - 3); error contracts by (1 - 2*lr) = 0.8 per step,
        // so after 100 steps |p - 3| = 3 * 0.8^100 ~ 6e-10 and loss ~ 4e-19.
        let mut p = scalar(0.0);
        for _ in 0..100 {
            let g = scalar(2.0 * (p.data()[0] - 3.0));
            sgd_step(vec![&mut p], &[&g], 0.1).unwrap();
        }
        let loss = (p.data()[0] - 3.0).powi(2);
        let closed_form = (3.0 * 0.8f64.powi(100)).powi(2);
        assert!(loss < 1e-6);
        assert!((loss - closed_form).abs() < 1e-20);
    }
}

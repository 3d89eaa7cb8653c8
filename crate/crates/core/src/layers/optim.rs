use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One momentum SGD step: `v <- momentum*v - lr*g`, then `p <- p + v`.
pub fn sgd_update<T: Scalar>(
    params: &mut Tensor<T>,
    grads: &Tensor<T>,
    velocity: &mut Tensor<T>,
    learning_rate: T,
    momentum: T,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(velocity) {
        return shape_err(format!(
            "sgd shapes disagree: params {:?}, grads {:?}, velocity {:?}",
            params.shape(),
            grads.shape(),
            velocity.shape()
        ));
    }
    if !(learning_rate > T::zero()) {
        return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
    }
    if !(momentum >= T::zero() && momentum < T::one()) {
        return Err(Error::Config(format!("momentum must lie in [0,1), got {momentum}")));
    }
    for ((p, v), &g) in params.data_mut().iter_mut().zip(velocity.data_mut()).zip(grads.data()) {
        *v = momentum * *v - learning_rate * g;
        *p += *v;
    }
    Ok(())
}

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = T::total(exps.iter().copied());
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of the softmax of `logits` against `true_class`, returning
/// the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, true_class: usize) -> (T, Tensor<T>) {
    let z = logits.data();
    assert!(true_class < z.len(), "class {true_class} out of range for {} logits", z.len());
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let sum_exp = T::total(z.iter().map(|&v| (v - max).exp()));
    let log_sum = sum_exp.ln();
    let loss = -(z[true_class] - max - log_sum);
    let mut grad = softmax(z);
    grad[true_class] -= T::one();
    (loss, Tensor::new(logits.shape().to_vec(), grad).expect("same shape as logits"))
}

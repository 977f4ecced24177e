use rand::Rng;

use super::Tensor;

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Tensor with entries drawn uniformly from `[-limit, limit)`.
pub fn uniform_init<R: Rng + ?Sized>(shape: &[usize], limit: f64, rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    let data = if limit > 0.0 {
        (0..n).map(|_| rng.random_range(-limit..limit)).collect()
    } else {
        vec![0.0; n]
    };
    Tensor::from_vec(shape, data).expect("shape product matches")
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// `(fan_in, fan_out)` for dense `[out, in]` and conv `[out, in, kernel]`
/// weight layouts; 1-D shapes use their length for both.
pub fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    let (fan_in, fan_out) = match shape {
        [n] => (*n, *n),
        [out, inp] => (*inp, *out),
        [out, inp, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (inp * receptive, out * receptive)
        }
        [] => (0, 0),
    };
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidShape(format!(
            "cannot derive nonzero fan-in/fan-out from {shape:?}"
        )));
    }
    Ok((fan_in, fan_out))
}

pub fn xavier_bound(shape: &[usize]) -> Result<f64> {
    let (fan_in, fan_out) = fans(shape)?;
    Ok((6.0 / (fan_in + fan_out) as f64).sqrt())
}

/// Glorot-uniform sample drawn from `rng`.
pub fn xavier_uniform<R: Rng>(shape: &[usize], rng: &mut R) -> Result<Tensor> {
    let bound = xavier_bound(shape)?;
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data)
}

pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    xavier_uniform(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_mean() {
        let t = xavier_init(&[100, 100], 7).unwrap();
        let bound = (6.0f64 / 200.0).sqrt();
        assert!((bound - 0.1732).abs() < 1e-4);
        assert!(t.data().iter().all(|v| v.abs() <= bound));
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01);
        // The sample should actually span the interval.
        let max = t.data().iter().cloned().fold(f64::MIN, f64::max);
        assert!(max > 0.9 * bound);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(xavier_init(&[4, 3, 5], 1).unwrap(), xavier_init(&[4, 3, 5], 1).unwrap());
        assert_ne!(xavier_init(&[4, 3, 5], 1).unwrap(), xavier_init(&[4, 3, 5], 2).unwrap());
    }

    #[test]
    fn unit_bound_for_three_by_three() {
        assert_eq!(xavier_bound(&[3, 3]).unwrap(), 1.0);
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(matches!(xavier_init(&[0, 3], 0), Err(Error::InvalidShape(_))));
        assert!(xavier_init(&[], 0).is_err());
    }
}

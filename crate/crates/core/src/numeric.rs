//! Small numeric helpers shared across modules: deterministic summation and
//! seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PAIRWISE_LEAF: usize = 32;

/// Pairwise (tree) summation with a fixed split order.
///
/// The tree shape depends only on the slice length, so the result is
/// bit-identical however the inputs were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and sample standard error of the mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// A ChaCha8 generator positioned on an independent stream.
///
/// Parallel work is cut into fixed-size chunks and chunk `i` always draws
/// from stream `i`, which keeps results independent of the worker count.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Euclidean norm.
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Geometric schedule `start, start*factor, ...` with `count` terms.
pub fn geometric(start: f64, factor: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut v = start;
    for _ in 0..count {
        out.push(v);
        v *= factor;
    }
    out
}

/// Volume of the unit ball in R^dim.
pub(crate) fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_m = 2π/m · V_{m-2}
    let mut even = 1.0;
    let mut odd = 2.0;
    let mut m = 2;
    while m <= dim {
        if m % 2 == 0 {
            even *= 2.0 * std::f64::consts::PI / m as f64;
        } else {
            odd *= 2.0 * std::f64::consts::PI / m as f64;
        }
        m += 1;
    }
    if dim.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

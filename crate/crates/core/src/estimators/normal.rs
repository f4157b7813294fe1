//! Normal-distribution kernels that stay accurate deep in the lower tail.

use rand::Rng;
use rand_distr::Open01;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::SQRT_2;

/// Below this point the CDF is evaluated through the Mills ratio and the
/// truncated sampler switches to the exponential-proposal tail method.
pub const TAIL_CUTOFF: f64 = -8.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Phi(x)`.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > 0.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else if x >= TAIL_CUTOFF {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let t = -x;
        -0.5 * t * t - LN_SQRT_2PI + mills_ratio(t).ln()
    }
}

/// `Phi(x)` without the cancellation of `1 - Phi(-x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `(1 - Phi(t)) / phi(t)` for `t > 0` by the Laplace continued fraction
/// `1 / (t + 1 / (t + 2 / (t + 3 / ...)))`, evaluated with modified Lentz.
fn mills_ratio(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64;
        d = t + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = t + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Draws `Z ~ N(0, 1)` conditioned on `Z < upper`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(upper: f64, rng: &mut R) -> f64 {
    if upper >= TAIL_CUTOFF {
        let mass = normal_cdf(upper);
        loop {
            let u: f64 = rng.sample(Open01);
            let x = -SQRT_2 * erfc_inv(2.0 * u * mass);
            if x < upper {
                return x;
            }
        }
    }
    // Robert (1995): Z = -Y with Y > a, proposal a + Exp(rate) with the
    // optimal rate, accepted with probability exp(-(y - rate)^2 / 2).
    let a = -upper;
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u: f64 = rng.sample(Open01);
        let y = a - u.ln() / rate;
        let accept: f64 = rng.sample(Open01);
        if accept <= (-0.5 * (y - rate).powi(2)).exp() && y > a {
            return -y;
        }
    }
}

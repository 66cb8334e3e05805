//! Log-space numeric primitives shared across the crate.
//!
//! All densities in this crate live in log space; these helpers keep them
//! overflow-safe for exponents up to several hundred.

/// `ln(1 + exp(x))`, overflow-safe for |x| up to and beyond 700.
///
/// Piecewise evaluation after Mächler: exact asymptotes at both ends.
pub fn log1pexp(x: f64) -> f64 {
    if x <= -37.0 {
        x.exp()
    } else if x <= 18.0 {
        x.exp().ln_1p()
    } else if x <= 33.3 {
        x + (-x).exp()
    } else {
        x
    }
}

/// Logistic function `1 / (1 + exp(-x))`, saturating cleanly at 0 and 1.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1pexp(lo - hi)
}

/// `ln Σ exp(x_i)` over a slice, in the slice's order.
///
/// Returns `-inf` for an empty slice or all-`-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

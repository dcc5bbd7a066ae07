use crate::error::{Error, Result};

/// The digamma function ψ(x) = d/dx ln Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(digamma_positive(x))
    } else {
        Err(Error::Domain(x))
    }
}

/// ψ(x) without the domain check; `x` must be positive and finite.
pub(crate) fn digamma_positive(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut result = 0.0;
    // ψ(x) = ψ(x + 1) - 1/x until the asymptotic series is accurate.
    while x < 6.0 {
        result -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k x^2k), k = 1..7.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    result + x.ln() - 0.5 * inv - series
}

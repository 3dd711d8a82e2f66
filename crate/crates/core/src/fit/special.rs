use statrs::function::erf::erfc;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Scaled complementary error function exp(x²)·erfc(x).
///
/// Direct product below x = 4; above that a Lentz-free backward evaluation of
/// the Laplace continued fraction, which avoids the underflow of erfc.
pub fn erfcx(x: f64) -> f64 {
    if x < 4.0 {
        return (x * x).exp() * erfc(x);
    }
    // erfc(x) e^{x²} = (1/√π) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    FRAC_1_SQRT_PI / tail
}

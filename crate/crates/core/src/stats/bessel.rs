//! Modified Bessel function of the first kind, order zero.

/// Chebyshev coefficients of `e^{−z} I0(z) √z` on `z ∈ [8, ∞)` in the
/// variable `32/z − 2` (Cephes `i0.c`).
const LARGE_Z: [f64; 25] = [
    -7.233_180_487_874_754e-18,
    -4.830_504_485_944_182e-18,
    4.465_621_420_296_76e-17,
    3.461_222_867_697_461e-17,
    -2.827_623_980_516_583_5e-16,
    -3.425_485_619_677_219e-16,
    1.772_560_133_056_526_4e-15,
    3.811_680_669_352_622_4e-15,
    -9.554_846_698_828_307e-15,
    -4.150_569_347_287_222e-14,
    1.540_086_217_521_41e-14,
    3.852_778_382_742_142_6e-13,
    7.180_124_451_383_666e-13,
    -1.794_178_531_506_806_2e-12,
    -1.321_581_184_044_771_3e-11,
    -3.149_916_527_963_241_6e-11,
    1.188_914_710_784_643_9e-11,
    4.940_602_388_224_97e-10,
    3.396_232_025_708_386_3e-9,
    2.266_668_990_498_178e-8,
    2.048_918_589_469_063_8e-7,
    2.891_370_520_834_756_5e-6,
    6.889_758_346_916_824e-5,
    3.369_116_478_255_694e-3,
    8.044_904_110_141_088e-1,
];

/// Point where evaluation switches from the power series to the expansion.
const CROSSOVER: f64 = 8.0;

fn chebyshev(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

/// `Σ_k (z²/4)^k / (k!)²`; all terms are positive, so it is accurate to
/// round-off wherever it is used.
pub(crate) fn power_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let (mut term, mut sum) = (1.0, 1.0);
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

pub(crate) fn expansion_scaled(z: f64) -> f64 {
    chebyshev(32.0 / z - 2.0, &LARGE_Z) / z.sqrt()
}

/// Both evaluation branches at `z`: the power series and the large-argument
/// expansion. Used to check that they agree near the crossover.
pub fn bessel_i0_branches(z: f64) -> (f64, f64) {
    (power_series(z), z.exp() * expansion_scaled(z))
}

/// `I0(z)`. Overflows to infinity beyond `z ≈ 713`; use
/// [`bessel_i0_scaled`] there.
pub fn bessel_i0(z: f64) -> f64 {
    let z = z.abs();
    if z < CROSSOVER {
        power_series(z)
    } else {
        z.exp() * expansion_scaled(z)
    }
}

/// `e^{−z} I0(z)`, finite for all `z ≥ 0`.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let z = z.abs();
    if z < CROSSOVER {
        (-z).exp() * power_series(z)
    } else {
        expansion_scaled(z)
    }
}

//! Branch-free `sin`/`cos` over slices.
//!
//! Same polynomial kernels as fdlibm on `[-π/4, π/4]` after a three-part
//! Cody-Waite reduction. Written without data-dependent branches so the
//! compiler can vectorise the loop; accuracy is within a couple of ulp of
//! `f64::sin_cos` for `|x| <= REDUCTION_LIMIT`, beyond which the slice falls
//! back to the standard library.

const FRAC_2_PI: f64 = std::f64::consts::FRAC_2_PI;
// π/2 split into 33-bit pieces so that `q·PIO2_n` is exact for |q| < 2^20.
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e+00;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
// 1.5·2^52: adding and subtracting rounds to the nearest integer, and the
// low mantissa bits of the sum hold that integer.
const SHIFTER: f64 = 6_755_399_441_055_744.0;
pub(crate) const REDUCTION_LIMIT: f64 = 1.0e5;

const S1: f64 = -1.666_666_666_666_663_243_48e-01;
const S2: f64 = 8.333_333_333_322_489_461_24e-03;
const S3: f64 = -1.984_126_982_985_794_931_34e-04;
const S4: f64 = 2.755_731_370_707_006_767_89e-06;
const S5: f64 = -2.505_076_025_340_686_341_95e-08;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-02;
const C2: f64 = -1.388_888_888_887_410_957_49e-03;
const C3: f64 = 2.480_158_728_947_672_941_78e-05;
const C4: f64 = -2.755_731_435_139_066_330_35e-07;
const C5: f64 = 2.087_572_321_298_174_827_90e-09;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn sincos_one(x: f64) -> (f64, f64) {
    let shifted = x * FRAC_2_PI + SHIFTER;
    let quadrant = shifted.to_bits();
    let q = shifted - SHIFTER;
    let r = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;

    let z = r * r;
    let sin_r = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let cos_r = w + (((1.0 - w) - hz) + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6))))));

    let swap = 0u64.wrapping_sub(quadrant & 1);
    let sin_sign = (quadrant & 2) << 62;
    let cos_sign = (quadrant.wrapping_add(1) & 2) << 62;
    let (sb, cb) = (sin_r.to_bits(), cos_r.to_bits());
    let sin = f64::from_bits(((sb & !swap) | (cb & swap)) ^ sin_sign);
    let cos = f64::from_bits(((cb & !swap) | (sb & swap)) ^ cos_sign);
    (sin, cos)
}

/// `sin[i], cos[i] = sin(x[i]), cos(x[i])`.
pub(crate) fn sincos_slice(x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
    assert!(x.len() == sin.len() && x.len() == cos.len());
    if x.iter().any(|v| !(v.abs() <= REDUCTION_LIMIT)) {
        for ((v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
            (*s, *c) = v.sin_cos();
        }
        return;
    }
    for ((v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
        (*s, *c) = sincos_one(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rng_stream;
    use rand::Rng;

    #[test]
    fn matches_std_to_a_few_ulp() {
        let mut rng = rng_stream(0, 0);
        let mut x: Vec<f64> = (0..200_000)
            .map(|i| {
                let scale = [1.0, 10.0, 300.0, 5e4][i % 4];
                rng.random_range(-scale..scale)
            })
            .collect();
        // quadrant boundaries and special points
        for m in -40..=40 {
            let b = m as f64 * std::f64::consts::FRAC_PI_4;
            x.extend([b, b.next_up(), b.next_down()]);
        }
        x.extend([0.0, -0.0, 1e-300, REDUCTION_LIMIT, -REDUCTION_LIMIT]);
        let mut s = vec![0.0; x.len()];
        let mut c = vec![0.0; x.len()];
        sincos_slice(&x, &mut s, &mut c);
        for i in 0..x.len() {
            let (ws, wc) = x[i].sin_cos();
            assert!((s[i] - ws).abs() <= 4.0 * f64::EPSILON, "sin({}) {} vs {}", x[i], s[i], ws);
            assert!((c[i] - wc).abs() <= 4.0 * f64::EPSILON, "cos({}) {} vs {}", x[i], c[i], wc);
        }
    }

    #[test]
    fn falls_back_outside_reduction_range() {
        let x = [1.0, 3e7, f64::NAN];
        let mut s = [0.0; 3];
        let mut c = [0.0; 3];
        sincos_slice(&x, &mut s, &mut c);
        assert_eq!((s[1], c[1]), 3e7f64.sin_cos());
        assert!(s[2].is_nan() && c[2].is_nan());
    }
}

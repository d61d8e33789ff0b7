//! Hankel functions of the first kind, orders 0 and 1, for real positive
//! arguments.
//!
//! Small arguments use the ascending series of `J_n` and `Y_n`; large
//! arguments use Hankel's asymptotic expansion truncated at its smallest term.
//! The crossover sits where the asymptotic series can still reach ~1e-11
//! (its smallest term decays like `exp(-2x)`) while the ascending series has
//! not yet lost more than a few digits to cancellation.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 12.5;

/// `H_0^(1)(x) = J_0(x) + i Y_0(x)`.
pub fn hankel1_0(x: f64) -> Complex64 {
    debug_assert!(x > 0.0);
    if x <= SERIES_LIMIT {
        let (j0, _, y0, _) = series(x);
        Complex64::new(j0, y0)
    } else {
        asymptotic(0.0, x)
    }
}

/// `H_1^(1)(x) = J_1(x) + i Y_1(x)`.
pub fn hankel1_1(x: f64) -> Complex64 {
    debug_assert!(x > 0.0);
    if x <= SERIES_LIMIT {
        let (_, j1, _, y1) = series(x);
        Complex64::new(j1, y1)
    } else {
        asymptotic(1.0, x)
    }
}

/// Both orders at once; the series path shares its terms.
pub fn hankel1_01(x: f64) -> (Complex64, Complex64) {
    if x <= SERIES_LIMIT {
        let (j0, j1, y0, y1) = series(x);
        (Complex64::new(j0, y0), Complex64::new(j1, y1))
    } else {
        (asymptotic(0.0, x), asymptotic(1.0, x))
    }
}

/// Returns `(J0, J1, Y0, Y1)`.
fn series(x: f64) -> (f64, f64, f64, f64) {
    let q = 0.25 * x * x;
    let half = 0.5 * x;
    let log_term = half.ln();

    // term0 = (-q)^m / (m!)^2, term1 = (-q)^m / (m!(m+1)!)
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0; // H_m
    let mut j0 = 1.0;
    let mut j1 = 1.0;
    let mut y0_sum = 0.0;
    // psi(m+1) + psi(m+2) = -2γ + H_m + H_{m+1}
    let mut y1_sum = -2.0 * EULER_GAMMA + 1.0;
    for m in 1..200 {
        let mf = m as f64;
        term0 *= -q / (mf * mf);
        term1 *= -q / (mf * (mf + 1.0));
        harmonic += 1.0 / mf;
        j0 += term0;
        j1 += term1;
        y0_sum -= harmonic * term0;
        y1_sum += (-2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (mf + 1.0)) * term1;
        if term0.abs() < 1e-17 * j0.abs().max(1e-300) && term0.abs() < 1e-20 {
            break;
        }
        if mf > 2.0 * x + 10.0 && term0.abs() < 1e-18 && term1.abs() < 1e-18 {
            break;
        }
    }
    let j1 = half * j1;
    let y0 = 2.0 / PI * ((log_term + EULER_GAMMA) * j0 + y0_sum);
    let y1 = -2.0 / (PI * x) + 2.0 / PI * log_term * j1 - half / PI * y1_sum;
    (j0, j1, y0, y1)
}

/// `H_ν^(1)(x) ≈ sqrt(2/(πx)) exp(i(x - νπ/2 - π/4)) Σ_k i^k a_k(ν) / x^k`.
fn asymptotic(nu: f64, x: f64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * Complex64::new(0.0, (mu - odd * odd) / (8.0 * kf * x));
        let size = next.norm();
        if size >= last {
            break;
        }
        sum += next;
        term = next;
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    let phase = x - 0.5 * nu * PI - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

//! Special functions shared across the crate: log-gamma, the regularized
//! incomplete gamma pair and its inverse, the standard normal distribution,
//! and the Kolmogorov limit distribution.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

fn gamma_series(s: f64, x: f64) -> f64 {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + s * x.ln() - ln_gamma(s)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(s, x).
fn gamma_continued_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + s * x.ln() - ln_gamma(s)).exp() * h
}

/// Regularized lower incomplete gamma `P(s, x)`, i.e. the CDF of
/// `Gamma(s, 1)` at `x`. Series below `x = s + 1`, continued fraction above.
pub fn gamma_p(s: f64, x: f64) -> f64 {
    assert!(s > 0.0, "gamma shape must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < s + 1.0 {
        gamma_series(s, x).min(1.0)
    } else {
        (1.0 - gamma_continued_fraction(s, x)).max(0.0)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`.
pub fn gamma_q(s: f64, x: f64) -> f64 {
    assert!(s > 0.0, "gamma shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < s + 1.0 {
        (1.0 - gamma_series(s, x)).max(0.0)
    } else {
        gamma_continued_fraction(s, x).min(1.0)
    }
}

/// Inverse of [`gamma_p`] in its second argument: the `p`-quantile of
/// `Gamma(s, 1)`. Returns 0 for `p <= 0` and infinity for `p >= 1`.
pub fn gamma_p_inv(s: f64, p: f64) -> f64 {
    assert!(s > 0.0, "gamma shape must be positive");
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let gln = ln_gamma(s);
    let a1 = s - 1.0;
    let (lna1, afac) = if s > 1.0 {
        (a1.ln(), (a1 * (a1.ln() - 1.0) - gln).exp())
    } else {
        (0.0, 0.0)
    };

    // Starting point: Wilson-Hilferty for s > 1, a power-law/exponential
    // split of the small-shape CDF otherwise.
    let mut x = if s > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        (s * (1.0 - 1.0 / (9.0 * s) - z / (3.0 * s.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - s * (0.253 + s * 0.12);
        if p < t {
            (p / t).powf(1.0 / s)
        } else {
            1.0 - (1.0 - (p - t) / (1.0 - t)).ln()
        }
    };

    // Halley iterations on P(s, x) - p.
    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = gamma_p(s, x) - p;
        let t = if s > 1.0 {
            afac * (-(x - a1) + a1 * (x.ln() - lna1)).exp()
        } else {
            (-x + a1 * x.ln() - gln).exp()
        };
        if t == 0.0 {
            break;
        }
        let u = err / t;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if step.abs() < 1e-14 * x.abs() {
            break;
        }
    }
    x
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival `1 - Φ(x)`, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile `Φ⁻¹(p)`: Wichura's AS 241 (PPND16) followed by
/// one Newton correction against [`normal_cdf`] / [`normal_sf`].
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = ppnd16(p);
    if !x.is_finite() {
        return x;
    }
    // Newton step in whichever tail keeps the residual well conditioned.
    let resid = if p < 0.5 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_sf(x)
    };
    let d = normal_pdf(x);
    if d > 0.0 {
        x - resid / d
    } else {
        x
    }
}

fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_5 * r + 28729.085_735_721_942) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_0)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let r0 = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r0.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4)
                * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_3)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7)
                * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small λ.
        let y = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let term = y.powi((k * k) as i32);
            sum += term;
            if term < 1e-17 * sum || k > 100 {
                break;
            }
            k += 2;
        }
        let cdf = (2.0 * PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100u32 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value of a one-sample KS statistic `d` computed from `n`
/// observations (Stephens' small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

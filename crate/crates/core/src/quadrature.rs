//! Adaptive one-dimensional quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature exceeded its budget of {budget} integrand evaluations (estimate {estimate}, error {error:e})")]
    BudgetExhausted {
        budget: usize,
        estimate: f64,
        error: f64,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, using at most `max_evals` evaluations of `f`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_evals: usize) -> Result<Integral, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: f64| -> Result<f64, QuadratureError> {
        evals.set(evals.get() + 1);
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    };
    let fa = eval(a)?;
    let fb = eval(b)?;
    let m = 0.5 * (a + b);
    let fm = eval(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    // explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    let mut stack = vec![(a, b, fa, fm, fb, whole, tol, 0u32)];
    let mut total = 0.0;
    let mut err_total = 0.0;
    while let Some((a, b, fa, fm, fb, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= 50 || delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * m.abs() {
            total += left + right + delta / 15.0;
            err_total += delta.abs() / 15.0;
        } else {
            if evals.get() + 2 * stack.len() + 4 > max_evals {
                return Err(QuadratureError::BudgetExhausted {
                    budget: max_evals,
                    estimate: total + left + right,
                    error: err_total + delta.abs(),
                });
            }
            stack.push((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1));
            stack.push((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1));
        }
    }
    Ok(Integral { value: total, error: err_total, evaluations: evals.get() })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_KRONROD_W[7] * fc;
    let mut gauss = GK_GAUSS_W[3] * fc;
    for (i, &x) in GK_NODES.iter().take(7).enumerate() {
        let pair = f(c - h * x) + f(c + h * x);
        kronrod += GK_KRONROD_W[i] * pair;
        if i % 2 == 1 {
            gauss += GK_GAUSS_W[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature: the interval with the
/// largest error estimate is bisected until the summed estimate falls below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn gauss_kronrod<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<Integral, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(QuadratureError::NonFinite(a));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, error, evaluations: evals });
        }
        if parts.len() >= max_intervals {
            return Err(QuadratureError::BudgetExhausted { budget: evals, estimate: value, error });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evals += 30;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_polynomial_is_exact() {
        let r = adaptive_simpson(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 1 << 20).unwrap();
        assert_abs_diff_eq!(r.value, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn simpson_log_integral() {
        // ∫_0^{1/2} 1/(1-x) dx = ln 2
        let r = adaptive_simpson(|x| 1.0 / (1.0 - x), 0.0, 0.5, 1e-10, 1 << 20).unwrap();
        assert_abs_diff_eq!(r.value, 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn simpson_budget_is_enforced() {
        let r = adaptive_simpson(|x| (1.0 / x).sin(), 1e-6, 1.0, 1e-14, 64);
        assert!(matches!(r, Err(QuadratureError::BudgetExhausted { .. })));
    }

    #[test]
    fn gauss_kronrod_gaussian_tail() {
        let r = gauss_kronrod(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            3.0,
            20.0,
            1e-16,
            1e-13,
            200,
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, crate::special::normal_sf(3.0), epsilon = 1e-15);
    }
}

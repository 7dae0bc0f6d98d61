//! Derivative-free minimization of convex functions over boxes.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Both endpoints are also evaluated, so boundary minimizers are found
/// exactly. Returns `(argmin, min)`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, width: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x)?;
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Minimizes a jointly convex `f(x, y)` over `[0, cap]^2` by golden-section in
/// `x` over the partial minimum in `y`, which is itself convex.
pub fn nested_golden<F>(mut f: F, cap: f64, width: f64) -> Result<([f64; 2], f64)>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let mut inner_arg = std::collections::HashMap::new();
    let (x, val) = golden_section(
        |x| {
            let (y, v) = golden_section(|y| f(x, y), 0.0, cap, width)?;
            inner_arg.insert(x.to_bits(), y);
            Ok(v)
        },
        0.0,
        cap,
        width,
    )?;
    Ok(([x, inner_arg[&x.to_bits()]], val))
}

/// Projected subgradient descent on `[0, cap]^m` with step `scale / sqrt(k)`;
/// returns the best point seen.
pub fn projected_subgradient<F>(
    mut f: F,
    m: usize,
    cap: f64,
    iterations: usize,
    scale: f64,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = vec![0.0; m];
    let (v0, mut grad) = f(&x)?;
    let mut best = (x.clone(), v0);
    for k in 1..=iterations {
        let step = scale / (k as f64).sqrt();
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi = (*xi - step * g).clamp(0.0, cap);
        }
        let (v, g) = f(&x)?;
        if v < best.1 {
            best = (x.clone(), v);
        }
        grad = g;
    }
    Ok(best)
}

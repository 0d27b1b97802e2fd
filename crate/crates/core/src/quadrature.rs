//! Adaptive Simpson quadrature for 1-D reference integrals.

/// `int_a^b f` to absolute tolerance `tol`. Kinks listed in `breaks` are used
/// as panel boundaries so piecewise-smooth integrands converge quickly.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut nodes: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    nodes.push(a);
    nodes.extend(breaks.iter().copied().filter(|t| *t > a && *t < b));
    nodes.push(b);
    nodes.sort_by(|x, y| x.total_cmp(y));
    nodes.dedup();
    let panels = (nodes.len() - 1).max(1) as f64;
    nodes
        .windows(2)
        .map(|w| simpson_panel(&f, w[0], w[1], tol / panels))
        .sum()
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// CDF of one coordinate of a uniform draw from the unit ball in R^d.
/// The marginal density is proportional to `(1 - t^2)^((d - 1) / 2)`.
pub fn ball_marginal_cdf(dim: usize, t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let p = (dim as f64 - 1.0) / 2.0;
    let density = |s: f64| (1.0 - s * s).max(0.0).powf(p);
    let total = integrate(density, -1.0, 1.0, &[], 1e-13);
    // integrate the shorter tail for accuracy
    if t <= 0.0 {
        integrate(density, -1.0, t, &[], 1e-13) / total
    } else {
        1.0 - integrate(density, t, 1.0, &[], 1e-13) / total
    }
}

//! Composite Simpson quadrature on (possibly nonuniform) grids with
//! cumulative prefix integrals.

use crate::linalg::{CMat, C64};

/// Weights of `∫_a^b p(x) dx` for the quadratic `p` through `xs`.
fn quadratic_weights(xs: [f64; 3], a: f64, b: f64) -> [f64; 3] {
    let x0 = xs[0];
    let z = [0.0, xs[1] - x0, xs[2] - x0];
    let (a, b) = (a - x0, b - x0);
    let mut w = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let den = (z[i] - z[j]) * (z[i] - z[k]);
        // L_i(x) = (x² - (z_j + z_k) x + z_j z_k) / den
        let prim = |x: f64| x * x * x / 3.0 - (z[j] + z[k]) * x * x / 2.0 + z[j] * z[k] * x;
        w[i] = (prim(b) - prim(a)) / den;
    }
    w
}

fn add_scaled(acc: &CMat, terms: &[(f64, &CMat)]) -> CMat {
    let mut out = acc.clone();
    for &(w, f) in terms {
        out += f * C64::from(w);
    }
    out
}

/// Running integrals `F_i = ∫_{x_0}^{x_i} f` at every node.
///
/// Pairs of intervals are integrated with Simpson's rule; the midpoint of
/// each pair uses the same interpolating quadratic. A trailing odd
/// interval reuses the last three nodes.
pub fn cumulative_simpson(x: &[f64], f: &[CMat]) -> Vec<CMat> {
    assert_eq!(x.len(), f.len(), "node and value counts differ");
    assert!(!x.is_empty(), "empty quadrature grid");
    let zero = f[0].clone() * C64::from(0.0);
    let n = x.len();
    let mut out = vec![zero.clone(); n];
    if n == 1 {
        return out;
    }
    if n == 2 {
        out[1] = (&f[0] + &f[1]) * C64::from(0.5 * (x[1] - x[0]));
        return out;
    }
    let mut i = 0;
    while i + 2 < n {
        let xs = [x[i], x[i + 1], x[i + 2]];
        let w1 = quadratic_weights(xs, x[i], x[i + 1]);
        let w2 = quadratic_weights(xs, x[i], x[i + 2]);
        out[i + 1] = add_scaled(&out[i], &[(w1[0], &f[i]), (w1[1], &f[i + 1]), (w1[2], &f[i + 2])]);
        out[i + 2] = add_scaled(&out[i], &[(w2[0], &f[i]), (w2[1], &f[i + 1]), (w2[2], &f[i + 2])]);
        i += 2;
    }
    if i + 1 < n {
        let xs = [x[n - 3], x[n - 2], x[n - 1]];
        let w = quadratic_weights(xs, x[n - 2], x[n - 1]);
        out[n - 1] = add_scaled(&out[n - 2], &[(w[0], &f[n - 3]), (w[1], &f[n - 2]), (w[2], &f[n - 1])]);
    }
    out
}

/// Composite Simpson integral over the whole grid.
pub fn simpson(x: &[f64], f: &[CMat]) -> CMat {
    cumulative_simpson(x, f).pop().expect("nonempty")
}

/// Integral together with a Richardson estimate of its discretization
/// error, obtained by repeating the rule on every other node.
pub fn simpson_with_error(x: &[f64], f: &[CMat]) -> (CMat, f64) {
    let fine = simpson(x, f);
    if x.len() < 5 {
        return (fine, f64::INFINITY);
    }
    let mut idx: Vec<usize> = (0..x.len()).step_by(2).collect();
    if *idx.last().unwrap() != x.len() - 1 {
        idx.push(x.len() - 1);
    }
    let xc: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let fc: Vec<CMat> = idx.iter().map(|&i| f[i].clone()).collect();
    let coarse = simpson(&xc, &fc);
    let err = (&fine - &coarse).norm() / 15.0;
    (fine, err)
}

/// Estimate of `∫_{x_end}^∞ f` assuming geometric decay of the integrand
/// norm over the trailing quarters of the grid.
pub fn tail_estimate(x: &[f64], f: &[CMat]) -> f64 {
    let n = x.len();
    if n < 9 {
        return f64::INFINITY;
    }
    let q = (n - 1) / 4;
    let seg = |a: usize, b: usize| -> f64 {
        (a..b).map(|i| 0.5 * (f[i].norm() + f[i + 1].norm()) * (x[i + 1] - x[i])).sum()
    };
    let i1 = seg(n - 1 - 2 * q, n - 1 - q);
    let i2 = seg(n - 1 - q, n - 1);
    if i2 == 0.0 {
        return 0.0;
    }
    let r = i2 / i1;
    if !(r < 1.0) {
        return f64::INFINITY;
    }
    i2 * r / (1.0 - r)
}

/// Uniform grid with `intervals + 1` nodes on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    let h = (b - a) / intervals as f64;
    let mut g: Vec<f64> = (0..=intervals).map(|i| a + h * i as f64).collect();
    g[intervals] = b;
    g
}

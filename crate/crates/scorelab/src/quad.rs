//! Quadrature rules: Gauss-Hermite nodes by Golub-Welsch and an adaptive
//! Simpson integrator for time integrals of kernel diagonals.

/// A Gauss-Hermite rule for integrals of the form
/// `integral exp(-x^2) f(x) dx ~= sum_i w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Build an n-point rule. Nodes are the eigenvalues of the Jacobi matrix
    /// (Golub-Welsch); weights come from the first eigenvector components.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        // Jacobi matrix for Hermite polynomials: zero diagonal,
        // off-diagonal beta_k = sqrt(k/2), k = 1..n-1.
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        for k in 1..n {
            off[k - 1] = (k as f64 / 2.0).sqrt();
        }
        let mut z = vec![0.0; n]; // first row of the eigenvector matrix
        z[0] = 1.0;
        tql2_first_row(&mut diag, &mut off, &mut z);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let weights: Vec<f64> = order.iter().map(|&i| sqrt_pi * z[i] * z[i]).collect();
        GaussHermite { nodes, weights }
    }

    /// Expectation of `f` under N(mean, var): substitutes
    /// y = mean + sqrt(2 var) * node.
    pub fn gaussian_expect(&self, mean: f64, var: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = (2.0 * var).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + scale * x);
        }
        acc * inv_sqrt_pi
    }
}

/// Symmetric tridiagonal QL with implicit shifts, tracking only the first
/// row of the accumulated eigenvector matrix (all that Golub-Welsch needs).
/// On return `diag` holds the eigenvalues (unsorted) and `z[i]` the first
/// component of the i-th eigenvector.
fn tql2_first_row(diag: &mut [f64], off: &mut [f64], z: &mut [f64]) {
    let n = diag.len();
    if n == 1 {
        return;
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small off-diagonal element
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                // accumulate the first-row rotation
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(&f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> f64,
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
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

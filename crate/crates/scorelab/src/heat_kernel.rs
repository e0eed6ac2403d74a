//! The change-of-variables pipeline that linearizes the log-density
//! evolution, quadrature evaluation of the resulting heat-kernel
//! representation, and numerical verification of the gradient/Hessian
//! estimates it implies.
//!
//! Writing `q(t,x) = -log p_t(x) - x^T Abar_t^{-1} x / 2`, the substitution
//! `qbar(t,x) = q(t, K(t)^{-1} sqrt(C) x) + f(t)` with
//! `K(t) = (A Abar_t^{-1}) e^{-t/2}` turns the viscous Hamilton-Jacobi
//! evolution of q into a plain heat equation for `pbar = exp(-qbar)`, whose
//! solution is a Gaussian convolution with covariance
//! `B(t) = integral_0^t K(s)^2 ds = (e^{t/2} - e^{-t/2}) K(t)`:
//!
//! `pbar(t,x) = integral N(y; x, B(t)) exp(-hbar(y)) dy`,
//! `hbar(y) = -h(sqrt(C) y)`.
//!
//! Everything here is restricted to d <= 2, where tensorized Gauss-Hermite
//! quadrature of that convolution is cheap; the module's role is verifying
//! the analysis, not production sampling.

use crate::probe::ProbeGrid;
use crate::quad::{adaptive_simpson, GaussHermite};
use crate::spectral::ModelSpace;
use crate::targets::{HFunction, MollifiedPointCloud};
use crate::util::{kahan_sum, sym_opnorm};
use crate::{Error, Result};
use std::io::Write;

// ---------------------------------------------------------------------------
// Kernel diagonals
// ---------------------------------------------------------------------------

/// Per-eigenvalue evaluators for the time-dependent kernels of the
/// change of variables.
#[derive(Debug, Clone)]
pub struct OuKernels {
    space: ModelSpace,
}

impl OuKernels {
    pub fn new(space: &ModelSpace) -> Self {
        OuKernels { space: space.clone() }
    }

    /// `abar_i(t) = a_i e^{-t} + c_i (1 - e^{-t})`.
    pub fn abar(&self, t: f64, i: usize) -> f64 {
        self.space.abar(t, i)
    }

    /// `K_i(t) = a_i e^{-t/2} / abar_i(t)`.
    pub fn k_diag(&self, t: f64, i: usize) -> f64 {
        self.space.a()[i] * (-0.5 * t).exp() / self.abar(t, i)
    }

    /// Closed form `B_i(t) = (e^{t/2} - e^{-t/2}) K_i(t)
    ///              = a_i (1 - e^{-t}) / abar_i(t)`.
    pub fn b_closed(&self, t: f64, i: usize) -> f64 {
        self.space.a()[i] * (1.0 - (-t).exp()) / self.abar(t, i)
    }

    /// `B_i(t)` by adaptive quadrature of `K_i(s)^2` (independent route).
    pub fn b_quadrature(&self, t: f64, i: usize) -> f64 {
        adaptive_simpson(|s| self.k_diag(s, i).powi(2), 0.0, t, 1e-13)
    }

    /// `f(t) = -1/2 integral_0^t Tr(C Abar_s^{-1} - I) ds`, by adaptive
    /// quadrature.
    pub fn f_quadrature(&self, t: f64) -> f64 {
        let d = self.space.dim();
        -0.5 * adaptive_simpson(
            |s| {
                (0..d)
                    .map(|i| self.space.c()[i] / self.abar(s, i) - 1.0)
                    .sum::<f64>()
            },
            0.0,
            t,
            1e-13,
        )
    }

    /// Closed form of the same integral (used as a test oracle):
    /// `f(t) = -1/2 sum_i ln(abar_i(t) / a_i)`.
    pub fn f_closed(&self, t: f64) -> f64 {
        let d = self.space.dim();
        -0.5 * kahan_sum((0..d).map(|i| (self.abar(t, i) / self.space.a()[i]).ln()))
    }

    /// `sup_t ||e^{t/2} K(t)|| = max{1, ||A C^{-1}||}` — the constant K.
    pub fn k_constant(&self) -> f64 {
        self.space
            .a()
            .iter()
            .zip(self.space.c())
            .map(|(a, c)| a / c)
            .fold(1.0f64, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Heat-kernel state
// ---------------------------------------------------------------------------

/// Quadrature evaluator for `qbar(t, x)` built from a target's tail
/// decomposition, with a node-doubling error monitor.
pub struct VhjState {
    h: HFunction,
    kernels: OuKernels,
    gh: GaussHermite,
    gh_double: GaussHermite,
    /// doubling-shift threshold before an evaluation is rejected
    pub doubling_tol: f64,
}

impl VhjState {
    /// Default Gauss-Hermite order (per axis).
    pub const DEFAULT_ORDER: usize = 64;

    pub fn new(h: HFunction, space: &ModelSpace, order: usize) -> Result<Self> {
        if h.dim() > 2 {
            return Err(Error::InvalidParameter(
                "heat-kernel quadrature is restricted to d <= 2".into(),
            ));
        }
        if h.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: h.dim() });
        }
        Ok(VhjState {
            h,
            kernels: OuKernels::new(space),
            gh: GaussHermite::new(order),
            gh_double: GaussHermite::new(2 * order),
            doubling_tol: 1e-8,
        })
    }

    pub fn kernels(&self) -> &OuKernels {
        &self.kernels
    }

    pub fn h(&self) -> &HFunction {
        &self.h
    }

    /// `hbar(x) = -h(sqrt(C) x)` (initial data of the transformed flow).
    pub fn hbar(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(self.h.c())
            .map(|(xi, ci)| ci.sqrt() * xi)
            .collect();
        -self.h.value(&z)
    }

    fn qbar_with(&self, gh: &GaussHermite, t: f64, x: &[f64]) -> f64 {
        let d = x.len();
        let scale: Vec<f64> = (0..d)
            .map(|i| (2.0 * self.kernels.b_closed(t, i)).sqrt())
            .collect();
        // log pbar = logsumexp_k [ ln w_k - hbar(y_k) ] - (d/2) ln pi
        let mut top = f64::NEG_INFINITY;
        let mut logs: Vec<f64> = Vec::new();
        match d {
            1 => {
                logs.reserve(gh.nodes.len());
                for (&xi, &w) in gh.nodes.iter().zip(&gh.weights) {
                    let y = x[0] + scale[0] * xi;
                    let l = w.ln() - self.hbar(&[y]);
                    top = top.max(l);
                    logs.push(l);
                }
            }
            2 => {
                logs.reserve(gh.nodes.len() * gh.nodes.len());
                for (&xi, &wi) in gh.nodes.iter().zip(&gh.weights) {
                    let y0 = x[0] + scale[0] * xi;
                    for (&xj, &wj) in gh.nodes.iter().zip(&gh.weights) {
                        let y1 = x[1] + scale[1] * xj;
                        let l = (wi * wj).ln() - self.hbar(&[y0, y1]);
                        top = top.max(l);
                        logs.push(l);
                    }
                }
            }
            _ => unreachable!("dimension checked at construction"),
        }
        let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let log_pbar = top + sum.ln() - 0.5 * d as f64 * std::f64::consts::PI.ln();
        -log_pbar
    }

    /// `qbar(t, x)` with the doubling monitor: the value is computed at the
    /// base and doubled order; a shift above `doubling_tol` flags the order
    /// as insufficient.
    pub fn qbar(&self, t: f64, x: &[f64]) -> Result<f64> {
        assert!(t > 0.0, "the heat-kernel representation needs t > 0");
        let coarse = self.qbar_with(&self.gh, t, x);
        let fine = self.qbar_with(&self.gh_double, t, x);
        let shift = (fine - coarse).abs();
        if shift > self.doubling_tol {
            return Err(Error::QuadratureOrder { shift });
        }
        Ok(fine)
    }

    /// FD gradient of qbar at fixed t.
    pub fn qbar_grad_fd(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = x.len();
        let base = f64::EPSILON.powf(1.0 / 3.0);
        let mut g = vec![0.0; d];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for j in 0..d {
            let h = base * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            g[j] = (self.qbar(t, &xp)? - self.qbar(t, &xm)?) / (2.0 * h);
            xp[j] = x[j];
            xm[j] = x[j];
        }
        Ok(g)
    }

    /// FD Hessian of qbar at fixed t (second-derivative optimal step
    /// eps_machine^{1/4}).
    pub fn qbar_hessian_fd(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = x.len();
        let base = f64::EPSILON.powf(0.25);
        let mut hmat = vec![0.0; d * d];
        let q0 = self.qbar(t, x)?;
        let steps: Vec<f64> = (0..d).map(|j| base * (1.0 + x[j].abs())).collect();
        for j in 0..d {
            let h = steps[j];
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            hmat[j * d + j] = (self.qbar(t, &xp)? - 2.0 * q0 + self.qbar(t, &xm)?) / (h * h);
        }
        for j in 0..d {
            for k in (j + 1)..d {
                let (hj, hk) = (steps[j], steps[k]);
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[j] += hj;
                xpp[k] += hk;
                xpm[j] += hj;
                xpm[k] -= hk;
                xmp[j] -= hj;
                xmp[k] += hk;
                xmm[j] -= hj;
                xmm[k] -= hk;
                let v = (self.qbar(t, &xpp)? - self.qbar(t, &xpm)? - self.qbar(t, &xmp)?
                    + self.qbar(t, &xmm)?)
                    / (4.0 * hj * hk);
                hmat[j * d + k] = v;
                hmat[k * d + j] = v;
            }
        }
        Ok(hmat)
    }

    /// Closed-form gradient of `qbar(0, x) = hbar(x)`:
    /// `-sqrt(C) grad h(sqrt(C) x)`.
    pub fn grad0(&self, x: &[f64]) -> Vec<f64> {
        let c = self.h.c();
        let z: Vec<f64> = x.iter().zip(c).map(|(xi, ci)| ci.sqrt() * xi).collect();
        let g = self.h.grad(&z);
        g.iter().zip(c).map(|(gi, ci)| -ci.sqrt() * gi).collect()
    }

    /// Closed-form Hessian of `qbar(0, x)`:
    /// `-sqrt(C) hess h(sqrt(C) x) sqrt(C)`.
    pub fn hess0(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let c = self.h.c();
        let z: Vec<f64> = x.iter().zip(c).map(|(xi, ci)| ci.sqrt() * xi).collect();
        let hm = self.h.hessian(&z);
        let mut out = vec![0.0; d * d];
        for r in 0..d {
            for s in 0..d {
                out[r * d + s] = -c[r].sqrt() * hm[r * d + s] * c[s].sqrt();
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Bound-check reports
// ---------------------------------------------------------------------------

/// One checked time point: measured grid suprema against their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub t: f64,
    pub measured_sup_grad: f64,
    pub bound_grad: f64,
    pub margin_grad: f64,
    pub measured_sup_hess: f64,
    pub bound_hess: f64,
    pub margin_hess: f64,
}

/// Margins of measured suprema against the theory bounds, per time.
/// The suprema are box suprema; the probed box rides along.
#[derive(Debug, Clone, Default)]
pub struct BoundCheckReport {
    pub rows: Vec<BoundRow>,
    pub probe_lo: Vec<f64>,
    pub probe_hi: Vec<f64>,
}

impl BoundCheckReport {
    pub fn all_margins_at_least(&self, floor: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.margin_grad >= floor && r.margin_hess >= floor)
    }

    /// CSV with the canonical column set.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,measured_sup_grad,bound_grad,margin_grad,measured_sup_hess,bound_hess,margin_hess"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t,
                r.measured_sup_grad,
                r.bound_grad,
                r.margin_grad,
                r.measured_sup_hess,
                r.bound_hess,
                r.margin_hess
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Grid suprema of `|grad qbar|` and `||hess qbar||` at the given times,
/// compared against the t = 0 constants: the gradient sup must not exceed
/// its initial value, and the Hessian sup must not exceed
/// `hess(0) sup + grad(0) sup^2`.
pub fn vhj_bound_check(
    state: &VhjState,
    times: &[f64],
    grid: &ProbeGrid,
) -> Result<BoundCheckReport> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("probe grid"));
    }
    let d = grid.dim();
    let mut sup0_grad = 0.0f64;
    let mut sup0_hess = 0.0f64;
    for x in grid.iter() {
        let g = state.grad0(x);
        sup0_grad = sup0_grad.max(kahan_sum(g.iter().map(|v| v * v)).sqrt());
        sup0_hess = sup0_hess.max(sym_opnorm(&state.hess0(x), d));
    }
    let bound_grad = sup0_grad;
    let bound_hess = sup0_hess + sup0_grad * sup0_grad;

    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let (mut sup_grad, mut sup_hess) = (0.0f64, 0.0f64);
        if t == 0.0 {
            sup_grad = sup0_grad;
            sup_hess = sup0_hess;
        } else {
            for x in grid.iter() {
                let g = state.qbar_grad_fd(t, x)?;
                sup_grad = sup_grad.max(kahan_sum(g.iter().map(|v| v * v)).sqrt());
                let hm = state.qbar_hessian_fd(t, x)?;
                sup_hess = sup_hess.max(sym_opnorm(&hm, d));
            }
        }
        rows.push(BoundRow {
            t,
            measured_sup_grad: sup_grad,
            bound_grad,
            margin_grad: bound_grad - sup_grad,
            measured_sup_hess: sup_hess,
            bound_hess,
            margin_hess: bound_hess - sup_hess,
        });
    }
    let (probe_lo, probe_hi) = grid.bounding_box();
    Ok(BoundCheckReport { rows, probe_lo, probe_hi })
}

/// Grid suprema of `|grad g|` and `||hess g||` for the mollified-cloud
/// remainder `g = log q_sigma + |x|^2 / (2 sigma^2)`, with closed-form
/// mixture derivatives, against the bounds `R / sigma^2` and
/// `2 R^2 / sigma^4`.
pub fn mollified_bound_check(cloud: &MollifiedPointCloud, grid: &ProbeGrid) -> Result<BoundCheckReport> {
    if !(cloud.sigma2 > 0.0) {
        return Err(Error::InvalidParameter("mollifier variance must be positive".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("probe grid"));
    }
    let d = grid.dim();
    let s2 = cloud.sigma2;
    let r = cloud.diameter();
    let n = cloud.atoms.len();
    let mut sup_grad = 0.0f64;
    let mut sup_hess = 0.0f64;
    let mut logs = vec![0.0; n];
    for x in grid.iter() {
        // responsibilities under exp(-|x - y_j|^2 / (2 sigma^2)) weights
        for (j, atom) in cloud.atoms.iter().enumerate() {
            let d2: f64 = atom.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            logs[j] = cloud.weights[j].ln() - 0.5 * d2 / s2;
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut gamma: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = gamma.iter().sum();
        gamma.iter_mut().for_each(|g| *g /= total);

        // grad g = (sum_j gamma_j y_j) / sigma^2
        let mut ybar = vec![0.0; d];
        for (j, atom) in cloud.atoms.iter().enumerate() {
            for i in 0..d {
                ybar[i] += gamma[j] * atom[i];
            }
        }
        let gnorm = kahan_sum(ybar.iter().map(|v| v * v)).sqrt() / s2;
        sup_grad = sup_grad.max(gnorm);

        // hess g = (sum_j gamma_j y y^T - ybar ybar^T) / sigma^4
        let mut cov = vec![0.0; d * d];
        for (j, atom) in cloud.atoms.iter().enumerate() {
            for r0 in 0..d {
                for s0 in 0..d {
                    cov[r0 * d + s0] += gamma[j] * atom[r0] * atom[s0];
                }
            }
        }
        for r0 in 0..d {
            for s0 in 0..d {
                cov[r0 * d + s0] -= ybar[r0] * ybar[s0];
            }
        }
        let hnorm = sym_opnorm(&cov, d) / (s2 * s2);
        sup_hess = sup_hess.max(hnorm);
    }
    let bound_grad = r / s2;
    let bound_hess = 2.0 * r * r / (s2 * s2);
    let (probe_lo, probe_hi) = grid.bounding_box();
    Ok(BoundCheckReport {
        rows: vec![BoundRow {
            t: 0.0,
            measured_sup_grad: sup_grad,
            bound_grad,
            margin_grad: bound_grad - sup_grad,
            measured_sup_hess: sup_hess,
            bound_hess,
            margin_hess: bound_hess - sup_hess,
        }],
        probe_lo,
        probe_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModelSpace;
    use crate::targets::{GaussianMixture, TailConfig, TargetModel};

    fn tail(target: &TargetModel, space: &ModelSpace) -> HFunction {
        target.tail_decomposition(space, &TailConfig::default()).unwrap()
    }

    #[test]
    fn b_closed_matches_quadrature() {
        let space = ModelSpace::new(vec![1.0, 0.4], vec![2.0, 0.9]).unwrap();
        let k = OuKernels::new(&space);
        for i in 0..2 {
            for &t in &[0.01, 0.5, 1.0, 4.0, 10.0] {
                let closed = k.b_closed(t, i);
                let quad = k.b_quadrature(t, i);
                assert!(
                    (closed - quad).abs() <= 1e-10 * closed.abs().max(1e-30),
                    "i={i}, t={t}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn f_quadrature_matches_closed_form() {
        let space = ModelSpace::new(vec![1.0, 0.4], vec![2.0, 0.9]).unwrap();
        let k = OuKernels::new(&space);
        for &t in &[0.1, 1.0, 5.0] {
            let a = k.f_quadrature(t);
            let b = k.f_closed(t);
            assert!((a - b).abs() < 1e-10, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn k_at_zero_is_one_and_sup_is_k_constant() {
        let space = ModelSpace::new(vec![1.0, 2.0], vec![3.0, 1.0]).unwrap();
        let k = OuKernels::new(&space);
        for i in 0..2 {
            assert!((k.k_diag(0.0, i) - 1.0).abs() < 1e-15);
        }
        // sup_t max_i e^{t/2} K_i(t) over a fine t grid
        let mut sup = 0.0f64;
        for step in 0..2_000 {
            let t = step as f64 * 0.01;
            for i in 0..2 {
                sup = sup.max((0.5 * t).exp() * k.k_diag(t, i));
            }
        }
        let expect = k.k_constant(); // max{1, 3/1} = 3
        assert!((expect - 3.0).abs() < 1e-15);
        assert!(sup <= expect + 1e-12 && sup > expect - 1e-2, "sup {sup} vs K {expect}");
    }

    #[test]
    fn qbar_of_flat_h_is_constant() {
        // h constant (target N(0, A)): heat flow of a constant stays flat
        let space = ModelSpace::new(vec![1.0], vec![0.5]).unwrap();
        let target = TargetModel::gaussian(vec![0.0], vec![0.5]).unwrap();
        let state = VhjState::new(tail(&target, &space), &space, 32).unwrap();
        let q_ref = state.qbar(0.5, &[0.0]).unwrap();
        for &x in &[-2.0, -0.5, 1.0, 3.0] {
            for &t in &[0.1, 0.5, 2.0] {
                let q = state.qbar(t, &[x]).unwrap();
                assert!((q - q_ref).abs() < 1e-9, "qbar({t}, {x}) = {q} vs {q_ref}");
            }
        }
    }

    #[test]
    fn qbar_quadratic_initial_data_matches_gaussian_convolution() {
        // target N(0,1) with a = 1/2, c = 1 gives hbar(x) = -(x^2/2 + const);
        // the analytic flow is qbar(t,x) = -x^2 / (2 (1 - B(t))) + const.
        let space = ModelSpace::new(vec![1.0], vec![0.5]).unwrap();
        let target = TargetModel::gaussian(vec![0.0], vec![1.0]).unwrap();
        let state = VhjState::new(tail(&target, &space), &space, 64).unwrap();
        for &t in &[0.25, 1.0, 3.0] {
            let b = state.kernels().b_closed(t, 0);
            for &x in &[0.5, 1.0, 2.0] {
                let got = state.qbar(t, &[x]).unwrap() - state.qbar(t, &[0.0]).unwrap();
                let want = -x * x / (2.0 * (1.0 - b));
                assert!((got - want).abs() < 1e-8, "t={t}, x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn qbar_2d_tensor_quadrature_matches_per_axis_closed_form() {
        // Gaussian target with per-axis quadratic hbar_i = -gamma_i x^2/2,
        // gamma_i = c_i (1/a_i - 1/v_i): the flow factorizes and each axis
        // obeys qbar_i(t,x) = -gamma_i x^2 / (2 (1 - gamma_i B_i(t))) + const
        let space = ModelSpace::new(vec![1.0, 0.8], vec![0.5, 0.4]).unwrap();
        let target = TargetModel::gaussian(vec![0.0, 0.0], vec![0.7, 1.1]).unwrap();
        let state = VhjState::new(tail(&target, &space), &space, 48).unwrap();
        let gamma: Vec<f64> = (0..2)
            .map(|i| space.c()[i] * (1.0 / space.a()[i] - 1.0 / [0.7, 1.1][i]))
            .collect();
        for &t in &[0.3, 1.0, 2.5] {
            let b: Vec<f64> = (0..2).map(|i| state.kernels().b_closed(t, i)).collect();
            let q0 = state.qbar(t, &[0.0, 0.0]).unwrap();
            for &(x0, x1) in &[(0.6, -0.4), (1.2, 0.9), (-0.8, 1.5)] {
                let got = state.qbar(t, &[x0, x1]).unwrap() - q0;
                let want = -gamma[0] * x0 * x0 / (2.0 * (1.0 - gamma[0] * b[0]))
                    - gamma[1] * x1 * x1 / (2.0 * (1.0 - gamma[1] * b[1]));
                assert!(
                    (got - want).abs() < 1e-7,
                    "t={t}, x=({x0},{x1}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn vhj_2d_mixture_margins_hold() {
        let space = ModelSpace::isotropic(2, 1.0, 1.0).unwrap();
        let target = TargetModel::GaussianMixture(
            GaussianMixture::new(
                vec![0.5, 0.5],
                vec![vec![-1.0, 0.5], vec![1.0, -0.5]],
                vec![vec![0.3, 0.4], vec![0.3, 0.4]],
            )
            .unwrap(),
        );
        let state = VhjState::new(tail(&target, &space), &space, 32).unwrap();
        let grid = ProbeGrid::tensor(&[-3.0, -3.0], &[3.0, 3.0], 9);
        let report = vhj_bound_check(&state, &[0.5, 1.5], &grid).unwrap();
        assert!(report.all_margins_at_least(-1e-5), "{:?}", report.rows);
        assert!(
            report.rows[1].measured_sup_grad <= report.rows[0].measured_sup_grad + 1e-5
        );
        assert_eq!(report.probe_lo, vec![-3.0, -3.0]);
        assert_eq!(report.probe_hi, vec![3.0, 3.0]);
    }

    #[test]
    fn qbar_round_trip_reproduces_log_marginal() {
        // qbar(t, sqrt(C)^{-1} K(t) z) - f(t) = -log p_t(z) - z^2/(2 abar)
        let space = ModelSpace::new(vec![1.0], vec![1.0]).unwrap();
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let state = VhjState::new(tail(&target, &space), &space, 64).unwrap();
        let k = state.kernels();
        for &t in &[0.5, 1.0] {
            let marginal = target.forward_marginal(&space, t).unwrap();
            let f_t = k.f_quadrature(t);
            for &z in &[-1.0, 0.0, 0.7, 2.0] {
                let xbar = k.k_diag(t, 0) * z / space.c()[0].sqrt();
                let got = state.qbar(t, &[xbar]).unwrap() - f_t;
                let want = -marginal.log_density(&[z]) - z * z / (2.0 * k.abar(t, 0));
                assert!((got - want).abs() < 1e-6, "t={t}, z={z}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn round_trip_modified_score_from_qbar() {
        // s~(t,z) = -sqrt(C) K(t) grad qbar(t, sqrt(C)^{-1} K(t) z)
        let space = ModelSpace::new(vec![1.0], vec![1.0]).unwrap();
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let state = VhjState::new(tail(&target, &space), &space, 64).unwrap();
        let model = crate::scores::ScoreModel::exact(target.clone(), space.clone());
        let ms = crate::scores::ModifiedScore::new(model, space.clone());
        let k = state.kernels();
        for &t in &[0.5, 1.5] {
            for &z in &[-0.8, 0.3, 1.6] {
                let xbar = k.k_diag(t, 0) * z / space.c()[0].sqrt();
                let grad = state.qbar_grad_fd(t, &[xbar]).unwrap()[0];
                let from_qbar = -space.c()[0].sqrt() * k.k_diag(t, 0) * grad;
                let direct = ms.eval(t, &[z]).unwrap()[0];
                assert!(
                    (from_qbar - direct).abs() < 1e-6,
                    "t={t}, z={z}: {from_qbar} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn qbar_doubling_monitor_fires_on_coarse_orders() {
        // a 2-node rule cannot represent the bimodal integrand
        let space = ModelSpace::new(vec![1.0], vec![1.0]).unwrap();
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(2.5, 0.05));
        let state = VhjState::new(tail(&target, &space), &space, 2).unwrap();
        assert!(matches!(
            state.qbar(2.0, &[0.5]),
            Err(Error::QuadratureOrder { .. })
        ));
    }

    #[test]
    fn vhj_margins_for_flat_h_are_trivial() {
        let space = ModelSpace::new(vec![1.0], vec![0.5]).unwrap();
        let target = TargetModel::gaussian(vec![0.0], vec![0.5]).unwrap();
        let state = VhjState::new(tail(&target, &space), &space, 32).unwrap();
        let grid = ProbeGrid::tensor(&[-2.0], &[2.0], 11);
        let report = vhj_bound_check(&state, &[0.5, 1.0], &grid).unwrap();
        for row in &report.rows {
            assert!(row.measured_sup_grad < 1e-6);
            assert!(row.measured_sup_hess < 1e-3, "hess {}", row.measured_sup_hess);
            assert!(row.margin_grad >= -1e-6 && row.margin_hess >= -1e-3);
        }
    }

    #[test]
    fn vhj_gradient_sup_nonincreasing_for_bimodal_mixture() {
        let space = ModelSpace::new(vec![1.0], vec![1.0]).unwrap();
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let state = VhjState::new(tail(&target, &space), &space, 64).unwrap();
        let grid = ProbeGrid::tensor(&[-4.0], &[4.0], 41);
        let times = [0.25, 0.5, 1.0, 2.0];
        let report = vhj_bound_check(&state, &times, &grid).unwrap();
        assert!(report.all_margins_at_least(-1e-6));
        let mut last = f64::INFINITY;
        for row in &report.rows {
            assert!(
                row.measured_sup_grad <= last + 1e-6,
                "gradient sup increased at t={}",
                row.t
            );
            last = row.measured_sup_grad;
        }
    }

    #[test]
    fn vhj_gradient_sup_nonincreasing_for_mollified_pair() {
        // the mollified two-point target with a = sigma^2 = c = 1: the
        // remainder is the bounded-support g, and the flowed gradient sup
        // must stay below the initial one
        let space = ModelSpace::isotropic(1, 1.0, 1.0).unwrap();
        let cloud = MollifiedPointCloud::uniform(vec![vec![-1.0], vec![1.0]], 1.0).unwrap();
        let target = TargetModel::MollifiedPointCloud(cloud);
        let state = VhjState::new(tail(&target, &space), &space, 64).unwrap();
        let grid = ProbeGrid::tensor(&[-8.0], &[8.0], 81);
        let report = vhj_bound_check(&state, &[0.5, 1.0], &grid).unwrap();
        assert!(report.all_margins_at_least(-1e-6));
        let sup0 = report.rows[0].bound_grad;
        let mut last = sup0;
        for row in &report.rows {
            assert!(
                row.measured_sup_grad <= last + 1e-6,
                "gradient sup must not increase: t={} sup={} prev={last}",
                row.t,
                row.measured_sup_grad
            );
            last = row.measured_sup_grad;
        }
        // the t = 0 constant is the tanh sup ~ 1, well under R/sigma^2 = 2
        assert!(sup0 <= 2.0 + 1e-9 && sup0 > 0.9, "t=0 sup {sup0}");
    }

    #[test]
    fn mollified_two_point_bounds_and_tanh_form() {
        // atoms +-1, sigma = 1: grad g = tanh(x); sup over a wide grid
        // approaches 1, and the theory bounds are R/sigma^2 = 2 and
        // 2R^2/sigma^4 = 8
        let cloud = MollifiedPointCloud::uniform(vec![vec![-1.0], vec![1.0]], 1.0).unwrap();
        let grid = ProbeGrid::tensor(&[-10.0], &[10.0], 401);
        let report = mollified_bound_check(&cloud, &grid).unwrap();
        let row = &report.rows[0];
        assert!((row.bound_grad - 2.0).abs() < 1e-15);
        assert!((row.bound_hess - 8.0).abs() < 1e-15);
        assert!(row.margin_grad >= 0.0 && row.margin_hess >= 0.0);
        assert!((row.measured_sup_grad - 1.0).abs() < 1e-6, "{}", row.measured_sup_grad);
        // hand check against tanh at a few points
        for &x in &[0.5, 1.5, 3.0] {
            let tiny = ProbeGrid::from_points(1, vec![x]);
            let r = mollified_bound_check(&cloud, &tiny).unwrap();
            assert!((r.rows[0].measured_sup_grad - x.tanh().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn mollified_single_atom_is_degenerate() {
        let cloud = MollifiedPointCloud::uniform(vec![vec![0.0, 0.0]], 0.5).unwrap();
        let grid = ProbeGrid::tensor(&[-3.0, -3.0], &[3.0, 3.0], 9);
        let report = mollified_bound_check(&cloud, &grid).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.bound_grad, 0.0);
        assert!(row.measured_sup_grad < 1e-15);
        assert!(row.measured_sup_hess < 1e-15);
    }

    #[test]
    fn mh_rejects_zero_mollifier() {
        let cloud = MollifiedPointCloud::uniform(vec![vec![0.0]], 0.0).unwrap();
        let grid = ProbeGrid::tensor(&[-1.0], &[1.0], 5);
        assert!(mollified_bound_check(&cloud, &grid).is_err());
    }

    #[test]
    fn report_csv_shape() {
        let report = BoundCheckReport {
            rows: vec![BoundRow {
                t: 0.5,
                measured_sup_grad: 1.0,
                bound_grad: 2.0,
                margin_grad: 1.0,
                measured_sup_hess: 3.0,
                bound_hess: 8.0,
                margin_hess: 5.0,
            }],
            probe_lo: vec![-1.0],
            probe_hi: vec![1.0],
        };
        let csv = report.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,measured_sup_grad,bound_grad,margin_grad,measured_sup_hess,bound_hess,margin_hess"
        );
        assert_eq!(lines.next().unwrap(), "0.5,1,2,1,3,8,5");
    }
}

//! Target-distribution families with closed-form densities, Gaussian-tail
//! decompositions, and exact Ornstein-Uhlenbeck forward marginals.
//!
//! Four families are supported:
//!
//! - [`GaussianMixture`] — weighted diagonal-covariance components;
//! - [`MollifiedPointCloud`] — atoms in a bounded set convolved with an
//!   isotropic Gaussian mollifier (the early-stopping surrogate for
//!   bounded-support targets);
//! - [`LinearGaussianPosterior`] — the Bayesian posterior for a linear
//!   observation of a Gaussian prior with Gaussian noise;
//! - [`ProductSymmetricMixture`] — a product over coordinates of symmetric
//!   two-component mixtures. This family keeps high-dimensional product
//!   targets tractable: its 2^d-component mixture expansion is never formed
//!   except on request at small d.
//!
//! Under the forward process `dX = -X/2 dt + sqrt(C) dB` every family's
//! marginal at time t stays in closed form: component means shrink as
//! `e^{-t/2}` and variances interpolate to the base spectrum,
//! `V(t) = e^{-t} v + (1 - e^{-t}) c`.

use crate::probe::{sup_search, ProbeConfig};
use crate::spectral::{GaussianMeasure, ModelSpace, RngStream, SampleSet};
use crate::util::{kahan_sum, sym_opnorm};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest dimension at which a product family expands to an explicit
/// mixture (2^d components).
pub const PRODUCT_EXPAND_MAX: usize = 12;

// ---------------------------------------------------------------------------
// Mixture parameter block shared by all families
// ---------------------------------------------------------------------------

/// Flat parameter block for a diagonal-covariance Gaussian mixture.
/// Variances may be zero (point components); density evaluation then
/// requires strictly positive variances and is asserted.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub dim: usize,
    pub weights: Vec<f64>,
    /// component means, row-major `[n_comp x dim]`
    pub means: Vec<f64>,
    /// component variances, row-major `[n_comp x dim]`
    pub vars: Vec<f64>,
}

impl MixtureParams {
    pub fn n_comp(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        &self.means[j * self.dim..(j + 1) * self.dim]
    }

    pub fn var(&self, j: usize) -> &[f64] {
        &self.vars[j * self.dim..(j + 1) * self.dim]
    }

    /// Per-component log density contributions `ln w_j + ln N_j(x)`.
    fn component_logs(&self, x: &[f64], out: &mut Vec<f64>) {
        const LN_2PI: f64 = 1.8378770664093453;
        out.clear();
        for j in 0..self.n_comp() {
            let m = self.mean(j);
            let v = self.var(j);
            let mut acc = self.weights[j].ln();
            for i in 0..self.dim {
                debug_assert!(v[i] > 0.0, "density evaluation needs positive variances");
                let d = x[i] - m[i];
                acc -= 0.5 * (d * d / v[i] + (v[i]).ln() + LN_2PI);
            }
            out.push(acc);
        }
    }

    /// Numerically stable log density (log-sum-exp over components).
    /// Underflow saturates to a large negative finite value.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut logs = Vec::with_capacity(self.n_comp());
        self.component_logs(x, &mut logs);
        log_sum_exp(&logs)
    }

    /// Responsibilities (softmax of the component logs).
    fn responsibilities(&self, x: &[f64], gamma: &mut Vec<f64>) {
        self.component_logs(x, gamma);
        let top = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for g in gamma.iter_mut() {
            *g = (*g - top).exp();
            total += *g;
        }
        for g in gamma.iter_mut() {
            *g /= total;
        }
    }

    /// Gradient of the log density.
    pub fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        let mut gamma = Vec::with_capacity(self.n_comp());
        self.grad_log_density_buf(x, out, &mut gamma);
    }

    /// Gradient with a caller-provided responsibility buffer (hot loops).
    pub fn grad_log_density_buf(&self, x: &[f64], out: &mut [f64], gamma: &mut Vec<f64>) {
        self.responsibilities(x, gamma);
        out.fill(0.0);
        for j in 0..self.n_comp() {
            let m = self.mean(j);
            let v = self.var(j);
            for i in 0..self.dim {
                out[i] += gamma[j] * (m[i] - x[i]) / v[i];
            }
        }
    }

    /// Dense Hessian of the log density (row-major d x d):
    /// `sum_j gamma_j (D_j + g_j g_j^T) - gbar gbar^T` with
    /// `D_j = -diag(1/v_j)`, `g_j = (m_j - x)/v_j`.
    pub fn hessian_log_density(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut gamma = Vec::with_capacity(self.n_comp());
        self.responsibilities(x, &mut gamma);
        out.fill(0.0);
        let mut gbar = vec![0.0; d];
        let mut gj = vec![0.0; d];
        for j in 0..self.n_comp() {
            let m = self.mean(j);
            let v = self.var(j);
            for i in 0..d {
                gj[i] = (m[i] - x[i]) / v[i];
                gbar[i] += gamma[j] * gj[i];
            }
            for r in 0..d {
                out[r * d + r] -= gamma[j] / v[r];
                for s in 0..d {
                    out[r * d + s] += gamma[j] * gj[r] * gj[s];
                }
            }
        }
        for r in 0..d {
            for s in 0..d {
                out[r * d + s] -= gbar[r] * gbar[s];
            }
        }
    }

    /// OU-evolve every component: means shrink by `e^{-t/2}`, variances
    /// interpolate coordinatewise toward the base spectrum.
    pub fn evolve(&self, c: &[f64], t: f64) -> MixtureParams {
        let emt = (-t).exp();
        let emt_half = (-0.5 * t).exp();
        let means = self.means.iter().map(|m| m * emt_half).collect();
        let mut vars = Vec::with_capacity(self.vars.len());
        for j in 0..self.n_comp() {
            let v = self.var(j);
            for i in 0..self.dim {
                vars.push(emt * v[i] + (1.0 - emt) * c[i]);
            }
        }
        MixtureParams { dim: self.dim, weights: self.weights.clone(), means, vars }
    }

    fn sample(&self, n: usize, stream: &RngStream) -> SampleSet {
        let d = self.dim;
        let mut rng = stream.rng();
        let mut data = Vec::with_capacity(n * d);
        // cumulative weights for component selection
        let mut cum = Vec::with_capacity(self.n_comp());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        for _ in 0..n {
            let u: f64 = rng.random();
            let j = cum.partition_point(|&cw| cw < u * acc).min(self.n_comp() - 1);
            let m = self.mean(j);
            let v = self.var(j);
            for i in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m[i] + v[i].sqrt() * z);
            }
        }
        SampleSet::from_rows(d, stream.seed, data)
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return f64::MIN.max(-1e300);
    }
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    top + sum.ln()
}

/// `ln cosh z` without overflow.
fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// Weighted Gaussian mixture with diagonal component covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    params: MixtureParams,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("mixture components"));
        }
        if means.len() != weights.len() || vars.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), got: means.len().max(vars.len()) });
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) || vars.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidParameter("component dimensions disagree".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to 1 within 1e-14 (got {total})"
            )));
        }
        if vars.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("variances must be nonnegative".into()));
        }
        Ok(GaussianMixture {
            params: MixtureParams {
                dim,
                weights,
                means: means.into_iter().flatten().collect(),
                vars: vars.into_iter().flatten().collect(),
            },
        })
    }

    /// Single Gaussian N(mean, diag var).
    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![var])
    }

    /// The symmetric 1D two-component mixture `w N(-m, v) + (1-w) N(m, v)`
    /// used throughout the verification suite.
    pub fn symmetric_pair_1d(m: f64, v: f64) -> Self {
        Self::new(vec![0.5, 0.5], vec![vec![-m], vec![m]], vec![vec![v], vec![v]])
            .expect("valid pair")
    }

    pub fn params(&self) -> &MixtureParams {
        &self.params
    }
}

/// Atoms inside a bounded set convolved with an isotropic Gaussian
/// mollifier of variance sigma^2. The stored diameter is
/// `R = max_{j,k} |y_j - y_k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedPointCloud {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma2: f64,
    diameter: f64,
}

impl MollifiedPointCloud {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, sigma2: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("point cloud atoms"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: atoms.len(), got: weights.len() });
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidParameter("atom dimensions disagree".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter("weights must be nonnegative and sum to 1".into()));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidParameter("mollifier variance must be nonnegative".into()));
        }
        let mut diameter = 0.0f64;
        for j in 0..atoms.len() {
            for k in (j + 1)..atoms.len() {
                let d2: f64 = atoms[j]
                    .iter()
                    .zip(&atoms[k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                diameter = diameter.max(d2.sqrt());
            }
        }
        Ok(MollifiedPointCloud { atoms, weights, sigma2, diameter })
    }

    /// Equal-weight atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>, sigma2: f64) -> Result<Self> {
        let w = vec![1.0 / atoms.len() as f64; atoms.len()];
        Self::new(atoms, w, sigma2)
    }

    /// Support diameter R of the atom set.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    fn params(&self) -> MixtureParams {
        let dim = self.dim();
        MixtureParams {
            dim,
            weights: self.weights.clone(),
            means: self.atoms.iter().flatten().copied().collect(),
            vars: vec![self.sigma2; self.atoms.len() * dim],
        }
    }
}

/// Posterior of a Gaussian prior N(0, C) observed through a linear map
/// `G x` with Gaussian noise N(0, Sigma):
/// `p0(x) = D0 exp(-|x|^2_C / 2) exp(-|Gx - y|^2_Sigma / 2)`.
///
/// The observation operator must keep `G^T Sigma^{-1} G` diagonal so the
/// posterior stays inside the shared-eigenbasis substrate; the constructor
/// rejects operators that would rotate the posterior out of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianPosterior {
    /// observation rows, `[m x d]`
    pub g_rows: Vec<Vec<f64>>,
    /// noise spectrum, m entries
    pub sigma: Vec<f64>,
    /// observation vector, m entries
    pub y: Vec<f64>,
    prior_c: Vec<f64>,
    post_mean: Vec<f64>,
    post_var: Vec<f64>,
}

impl LinearGaussianPosterior {
    pub fn new(
        g_rows: Vec<Vec<f64>>,
        sigma: Vec<f64>,
        y: Vec<f64>,
        space: &ModelSpace,
    ) -> Result<Self> {
        let d = space.dim();
        let m = g_rows.len();
        if m == 0 {
            return Err(Error::EmptyInput("observation rows"));
        }
        if g_rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("observation rows must have prior dimension".into()));
        }
        if sigma.len() != m || y.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: sigma.len().min(y.len()) });
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter("noise spectrum must be positive".into()));
        }
        // G^T Sigma^{-1} G must be diagonal in the computational basis
        let mut gtg_diag = vec![0.0; d];
        for i in 0..d {
            for r in 0..m {
                gtg_diag[i] += g_rows[r][i] * g_rows[r][i] / sigma[r];
            }
        }
        let scale = gtg_diag.iter().copied().fold(1.0f64, f64::max);
        for i in 0..d {
            for j in (i + 1)..d {
                let mut off = 0.0;
                for r in 0..m {
                    off += g_rows[r][i] * g_rows[r][j] / sigma[r];
                }
                if off.abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(
                        "G^T Sigma^{-1} G must be diagonal in the shared eigenbasis".into(),
                    ));
                }
            }
        }
        let prior_c = space.c().to_vec();
        let mut post_var = vec![0.0; d];
        let mut post_mean = vec![0.0; d];
        for i in 0..d {
            let precision = 1.0 / prior_c[i] + gtg_diag[i];
            post_var[i] = 1.0 / precision;
        }
        for i in 0..d {
            let mut gty = 0.0;
            for r in 0..m {
                gty += g_rows[r][i] * y[r] / sigma[r];
            }
            post_mean[i] = post_var[i] * gty;
        }
        Ok(LinearGaussianPosterior { g_rows, sigma, y, prior_c, post_mean, post_var })
    }

    pub fn posterior(&self) -> GaussianMeasure {
        GaussianMeasure::new(self.post_mean.clone(), self.post_var.clone())
            .expect("posterior moments are finite")
    }

    /// Unnormalized log density straight from the defining product:
    /// `-|x|^2_C / 2 - |Gx - y|^2_Sigma / 2`.
    pub fn log_density_unnormalized(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc -= 0.5 * x[i] * x[i] / self.prior_c[i];
        }
        for (r, row) in self.g_rows.iter().enumerate() {
            let gx: f64 = row.iter().zip(x).map(|(g, xi)| g * xi).sum();
            let resid = gx - self.y[r];
            acc -= 0.5 * resid * resid / self.sigma[r];
        }
        acc
    }

    fn params(&self) -> MixtureParams {
        MixtureParams {
            dim: self.post_mean.len(),
            weights: vec![1.0],
            means: self.post_mean.clone(),
            vars: self.post_var.clone(),
        }
    }
}

/// Product over coordinates of symmetric two-component mixtures
/// `(1/2) N(+m_i, v_i) + (1/2) N(-m_i, v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSymmetricMixture {
    pub atom: Vec<f64>,
    pub var: Vec<f64>,
}

impl ProductSymmetricMixture {
    pub fn new(atom: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if atom.is_empty() {
            return Err(Error::EmptyInput("product mixture coordinates"));
        }
        if atom.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: atom.len(), got: var.len() });
        }
        if var.iter().any(|&v| !(v > 0.0)) || atom.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParameter(
                "product mixture needs positive variances and nonnegative atoms".into(),
            ));
        }
        Ok(ProductSymmetricMixture { atom, var })
    }

    /// The instance with per-coordinate atoms sqrt(c_i) and variances c_i:
    /// the classic trace-scaling example.
    pub fn trace_form(space: &ModelSpace) -> Self {
        let atom = space.c().iter().map(|c| c.sqrt()).collect();
        let var = space.c().to_vec();
        ProductSymmetricMixture { atom, var }
    }

    pub fn dim(&self) -> usize {
        self.atom.len()
    }

    /// Per-coordinate log density at forward time t.
    pub fn coord_log_density_t(&self, c: &[f64], t: f64, i: usize, x: f64) -> f64 {
        const LN_2PI: f64 = 1.8378770664093453;
        let emt = (-t).exp();
        let m = (-0.5 * t).exp() * self.atom[i];
        let v = emt * self.var[i] + (1.0 - emt) * c[i];
        -(x * x + m * m) / (2.0 * v) + ln_cosh(m * x / v) - 0.5 * (v.ln() + LN_2PI)
    }

    /// Per-coordinate derivative of the log density at forward time t.
    pub fn coord_grad_t(&self, c: &[f64], t: f64, i: usize, x: f64) -> f64 {
        let emt = (-t).exp();
        let m = (-0.5 * t).exp() * self.atom[i];
        let v = emt * self.var[i] + (1.0 - emt) * c[i];
        -x / v + (m / v) * (m * x / v).tanh()
    }

    /// Per-coordinate second derivative of the log density at time t.
    pub fn coord_hess_t(&self, c: &[f64], t: f64, i: usize, x: f64) -> f64 {
        let emt = (-t).exp();
        let m = (-0.5 * t).exp() * self.atom[i];
        let v = emt * self.var[i] + (1.0 - emt) * c[i];
        let sech2 = {
            let th = (m * x / v).tanh();
            1.0 - th * th
        };
        -1.0 / v + (m / v) * (m / v) * sech2
    }

    /// Explicit 2^d-component mixture expansion (small d only).
    pub fn expand(&self) -> Result<GaussianMixture> {
        let d = self.dim();
        if d > PRODUCT_EXPAND_MAX {
            return Err(Error::InvalidParameter(format!(
                "product mixture expansion is limited to d <= {PRODUCT_EXPAND_MAX} (got {d})"
            )));
        }
        let n = 1usize << d;
        let w = 1.0 / n as f64;
        let mut means = Vec::with_capacity(n);
        let mut vars = Vec::with_capacity(n);
        for mask in 0..n {
            let mean: Vec<f64> = (0..d)
                .map(|i| if (mask >> i) & 1 == 1 { self.atom[i] } else { -self.atom[i] })
                .collect();
            means.push(mean);
            vars.push(self.var.clone());
        }
        GaussianMixture::new(vec![w; n], means, vars)
    }

    fn sample(&self, n: usize, stream: &RngStream) -> SampleSet {
        let d = self.dim();
        let mut rng = stream.rng();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for i in 0..d {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let z: f64 = rng.sample(StandardNormal);
                data.push(sign * self.atom[i] + self.var[i].sqrt() * z);
            }
        }
        SampleSet::from_rows(d, stream.seed, data)
    }
}

// ---------------------------------------------------------------------------
// TargetModel
// ---------------------------------------------------------------------------

/// Tagged union over the supported target families.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetModel {
    GaussianMixture(GaussianMixture),
    MollifiedPointCloud(MollifiedPointCloud),
    LinearGaussianPosterior(LinearGaussianPosterior),
    ProductSymmetricMixture(ProductSymmetricMixture),
}

/// Marginal parameters of a target at forward time t, in whichever
/// representation keeps evaluation cheap.
#[derive(Debug, Clone)]
pub enum MarginalParams {
    Mixture(MixtureParams),
    /// per-coordinate (atom, var) of an evolved product family
    Product { atom: Vec<f64>, var: Vec<f64> },
}

impl TargetModel {
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        Ok(TargetModel::GaussianMixture(GaussianMixture::single(mean, var)?))
    }

    /// Stationary target N(0, C) for the given space.
    pub fn stationary(space: &ModelSpace) -> Self {
        TargetModel::GaussianMixture(
            GaussianMixture::single(vec![0.0; space.dim()], space.c().to_vec())
                .expect("spectrum is positive"),
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetModel::GaussianMixture(m) => m.params.dim,
            TargetModel::MollifiedPointCloud(p) => p.dim(),
            TargetModel::LinearGaussianPosterior(p) => p.post_mean.len(),
            TargetModel::ProductSymmetricMixture(p) => p.dim(),
        }
    }

    /// Mixture parameters at time zero. For the product family this expands
    /// (small d only).
    pub fn params(&self) -> Result<MixtureParams> {
        match self {
            TargetModel::GaussianMixture(m) => Ok(m.params.clone()),
            TargetModel::MollifiedPointCloud(p) => Ok(p.params()),
            TargetModel::LinearGaussianPosterior(p) => Ok(p.params()),
            TargetModel::ProductSymmetricMixture(p) => Ok(p.expand()?.params.clone()),
        }
    }

    /// Marginal parameters at forward time t without forcing an expansion.
    pub fn marginal_params(&self, space: &ModelSpace, t: f64) -> Result<MarginalParams> {
        assert!(t >= 0.0, "forward time must be nonnegative");
        self.check_dim(space)?;
        match self {
            TargetModel::ProductSymmetricMixture(p) => {
                let emt = (-t).exp();
                let emt_half = (-0.5 * t).exp();
                let atom: Vec<f64> = p.atom.iter().map(|m| m * emt_half).collect();
                let var: Vec<f64> = p
                    .var
                    .iter()
                    .zip(space.c())
                    .map(|(v, c)| emt * v + (1.0 - emt) * c)
                    .collect();
                Ok(MarginalParams::Product { atom, var })
            }
            _ => Ok(MarginalParams::Mixture(self.params()?.evolve(space.c(), t))),
        }
    }

    fn check_dim(&self, space: &ModelSpace) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: self.dim() });
        }
        Ok(())
    }

    /// The OU forward marginal at time t as an explicit mixture.
    pub fn forward_marginal(&self, space: &ModelSpace, t: f64) -> Result<ForwardMarginal> {
        match self.marginal_params(space, t)? {
            MarginalParams::Mixture(m) => Ok(ForwardMarginal { t, mixture: m }),
            MarginalParams::Product { atom, var } => {
                // expansion path: only reachable for small d
                let evolved = ProductSymmetricMixture { atom, var };
                Ok(ForwardMarginal { t, mixture: evolved.expand()?.params })
            }
        }
    }

    /// Log of the (normalized) target density. Mixtures use log-sum-exp;
    /// underflow saturates to a large negative finite value.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            TargetModel::GaussianMixture(m) => m.params.log_density(x),
            TargetModel::MollifiedPointCloud(p) => p.params().log_density(x),
            TargetModel::LinearGaussianPosterior(p) => p.params().log_density(x),
            TargetModel::ProductSymmetricMixture(p) => {
                const LN_2PI: f64 = 1.8378770664093453;
                kahan_sum((0..p.dim()).map(|i| {
                    let m = p.atom[i];
                    let v = p.var[i];
                    let xi = x[i];
                    -(xi * xi + m * m) / (2.0 * v) + ln_cosh(m * xi / v)
                        - 0.5 * (v.ln() + LN_2PI)
                }))
            }
        }
    }

    /// Exact second moment E|X|^2 of the target.
    pub fn second_moment_exact(&self) -> f64 {
        match self {
            TargetModel::GaussianMixture(m) => mixture_second_moment(&m.params),
            TargetModel::MollifiedPointCloud(p) => mixture_second_moment(&p.params()),
            TargetModel::LinearGaussianPosterior(p) => {
                kahan_sum(p.post_mean.iter().map(|m| m * m))
                    + kahan_sum(p.post_var.iter().copied())
            }
            TargetModel::ProductSymmetricMixture(p) => {
                kahan_sum(p.atom.iter().zip(&p.var).map(|(m, v)| m * m + v))
            }
        }
    }

    /// Exact draws from the target.
    pub fn sample(&self, n: usize, stream: &RngStream) -> SampleSet {
        assert!(n >= 1);
        match self {
            TargetModel::GaussianMixture(m) => m.params.sample(n, stream),
            TargetModel::MollifiedPointCloud(p) => p.params().sample(n, stream),
            TargetModel::LinearGaussianPosterior(p) => p.params().sample(n, stream),
            TargetModel::ProductSymmetricMixture(p) => p.sample(n, stream),
        }
    }

    /// The target viewed after running the forward process to time `delta`
    /// (the early-stopped effective target P_delta), as an explicit target.
    pub fn stopped(&self, space: &ModelSpace, delta: f64) -> Result<TargetModel> {
        Ok(self.forward_marginal(space, delta)?.into_target())
    }

    /// Default probe box: per axis, the envelope of component means widened
    /// by six of the largest component standard deviations.
    pub fn default_probe_box(&self, space: &ModelSpace) -> ProbeConfig {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let widen = |lo: &mut Vec<f64>, hi: &mut Vec<f64>, mean: &[f64], std6: &[f64]| {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(mean[i] - std6[i]);
                hi[i] = hi[i].max(mean[i] + std6[i]);
            }
        };
        match self {
            TargetModel::ProductSymmetricMixture(p) => {
                for i in 0..d {
                    let s6 = 6.0 * p.var[i].sqrt();
                    lo[i] = -p.atom[i] - s6;
                    hi[i] = p.atom[i] + s6;
                }
            }
            _ => {
                let params = self.params().expect("non-product params always available");
                for j in 0..params.n_comp() {
                    let std6: Vec<f64> =
                        params.var(j).iter().map(|v| 6.0 * v.sqrt().max(1e-6)).collect();
                    widen(&mut lo, &mut hi, params.mean(j), &std6);
                }
            }
        }
        let _ = space;
        ProbeConfig::boxed(lo, hi)
    }

    /// Gaussian-tail decomposition `h(x) = log p0(x) + |x|^2_A / 2` with
    /// closed-form gradient and Hessian, plus grid-measured sup constants.
    ///
    /// Rejects targets whose measured `|sqrt(C) grad h|` exceeds the
    /// configured cap, signalling a tail-assumption violation.
    pub fn tail_decomposition(&self, space: &ModelSpace, cfg: &TailConfig) -> Result<HFunction> {
        self.check_dim(space)?;
        let probe = cfg
            .probe
            .clone()
            .unwrap_or_else(|| self.default_probe_box(space));
        let h = HFunction::build(self.clone(), space, probe)?;
        if h.sup_grad_c > cfg.grad_cap {
            return Err(Error::TailAssumptionViolated { measured: h.sup_grad_c, cap: cfg.grad_cap });
        }
        Ok(h)
    }
}

fn mixture_second_moment(p: &MixtureParams) -> f64 {
    let mut acc = 0.0;
    for j in 0..p.n_comp() {
        let m2 = kahan_sum(p.mean(j).iter().map(|m| m * m));
        let tr = kahan_sum(p.var(j).iter().copied());
        acc += p.weights[j] * (m2 + tr);
    }
    acc
}

/// Configuration for the tail decomposition's measurement pass.
#[derive(Debug, Clone)]
pub struct TailConfig {
    /// Probe box; defaults to the target's envelope box.
    pub probe: Option<ProbeConfig>,
    /// Cap on the measured `|sqrt(C) grad h|` before the target is rejected.
    pub grad_cap: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { probe: None, grad_cap: 1e6 }
    }
}

// ---------------------------------------------------------------------------
// Forward marginal
// ---------------------------------------------------------------------------

/// The OU forward marginal of a target at a fixed time, as an explicit
/// diagonal Gaussian mixture.
#[derive(Debug, Clone)]
pub struct ForwardMarginal {
    t: f64,
    mixture: MixtureParams,
}

impl ForwardMarginal {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mixture(&self) -> &MixtureParams {
        &self.mixture
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.mixture.log_density(x)
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mixture.dim];
        self.mixture.grad_log_density(x, &mut out);
        out
    }

    pub fn hessian_log_density(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mixture.dim * self.mixture.dim];
        self.mixture.hessian_log_density(x, &mut out);
        out
    }

    pub fn sample(&self, n: usize, stream: &RngStream) -> SampleSet {
        self.mixture.sample(n, stream)
    }

    /// Reinterpret the marginal as a target of its own (semigroup checks,
    /// early-stopped effective targets).
    pub fn into_target(self) -> TargetModel {
        let p = self.mixture;
        let means = p.means.chunks_exact(p.dim).map(|m| m.to_vec()).collect();
        let vars = p.vars.chunks_exact(p.dim).map(|v| v.to_vec()).collect();
        TargetModel::GaussianMixture(
            GaussianMixture::new(p.weights, means, vars).expect("evolved mixture stays valid"),
        )
    }
}

// ---------------------------------------------------------------------------
// Gaussian-tail decomposition
// ---------------------------------------------------------------------------

/// The remainder `h(x) = log p0(x) + |x|^2_A / 2` of the Gaussian-tail
/// factorization, with closed-form derivatives and the grid-measured
/// constants `|sqrt(C) grad h|_inf` and `||C hess h||_inf`.
///
/// h is unnormalized in the sense that constant offsets are irrelevant:
/// every bound consumes only its derivatives.
#[derive(Debug, Clone)]
pub struct HFunction {
    target: TargetModel,
    a: Vec<f64>,
    c: Vec<f64>,
    sup_grad_c: f64,
    sup_hess_c: f64,
    probe_lo: Vec<f64>,
    probe_hi: Vec<f64>,
}

impl HFunction {
    fn build(target: TargetModel, space: &ModelSpace, probe: ProbeConfig) -> Result<Self> {
        let mut h = HFunction {
            target,
            a: space.a().to_vec(),
            c: space.c().to_vec(),
            sup_grad_c: 0.0,
            sup_hess_c: 0.0,
            probe_lo: probe.lo.clone(),
            probe_hi: probe.hi.clone(),
        };
        let grad_sup = sup_search(&probe, |x| {
            let g = h.grad(x);
            kahan_sum(g.iter().zip(&h.c).map(|(gi, ci)| ci * gi * gi)).sqrt()
        });
        let hess_sup = sup_search(&probe, |x| h.c_hessian_opnorm(x));
        h.sup_grad_c = grad_sup.value;
        h.sup_hess_c = hess_sup.value;
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn target(&self) -> &TargetModel {
        &self.target
    }

    /// h value (normalized by the target's own normalization; offsets are
    /// immaterial downstream).
    pub fn value(&self, x: &[f64]) -> f64 {
        let quad = kahan_sum(x.iter().zip(&self.a).map(|(xi, ai)| xi * xi / ai));
        self.target.log_density(x) + 0.5 * quad
    }

    /// grad h = grad log p0 + A^{-1} x.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = match &self.target {
            TargetModel::ProductSymmetricMixture(p) => {
                (0..p.dim()).map(|i| p.coord_grad_t(&self.c, 0.0, i, x[i])).collect()
            }
            t => {
                let params = t.params().expect("non-product");
                let mut out = vec![0.0; self.dim()];
                params.grad_log_density(x, &mut out);
                out
            }
        };
        for i in 0..g.len() {
            g[i] += x[i] / self.a[i];
        }
        g
    }

    /// hess h = hess log p0 + A^{-1}, dense row-major.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut hm = match &self.target {
            TargetModel::ProductSymmetricMixture(p) => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = p.coord_hess_t(&self.c, 0.0, i, x[i]);
                }
                m
            }
            t => {
                let params = t.params().expect("non-product");
                let mut m = vec![0.0; d * d];
                params.hessian_log_density(x, &mut m);
                m
            }
        };
        for i in 0..d {
            hm[i * d + i] += 1.0 / self.a[i];
        }
        hm
    }

    /// `||C hess h(x)||` as the operator norm of the symmetrized
    /// `sqrt(C) hess h sqrt(C)`.
    pub fn c_hessian_opnorm(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let hm = self.hessian(x);
        let mut sym = vec![0.0; d * d];
        for r in 0..d {
            for s in 0..d {
                sym[r * d + s] = self.c[r].sqrt() * hm[r * d + s] * self.c[s].sqrt();
            }
        }
        sym_opnorm(&sym, d)
    }

    /// Measured grid sup of `|sqrt(C) grad h|`.
    pub fn sup_grad_c(&self) -> f64 {
        self.sup_grad_c
    }

    /// Measured grid sup of `||C hess h||`.
    pub fn sup_hess_c(&self) -> f64 {
        self.sup_hess_c
    }

    /// The probed box (lo, hi) the sups were certified on.
    pub fn probe_box(&self) -> (&[f64], &[f64]) {
        (&self.probe_lo, &self.probe_hi)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

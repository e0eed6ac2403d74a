//! Score oracles: the exact score `s(t,x) = C grad log p_t(x)`, the
//! modified score `s~(t,x) = s(t,x) + C Abar_t^{-1} x`, epsilon-perturbed
//! approximate scores, and finite-difference probes of their Jacobians.
//!
//! Two perturbation modes realize an epsilon-accurate approximate score:
//!
//! - `AdditiveGaussian` — i.i.d. Gaussian noise of root-mean-square size
//!   epsilon, drawn from a call-indexed counter keyed by (t, x, stream) so
//!   the perturbed score stays a deterministic function of its arguments
//!   (the sampling scheme stays Markov and runs are reproducible under any
//!   evaluation order).
//! - `Sinusoidal` — the smooth deterministic field
//!   `eps * sin(omega x_i) / sqrt(d)` per coordinate. Its gradient is
//!   bounded by `eps * omega / sqrt(d)`, and its pointwise norm never
//!   exceeds eps, so the epsilon error budget is conservative for this
//!   mode (time-averaged RMS comes out near 0.7 eps).

use crate::probe::ProbeGrid;
use crate::spectral::{ModelSpace, RngStream, Schedule};
use crate::targets::{MarginalParams, MixtureParams, TargetModel};
use crate::util::{counter_normal_pair, kahan_sum, mix_words, sym_opnorm};
use crate::{Error, Result};
use rayon::prelude::*;

/// How a perturbed score deviates from its inner model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbMode {
    AdditiveGaussian,
    Sinusoidal { omega: f64 },
}

/// A score evaluator: exact (closed-form mixture marginals) or a perturbed
/// wrapper carrying its own error budget.
#[derive(Debug, Clone)]
pub enum ScoreModel {
    Exact {
        target: TargetModel,
        space: ModelSpace,
        /// Scores are defined only for t >= this floor (early stopping).
        stopping_floor: f64,
    },
    Perturbed {
        inner: Box<ScoreModel>,
        eps: f64,
        mode: PerturbMode,
        stream: RngStream,
    },
}

impl ScoreModel {
    pub fn exact(target: TargetModel, space: ModelSpace) -> Self {
        ScoreModel::Exact { target, space, stopping_floor: 0.0 }
    }

    /// Exact score for a target defined only after the stopping time.
    pub fn exact_with_floor(target: TargetModel, space: ModelSpace, delta: f64) -> Self {
        ScoreModel::Exact { target, space, stopping_floor: delta }
    }

    pub fn perturbed(inner: ScoreModel, eps: f64, mode: PerturbMode, stream: RngStream) -> Self {
        assert!(eps >= 0.0);
        ScoreModel::Perturbed { inner: Box::new(inner), eps, mode, stream }
    }

    pub fn space(&self) -> &ModelSpace {
        match self {
            ScoreModel::Exact { space, .. } => space,
            ScoreModel::Perturbed { inner, .. } => inner.space(),
        }
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    pub fn stopping_floor(&self) -> f64 {
        match self {
            ScoreModel::Exact { stopping_floor, .. } => *stopping_floor,
            ScoreModel::Perturbed { inner, .. } => inner.stopping_floor(),
        }
    }

    /// Prepare an evaluator frozen at time t (marginal parameters are
    /// computed once; per-call work is the softmax only).
    pub fn at_time(&self, t: f64) -> Result<ScoreAt<'_>> {
        let floor = self.stopping_floor();
        if t < floor {
            return Err(Error::BeforeStoppingTime { t, delta: floor });
        }
        self.at_time_unchecked(t)
    }

    fn at_time_unchecked(&self, t: f64) -> Result<ScoreAt<'_>> {
        match self {
            ScoreModel::Exact { target, space, .. } => {
                let repr = match target.marginal_params(space, t)? {
                    MarginalParams::Mixture(m) => ScoreRepr::Mixture { params: m, c: space.c() },
                    MarginalParams::Product { atom, var } => {
                        ScoreRepr::Product { atom, var, c: space.c() }
                    }
                };
                Ok(ScoreAt { t, repr })
            }
            ScoreModel::Perturbed { inner, eps, mode, stream } => {
                let inner_at = inner.at_time(t)?;
                if *eps == 0.0 {
                    // bit-identical to the inner model
                    return Ok(inner_at);
                }
                Ok(ScoreAt {
                    t,
                    repr: ScoreRepr::Perturbed {
                        inner: Box::new(inner_at),
                        eps: *eps,
                        mode: *mode,
                        stream: *stream,
                    },
                })
            }
        }
    }

    /// `s(t, x)` as a fresh vector.
    pub fn score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let at = self.at_time(t)?;
        let mut out = vec![0.0; self.dim()];
        let mut scratch = Vec::new();
        at.eval_into(x, &mut out, &mut scratch);
        Ok(out)
    }

    /// The diagonal affine representation `s(t,x) = scale .* x + shift`
    /// when the score is affine in x (single-Gaussian marginals, exact or
    /// zero-perturbation models). `None` otherwise.
    pub fn affine_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ScoreModel::Exact { target, space, .. } => {
                match target.marginal_params(space, t).ok()? {
                    MarginalParams::Mixture(m) if m.n_comp() == 1 => {
                        let c = space.c();
                        let scale: Vec<f64> =
                            (0..m.dim).map(|i| -c[i] / m.var(0)[i]).collect();
                        let shift: Vec<f64> =
                            (0..m.dim).map(|i| c[i] * m.mean(0)[i] / m.var(0)[i]).collect();
                        Some((scale, shift))
                    }
                    MarginalParams::Product { atom, var } if atom.iter().all(|&a| a == 0.0) => {
                        let c = space.c();
                        let scale: Vec<f64> = (0..c.len()).map(|i| -c[i] / var[i]).collect();
                        Some((scale, vec![0.0; c.len()]))
                    }
                    _ => None,
                }
            }
            ScoreModel::Perturbed { inner, eps, .. } if *eps == 0.0 => inner.affine_at(t),
            ScoreModel::Perturbed { .. } => None,
        }
    }
}

/// A score model frozen at one time point.
pub struct ScoreAt<'m> {
    t: f64,
    repr: ScoreRepr<'m>,
}

enum ScoreRepr<'m> {
    Mixture {
        params: MixtureParams,
        c: &'m [f64],
    },
    Product {
        atom: Vec<f64>,
        var: Vec<f64>,
        c: &'m [f64],
    },
    Perturbed {
        inner: Box<ScoreAt<'m>>,
        eps: f64,
        mode: PerturbMode,
        stream: RngStream,
    },
}

impl ScoreAt<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Evaluate into `out`; `scratch` is a responsibility buffer reused
    /// across calls.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match &self.repr {
            ScoreRepr::Mixture { params, c } => {
                params.grad_log_density_buf(x, out, scratch);
                for i in 0..out.len() {
                    out[i] *= c[i];
                }
            }
            ScoreRepr::Product { atom, var, c } => {
                for i in 0..out.len() {
                    let g = -x[i] / var[i]
                        + (atom[i] / var[i]) * (atom[i] * x[i] / var[i]).tanh();
                    out[i] = c[i] * g;
                }
            }
            ScoreRepr::Perturbed { inner, eps, mode, stream } => {
                inner.eval_into(x, out, scratch);
                let d = out.len();
                let scale = eps / (d as f64).sqrt();
                match mode {
                    PerturbMode::Sinusoidal { omega } => {
                        for i in 0..d {
                            out[i] += scale * (omega * x[i]).sin();
                        }
                    }
                    PerturbMode::AdditiveGaussian => {
                        // counter keyed by (stream, t, x): deterministic,
                        // race-free, resampled per call site
                        let mut words = Vec::with_capacity(d + 3);
                        words.push(stream.seed);
                        words.push(stream.stream_id);
                        words.push(self.t.to_bits());
                        words.extend(x.iter().map(|v| v.to_bits()));
                        let mut state = mix_words(&words);
                        let mut i = 0;
                        while i < d {
                            state = state.wrapping_add(0x9e37_79b9);
                            let (z1, z2) = counter_normal_pair(state);
                            out[i] += scale * z1;
                            if i + 1 < d {
                                out[i + 1] += scale * z2;
                            }
                            i += 2;
                        }
                    }
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut scratch = Vec::new();
        self.eval_into(x, &mut out, &mut scratch);
        out
    }
}

// ---------------------------------------------------------------------------
// Modified score
// ---------------------------------------------------------------------------

/// The modified score `s~(t,x) = s(t,x) + C Abar_t^{-1} x` with
/// `Abar_t = A e^{-t} + C (1 - e^{-t})`. For a pure Gaussian target
/// N(0, A) it vanishes identically; in general its size and Lipschitz
/// constant decay like `e^{-t/2}` and `e^{-t}`.
#[derive(Debug, Clone)]
pub struct ModifiedScore {
    model: ScoreModel,
    space: ModelSpace,
}

impl ModifiedScore {
    pub fn new(model: ScoreModel, space: ModelSpace) -> Self {
        assert_eq!(model.dim(), space.dim());
        ModifiedScore { model, space }
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn at_time(&self, t: f64) -> Result<ModifiedAt<'_>> {
        let score = self.model.at_time(t)?;
        let cab: Vec<f64> = (0..self.dim())
            .map(|i| self.space.c()[i] / self.space.abar(t, i))
            .collect();
        Ok(ModifiedAt { score, cab })
    }

    /// `s~(t, x)` as a fresh vector.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let at = self.at_time(t)?;
        let mut out = vec![0.0; self.dim()];
        let mut scratch = Vec::new();
        at.eval_into(x, &mut out, &mut scratch);
        Ok(out)
    }
}

/// Modified score frozen at a time point.
pub struct ModifiedAt<'m> {
    score: ScoreAt<'m>,
    cab: Vec<f64>,
}

impl ModifiedAt<'_> {
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        self.score.eval_into(x, out, scratch);
        for i in 0..out.len() {
            out[i] += self.cab[i] * x[i];
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let mut scratch = Vec::new();
        self.eval_into(x, &mut out, &mut scratch);
        out
    }
}

// ---------------------------------------------------------------------------
// Finite-difference probes
// ---------------------------------------------------------------------------

/// Default base step for central differences: eps_machine^(1/3); the
/// per-coordinate step is `base * (1 + |x_j|)`.
pub fn fd_default_step() -> f64 {
    f64::EPSILON.powf(1.0 / 3.0)
}

/// Central-difference Jacobian of the modified score, row-major d x d.
/// Errors when the FD noise estimate exceeds 10% of the entry scale
/// (step too small for the field's magnitude).
pub fn jacobian_fd(ms: &ModifiedScore, t: f64, x: &[f64], step: f64) -> Result<Vec<f64>> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let d = ms.dim();
    let at = ms.at_time(t)?;
    let mut jac = vec![0.0; d * d];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut scratch = Vec::new();
    let mut value_scale = 0.0f64;
    let mut min_h = f64::INFINITY;
    for j in 0..d {
        let h = step * (1.0 + x[j].abs());
        min_h = min_h.min(h);
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        at.eval_into(&xp, &mut fp, &mut scratch);
        at.eval_into(&xm, &mut fm, &mut scratch);
        for i in 0..d {
            jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
            value_scale = value_scale.max(fp[i].abs()).max(fm[i].abs());
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    let entry_scale = jac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = f64::EPSILON * value_scale / (2.0 * min_h);
    if noise > 0.1 * entry_scale && noise > 1e-9 {
        return Err(Error::FdStepTooSmall { noise, scale: entry_scale });
    }
    Ok(jac)
}

/// One row of a Lipschitz profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub t: f64,
    /// grid sup of the operator norm of the symmetrized FD Jacobian
    pub sup_grad: f64,
    /// grid sup of |s~(t, .)|
    pub sup_value: f64,
}

/// Per-time grid suprema of `||grad s~(t,.)||` and `|s~(t,.)|`.
/// Operator norms come from power iteration on the symmetrized Jacobian
/// (exact scores have symmetric Jacobians; the symmetrization also damps
/// FD noise). Grid points evaluate in parallel; max-reduction is
/// order-independent so results are deterministic.
pub fn lipschitz_profile(
    ms: &ModifiedScore,
    times: &[f64],
    grid: &ProbeGrid,
) -> Result<Vec<ProfilePoint>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("probe grid"));
    }
    let d = ms.dim();
    let step = fd_default_step();
    times
        .iter()
        .map(|&t| {
            let at = ms.at_time(t)?;
            let point_results: Result<Vec<(f64, f64)>> = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let x = grid.point(idx);
                    let jac = jacobian_fd(ms, t, x, step)?;
                    let mut sym = vec![0.0; d * d];
                    for r in 0..d {
                        for s in 0..d {
                            sym[r * d + s] = 0.5 * (jac[r * d + s] + jac[s * d + r]);
                        }
                    }
                    let opnorm = sym_opnorm(&sym, d);
                    let mut val = vec![0.0; d];
                    let mut scratch = Vec::new();
                    at.eval_into(x, &mut val, &mut scratch);
                    let norm = kahan_sum(val.iter().map(|v| v * v)).sqrt();
                    Ok((opnorm, norm))
                })
                .collect();
            let point_results = point_results?;
            let sup_grad = point_results.iter().fold(0.0f64, |m, r| m.max(r.0));
            let sup_value = point_results.iter().fold(0.0f64, |m, r| m.max(r.1));
            Ok(ProfilePoint { t, sup_grad, sup_value })
        })
        .collect()
}

/// Time-averaged root-mean-square deviation of a score model from a
/// reference, over exact forward-process samples at the schedule points:
/// `sqrt( (1/T) sum_k (t_{k+1} - t_k) E |s_theta - s|^2 )`.
///
/// This is the quantity the epsilon error budget constrains.
pub fn measured_rms(
    model: &ScoreModel,
    reference: &ScoreModel,
    target: &TargetModel,
    space: &ModelSpace,
    schedule: &Schedule,
    n: usize,
    stream: &RngStream,
) -> Result<f64> {
    let d = space.dim();
    let t_final = schedule.t_final();
    let mut acc = 0.0;
    for k in 0..schedule.n_steps() {
        let tk = schedule.points()[k];
        let back_t = t_final - tk;
        let weight = (schedule.points()[k + 1] - tk) / t_final;
        let marginal = target.forward_marginal(space, back_t)?;
        let xs = marginal.sample(n, &stream.substream(k as u64));
        let at_model = model.at_time(back_t)?;
        let at_ref = reference.at_time(back_t)?;
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        let mut scratch = Vec::new();
        let mut total = 0.0;
        for row in xs.rows() {
            at_model.eval_into(row, &mut a, &mut scratch);
            at_ref.eval_into(row, &mut b, &mut scratch);
            total += a
                .iter()
                .zip(&b)
                .map(|(ai, bi)| (ai - bi) * (ai - bi))
                .sum::<f64>();
        }
        acc += weight * total / n as f64;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModelSpace;
    use crate::targets::GaussianMixture;

    fn unit_space(d: usize) -> ModelSpace {
        ModelSpace::isotropic(d, 1.0, 1.0).unwrap()
    }

    #[test]
    fn stationary_score_is_negative_identity() {
        let space = unit_space(3);
        let model = ScoreModel::exact(TargetModel::stationary(&space), space.clone());
        let x = [0.3, -1.2, 2.0];
        for &t in &[0.0, 0.5, 4.0] {
            let s = model.score(t, &x).unwrap();
            for i in 0..3 {
                assert!((s[i] + x[i]).abs() < 1e-15, "t={t}: {s:?}");
            }
        }
    }

    #[test]
    fn point_mass_score_matches_ou_variance() {
        // s(t, x) = -x / (1 - e^{-t}) for a point mass at 0 with C = I
        let space = unit_space(1);
        let target = TargetModel::gaussian(vec![0.0], vec![0.0]).unwrap();
        let model = ScoreModel::exact(target, space);
        let t = 0.9;
        let s = model.score(t, &[1.7]).unwrap();
        let expect = -1.7 / (1.0 - (-t).exp());
        assert!((s[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn mixture_score_matches_finite_difference_of_log_density() {
        let space = unit_space(1);
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let model = ScoreModel::exact(target.clone(), space.clone());
        let (t, x) = (0.5, 0.3);
        let s = model.score(t, &[x]).unwrap();
        let marginal = target.forward_marginal(&space, t).unwrap();
        let h = 1e-5;
        let fd = (marginal.log_density(&[x + h]) - marginal.log_density(&[x - h])) / (2.0 * h);
        assert!((s[0] - fd).abs() < 1e-6, "{} vs {fd}", s[0]);
    }

    #[test]
    fn modified_score_vanishes_for_gaussian_tail_target() {
        // target N(0, A): s~ = 0 for every admissible A and all t
        let space = ModelSpace::new(vec![1.0, 2.0], vec![0.5, 3.0]).unwrap();
        let target = TargetModel::gaussian(vec![0.0, 0.0], space.a().to_vec()).unwrap();
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        for &t in &[0.0, 0.7, 3.0] {
            let v = ms.eval(t, &[1.5, -2.5]).unwrap();
            assert!(v.iter().all(|c| c.abs() < 1e-13), "t={t}: {v:?}");
        }
    }

    #[test]
    fn modified_score_reduces_to_s_plus_x_when_a_equals_c() {
        let space = unit_space(1);
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let model = ScoreModel::exact(target, space.clone());
        let ms = ModifiedScore::new(model.clone(), space);
        let (t, x) = (1.0, 0.3);
        let s = model.score(t, &[x]).unwrap();
        let v = ms.eval(t, &[x]).unwrap();
        assert!((v[0] - (s[0] + x)).abs() < 1e-14);
    }

    #[test]
    fn modified_score_assembles_componentwise() {
        // general a != c: s~ = s + C Abar^{-1} x assembled by hand
        let space = ModelSpace::new(vec![2.0], vec![0.5]).unwrap();
        let target = TargetModel::gaussian(vec![1.0], vec![0.7]).unwrap();
        let model = ScoreModel::exact(target, space.clone());
        let ms = ModifiedScore::new(model.clone(), space.clone());
        let (t, x) = (1.0, 0.3);
        let s = model.score(t, &[x]).unwrap();
        let abar = space.abar(t, 0);
        let hand = s[0] + space.c()[0] / abar * x;
        let v = ms.eval(t, &[x]).unwrap();
        assert!((v[0] - hand).abs() < 1e-14);
    }

    #[test]
    fn jacobian_is_zero_for_gaussian_tail_target() {
        let space = ModelSpace::new(vec![1.0, 1.5], vec![2.0, 0.5]).unwrap();
        let target = TargetModel::gaussian(vec![0.0, 0.0], space.a().to_vec()).unwrap();
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let jac = jacobian_fd(&ms, 0.8, &[0.4, -0.9], fd_default_step()).unwrap();
        assert!(jac.iter().all(|v| v.abs() < 1e-8), "{jac:?}");
    }

    #[test]
    fn jacobian_point_mass_hand_derivative() {
        // ds^/dx = (1 - 1/(1-e^{-t})); at t = ln 2 this is -1
        let space = unit_space(1);
        let target = TargetModel::gaussian(vec![0.0], vec![0.0]).unwrap();
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let t = std::f64::consts::LN_2;
        let jac = jacobian_fd(&ms, t, &[0.7], fd_default_step()).unwrap();
        assert!((jac[0] + 1.0).abs() < 1e-9, "{}", jac[0]);
    }

    #[test]
    fn jacobian_fd_is_symmetric_for_exact_scores() {
        let space = unit_space(2);
        let target = TargetModel::GaussianMixture(
            GaussianMixture::new(
                vec![0.5, 0.5],
                vec![vec![-1.0, 0.3], vec![1.0, -0.3]],
                vec![vec![0.25, 0.5], vec![0.5, 0.25]],
            )
            .unwrap(),
        );
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let jac = jacobian_fd(&ms, 0.5, &[0.2, -0.4], fd_default_step()).unwrap();
        assert!((jac[1] - jac[2]).abs() < 1e-5, "off-diagonals {} vs {}", jac[1], jac[2]);
    }

    #[test]
    fn jacobian_fd_flags_absurd_steps() {
        let space = unit_space(1);
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let r = jacobian_fd(&ms, 0.5, &[0.3], 1e-16);
        assert!(matches!(r, Err(Error::FdStepTooSmall { .. })));
    }

    #[test]
    fn gradient_field_consistency() {
        // FD Jacobian of the exact score equals C times the FD Hessian of
        // log p_t
        let space = ModelSpace::new(vec![1.3], vec![1.3]).unwrap();
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.3));
        let model = ScoreModel::exact(target.clone(), space.clone());
        let (t, x) = (0.7, 0.45);
        let h = 1e-5;
        let sp = model.score(t, &[x + h]).unwrap()[0];
        let sm = model.score(t, &[x - h]).unwrap()[0];
        let ds = (sp - sm) / (2.0 * h);
        let marginal = target.forward_marginal(&space, t).unwrap();
        let gp = marginal.grad_log_density(&[x + h])[0];
        let gm = marginal.grad_log_density(&[x - h])[0];
        let c_hess = space.c()[0] * (gp - gm) / (2.0 * h);
        assert!((ds - c_hess).abs() < 1e-6, "{ds} vs {c_hess}");
    }

    #[test]
    fn perturbed_zero_eps_is_bit_identical() {
        let space = unit_space(2);
        let target = TargetModel::stationary(&space);
        let inner = ScoreModel::exact(target, space);
        let wrapped = ScoreModel::perturbed(
            inner.clone(),
            0.0,
            PerturbMode::AdditiveGaussian,
            RngStream::new(1),
        );
        let x = [0.123456789, -3.21];
        for &t in &[0.0, 1.5] {
            assert_eq!(inner.score(t, &x).unwrap(), wrapped.score(t, &x).unwrap());
        }
    }

    #[test]
    fn perturbed_additive_is_deterministic_per_call_site() {
        let space = unit_space(2);
        let inner = ScoreModel::exact(TargetModel::stationary(&space), space);
        let model = ScoreModel::perturbed(
            inner,
            0.1,
            PerturbMode::AdditiveGaussian,
            RngStream::new(7),
        );
        let x = [0.5, -0.5];
        let a = model.score(1.0, &x).unwrap();
        let b = model.score(1.0, &x).unwrap();
        assert_eq!(a, b);
        // different t or x decorrelates
        let c = model.score(1.0000001, &x).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn additive_rms_calibrates_to_eps() {
        let space = unit_space(2);
        let target = TargetModel::stationary(&space);
        let inner = ScoreModel::exact(target.clone(), space.clone());
        let eps = 0.25;
        let model = ScoreModel::perturbed(
            inner.clone(),
            eps,
            PerturbMode::AdditiveGaussian,
            RngStream::new(3),
        );
        let schedule = Schedule::uniform(4.0, 0.0, 16).unwrap();
        let rms = measured_rms(
            &model,
            &inner,
            &target,
            &space,
            &schedule,
            2_000,
            &RngStream::new(9),
        )
        .unwrap();
        assert!(
            (rms - eps).abs() / eps < 0.10,
            "additive mode RMS {rms} should be within 10% of eps {eps}"
        );
    }

    #[test]
    fn sinusoidal_rms_stays_within_budget() {
        let space = unit_space(1);
        let target = TargetModel::stationary(&space);
        let inner = ScoreModel::exact(target.clone(), space.clone());
        let eps = 0.2;
        let model = ScoreModel::perturbed(
            inner.clone(),
            eps,
            PerturbMode::Sinusoidal { omega: 1.0 },
            RngStream::new(3),
        );
        let schedule = Schedule::uniform(4.0, 0.0, 16).unwrap();
        let rms = measured_rms(
            &model,
            &inner,
            &target,
            &space,
            &schedule,
            2_000,
            &RngStream::new(9),
        )
        .unwrap();
        assert!(rms <= eps && rms > 0.3 * eps, "sinusoidal RMS {rms} vs budget {eps}");
    }

    #[test]
    fn stopping_floor_rejects_early_times() {
        let space = unit_space(1);
        let target = TargetModel::gaussian(vec![0.0], vec![0.0]).unwrap();
        let model = ScoreModel::exact_with_floor(target, space, 0.1);
        assert!(matches!(
            model.score(0.05, &[1.0]),
            Err(Error::BeforeStoppingTime { .. })
        ));
        assert!(model.score(0.1, &[1.0]).is_ok());
    }

    #[test]
    fn lipschitz_profile_zero_for_gaussian_tail() {
        let space = ModelSpace::new(vec![1.0], vec![0.6]).unwrap();
        let target = TargetModel::gaussian(vec![0.0], space.a().to_vec()).unwrap();
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let grid = ProbeGrid::tensor(&[-3.0], &[3.0], 21);
        let prof = lipschitz_profile(&ms, &[0.25, 1.0, 2.0], &grid).unwrap();
        for p in prof {
            assert!(p.sup_grad < 1e-7, "sup grad {}", p.sup_grad);
            assert!(p.sup_value < 1e-10, "sup value {}", p.sup_value);
        }
    }

    #[test]
    fn lipschitz_profile_decays_exponentially_for_mixture() {
        // ratio test: profile at t in {0.5, 1, 2} decays at least like
        // e^{-dt} within 10%
        let space = unit_space(1);
        let target =
            TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let grid = ProbeGrid::tensor(&[-4.0], &[4.0], 41);
        let prof = lipschitz_profile(&ms, &[0.5, 1.0, 2.0], &grid).unwrap();
        for w in prof.windows(2) {
            let dt = w[1].t - w[0].t;
            let grad_ratio = w[1].sup_grad / w[0].sup_grad;
            assert!(
                grad_ratio <= (-dt).exp() * 1.10,
                "grad sup decayed by {grad_ratio} over dt={dt}"
            );
            let val_ratio = w[1].sup_value / w[0].sup_value;
            assert!(
                val_ratio <= (-0.5 * dt).exp() * 1.15,
                "value sup decayed by {val_ratio} over dt={dt}"
            );
        }
    }

    #[test]
    fn mollified_pair_gradient_bound_at_zero_time() {
        // atoms +-1, sigma = 1 (R = 2): sup ||grad s~(0,.)|| <= 3 R^2 = 12
        let space = unit_space(1);
        let cloud = crate::targets::MollifiedPointCloud::uniform(
            vec![vec![-1.0], vec![1.0]],
            1.0,
        )
        .unwrap();
        let target = TargetModel::MollifiedPointCloud(cloud);
        let ms = ModifiedScore::new(ScoreModel::exact(target, space.clone()), space);
        let grid = ProbeGrid::tensor(&[-9.0], &[9.0], 181);
        let prof = lipschitz_profile(&ms, &[0.0, 0.5, 1.0], &grid).unwrap();
        for p in &prof {
            assert!(
                p.sup_grad <= 12.0 * (-p.t).exp() + 1e-6,
                "t={}: sup grad {} exceeds 12 e^-t",
                p.t,
                p.sup_grad
            );
        }
    }
}

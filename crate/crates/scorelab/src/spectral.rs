//! Shared numeric substrate: the diagonalized covariance model, Gaussian
//! measures, time schedules, and deterministic seeded randomness.
//!
//! All covariances live as diagonal spectra in one shared eigenbasis (the
//! computational basis); the tail covariance A and the noise covariance C
//! are simultaneously diagonalizable by assumption, so nothing is lost.
//! Everything here is immutable after construction and safe to share
//! across threads.

use crate::util::{kahan_sum, mix_words, splitmix64};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};

/// Dimension, spectra of C and A, and the attached moment constants.
///
/// `m0 = max{Tr(C), M2, 1}` becomes available once the target's second
/// moment M2 is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    c: Vec<f64>,
    a: Vec<f64>,
    trace_c: f64,
    m2: Option<f64>,
}

impl ModelSpace {
    pub fn new(c: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::EmptyInput("covariance spectrum"));
        }
        if c.len() != a.len() {
            return Err(Error::DimensionMismatch { expected: c.len(), got: a.len() });
        }
        if c.iter().any(|&v| !(v > 0.0)) || a.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(
                "spectra of C and A must be strictly positive".into(),
            ));
        }
        let trace_c = kahan_sum(c.iter().copied());
        Ok(ModelSpace { c, a, trace_c, m2: None })
    }

    /// d copies of the scalar pair (c, a).
    pub fn isotropic(d: usize, c: f64, a: f64) -> Result<Self> {
        Self::new(vec![c; d], vec![a; d])
    }

    pub fn with_m2(mut self, m2: f64) -> Self {
        self.m2 = Some(m2);
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn trace_c(&self) -> f64 {
        self.trace_c
    }

    pub fn m2(&self) -> Option<f64> {
        self.m2
    }

    /// `max{Tr(C), M2, 1}`; requires an attached M2.
    pub fn m0(&self) -> Option<f64> {
        self.m2.map(|m2| self.trace_c.max(m2).max(1.0))
    }

    /// Exact elementwise equality a == c. Downstream this is the regime
    /// where K = 1 and L2 = 0.
    pub fn tail_equals_base(&self) -> bool {
        self.a == self.c
    }

    /// The base distribution N(0, C).
    pub fn base_measure(&self) -> GaussianMeasure {
        GaussianMeasure::new(vec![0.0; self.dim()], self.c.clone()).expect("valid by construction")
    }

    /// Interpolated tail covariance eigenvalue:
    /// `abar_i(t) = a_i e^{-t} + c_i (1 - e^{-t})`.
    pub fn abar(&self, t: f64, i: usize) -> f64 {
        let emt = (-t).exp();
        self.a[i] * emt + self.c[i] * (1.0 - emt)
    }
}

/// A Gaussian with diagonal covariance in the shared eigenbasis.
/// Zero variances are allowed (degenerate directions).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: var.len() });
        }
        if var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("variances must be nonnegative".into()));
        }
        Ok(GaussianMeasure { mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// n draws; bit-reproducible for a fixed stream.
    pub fn sample(&self, n: usize, stream: &RngStream) -> SampleSet {
        assert!(n >= 1, "sample count must be positive");
        let d = self.dim();
        let std: Vec<f64> = self.var.iter().map(|v| v.sqrt()).collect();
        let mut rng = stream.rng();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for i in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                data.push(self.mean[i] + std[i] * z);
            }
        }
        SampleSet { dim: d, seed: stream.seed, data }
    }

    pub fn second_moment(&self) -> f64 {
        kahan_sum(self.mean.iter().map(|m| m * m)) + kahan_sum(self.var.iter().copied())
    }
}

/// Discretization points `0 = t_0 < ... < t_N = T - delta` with the
/// per-step factors `alpha_k = exp(t_k - t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    t_final: f64,
    delta: f64,
    points: Vec<f64>,
    alphas: Vec<f64>,
    tau: f64,
}

impl Schedule {
    /// Uniform schedule with N equal steps on [0, T - delta].
    pub fn uniform(t_final: f64, delta: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("schedule needs at least one step".into()));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter("delta must be nonnegative".into()));
        }
        if !(t_final - delta > 0.0) {
            return Err(Error::EmptyHorizon { t: t_final, delta });
        }
        let span = t_final - delta;
        let points: Vec<f64> = (0..=n).map(|k| span * k as f64 / n as f64).collect();
        Self::from_points(t_final, delta, points)
    }

    /// Schedule from explicit points; validates monotonicity and endpoints.
    pub fn from_points(t_final: f64, delta: f64, points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("schedule needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidParameter("schedule must start at t_0 = 0".into()));
        }
        let last = *points.last().unwrap();
        if (last - (t_final - delta)).abs() > 1e-12 * t_final.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule must end at T - delta = {}, got {last}",
                t_final - delta
            )));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("schedule points must strictly increase".into()));
        }
        let alphas: Vec<f64> = points.windows(2).map(|w| (w[0] - w[1]).exp()).collect();
        let tau = points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        Ok(Schedule { t_final, delta, points, alphas, tau })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Largest step `max_k (t_{k+1} - t_k)`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of steps N.
    pub fn n_steps(&self) -> usize {
        self.alphas.len()
    }

    /// Test hook: bypasses validation so harness mutation checks can build
    /// deliberately corrupted schedules.
    #[doc(hidden)]
    pub fn from_raw_parts(t_final: f64, delta: f64, points: Vec<f64>, alphas: Vec<f64>) -> Self {
        let tau = points.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        Schedule { t_final, delta, points, alphas, tau }
    }
}

/// A named position in a family of reproducible random streams.
///
/// Identical (seed, stream_id) pairs draw identical values on every run and
/// thread count; distinct stream ids are statistically independent. Splitting
/// is cheap, so each trajectory or grid point can own a substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Derive the child stream with the given index.
    pub fn substream(&self, child: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ mix_words(&[child])),
        }
    }

    /// Concrete generator positioned at this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// n draws of a d-dimensional quantity, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub seed: u64,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn from_rows(dim: usize, seed: u64, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        SampleSet { dim, seed, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Coordinates of one axis as a fresh vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Empirical mean per coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|k| kahan_sum(self.rows().map(|r| r[k])) / n)
            .collect()
    }

    /// Empirical variance per coordinate (population normalization).
    pub fn variance(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mean = self.mean();
        (0..self.dim)
            .map(|k| kahan_sum(self.rows().map(|r| (r[k] - mean[k]) * (r[k] - mean[k]))) / n)
            .collect()
    }

    /// Gaussian moment fit: N(mean, diag variance).
    pub fn fit_gaussian(&self) -> GaussianMeasure {
        GaussianMeasure::new(self.mean(), self.variance()).expect("moments are finite")
    }

    /// CSV serialization: header line `dim,count,seed`, a value line, then
    /// one row per draw with coordinates at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim,count,seed")?;
        writeln!(w, "{},{},{}", self.dim, self.len(), self.seed)?;
        for row in self.rows() {
            let cols: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyInput("sample csv"))??;
        if header.trim() != "dim,count,seed" {
            return Err(Error::Config(format!("unexpected sample csv header: {header}")));
        }
        let meta = lines.next().ok_or(Error::EmptyInput("sample csv meta row"))??;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Config("sample csv meta row needs dim,count,seed".into()));
        }
        let dim: usize = fields[0]
            .parse()
            .map_err(|_| Error::Config("bad dim".into()))?;
        let count: usize = fields[1]
            .parse()
            .map_err(|_| Error::Config("bad count".into()))?;
        let seed: u64 = fields[2]
            .parse()
            .map_err(|_| Error::Config("bad seed".into()))?;
        let mut data = Vec::with_capacity(count * dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.trim().split(',') {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad coordinate: {tok}")))?,
                );
            }
        }
        if data.len() != count * dim {
            return Err(Error::Config(format!(
                "sample csv promised {count} rows of dim {dim}, found {} values",
                data.len()
            )));
        }
        Ok(SampleSet { dim, seed, data })
    }
}

/// Mean squared Euclidean norm over the set (estimates M2 = E|X|^2).
pub fn second_moment(samples: &SampleSet) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("sample set"));
    }
    let total = kahan_sum(samples.rows().map(|r| kahan_sum(r.iter().map(|v| v * v))));
    Ok(total / samples.len() as f64)
}

//! Soft-margin RBF support vector machine trained with SMO.
//!
//! Solves the dual
//!
//! ```text
//! max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! by sequential minimal optimization. The first index of each working pair
//! is the maximal KKT violator; the second maximizes the second-order gain,
//! scanned from a seeded random offset so ties resolve reproducibly. The
//! decision function is
//! `f(x) = sum_i a_i y_i K(x_i, x) + b`.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::reservoir::{StateCloud, Symbol};
use crate::{seed, Error, Result};

/// Multipliers above this count as support vectors.
pub const SV_THRESHOLD: f64 = 1e-8;

/// Largest training set for which the full Gram matrix is precomputed.
const GRAM_CACHE_LIMIT: usize = 6000;

/// Gaussian width and box constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma: f64,
    pub c: f64,
}

impl KernelParams {
    pub fn new(sigma: f64, c: f64) -> Result<Self> {
        let p = Self { sigma, c };
        p.validate()?;
        Ok(p)
    }

    /// `sigma = 0.05`, `C = 2.0`, the separability-probe setting.
    pub fn probe() -> Self {
        Self { sigma: 0.05, c: 2.0 }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("C", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self::probe()
    }
}

/// Solver controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// KKT tolerance on `y_i f(x_i) - 1`.
    pub tol: f64,
    /// Cap on sweeps, one sweep being `n` pair updates.
    pub max_passes: usize,
    /// Seed of the working-pair scan order.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: 200,
            seed: 0,
        }
    }
}

/// Points with `{-1, +1}` labels, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<Symbol>,
}

impl LabeledSet {
    pub fn new(dim: usize, points: Vec<f64>, labels: Vec<Symbol>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if points.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                got: points.len(),
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training points"));
        }
        Ok(Self { dim, points, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Symbol>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn from_cloud(cloud: &StateCloud) -> Result<Self> {
        Self::new(cloud.dim(), cloud.coords().to_vec(), cloud.labels().to_vec())
    }

    /// `n` distinct points drawn uniformly without replacement (all of them
    /// when the cloud is smaller), kept in cloud order.
    pub fn sample_cloud(cloud: &StateCloud, n: usize, seed: u64) -> Result<Self> {
        if n >= cloud.len() {
            return Self::from_cloud(cloud);
        }
        let mut rng = seed::substream(seed, &[]);
        let mut picks = index::sample(&mut rng, cloud.len(), n).into_vec();
        picks.sort_unstable();
        let mut points = Vec::with_capacity(n * cloud.dim());
        let mut labels = Vec::with_capacity(n);
        for i in picks {
            let p = cloud.point(i);
            points.extend_from_slice(p.coords);
            labels.push(p.label);
        }
        Self::new(cloud.dim(), points, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    /// Same data with rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut points = Vec::with_capacity(self.points.len());
        for &i in perm {
            points.extend_from_slice(self.point(i));
        }
        Self {
            dim: self.dim,
            points,
            labels: perm.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// `exp(-||a - b||^2 / (2 sigma^2))`.
pub fn rbf_kernel(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(rbf(a, b, gamma(sigma)))
}

#[inline]
fn gamma(sigma: f64) -> f64 {
    1.0 / (2.0 * sigma * sigma)
}

#[inline]
fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Trained classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `a_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub params: KernelParams,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    pub n_train: usize,
    /// Dual objective at the solution.
    pub objective: f64,
    pub passes: usize,
    /// Largest KKT violation left at termination.
    pub max_violation: f64,
}

impl SvmModel {
    /// Multiplier `a_i` of every training row (zero for non-support rows).
    pub fn training_duals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_train];
        for (&i, &c) in self.support_indices.iter().zip(&self.dual_coefs) {
            out[i] = c.abs();
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

/// Gram rows, cached when the set is small enough.
struct Kernel<'a> {
    data: &'a LabeledSet,
    gamma: f64,
    gram: Option<Vec<f64>>,
}

impl<'a> Kernel<'a> {
    fn new(data: &'a LabeledSet, sigma: f64) -> Self {
        let gamma = gamma(sigma);
        let n = data.len();
        let gram = (n <= GRAM_CACHE_LIMIT).then(|| {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                g[i * n + i] = 1.0;
                for j in 0..i {
                    let v = rbf(data.point(i), data.point(j), gamma);
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            g
        });
        Self { data, gamma, gram }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        match &self.gram {
            Some(g) => g[i * self.data.len() + j],
            None if i == j => 1.0,
            None => rbf(self.data.point(i), self.data.point(j), self.gamma),
        }
    }
}

struct Smo<'a> {
    k: Kernel<'a>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    /// `g_i = sum_j a_j y_j K_ij`, the decision value without bias.
    g: Vec<f64>,
    c: f64,
    tol: f64,
    rng: ChaCha8Rng,
}

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

impl Smo<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    /// Bias that would put point `i` exactly on its margin.
    fn b_at(&self, i: usize) -> f64 {
        self.y[i] - self.g[i]
    }

    /// `i` may move so that the bias it implies rises (a lower bound on `b`).
    fn in_up(&self, i: usize) -> bool {
        if self.y[i] > 0.0 { self.alpha[i] < self.c } else { self.alpha[i] > 0.0 }
    }

    fn in_low(&self, i: usize) -> bool {
        if self.y[i] > 0.0 { self.alpha[i] > 0.0 } else { self.alpha[i] < self.c }
    }

    /// Maximal violating first index and the best second-order partner, or
    /// `None` once the threshold gap is within `tol`.
    fn select(&mut self) -> Option<(usize, usize)> {
        let n = self.n();
        let (mut i, mut up) = (usize::MAX, f64::NEG_INFINITY);
        let mut low = f64::INFINITY;
        for t in 0..n {
            let bt = self.b_at(t);
            if self.in_up(t) && bt > up {
                up = bt;
                i = t;
            }
            if self.in_low(t) && bt < low {
                low = bt;
            }
        }
        if i == usize::MAX || up - low <= self.tol {
            return None;
        }
        let kii = self.k.at(i, i);
        let start = self.rng.random_range(0..n);
        let (mut j, mut best) = (usize::MAX, f64::NEG_INFINITY);
        for s in 0..n {
            let t = (start + s) % n;
            if !self.in_low(t) {
                continue;
            }
            let diff = up - self.b_at(t);
            if diff <= 0.0 {
                continue;
            }
            let eta = (kii + self.k.at(t, t) - 2.0 * self.k.at(i, t)).max(TAU);
            let gain = diff * diff / eta;
            if gain > best {
                best = gain;
                j = t;
            }
        }
        (j != usize::MAX).then_some((i, j))
    }

    /// Moves `a_i += y_i t`, `a_j -= y_j t` to the constrained optimum.
    fn step(&mut self, i: usize, j: usize) {
        let c = self.c;
        let room_i = if self.y[i] > 0.0 { c - self.alpha[i] } else { self.alpha[i] };
        let room_j = if self.y[j] > 0.0 { self.alpha[j] } else { c - self.alpha[j] };
        let eta = self.k.at(i, i) + self.k.at(j, j) - 2.0 * self.k.at(i, j);
        let room = room_i.min(room_j);
        let t = if eta > TAU {
            ((self.b_at(i) - self.b_at(j)) / eta).min(room)
        } else {
            room
        };
        let settle = |a: f64, hit: bool, target: f64| if hit { target } else { a.clamp(0.0, c) };
        let ai = self.alpha[i] + self.y[i] * t;
        let aj = self.alpha[j] - self.y[j] * t;
        self.alpha[i] = settle(ai, t >= room_i, if self.y[i] > 0.0 { c } else { 0.0 });
        self.alpha[j] = settle(aj, t >= room_j, if self.y[j] > 0.0 { 0.0 } else { c });
        for k in 0..self.n() {
            self.g[k] += t * (self.k.at(i, k) - self.k.at(j, k));
        }
    }

    /// Bias from the free multipliers; midpoint of the feasible range when
    /// every multiplier sits at a bound.
    fn bias(&self) -> f64 {
        let free: Vec<usize> = (0..self.n()).filter(|&i| self.is_free(i)).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| self.b_at(i)).sum::<f64>() / free.len() as f64;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.n() {
            // a = 0 needs y f >= 1; a = C needs y f <= 1.
            if (self.alpha[i] == 0.0) == (self.y[i] > 0.0) {
                lo = lo.max(self.b_at(i));
            } else {
                hi = hi.min(self.b_at(i));
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    }

    fn max_violation(&self, b: f64) -> f64 {
        (0..self.n())
            .map(|i| {
                let r = self.y[i] * (self.g[i] + b) - 1.0;
                if self.alpha[i] <= 0.0 {
                    (-r).max(0.0)
                } else if self.alpha[i] >= self.c {
                    r.max(0.0)
                } else {
                    r.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn objective(&self) -> f64 {
        // sum(a) - 1/2 sum_i a_i y_i g_i
        (0..self.n())
            .map(|i| self.alpha[i] * (1.0 - 0.5 * self.y[i] * self.g[i]))
            .sum()
    }
}

/// Trains a soft-margin SVM. Deterministic for a fixed `opts.seed`.
///
/// One pass is `n` working-pair updates; training stops when every KKT
/// condition holds within `opts.tol`.
pub fn train(data: &LabeledSet, params: KernelParams, opts: TrainOptions) -> Result<SvmModel> {
    params.validate()?;
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidParameter("training needs at least 2 points".into()));
    }
    let has_plus = data.labels.contains(&Symbol::Plus);
    let has_minus = data.labels.contains(&Symbol::Minus);
    if !(has_plus && has_minus) {
        return Err(Error::DegenerateLabels);
    }
    let mut smo = Smo {
        k: Kernel::new(data, params.sigma),
        y: data.labels.iter().map(|s| s.value()).collect(),
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        c: params.c,
        tol: opts.tol,
        rng: seed::substream(opts.seed, &[]),
    };

    let max_steps = opts.max_passes.saturating_mul(n);
    let mut steps = 0usize;
    while let Some((i, j)) = smo.select() {
        if steps >= max_steps {
            let b = smo.bias();
            return Err(Error::NotConverged {
                passes: opts.max_passes,
                max_violation: smo.max_violation(b),
                n_sv: smo.alpha.iter().filter(|&&a| a > SV_THRESHOLD).count(),
            });
        }
        smo.step(i, j);
        steps += 1;
    }
    let b = smo.bias();

    let support_indices: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > SV_THRESHOLD).collect();
    Ok(SvmModel {
        support_vectors: support_indices.iter().map(|&i| data.point(i).to_vec()).collect(),
        dual_coefs: support_indices.iter().map(|&i| smo.alpha[i] * smo.y[i]).collect(),
        bias: b,
        params,
        n_train: n,
        objective: smo.objective(),
        passes: steps.div_ceil(n),
        max_violation: smo.max_violation(b),
        support_indices,
    })
}

/// `sum_i a_i y_i K(x_i, x) + b`.
pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if !model.support_vectors.is_empty() && x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    let g = gamma(model.params.sigma);
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.dual_coefs)
        .map(|(sv, c)| c * rbf(sv, x, g))
        .sum::<f64>()
        + model.bias)
}

/// Sign of the decision function; exact zero maps to `+1`.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<Symbol> {
    Ok(if decision_value(model, x)? >= 0.0 {
        Symbol::Plus
    } else {
        Symbol::Minus
    })
}

pub fn sv_count(model: &SvmModel) -> usize {
    model.support_vectors.len()
}

/// Fraction of `data` classified correctly.
pub fn accuracy(model: &SvmModel, data: &LabeledSet) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut ok = 0usize;
    for i in 0..data.len() {
        ok += (predict(model, data.point(i))? == data.labels[i]) as usize;
    }
    Ok(ok as f64 / data.len() as f64)
}

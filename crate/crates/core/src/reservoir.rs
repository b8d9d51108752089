//! Binary-driven echo-state reservoir.
//!
//! The state recursion is
//!
//! ```text
//! x[t+1] = tanh(alpha * W x[t] + beta * w_in u[t]),   u[t] in {-1, +1}
//! ```
//!
//! applied elementwise. States live in the open hypercube `(-1, 1)^m`
//! (strictly, as long as no pre-activation exceeds ~19 in magnitude, where
//! `f64::tanh` rounds to +-1).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{seed, Error, Result};

/// One binary input symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Minus,
    Plus,
}

impl Symbol {
    pub fn value(self) -> f64 {
        match self {
            Symbol::Minus => -1.0,
            Symbol::Plus => 1.0,
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Symbol::Minus => Symbol::Plus,
            Symbol::Plus => Symbol::Minus,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Symbol::Plus)
        } else if v == -1.0 {
            Ok(Symbol::Minus)
        } else {
            Err(Error::UnknownSymbol(v.to_string()))
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Minus => "-1",
            Symbol::Plus => "1",
        })
    }
}

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-1" | "-1.0" | "-" => Ok(Symbol::Minus),
            "1" | "+1" | "1.0" | "+1.0" | "+" => Ok(Symbol::Plus),
            other => Err(Error::UnknownSymbol(other.to_string())),
        }
    }
}

/// Ordered input stream over `{-1, +1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputSequence(Vec<Symbol>);

impl InputSequence {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    /// I.i.d. draws with `P(+1) = p_plus`.
    pub fn random<R: Rng + ?Sized>(len: usize, p_plus: f64, rng: &mut R) -> Self {
        Self(
            (0..len)
                .map(|_| draw_symbol(rng, p_plus))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().copied()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| s.negate()).collect())
    }
}

impl From<Vec<Symbol>> for InputSequence {
    fn from(v: Vec<Symbol>) -> Self {
        Self(v)
    }
}

impl FromStr for InputSequence {
    type Err = Error;

    /// Comma- or whitespace-separated `+1`/`-1` tokens.
    fn from_str(s: &str) -> Result<Self> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

#[inline]
fn draw_symbol<R: Rng + ?Sized>(rng: &mut R, p_plus: f64) -> Symbol {
    if rng.random_bool(p_plus) {
        Symbol::Plus
    } else {
        Symbol::Minus
    }
}

/// Weights and gains of a reservoir with `m` units.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirConfig {
    w: DMatrix<f64>,
    w_in: DVector<f64>,
    alpha: f64,
    beta: f64,
}

impl ReservoirConfig {
    pub fn new(w: DMatrix<f64>, w_in: DVector<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidParameter(format!(
                "W must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.nrows() == 0 {
            return Err(Error::InvalidParameter("reservoir size must be positive".into()));
        }
        if w_in.len() != w.nrows() {
            return Err(Error::DimensionMismatch {
                expected: w.nrows(),
                got: w_in.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("W"));
        }
        if w_in.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("w_in"));
        }
        for (name, g) in [("alpha", alpha), ("beta", beta)] {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {g}"
                )));
            }
        }
        Ok(Self { w, w_in, alpha, beta })
    }

    /// Builds from row-major nested rows, as stored in config documents.
    pub fn from_rows(rows: &[Vec<f64>], w_in: &[f64], alpha: f64, beta: f64) -> Result<Self> {
        let m = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::InvalidParameter(format!(
                "W must be square: {m} rows but a row has {} entries",
                bad.len()
            )));
        }
        let w = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        Self::new(w, DVector::from_column_slice(w_in), alpha, beta)
    }

    /// `W = scale * R(angle)` for a 2x2 rotation `R`.
    pub fn rotation(angle: f64, scale: f64, w_in: [f64; 2], alpha: f64, beta: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let w = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) * scale;
        Self::new(w, DVector::from_column_slice(&w_in), alpha, beta)
    }

    /// Two-neuron network of the state-space portraits: rotation by 0.5 rad
    /// scaled by 2.0, `w_in = (sqrt(.5), -sqrt(.5))`, `alpha = 0.8`, `beta = 0.5`.
    pub fn portrait() -> Self {
        let h = 0.5f64.sqrt();
        Self::rotation(0.5, 2.0, [h, -h], 0.8, 0.5).expect("static config is valid")
    }

    /// Two-neuron network used for the box-counting and SVM experiments,
    /// with matrices taken verbatim (not normalized).
    pub fn experiment(alpha: f64, beta: f64) -> Result<Self> {
        Self::from_rows(
            &[vec![0.0169, 0.5711], vec![1.2895, 0.2509]],
            &[0.8436, 0.7381],
            alpha,
            beta,
        )
    }

    /// Same weights, new gains.
    pub fn with_gains(&self, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(self.w.clone(), self.w_in.clone(), alpha, beta)
    }

    /// Rescales `W` to unit spectral norm and `w_in` to unit Euclidean norm.
    pub fn normalized(&self) -> Result<Self> {
        let w = normalize_spectral(&self.w)?;
        let w_in = normalize_spectral(&DMatrix::from_column_slice(self.m(), 1, self.w_in.as_slice()))?;
        Self::new(w, DVector::from_column_slice(w_in.as_slice()), self.alpha, self.beta)
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn w_in(&self) -> &DVector<f64> {
        &self.w_in
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `alpha * ||W||_2`; a global Lipschitz constant of the state map.
    pub fn lipschitz_bound(&self) -> f64 {
        self.alpha * spectral_norm(&self.w)
    }

    /// Unchecked update into a caller buffer. `x` and `out` must have length m.
    #[inline]
    fn step_into(&self, x: &[f64], u: Symbol, out: &mut [f64]) {
        let m = self.m();
        let drive = self.beta * u.value();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate().take(m) {
                acc += self.w[(i, j)] * xj;
            }
            *o = (self.alpha * acc + drive * self.w_in[i]).tanh();
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: len,
            });
        }
        Ok(())
    }

    /// Short hex identifier of weights and gains.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        hex::encode(&h.finalize()[..8])
    }

    fn hash_into(&self, h: &mut Sha256) {
        h.update((self.m() as u64).to_le_bytes());
        for v in self.w.iter().chain(self.w_in.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.alpha.to_bits().to_le_bytes());
        h.update(self.beta.to_bits().to_le_bytes());
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Divides `m` by its largest singular value. For an `n x 1` matrix this is
/// the Euclidean norm.
pub fn normalize_spectral(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let s = spectral_norm(m);
    if s == 0.0 || m.is_empty() {
        return Err(Error::DegenerateWeights("zero matrix has no spectral norm".into()));
    }
    Ok(m / s)
}

/// Divides `v` by its Euclidean norm.
pub fn normalize_vector(v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::DegenerateWeights("zero vector has no norm".into()));
    }
    Ok(v / n)
}

/// One update of the state recursion.
pub fn step(x: &DVector<f64>, u: Symbol, cfg: &ReservoirConfig) -> Result<DVector<f64>> {
    cfg.check_dim(x.len())?;
    let mut out = DVector::zeros(cfg.m());
    cfg.step_into(x.as_slice(), u, out.as_mut_slice());
    Ok(out)
}

/// Trajectory from `x0`; element `t` is the state after consuming `u[0..=t]`.
pub fn drive(
    cfg: &ReservoirConfig,
    seq: &InputSequence,
    x0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    cfg.check_dim(x0.len())?;
    if seq.is_empty() {
        return Err(Error::InvalidParameter("input sequence is empty".into()));
    }
    let mut out = Vec::with_capacity(seq.len());
    let mut x = x0.clone();
    for u in seq.iter() {
        let mut next = DVector::zeros(cfg.m());
        cfg.step_into(x.as_slice(), u, next.as_mut_slice());
        out.push(next.clone());
        x = next;
    }
    Ok(out)
}

/// Distances `||x_t^a - x_t^b||` of two trajectories sharing one input stream.
pub fn esp_contraction(
    cfg: &ReservoirConfig,
    seq: &InputSequence,
    x0a: &DVector<f64>,
    x0b: &DVector<f64>,
) -> Result<Vec<f64>> {
    cfg.check_dim(x0a.len())?;
    cfg.check_dim(x0b.len())?;
    let m = cfg.m();
    let mut a = x0a.as_slice().to_vec();
    let mut b = x0b.as_slice().to_vec();
    let mut na = vec![0.0; m];
    let mut nb = vec![0.0; m];
    let mut out = Vec::with_capacity(seq.len());
    for u in seq.iter() {
        cfg.step_into(&a, u, &mut na);
        cfg.step_into(&b, u, &mut nb);
        std::mem::swap(&mut a, &mut na);
        std::mem::swap(&mut b, &mut nb);
        let d = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        out.push(d);
    }
    Ok(out)
}

/// Mean per-step contraction factor of paired trajectories.
///
/// For each of `draws` trials a random input stream of length `steps` and
/// two random initial states in `(-1, 1)^m` are drawn; the trial's rate is
/// `(d_tau / d_0)^(1 / tau)` where `tau` is the last step whose distance is
/// still above 1e-280. A trial that collapses on the first step contributes
/// rate 0. Values below 1 indicate empirical state contraction.
pub fn empirical_decay_rate(
    cfg: &ReservoirConfig,
    steps: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if steps == 0 || draws == 0 {
        return Err(Error::InvalidParameter("steps and draws must be positive".into()));
    }
    let m = cfg.m();
    let rates = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::substream(seed, &[k as u64]);
            let seq = InputSequence::random(steps, 0.5, &mut rng);
            let a = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let d0 = (&a - &b).norm();
            let dist = esp_contraction(cfg, &seq, &a, &b)?;
            let tau = dist.iter().rposition(|&d| d > 1e-280);
            Ok(match tau {
                None => 0.0,
                Some(t) => (dist[t] / d0).powf(1.0 / (t + 1) as f64),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rates.iter().sum::<f64>() / draws as f64)
}

/// Borrowed view of one cloud point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatePoint<'a> {
    pub coords: &'a [f64],
    pub label: Symbol,
}

/// Labeled points of equal dimensionality, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StateCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<Symbol>,
    digest: String,
}

impl StateCloud {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            labels: Vec::new(),
            digest: String::new(),
        }
    }

    pub fn from_parts(dim: usize, coords: Vec<f64>, labels: Vec<Symbol>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("cloud dimension must be positive".into()));
        }
        if coords.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                got: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cloud coordinates"));
        }
        Ok(Self {
            dim,
            coords,
            labels,
            digest: String::new(),
        })
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.digest = digest.into();
        self
    }

    pub fn push(&mut self, coords: &[f64], label: Symbol) -> Result<()> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        self.coords.extend_from_slice(coords);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> StatePoint<'_> {
        StatePoint {
            coords: &self.coords[i * self.dim..(i + 1) * self.dim],
            label: self.labels[i],
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = StatePoint<'_>> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(&self.labels)
            .map(|(c, &l)| StatePoint { coords: c, label: l })
    }
}

/// Sampling budget for [`generate_cloud`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudParams {
    pub n_sequences: usize,
    /// Steps simulated per sequence, washout included.
    pub steps: usize,
    pub washout: usize,
    pub seed: u64,
    /// Probability of drawing `+1`.
    #[serde(default = "CloudParams::default_p_plus")]
    pub p_plus: f64,
}

impl CloudParams {
    pub const DEFAULT_WASHOUT: usize = 1000;

    fn default_p_plus() -> f64 {
        0.5
    }

    /// `n_sequences` streams retaining `retained` states each after the
    /// default washout.
    pub fn retaining(n_sequences: usize, retained: usize, seed: u64) -> Self {
        Self {
            n_sequences,
            steps: retained + Self::DEFAULT_WASHOUT,
            washout: Self::DEFAULT_WASHOUT,
            seed,
            p_plus: 0.5,
        }
    }

    pub fn retained_per_sequence(&self) -> usize {
        self.steps.saturating_sub(self.washout)
    }
}

/// Samples the reservoir's image of the input space.
///
/// Sequence `k` draws i.i.d. symbols from substream `(seed, k)`, starts at
/// `x0 = 0`, drops the first `washout` states and records every other state
/// labeled with the symbol that produced it. Sequences run in parallel and
/// are concatenated in index order.
pub fn generate_cloud(cfg: &ReservoirConfig, params: &CloudParams) -> Result<StateCloud> {
    if !(0.0..=1.0).contains(&params.p_plus) {
        return Err(Error::InvalidParameter(format!(
            "p_plus must lie in [0, 1], got {}",
            params.p_plus
        )));
    }
    let m = cfg.m();
    let keep = params.retained_per_sequence();
    let parts: Vec<(Vec<f64>, Vec<Symbol>)> = (0..params.n_sequences)
        .into_par_iter()
        .map(|k| run_sequence(cfg, params, k as u64))
        .collect();

    let mut coords = Vec::with_capacity(params.n_sequences * keep * m);
    let mut labels = Vec::with_capacity(params.n_sequences * keep);
    for (c, l) in parts {
        coords.extend(c);
        labels.extend(l);
    }
    let mut h = Sha256::new();
    cfg.hash_into(&mut h);
    for v in [
        params.n_sequences as u64,
        params.steps as u64,
        params.washout as u64,
        params.seed,
        params.p_plus.to_bits(),
    ] {
        h.update(v.to_le_bytes());
    }
    Ok(StateCloud {
        dim: m,
        coords,
        labels,
        digest: hex::encode(&h.finalize()[..8]),
    })
}

/// Streams every retained state of the cloud [`generate_cloud`] would build
/// to `visit` without storing it. Visit order is sequence by sequence, so
/// the callback sees the same points in the same order.
pub fn for_each_state<F>(cfg: &ReservoirConfig, params: &CloudParams, mut visit: F)
where
    F: FnMut(&[f64], Symbol),
{
    for k in 0..params.n_sequences {
        run_sequence_streaming(cfg, params, k as u64, &mut visit);
    }
}

fn run_sequence(cfg: &ReservoirConfig, params: &CloudParams, k: u64) -> (Vec<f64>, Vec<Symbol>) {
    let keep = params.retained_per_sequence();
    let mut coords = Vec::with_capacity(keep * cfg.m());
    let mut labels = Vec::with_capacity(keep);
    run_sequence_streaming(cfg, params, k, &mut |x: &[f64], u| {
        coords.extend_from_slice(x);
        labels.push(u);
    });
    (coords, labels)
}

fn run_sequence_streaming<F>(cfg: &ReservoirConfig, params: &CloudParams, k: u64, visit: &mut F)
where
    F: FnMut(&[f64], Symbol),
{
    let m = cfg.m();
    let mut rng = seed::substream(params.seed, &[k]);
    let mut x = vec![0.0; m];
    let mut next = vec![0.0; m];
    for t in 0..params.steps {
        let u = draw_symbol(&mut rng, params.p_plus);
        cfg.step_into(&x, u, &mut next);
        std::mem::swap(&mut x, &mut next);
        if t >= params.washout {
            visit(&x, u);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use proptest::prelude::*;

    fn zeros(m: usize) -> DVector<f64> {
        DVector::zeros(m)
    }

    fn two_unit(alpha: f64, beta: f64) -> ReservoirConfig {
        let h = 0.5f64.sqrt();
        ReservoirConfig::rotation(0.3, 1.0, [h, -h], alpha, beta).unwrap()
    }

    /// Largest singular value via power iteration on W^T W.
    fn power_iteration_norm(w: &DMatrix<f64>) -> f64 {
        let wtw = w.transpose() * w;
        let mut v = DVector::from_element(w.ncols(), 1.0);
        let mut lambda = 0.0;
        for _ in 0..500 {
            let next = &wtw * &v;
            lambda = next.norm() / v.norm();
            v = next / lambda;
        }
        lambda.sqrt()
    }

    #[test]
    fn normalize_identity_and_diagonal() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_abs_diff_eq!(normalize_spectral(&id).unwrap(), id, epsilon = 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        assert_abs_diff_eq!(normalize_spectral(&d).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn normalize_experiment_matrix_matches_power_iteration() {
        let w = ReservoirConfig::experiment(1.0, 0.45).unwrap().w().clone();
        let sigma = power_iteration_norm(&w);
        let n = normalize_spectral(&w).unwrap();
        assert_abs_diff_eq!(n, &w / sigma, epsilon = 1e-12);
        assert_abs_diff_eq!(power_iteration_norm(&n), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn normalize_vector_uses_euclidean_norm() {
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert_abs_diff_eq!(
            normalize_vector(&v).unwrap(),
            DVector::from_vec(vec![0.6, 0.8]),
            epsilon = 1e-15
        );
        let as_col = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        assert_abs_diff_eq!(normalize_spectral(&as_col).unwrap()[(1, 0)], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn normalize_rejects_degenerate_input() {
        assert!(matches!(
            normalize_spectral(&DMatrix::zeros(2, 2)),
            Err(Error::DegenerateWeights(_))
        ));
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(normalize_spectral(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn config_validation() {
        let w = DMatrix::zeros(2, 3);
        assert!(ReservoirConfig::new(w, zeros(2), 1.0, 1.0).is_err());
        let w = DMatrix::zeros(2, 2);
        assert!(matches!(
            ReservoirConfig::new(w.clone(), zeros(3), 1.0, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ReservoirConfig::new(w.clone(), zeros(2), -0.1, 1.0).is_err());
        assert!(ReservoirConfig::new(w, zeros(2), 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn step_zero_gain_is_zero() {
        let cfg = two_unit(0.0, 0.0);
        assert_eq!(step(&zeros(2), Symbol::Plus, &cfg).unwrap(), zeros(2));
    }

    #[test]
    fn step_scalar_oracle() {
        let cfg = two_unit(1.0, 0.5);
        let x = step(&zeros(2), Symbol::Plus, &cfg).unwrap();
        // tanh(0.5 * sqrt(0.5)) evaluated independently
        let want = (0.5 * 0.5f64.sqrt()).tanh();
        assert_abs_diff_eq!(want, 0.339_523, epsilon = 1e-6);
        assert_abs_diff_eq!(x[0], want, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], -want, epsilon = 1e-15);
        let y = step(&zeros(2), Symbol::Minus, &cfg).unwrap();
        assert_eq!(y, -x);
    }

    #[test]
    fn step_dimension_mismatch() {
        let cfg = two_unit(1.0, 1.0);
        assert!(matches!(
            step(&zeros(3), Symbol::Plus, &cfg),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn drive_single_step_and_memoryless() {
        let cfg = two_unit(0.9, 0.7);
        let x0 = DVector::from_vec(vec![0.2, -0.4]);
        let seq = InputSequence::new(vec![Symbol::Plus]);
        let tr = drive(&cfg, &seq, &x0).unwrap();
        assert_eq!(tr, vec![step(&x0, Symbol::Plus, &cfg).unwrap()]);

        let cfg0 = two_unit(0.0, 0.7);
        let seq: InputSequence = "+1,-1,-1,+1".parse().unwrap();
        let tr = drive(&cfg0, &seq, &x0).unwrap();
        for (x, u) in tr.iter().zip(seq.iter()) {
            let want = cfg0.w_in().map(|w| (0.7 * w * u.value()).tanh());
            assert_eq!(x, &want);
        }
        assert!(drive(&cfg, &InputSequence::default(), &x0).is_err());
    }

    #[test]
    fn portrait_trajectory_stays_in_square() {
        let cfg = ReservoirConfig::portrait();
        assert_abs_diff_eq!(cfg.lipschitz_bound(), 1.6, epsilon = 1e-12);
        let mut rng = seed::substream(3, &[]);
        let seq = InputSequence::random(5000, 0.5, &mut rng);
        for x in drive(&cfg, &seq, &zeros(2)).unwrap() {
            assert!(x.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn esp_identical_starts_stay_together() {
        let cfg = ReservoirConfig::portrait();
        let seq: InputSequence = "+1 -1 -1 +1 +1".parse().unwrap();
        let x = DVector::from_vec(vec![0.3, 0.1]);
        assert!(esp_contraction(&cfg, &seq, &x, &x).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn esp_half_contraction_bound() {
        let cfg = ReservoirConfig::rotation(1.1, 1.0, [0.6, 0.8], 0.5, 0.9).unwrap();
        let mut rng = seed::substream(11, &[]);
        let seq = InputSequence::random(60, 0.5, &mut rng);
        let a = DVector::from_vec(vec![0.9, -0.9]);
        let b = DVector::from_vec(vec![-0.8, 0.7]);
        let d0 = (&a - &b).norm();
        for (t, d) in esp_contraction(&cfg, &seq, &a, &b).unwrap().iter().enumerate() {
            assert!(*d <= 0.5f64.powi(t as i32 + 1) * d0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn portrait_decay_rate_is_reported() {
        let rate = empirical_decay_rate(&ReservoirConfig::portrait(), 200, 100, 5).unwrap();
        assert!(rate.is_finite() && (0.0..=1.6).contains(&rate), "rate {rate}");
    }

    #[test]
    fn generate_cloud_basics() {
        let cfg = ReservoirConfig::experiment(1.0, 0.45).unwrap();
        let empty = generate_cloud(&cfg, &CloudParams::retaining(0, 10, 1)).unwrap();
        assert!(empty.is_empty());
        let none_kept = CloudParams {
            n_sequences: 3,
            steps: 5,
            washout: 5,
            seed: 1,
            p_plus: 0.5,
        };
        assert!(generate_cloud(&cfg, &none_kept).unwrap().is_empty());

        let p = CloudParams {
            n_sequences: 4,
            steps: 300,
            washout: 50,
            seed: 9,
            p_plus: 0.5,
        };
        let a = generate_cloud(&cfg, &p).unwrap();
        let b = generate_cloud(&cfg, &p).unwrap();
        assert_eq!(a.len(), 4 * 250);
        assert_eq!(a, b);
        assert!(!a.digest().is_empty());
        let mut streamed = Vec::new();
        for_each_state(&cfg, &p, |x, _| streamed.extend_from_slice(x));
        assert_eq!(streamed, a.coords());
    }

    #[test]
    fn generate_cloud_labels_match_consumed_symbol() {
        let cfg = ReservoirConfig::experiment(0.9, 0.6).unwrap();
        let p = CloudParams {
            n_sequences: 2,
            steps: 40,
            washout: 10,
            seed: 4,
            p_plus: 0.5,
        };
        let cloud = generate_cloud(&cfg, &p).unwrap();
        for k in 0..2u64 {
            let mut rng = seed::substream(4, &[k]);
            let seq = InputSequence::random(40, 0.5, &mut rng);
            let tr = drive(&cfg, &seq, &zeros(2)).unwrap();
            for (t, x) in tr.iter().enumerate().skip(10) {
                let pt = cloud.point(k as usize * 30 + t - 10);
                assert_eq!(pt.label, seq.symbols()[t]);
                assert_eq!(pt.coords, x.as_slice());
            }
        }
    }

    #[test]
    fn alpha_zero_collapses_to_two_points() {
        let cfg = ReservoirConfig::experiment(0.0, 0.8).unwrap();
        let cloud = generate_cloud(&cfg, &CloudParams::retaining(3, 200, 2)).unwrap();
        let mut distinct: Vec<Vec<u64>> = cloud
            .points()
            .map(|p| p.coords.iter().map(|v| v.to_bits()).collect())
            .collect();
        distinct.sort();
        distinct.dedup();
        assert!(distinct.len() <= 2);
    }

    proptest! {
        #[test]
        fn states_stay_in_open_cube(
            entries in proptest::collection::vec(-1.5f64..1.5, 9),
            w_in in proptest::collection::vec(-1.0f64..1.0, 3),
            alpha in 0.0f64..1.5,
            beta in 0.0f64..2.0,
            s in any::<u64>(),
        ) {
            let w = DMatrix::from_row_slice(3, 3, &entries);
            let cfg = ReservoirConfig::new(w, DVector::from_vec(w_in), alpha, beta).unwrap();
            let cloud = generate_cloud(&cfg, &CloudParams { n_sequences: 2, steps: 100, washout: 0, seed: s, p_plus: 0.5 }).unwrap();
            prop_assert!(cloud.coords().iter().all(|v| v.abs() < 1.0));
        }

        #[test]
        fn odd_symmetry(len in 1usize..80, s in any::<u64>(), alpha in 0.0f64..1.5, beta in 0.0f64..2.0) {
            let cfg = ReservoirConfig::experiment(alpha, beta).unwrap();
            let mut rng = seed::substream(s, &[]);
            let seq = InputSequence::random(len, 0.5, &mut rng);
            let a = drive(&cfg, &seq, &zeros(2)).unwrap();
            let b = drive(&cfg, &seq.negated(), &zeros(2)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x, &(-y));
            }
        }

        #[test]
        fn lipschitz_contraction(
            entries in proptest::collection::vec(-1.0f64..1.0, 4),
            gain in 0.05f64..0.99,
            beta in 0.0f64..2.0,
            s in any::<u64>(),
        ) {
            let w = DMatrix::from_row_slice(2, 2, &entries);
            prop_assume!(spectral_norm(&w) > 1e-6);
            let w = normalize_spectral(&w).unwrap();
            let cfg = ReservoirConfig::new(w, DVector::from_vec(vec![0.6, 0.8]), gain, beta).unwrap();
            let mut rng = seed::substream(s, &[]);
            let seq = InputSequence::random(50, 0.5, &mut rng);
            let a = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let d0 = (&a - &b).norm();
            let k = cfg.lipschitz_bound();
            for (t, d) in esp_contraction(&cfg, &seq, &a, &b).unwrap().iter().enumerate() {
                // tanh rounding leaves an absolute floor near machine epsilon
                prop_assert!(*d <= k.powi(t as i32 + 1) * d0 * (1.0 + 1e-9) + 1e-15);
            }
        }
    }
}

//! Arithmetic encoding as a one-unit reservoir.
//!
//! Each symbol `k` owns the subinterval `[g(k), g(k) + p(k))` of `[0, 1)`,
//! where `g(k)` is the cumulative probability of the symbols ordered before
//! it. Encoding is the affine recursion
//!
//! ```text
//! x[i+1] = p(u[i]) * x[i] + g(u[i])
//! ```
//!
//! so the newest symbol selects the coarsest subinterval and older symbols
//! are pushed into finer digits, the time-reversed version of the classic
//! coder. The map contracts by `p(u) < 1` per step, which is the echo-state
//! property for a single unit. Decoding therefore recovers the newest
//! symbol first; [`decode`] reverses its output into encode order.
//!
//! Everything is plain `f64`: intervals narrower than about `2^-52` relative
//! to their position are not resolvable.

use rand::Rng;

use crate::reservoir::{InputSequence, StateCloud, Symbol};
use crate::{seed, Error, Result};

const PROB_TOLERANCE: f64 = 1e-12;

/// Symbols with fixed probabilities and cumulative offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolModel {
    symbols: Vec<String>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl SymbolModel {
    pub fn new(symbols: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidModel("no symbols".into()));
        }
        if symbols.len() != probs.len() {
            return Err(Error::InvalidModel(format!(
                "{} symbols but {} probabilities",
                symbols.len(),
                probs.len()
            )));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::InvalidModel(format!("duplicate symbol {s:?}")));
            }
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidModel(format!("probability {p} is not positive")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}")));
        }
        let cum = probs
            .iter()
            .scan(0.0, |acc, &p| {
                let g = *acc;
                *acc += p;
                Some(g)
            })
            .collect();
        Ok(Self { symbols, probs, cum })
    }

    pub fn uniform<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let n = symbols.len();
        Self::new(symbols, vec![1.0 / n as f64; n])
    }

    /// `{-1, +1}` in that order, `P(+1) = p_plus`.
    pub fn binary(p_plus: f64) -> Result<Self> {
        Self::new(vec!["-1".into(), "1".into()], vec![1.0 - p_plus, p_plus])
    }

    pub fn binary_uniform() -> Self {
        Self::binary(0.5).expect("uniform binary model is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `g(k)` for every symbol.
    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Shannon entropy in bits per symbol.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|p| -p * p.log2()).sum()
    }

    /// Index of `token`. Numeric tokens match numerically, so `"+1"` finds
    /// a symbol stored as `"1"`.
    pub fn index_of(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Some(i) = self.symbols.iter().position(|s| s == token) {
            return Ok(i);
        }
        if let Ok(v) = token.parse::<f64>() {
            if let Some(i) = self
                .symbols
                .iter()
                .position(|s| s.parse::<f64>().is_ok_and(|w| w == v))
            {
                return Ok(i);
            }
        }
        Err(Error::UnknownSymbol(token.to_string()))
    }

    pub fn indices<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Result<Vec<usize>> {
        tokens.into_iter().map(|t| self.index_of(t)).collect()
    }

    /// Symbol indices of a binary input stream.
    pub fn binary_indices(&self, seq: &InputSequence) -> Result<Vec<usize>> {
        let minus = self.index_of("-1")?;
        let plus = self.index_of("1")?;
        Ok(seq
            .iter()
            .map(|s| match s {
                Symbol::Minus => minus,
                Symbol::Plus => plus,
            })
            .collect())
    }

    fn check(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::UnknownSymbol(format!("#{k}")));
        }
        Ok(())
    }

    /// Upper end of symbol `k`'s subinterval.
    fn upper(&self, k: usize) -> f64 {
        self.cum.get(k + 1).copied().unwrap_or(1.0)
    }

    /// Symbol whose subinterval contains `x`, i.e. `g~(x)`.
    fn lookup(&self, x: f64) -> usize {
        self.cum.partition_point(|&g| g <= x).saturating_sub(1)
    }

    /// Draws one symbol index according to the model.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.lookup(rng.random::<f64>())
    }
}

/// Encoder register plus the exact width of the coded interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderState {
    pub x: f64,
    /// Product of the probabilities consumed so far.
    pub width: f64,
    pub t: usize,
}

impl EncoderState {
    pub fn start(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!("initial value {a} outside [0, 1)")));
        }
        Ok(Self { x: a, width: 1.0, t: 0 })
    }
}

/// Applies one symbol. The result stays inside `[g(u), g(u) + p(u))` even
/// when rounding would otherwise land on the upper boundary.
pub fn encode_step(state: EncoderState, u: usize, model: &SymbolModel) -> Result<EncoderState> {
    model.check(u)?;
    Ok(raw_step(state, u, model))
}

#[inline]
fn raw_step(state: EncoderState, u: usize, model: &SymbolModel) -> EncoderState {
    let p = model.probs[u];
    let g = model.cum[u];
    let mut x = p * state.x + g;
    let hi = model.upper(u);
    if state.x < 1.0 && x >= hi {
        x = hi.next_down();
    }
    EncoderState {
        x,
        width: state.width * p,
        t: state.t + 1,
    }
}

/// Folds [`encode_step`] over `seq` starting from `x0 = a`.
pub fn encode(seq: &[usize], model: &SymbolModel, a: f64) -> Result<EncoderState> {
    seq.iter()
        .try_fold(EncoderState::start(a)?, |s, &u| encode_step(s, u, model))
}

/// `(x_minus, x_plus)`: the register after encoding from `a = 0` and `a = 1`.
pub fn interval(seq: &[usize], model: &SymbolModel) -> Result<(f64, f64)> {
    if seq.is_empty() {
        return Err(Error::InvalidParameter("interval of an empty sequence".into()));
    }
    for &u in seq {
        model.check(u)?;
    }
    let run = |a: f64| {
        seq.iter().fold(a, |x, &u| model.probs[u] * x + model.cum[u])
    };
    Ok((run(0.0), run(1.0)))
}

/// Recovers `len` symbols from a point of their interval, oldest first.
pub fn decode(x: f64, len: usize, model: &SymbolModel) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("code value {x} outside [0, 1)")));
    }
    let mut out = Vec::with_capacity(len);
    let mut x = x;
    for _ in 0..len {
        let k = model.lookup(x);
        out.push(k);
        x = ((x - model.cum[k]) / model.probs[k]).clamp(0.0, 1.0f64.next_down());
    }
    out.reverse();
    Ok(out)
}

/// Centre of the coded interval, the decode point with the widest margin.
pub fn midpoint(seq: &[usize], model: &SymbolModel) -> Result<f64> {
    let s = encode(seq, model, 0.0)?;
    Ok(s.x + s.width / 2.0)
}

/// Ideal code length `-log2(prod p(u_i))` in bits, summed per symbol so it
/// stays finite for sequences whose width underflows.
pub fn code_length(seq: &[usize], model: &SymbolModel) -> Result<f64> {
    seq.iter().try_fold(0.0, |acc, &u| {
        model.check(u)?;
        Ok(acc - model.probs[u].log2())
    })
}

/// Shortest-prefix transmission of an interval: the first
/// `ceil(-log2 width) + 1` binary digits of its midpoint. The truncated
/// value falls in `[x_minus, x_plus)`.
pub fn transmit_bits(seq: &[usize], model: &SymbolModel) -> Result<Vec<bool>> {
    let s = encode(seq, model, 0.0)?;
    if s.width < f64::EPSILON * 4.0 {
        return Err(Error::InvalidParameter(format!(
            "interval width {:e} is below double resolution",
            s.width
        )));
    }
    let n = (-s.width.log2()).ceil() as usize + 1;
    let mut v = s.x + s.width / 2.0;
    Ok((0..n)
        .map(|_| {
            v *= 2.0;
            let bit = v >= 1.0;
            if bit {
                v -= 1.0;
            }
            bit
        })
        .collect())
}

/// Value of a binary fraction `0.b1 b2 ...`.
pub fn bits_value(bits: &[bool]) -> f64 {
    bits.iter()
        .rev()
        .fold(0.0, |acc, &b| (acc + if b { 1.0 } else { 0.0 }) / 2.0)
}

/// Final coding intervals of `n` sequences drawn from `source` but coded
/// with `assumed`, as a one-dimensional cloud of interval midpoints.
///
/// Sequence `k` uses substream `(seed, k)` and is coded from `a = 0`. The
/// register itself is a left endpoint, which for nested models lands exactly
/// on grid-cell boundaries where rounding would split it across two cells;
/// the midpoint is the value actually transmitted and sits strictly inside
/// its cell at every depth up to `len`. Labels
/// are `-1` when the last symbol is `source`'s first symbol and `+1`
/// otherwise, which is the natural last-input labeling for binary sources.
pub fn mismatch_cloud(
    source: &SymbolModel,
    assumed: &SymbolModel,
    n: usize,
    len: usize,
    seed: u64,
) -> Result<StateCloud> {
    if len == 0 {
        return Err(Error::InvalidParameter("sequence length must be positive".into()));
    }
    let map: Vec<usize> = source
        .symbols()
        .iter()
        .map(|s| assumed.index_of(s))
        .collect::<Result<_>>()?;
    let mut coords = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let mut rng = seed::substream(seed, &[k as u64]);
        let mut state = EncoderState { x: 0.0, width: 1.0, t: 0 };
        let mut last = 0;
        for _ in 0..len {
            last = source.sample(&mut rng);
            state = raw_step(state, map[last], assumed);
        }
        coords.push(state.x + state.width / 2.0);
        labels.push(if last == 0 { Symbol::Minus } else { Symbol::Plus });
    }
    Ok(StateCloud::from_parts(1, coords, labels)?.with_digest(format!("mismatch-{seed:x}-{n}-{len}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bin() -> SymbolModel {
        SymbolModel::binary_uniform()
    }

    fn plus() -> usize {
        bin().index_of("+1").unwrap()
    }

    fn minus() -> usize {
        bin().index_of("-1").unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(SymbolModel::new(vec![], vec![]).is_err());
        assert!(SymbolModel::new(vec!["a".into()], vec![0.5]).is_err());
        assert!(SymbolModel::new(vec!["a".into(), "b".into()], vec![1.0, 0.0]).is_err());
        assert!(SymbolModel::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
        let m = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        assert_eq!(m.cum()[0], 0.0);
        assert!(m.cum().windows(2).all(|w| w[0] < w[1]));
        assert_abs_diff_eq!(m.cum()[2] + m.probs()[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn index_lookup_is_numeric_aware() {
        let m = bin();
        assert_eq!(m.index_of("+1").unwrap(), m.index_of("1").unwrap());
        assert_eq!(m.index_of("-1").unwrap(), 0);
        assert!(matches!(m.index_of("2"), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn step_examples() {
        let s = encode_step(EncoderState::start(0.0).unwrap(), plus(), &bin()).unwrap();
        assert_eq!(s.x, 0.5);
        let abc = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        let s = encode_step(EncoderState::start(0.0).unwrap(), 0, &abc).unwrap();
        assert_eq!(s.x, 0.0);
        assert!(encode_step(s, 3, &abc).is_err());
    }

    #[test]
    fn hand_recursion() {
        // step 1: 0.5*0 + 0.5 = 0.5; step 2: 0.5*0.5 + 0 = 0.25
        let s = encode(&[plus(), minus()], &bin(), 0.0).unwrap();
        assert_eq!((s.x, s.width, s.t), (0.25, 0.25, 2));
    }

    #[test]
    fn empty_sequence_keeps_start() {
        let s = encode(&[], &bin(), 0.3).unwrap();
        assert_eq!((s.x, s.width), (0.3, 1.0));
        assert!(encode(&[], &bin(), 1.0).is_err());
    }

    #[test]
    fn ten_halves() {
        let seq = vec![plus(); 10];
        assert_eq!(encode(&seq, &bin(), 0.0).unwrap().width, 2f64.powi(-10));
        assert_eq!(code_length(&seq, &bin()).unwrap(), 10.0);
    }

    #[test]
    fn width_bounded_by_max_prob_power() {
        let m = SymbolModel::new(vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = seed::substream(1, &[]);
        for len in 1..30 {
            let seq: Vec<usize> = (0..len).map(|_| m.sample(&mut rng)).collect();
            let w = encode(&seq, &m, 0.0).unwrap().width;
            assert!(w <= m.max_prob().powi(len) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn interval_examples() {
        assert_eq!(interval(&[plus()], &bin()).unwrap(), (0.5, 1.0));
        assert_eq!(interval(&[minus()], &bin()).unwrap(), (0.0, 0.5));
        assert!(interval(&[], &bin()).is_err());
    }

    #[test]
    fn decode_examples() {
        let x = 0.25 + 0.25 / 2.0;
        assert_eq!(decode(x, 2, &bin()).unwrap(), vec![plus(), minus()]);
        assert!(decode(0.7, 0, &bin()).unwrap().is_empty());
        assert!(decode(1.0, 1, &bin()).is_err());
        assert!(decode(-0.1, 1, &bin()).is_err());
    }

    #[test]
    fn third_probability_code_length() {
        let abc = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        let seq = vec![1usize; 7];
        assert_abs_diff_eq!(code_length(&seq, &abc).unwrap(), 7.0 * 3f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn empirical_rate_approaches_entropy() {
        let m = SymbolModel::binary(0.2).unwrap();
        let mut rng = seed::substream(3, &[]);
        let seq: Vec<usize> = (0..100_000).map(|_| m.sample(&mut rng)).collect();
        let rate = code_length(&seq, &m).unwrap() / seq.len() as f64;
        let h: f64 = -(0.2f64 * 0.2f64.log2() + 0.8 * 0.8f64.log2());
        assert!((rate - h).abs() / h < 0.01, "rate {rate} entropy {h}");
        assert_abs_diff_eq!(m.entropy(), h, epsilon = 1e-15);
    }

    #[test]
    fn transmitted_bits_identify_interval() {
        let m = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        let mut rng = seed::substream(4, &[]);
        for len in 1..25 {
            let seq: Vec<usize> = (0..len).map(|_| m.sample(&mut rng)).collect();
            let bits = transmit_bits(&seq, &m).unwrap();
            let v = bits_value(&bits);
            let (lo, hi) = interval(&seq, &m).unwrap();
            assert!(lo <= v && v < hi, "len {len}: {v} not in [{lo}, {hi})");
            assert_eq!(decode(v, len, &m).unwrap(), seq);
        }
    }

    #[test]
    fn mismatch_errors_and_empty() {
        let ac = SymbolModel::uniform(["A", "C"]).unwrap();
        let abc = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        assert!(mismatch_cloud(&ac, &abc, 0, 12, 1).unwrap().is_empty());
        let ad = SymbolModel::uniform(["A", "D"]).unwrap();
        assert!(matches!(mismatch_cloud(&ad, &abc, 10, 12, 1), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn cantor_cells_brute_force() {
        // With A -> 0 and C -> 2/3 every register is a ternary fraction
        // with digits in {0, 2}; at depth k exactly 2^k triadic cells are hit.
        let ac = SymbolModel::uniform(["A", "C"]).unwrap();
        let abc = SymbolModel::uniform(["A", "B", "C"]).unwrap();
        let cloud = mismatch_cloud(&ac, &abc, 20_000, 12, 5).unwrap();
        for k in 1..=6u32 {
            let cells = 3usize.pow(k);
            let mut hit = vec![false; cells];
            for &x in cloud.coords() {
                let c = (x * cells as f64).floor() as usize;
                hit[c.min(cells - 1)] = true;
            }
            // every hit cell has ternary digits only in {0, 2}
            for (c, _) in hit.iter().enumerate().filter(|(_, h)| **h) {
                let mut v = c;
                for _ in 0..k {
                    assert_ne!(v % 3, 1, "cell {c} at depth {k} has a middle-third digit");
                    v /= 3;
                }
            }
            assert_eq!(hit.iter().filter(|h| **h).count(), 2usize.pow(k));
        }
    }

    proptest! {
        #[test]
        fn round_trip_binary(bits in proptest::collection::vec(any::<bool>(), 0..=40)) {
            let seq: Vec<usize> = bits.iter().map(|&b| b as usize).collect();
            let m = bin();
            let x = midpoint(&seq, &m).unwrap();
            prop_assert_eq!(decode(x, seq.len(), &m).unwrap(), seq);
        }

        #[test]
        fn round_trip_skewed(seq in proptest::collection::vec(0usize..3, 1..=25)) {
            let m = SymbolModel::new(vec!["a".into(), "b".into(), "c".into()], vec![0.25, 0.35, 0.4]).unwrap();
            let x = midpoint(&seq, &m).unwrap();
            prop_assert_eq!(decode(x, seq.len(), &m).unwrap(), seq);
        }

        #[test]
        fn containment(seq in proptest::collection::vec(0usize..3, 1..60), a in 0.0f64..1.0) {
            let m = SymbolModel::new(vec!["a".into(), "b".into(), "c".into()], vec![0.6, 0.1, 0.3]).unwrap();
            let mut s = EncoderState::start(a).unwrap();
            for &u in &seq {
                s = encode_step(s, u, &m).unwrap();
                prop_assert!(m.cum()[u] <= s.x && s.x < m.upper(u));
            }
        }

        #[test]
        fn interval_width_matches_product(seq in proptest::collection::vec(any::<bool>(), 8)) {
            let seq: Vec<usize> = seq.iter().map(|&b| b as usize).collect();
            let (lo, hi) = interval(&seq, &bin()).unwrap();
            let w = encode(&seq, &bin(), 0.0).unwrap().width;
            prop_assert!(((hi - lo) - w).abs() <= 1e-12 * w);
        }

        #[test]
        fn equal_length_intervals_are_disjoint(
            a in proptest::collection::vec(0usize..3, 6),
            b in proptest::collection::vec(0usize..3, 6),
        ) {
            prop_assume!(a != b);
            let m = SymbolModel::new(vec!["a".into(), "b".into(), "c".into()], vec![0.5, 0.2, 0.3]).unwrap();
            let (l1, h1) = interval(&a, &m).unwrap();
            let (l2, h2) = interval(&b, &m).unwrap();
            let tol = 1e-15;
            prop_assert!(h1 <= l2 + tol || h2 <= l1 + tol);
        }
    }
}

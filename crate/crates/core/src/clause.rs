//! Exact Fourier analysis of clauses on the hypercube `{-1,+1}^k`.
//!
//! Assignments are encoded as integers: variable `i` (1-based) lives in bit
//! `i-1`, and a set bit means `x_i = +1`. With this encoding the character
//! `gamma_Q(x) = prod_{i in Q} x_i` is `(-1)^{popcount(!x & Q)}` and the Fourier
//! transform is a plain Walsh-Hadamard butterfly. Subsets `Q` are encoded the
//! same way.

use serde::{Deserialize, Serialize};

use crate::error::{CspError, Result};

/// Largest arity for which exact tables are built.
pub const MAX_ARITY: usize = 24;

fn check_arity(k: usize) -> Result<()> {
    if k > MAX_ARITY {
        return Err(CspError::Range(format!("arity {k} exceeds the exact-table cap of {MAX_ARITY}")));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&theta) || theta.is_nan() {
        return Err(CspError::Domain(format!("theta = {theta} is outside [-1, 1]")));
    }
    Ok(())
}

/// A point of `{-1,+1}^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    k: usize,
    bits: u32,
}

impl Assignment {
    pub fn new(k: usize, bits: u32) -> Result<Self> {
        check_arity(k)?;
        if (bits as u64) >= (1u64 << k) {
            return Err(CspError::Range(format!("bits {bits} out of range for k = {k}")));
        }
        Ok(Self { k, bits })
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        check_arity(spins.len())?;
        let mut bits = 0u32;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                other => return Err(CspError::Domain(format!("spin {other} is not +-1"))),
            }
        }
        Ok(Self { k: spins.len(), bits })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Value of variable `i` (1-based).
    pub fn spin(&self, i: usize) -> i8 {
        if self.bits >> (i - 1) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (1..=self.k).map(|i| self.spin(i)).collect()
    }
}

/// `±1` vector for an index under the bit encoding.
pub fn index_to_assignment(bits: u32, k: usize) -> Result<Vec<i8>> {
    Ok(Assignment::new(k, bits)?.spins())
}

/// A real function on `{-1,+1}^k`, stored as a truth table indexed by
/// [`Assignment::bits`]. Clauses are the `{0,1}`-valued case.
#[derive(Clone, Debug, PartialEq)]
pub struct ClauseTable {
    k: usize,
    values: Vec<f64>,
}

impl ClauseTable {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        check_arity(k)?;
        if values.len() != 1usize << k {
            return Err(CspError::Validation(format!(
                "table for k = {k} needs {} entries, got {}",
                1usize << k,
                values.len()
            )));
        }
        Ok(Self { k, values })
    }

    /// Builds a table by evaluating `f` on every assignment.
    pub fn from_fn(k: usize, mut f: impl FnMut(Assignment) -> f64) -> Result<Self> {
        check_arity(k)?;
        let values = (0..1u32 << k).map(|b| f(Assignment { k, bits: b })).collect();
        Ok(Self { k, values })
    }

    pub fn constant(k: usize, c: f64) -> Result<Self> {
        Self::new(k, vec![c; 1 << k])
    }

    /// Parses a `0`/`1` string; character `j` is the value at assignment `j`.
    pub fn from_bit_string(k: usize, s: &str) -> Result<Self> {
        check_arity(k)?;
        if s.len() != 1usize << k {
            return Err(CspError::Validation(format!(
                "truth table for k = {k} must have {} characters, got {}",
                1usize << k,
                s.len()
            )));
        }
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0.0),
                '1' => Ok(1.0),
                other => Err(CspError::Validation(format!("truth table character {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, bits: u32) -> f64 {
        self.values[bits as usize]
    }

    pub fn is_boolean(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `None` unless the table is Boolean.
    pub fn to_bit_string(&self) -> Option<String> {
        if !self.is_boolean() {
            return None;
        }
        Some(self.values.iter().map(|&v| if v == 1.0 { '1' } else { '0' }).collect())
    }

    /// Packed bitset of a Boolean table, usable as a hash key.
    pub(crate) fn packed(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.values.len().div_ceil(64)];
        for (j, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                out[j / 64] |= 1 << (j % 64);
            }
        }
        out
    }

    /// Squared norm under the uniform measure.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// The table of `x -> f(x∘π)`: argument `i` of the result is argument
    /// `perm[i]` of `self` (0-based positions).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(CspError::Validation("permutation length differs from k".into()));
        }
        Self::from_fn(self.k, |a| {
            let mut src = 0u32;
            for (i, &p) in perm.iter().enumerate() {
                if a.bits >> i & 1 == 1 {
                    src |= 1 << p;
                }
            }
            self.values[src as usize]
        })
    }
}

/// Fourier coefficients `f_Q`, indexed by the subset mask of `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum {
    k: usize,
    coeffs: Vec<f64>,
}

impl FourierSpectrum {
    pub fn new(k: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_arity(k)?;
        if coeffs.len() != 1usize << k {
            return Err(CspError::Validation(format!(
                "spectrum for k = {k} needs {} coefficients, got {}",
                1usize << k,
                coeffs.len()
            )));
        }
        Ok(Self { k, coeffs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs[mask as usize]
    }

    /// `W[j] = sum_{|Q| = j} f_Q^2`.
    pub fn weight_levels(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.k + 1];
        for (m, c) in self.coeffs.iter().enumerate() {
            w[m.count_ones() as usize] += c * c;
        }
        w
    }

    /// `sum_{Q ∋ i} f_Q^2` grouped by `|Q| - 1`: the weight levels of the
    /// derivative in coordinate `i` (1-based).
    pub fn derivative_weight_levels(&self, i: usize) -> Vec<f64> {
        let bit = 1usize << (i - 1);
        let mut w = vec![0.0; self.k.max(1)];
        for (m, c) in self.coeffs.iter().enumerate() {
            if m & bit != 0 {
                w[m.count_ones() as usize - 1] += c * c;
            }
        }
        w
    }
}

/// Unnormalized in-place Walsh-Hadamard butterfly.
pub(crate) fn fwht_in_place(a: &mut [f64]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        for chunk in a.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// `f_Q = 2^{-k} sum_x f(x) gamma_Q(x)` for all `Q` at once.
///
/// The butterfly computes `sum_x f(x) (-1)^{|x & Q|}`, which is the transform
/// in the `+1 ↔ bit 0` convention; flipping the sign for odd `|Q|` moves to
/// the `+1 ↔ bit 1` convention used here.
pub fn fourier_transform(f: &ClauseTable) -> FourierSpectrum {
    let mut a = f.values.clone();
    fwht_in_place(&mut a);
    let scale = 1.0 / a.len() as f64;
    for (m, c) in a.iter_mut().enumerate() {
        *c *= scale;
        if m.count_ones() % 2 == 1 {
            *c = -*c;
        }
    }
    FourierSpectrum { k: f.k, coeffs: a }
}

/// `f(x) = sum_Q f_Q gamma_Q(x)`.
pub fn inverse_fourier(s: &FourierSpectrum) -> ClauseTable {
    let mut a: Vec<f64> =
        s.coeffs.iter().enumerate().map(|(m, &c)| if m.count_ones() % 2 == 1 { -c } else { c }).collect();
    fwht_in_place(&mut a);
    ClauseTable { k: s.k, values: a }
}

/// `(f, g)_theta = sum_x f(x) g(x) v_theta(x)`.
pub fn inner_theta(f: &ClauseTable, g: &ClauseTable, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if f.k != g.k {
        return Err(CspError::Validation("tables have different arity".into()));
    }
    let weights = theta_weights(f.k, theta);
    Ok(f.values.iter().zip(&g.values).enumerate().map(|(x, (a, b))| a * b * weights[x.count_ones() as usize]).sum())
}

/// `v_theta(x)` as a function of the number of `+1` coordinates.
fn theta_weights(k: usize, theta: f64) -> Vec<f64> {
    let p = (1.0 + theta) / 2.0;
    let q = (1.0 - theta) / 2.0;
    (0..=k).map(|j| p.powi(j as i32) * q.powi((k - j) as i32)).collect()
}

/// Biases `h ∈ [-1,1]^k` of the generalized noise operator.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasVector {
    h: Vec<f64>,
}

impl BiasVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if let Some(bad) = h.iter().find(|v| !(-1.0..=1.0).contains(*v) || v.is_nan()) {
            return Err(CspError::Domain(format!("bias {bad} is outside [-1, 1]")));
        }
        Ok(Self { h })
    }

    pub fn constant(k: usize, theta: f64) -> Result<Self> {
        Self::new(vec![theta; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }
}

/// Applies `T_h`: the coefficient at `Q` is multiplied by `gamma_Q(h)`.
pub fn noise_apply(s: &FourierSpectrum, h: &BiasVector) -> Result<FourierSpectrum> {
    if h.h.len() != s.k {
        return Err(CspError::Validation(format!("bias vector has length {}, spectrum has k = {}", h.h.len(), s.k)));
    }
    let n = s.coeffs.len();
    let mut mult = vec![1.0; n];
    for m in 1..n {
        let low = m.trailing_zeros() as usize;
        mult[m] = mult[m & (m - 1)] * h.h[low];
    }
    let coeffs = s.coeffs.iter().zip(&mult).map(|(c, w)| c * w).collect();
    Ok(FourierSpectrum { k: s.k, coeffs })
}

/// Inserts bit `b` at position `pos`, shifting higher bits up.
#[inline]
pub(crate) fn insert_bit(y: u32, pos: usize, b: u32) -> u32 {
    let low = y & ((1u32 << pos) - 1);
    let high = (y >> pos) << (pos + 1);
    high | (b << pos) | low
}

fn check_index(k: usize, i: usize) -> Result<()> {
    if i == 0 || i > k {
        return Err(CspError::Range(format!("variable index {i} not in 1..={k}")));
    }
    Ok(())
}

/// `f^(i)(y) = [f(y with x_i = +1) - f(y with x_i = -1)] / 2`, a table over
/// the remaining `k-1` coordinates in their original order.
pub fn derivative(f: &ClauseTable, i: usize) -> Result<ClauseTable> {
    check_index(f.k, i)?;
    let pos = i - 1;
    let values = (0..1u32 << (f.k - 1))
        .map(|y| 0.5 * (f.value(insert_bit(y, pos, 1)) - f.value(insert_bit(y, pos, 0))))
        .collect();
    Ok(ClauseTable { k: f.k - 1, values })
}

/// `I_i(f) = ||f^(i)||^2`.
pub fn influence(f: &ClauseTable, i: usize) -> Result<f64> {
    Ok(derivative(f, i)?.norm_sq())
}

/// `(f, T_theta f) = sum_Q f_Q^2 theta^{|Q|}`.
pub fn self_correlation(s: &FourierSpectrum, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(eval_levels(&s.weight_levels(), theta))
}

/// `sum_j w[j] x^j` by Horner.
pub(crate) fn eval_levels(w: &[f64], x: f64) -> f64 {
    w.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Partial solution sets of a clause with respect to its first argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialSets {
    /// Completions `y` (as `(k-1)`-bit masks) with `phi(+1, y) = 1`.
    pub s_plus: Vec<u32>,
    pub s_minus: Vec<u32>,
    pub lambda_plus: Vec<u32>,
    pub lambda_minus: Vec<u32>,
}

pub fn partial_sets(f: &ClauseTable) -> Result<PartialSets> {
    if !f.is_boolean() {
        return Err(CspError::Domain("partial sets need a Boolean clause".into()));
    }
    if f.k < 2 {
        return Err(CspError::Domain("partial sets need k >= 2".into()));
    }
    let mut out = PartialSets { s_plus: vec![], s_minus: vec![], lambda_plus: vec![], lambda_minus: vec![] };
    for y in 0..1u32 << (f.k - 1) {
        let plus = f.value((y << 1) | 1) == 1.0;
        let minus = f.value(y << 1) == 1.0;
        if plus {
            out.s_plus.push(y);
        }
        if minus {
            out.s_minus.push(y);
        }
        if plus && !minus {
            out.lambda_plus.push(y);
        }
        if minus && !plus {
            out.lambda_minus.push(y);
        }
    }
    Ok(out)
}

/// `1(sum_i x_i s_i ∉ {-k, k})`: the hypergraph 2-coloring clause when `s`
/// is all `+1`, and a not-all-equal clause with literal signs `s` otherwise.
pub fn not_all_equal(k: usize, signs: u32) -> Result<ClauseTable> {
    let full = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    ClauseTable::from_fn(k, |a| {
        let x = a.bits ^ !signs & full;
        if x == 0 || x == full {
            0.0
        } else {
            1.0
        }
    })
}

/// `(1 + eps * gamma_[k]) / 2`.
pub fn parity(k: usize, eps: i8) -> Result<ClauseTable> {
    ClauseTable::from_fn(k, |a| {
        let gamma = if (k as u32 - a.bits.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        0.5 * (1.0 + eps as f64 * gamma)
    })
}

//! Exact integer arithmetic for the width spectrum of the projective
//! plane and the perturbed length-spectrum count.
//!
//! The closed form and the interval form of the spectrum index are kept
//! as two independent routes and cross-checked; the floor decision in
//! the closed form runs entirely on integers so that interval
//! boundaries (where `1 + 8p` is a perfect square) can never misround.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::real::{r64, rint, Real};

/// Index of a sweepout parameter; always at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct WidthIndex(u64);

impl WidthIndex {
    pub fn new(p: u64) -> Option<Self> {
        (p >= 1).then_some(Self(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for WidthIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Dimension `D(d) = (d+1)(2d+1)` of the invariant polynomial space
/// with degree parameter `d`; also the jump locations of the spectrum.
#[inline]
pub fn dim_d(d: u64) -> u64 {
    (d + 1) * (2 * d + 1)
}

/// Spectrum index by its interval definition: the unique `d + 1` with
/// `D(d) <= p <= D(d+1) - 1`, found by binary search on `d`.
pub fn f_interval(p: WidthIndex) -> u64 {
    let p = p.get();
    // smallest m with D(m) > p; then f = m and d = m - 1
    let mut lo = 0u64;
    let mut hi = 1u64;
    while dim_d(hi) <= p {
        hi *= 2;
    }
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if dim_d(mid) <= p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Spectrum index by its closed form `floor((1 + sqrt(1 + 8p)) / 4)`.
///
/// Uses the integer square root (largest `s` with `s*s <= 1 + 8p`), so
/// the floor is decided without floating point: for integer `s` the
/// value `floor((1 + sqrt(n)) / 4)` equals `floor((1 + isqrt(n)) / 4)`
/// because no integer lies strictly between them.
pub fn f_closed(p: WidthIndex) -> u64 {
    let s = (1 + 8 * p.get()).isqrt();
    (1 + s) / 4
}

/// Width of the standard projective plane at index `p`: `2 pi f(p)`.
pub fn omega_std<R: Real>(p: WidthIndex) -> R {
    rint::<R>(f_closed(p)) * r64::<R>(2.0) * R::PI()
}

/// Cardinality formula `(d+1)(2d+5)` for the truncated length spectrum.
#[inline]
pub fn card_r_formula(d: u64) -> u64 {
    (d + 1) * (2 * d + 5)
}

/// One admitted value of the perturbed length spectrum:
/// `value = (n1+n2+n3) pi + mu (n2 + 2 n3)` with even total
/// multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry<R> {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub mu: R,
    pub value: R,
}

impl<R: Real> SpectrumEntry<R> {
    /// Total multiplicity `n1 + n2 + n3`.
    #[inline]
    pub fn total(&self) -> u64 {
        self.n1 + self.n2 + self.n3
    }

    /// Integer offset key `n2 + 2 n3`; two triples with the same total
    /// and the same key name the same spectrum value for every `mu`.
    #[inline]
    pub fn offset_key(&self) -> u64 {
        self.n2 + 2 * self.n3
    }

    /// Whether the total multiplicity is even.
    #[inline]
    pub fn parity_even(&self) -> bool {
        self.total() % 2 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpectrumError {
    #[error("mu = {mu} outside the valid regime (0, {limit}) for d = {d}")]
    MuOutOfRange { mu: f64, limit: f64, d: u64 },
}

/// Absolute slack on the truncation boundary `2 pi (d+1) + 1`, so that
/// the exact-boundary choice `mu = 1/(4(d+1))` keeps its top value.
const CAP_SLACK: f64 = 1e-9;

/// Brute-force enumeration of the truncated even-parity length spectrum
/// for perturbation size `mu`: all distinct values
/// `(n1+n2+n3) pi + mu (n2 + 2 n3)` with `n1+n2+n3` even and positive
/// and value at most `2 pi (d+1) + 1`.
///
/// Deduplication and ordering use the integer key `(total, n2 + 2 n3)`
/// rather than the floating value, so the result is exact for any `mu`
/// in the admitted range. Requires `0 < mu < 1/(2(d+1))`; outside that
/// regime distinctness of the values is not guaranteed.
pub fn enumerate_entries<R: Real>(d: u64, mu: R) -> Result<Vec<SpectrumEntry<R>>, SpectrumError> {
    let limit = (r64::<R>(2.0) * rint::<R>(d + 1)).recip();
    if !(mu > R::zero() && mu < limit) {
        return Err(SpectrumError::MuOutOfRange {
            mu: mu.to_f64().unwrap_or(f64::NAN),
            limit: limit.to_f64().unwrap_or(f64::NAN),
            d,
        });
    }

    let mut seen: BTreeMap<(u64, u64), SpectrumEntry<R>> = BTreeMap::new();
    for j in 1..=(d + 1) {
        let total = 2 * j;
        for n2 in 0..=total {
            for n3 in 0..=(total - n2) {
                let n1 = total - n2 - n3;
                let key = n2 + 2 * n3;
                // Values with total < 2(d+1) always fit under the cap;
                // at the top level the cap reads mu * key <= 1.
                if total == 2 * (d + 1) && mu * rint::<R>(key) > R::one() + r64::<R>(CAP_SLACK) {
                    continue;
                }
                seen.entry((total, key)).or_insert(SpectrumEntry {
                    n1,
                    n2,
                    n3,
                    mu,
                    value: rint::<R>(total) * R::PI() + mu * rint::<R>(key),
                });
            }
        }
    }
    Ok(seen.into_values().collect())
}

/// The sorted list of distinct spectrum values; see [`enumerate_entries`].
pub fn enumerate_r<R: Real>(d: u64, mu: R) -> Result<Vec<R>, SpectrumError> {
    Ok(enumerate_entries(d, mu)?.into_iter().map(|e| e.value).collect())
}

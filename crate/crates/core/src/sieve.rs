//! Segmented sieves for h(n), τ(n), and the main-term density E(n).
//!
//! A segment holds the cofactor of each n after dividing out every prime
//! p ≤ √(hi−1); whatever survives is either 1 or a single large prime, so all
//! multiplicative data for the segment is recovered in one pass. Segment
//! contents depend only on the range, never on how a larger range was split,
//! and parallel runs combine per-segment results in ascending order, so any
//! thread count produces identical output.

use crate::accum::Dd;
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::{self, Read, Write};

/// Largest n any sieve in this crate accepts.
pub const MAX_SIEVE_VALUE: u64 = 2_000_000_000;

/// Default segment length for streaming folds.
pub const DEFAULT_SEGMENT: usize = 1 << 22;

/// Compact set of primes up to a limit (bitset over odd integers).
pub struct PrimeSet {
    limit: u64,
    bits: Vec<u64>,
}

impl PrimeSet {
    pub fn new(limit: u64) -> Result<PrimeSet> {
        if limit > MAX_SIEVE_VALUE {
            return Err(Error::RangeTooLarge(format!(
                "prime limit {limit} exceeds {MAX_SIEVE_VALUE}"
            )));
        }
        // bit i represents 2i+1
        let n_odd = (limit as usize + 1) / 2;
        let mut bits = vec![!0u64; n_odd.div_ceil(64).max(1)];
        let clear = |bits: &mut [u64], i: usize| bits[i / 64] &= !(1u64 << (i % 64));
        clear(&mut bits, 0); // 1 is not prime
        let mut p = 3u64;
        while p * p <= limit {
            if bit_get(&bits, (p / 2) as usize) {
                let mut m = p * p;
                while m <= limit {
                    clear(&mut bits, (m / 2) as usize);
                    m += 2 * p;
                }
            }
            p += 2;
        }
        // mask tail bits beyond limit
        for i in n_odd..bits.len() * 64 {
            clear(&mut bits, i);
        }
        Ok(PrimeSet { limit, bits })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn contains(&self, n: u64) -> bool {
        if n == 2 {
            return true;
        }
        if n < 2 || n > self.limit || n % 2 == 0 {
            return false;
        }
        bit_get(&self.bits, (n / 2) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        let odd = self
            .bits
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| {
                let mut word = word;
                let mut out = Vec::with_capacity(word.count_ones() as usize);
                while word != 0 {
                    let b = word.trailing_zeros() as usize;
                    out.push((w * 64 + b) as u64 * 2 + 1);
                    word &= word - 1;
                }
                out
            });
        std::iter::once(2u64)
            .filter(move |_| self.limit >= 2)
            .chain(odd)
    }

    pub fn count(&self) -> usize {
        let odd: u32 = self.bits.iter().map(|w| w.count_ones()).sum();
        odd as usize + usize::from(self.limit >= 2)
    }
}

#[inline]
fn bit_get(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

/// Primes up to `limit` inclusive.
pub fn primes_upto(limit: u64) -> Result<PrimeSet> {
    PrimeSet::new(limit)
}

fn sieve_basis(hi: u64) -> Vec<u64> {
    let max_n = hi - 1;
    let mut root = (max_n as f64).sqrt() as u64 + 1;
    while root * root > max_n {
        root -= 1;
    }
    PrimeSet::new(root.max(2))
        .expect("basis limit below cap")
        .iter()
        .filter(|&p| p != 2)
        .collect()
}

/// Per-n multiplicative data over [lo, hi).
pub struct Segment {
    pub lo: u64,
    pub values: Vec<u32>,
    pub e: Option<Vec<f64>>,
}

/// E's Euler factor at an odd prime.
#[inline]
pub fn e_factor(p: u64) -> f64 {
    debug_assert!(p % 2 == 1);
    if p % 4 == 1 {
        ((p - 1) * (p - 1)) as f64 / (p * p - p + 1) as f64
    } else {
        (p * p - 1) as f64 / (p * p - p - 1) as f64
    }
}

fn fill_h(lo: u64, hi: u64, basis: &[u64], want_e: bool) -> Segment {
    let len = (hi - lo) as usize;
    let mut h = vec![1u32; len];
    let mut e = if want_e { vec![1.0f64; len] } else { Vec::new() };
    // cofactors after removing powers of 2 (h and E both ignore the prime 2)
    let mut rem: Vec<u32> = (lo..hi)
        .map(|n| (n >> n.trailing_zeros()) as u32)
        .collect();
    for &p in basis {
        let p32 = p as u32;
        let start = lo.next_multiple_of(p);
        let mut i = (start - lo) as usize;
        let residue_one = p % 4 == 1;
        let fe = if want_e { e_factor(p) } else { 1.0 };
        while i < len {
            let mut v = rem[i];
            if v % p32 == 0 {
                let mut exp = 0u32;
                loop {
                    v /= p32;
                    exp += 1;
                    if v % p32 != 0 {
                        break;
                    }
                }
                rem[i] = v;
                if residue_one {
                    h[i] *= exp + 1;
                } else if exp % 2 == 1 {
                    h[i] = 0;
                }
                if want_e {
                    e[i] *= fe;
                }
            }
            i += p as usize;
        }
    }
    for i in 0..len {
        let v = rem[i] as u64;
        if v > 1 {
            // v is prime: every p ≤ √(hi−1) was peeled off above
            if v % 4 == 1 {
                h[i] *= 2;
            } else {
                h[i] = 0;
            }
            if want_e {
                e[i] *= e_factor(v);
            }
        }
    }
    Segment {
        lo,
        values: h,
        e: want_e.then_some(e),
    }
}

fn fill_tau(lo: u64, hi: u64, basis: &[u64]) -> Vec<u32> {
    let len = (hi - lo) as usize;
    let mut tau = vec![1u32; len];
    let mut rem = Vec::with_capacity(len);
    for n in lo..hi {
        let tz = n.trailing_zeros();
        rem.push((n >> tz) as u32);
        if tz > 0 {
            tau[(n - lo) as usize] = tz + 1;
        }
    }
    for &p in basis {
        let p32 = p as u32;
        let start = lo.next_multiple_of(p);
        let mut i = (start - lo) as usize;
        while i < len {
            let mut v = rem[i];
            if v % p32 == 0 {
                let mut exp = 0u32;
                loop {
                    v /= p32;
                    exp += 1;
                    if v % p32 != 0 {
                        break;
                    }
                }
                rem[i] = v;
                tau[i] *= exp + 1;
            }
            i += p as usize;
        }
    }
    for i in 0..len {
        if rem[i] > 1 {
            tau[i] *= 2;
        }
    }
    tau
}

/// Sieved values over a half-open range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SieveTable {
    pub lo: u64,
    pub hi: u64,
    pub values: Vec<u32>,
}

impl SieveTable {
    pub fn value_at(&self, n: u64) -> u32 {
        assert!(self.lo <= n && n < self.hi, "n = {n} outside table");
        self.values[(n - self.lo) as usize]
    }

    /// Layout: lo and hi as little-endian u64, then each value as
    /// little-endian u32.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.lo.to_le_bytes())?;
        w.write_all(&self.hi.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> io::Result<SieveTable> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        let lo = u64::from_le_bytes(head[..8].try_into().unwrap());
        let hi = u64::from_le_bytes(head[8..].try_into().unwrap());
        if lo >= hi || hi - lo > MAX_SIEVE_VALUE {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad header"));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != (hi - lo) as usize * 4 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad length"));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SieveTable { lo, hi, values })
    }
}

fn check_range(lo: u64, hi: u64) -> Result<()> {
    if lo < 1 || lo >= hi {
        return Err(Error::RangeTooLarge(format!("bad range [{lo}, {hi})")));
    }
    if hi - 1 > MAX_SIEVE_VALUE {
        return Err(Error::RangeTooLarge(format!(
            "range end {hi} exceeds {}",
            MAX_SIEVE_VALUE + 1
        )));
    }
    Ok(())
}

/// h(n) for n in [lo, hi).
pub fn sieve_h(lo: u64, hi: u64) -> Result<SieveTable> {
    check_range(lo, hi)?;
    let basis = sieve_basis(hi);
    let len = (hi - lo) as usize;
    let mut values = vec![0u32; len];
    let seg = DEFAULT_SEGMENT;
    values
        .par_chunks_mut(seg)
        .enumerate()
        .for_each(|(k, chunk)| {
            let s_lo = lo + (k * seg) as u64;
            let s_hi = s_lo + chunk.len() as u64;
            let filled = fill_h(s_lo, s_hi, &basis, false);
            chunk.copy_from_slice(&filled.values);
        });
    Ok(SieveTable { lo, hi, values })
}

/// τ(n) for n in [lo, hi).
pub fn sieve_tau(lo: u64, hi: u64) -> Result<SieveTable> {
    check_range(lo, hi)?;
    let basis = sieve_basis(hi);
    let len = (hi - lo) as usize;
    let mut values = vec![0u32; len];
    let seg = DEFAULT_SEGMENT;
    values
        .par_chunks_mut(seg)
        .enumerate()
        .for_each(|(k, chunk)| {
            let s_lo = lo + (k * seg) as u64;
            let s_hi = s_lo + chunk.len() as u64;
            chunk.copy_from_slice(&fill_tau(s_lo, s_hi, &basis));
        });
    Ok(SieveTable { lo, hi, values })
}

/// Map every fixed-size segment of [lo, hi) through `f` in parallel and
/// return the results in ascending segment order. Each segment sees one
/// element of lookahead past its end (needed by consumers pairing n with
/// n+1), so `hi` itself must stay within the sieve cap.
pub fn fold_h_segments<T, F>(lo: u64, hi: u64, want_e: bool, f: F) -> Result<Vec<T>>
where
    F: Fn(&Segment) -> T + Sync,
    T: Send,
{
    check_range(lo, hi)?;
    let basis = sieve_basis(hi + 1);
    let seg = DEFAULT_SEGMENT as u64;
    let n_segs = (hi - lo).div_ceil(seg);
    let out: Vec<T> = (0..n_segs)
        .into_par_iter()
        .map(|k| {
            let s_lo = lo + k * seg;
            let s_hi = (s_lo + seg).min(hi);
            let data = fill_h(s_lo, s_hi + 1, &basis, want_e);
            f(&data)
        })
        .collect();
    Ok(out)
}

fn checkpointed_core<F>(
    checkpoints: &[u64],
    tau: bool,
    want_e: bool,
    term: F,
) -> Result<Vec<(u64, f64, u64)>>
where
    F: Fn(u64, u32, u32, f64) -> Option<f64> + Sync,
{
    let &x_max = checkpoints
        .last()
        .ok_or_else(|| Error::PreconditionViolated("no checkpoints".into()))?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] < 1 {
        return Err(Error::PreconditionViolated(
            "checkpoints must be ascending and ≥ 1".into(),
        ));
    }
    struct Part {
        sum: Dd,
        count: u64,
        cuts: Vec<(u64, Dd, u64)>, // prefix value at each checkpoint inside
    }
    let walk = |seg: &Segment| {
        let lo = seg.lo;
        let len = seg.values.len() - 1; // last slot is lookahead
        let mut sum = Dd::default();
        let mut count = 0u64;
        let mut cuts = Vec::new();
        let mut next_cut = checkpoints.partition_point(|&c| c < lo);
        for i in 0..len {
            let n = lo + i as u64;
            let e = seg.e.as_ref().map_or(1.0, |e| e[i]);
            if let Some(t) = term(n, seg.values[i], seg.values[i + 1], e) {
                sum.add(t);
                count += 1;
            }
            while next_cut < checkpoints.len() && checkpoints[next_cut] == n {
                cuts.push((n, sum, count));
                next_cut += 1;
            }
        }
        Part { sum, count, cuts }
    };
    let (lo, hi) = (1u64, x_max + 1);
    check_range(lo, hi)?;
    let basis = sieve_basis(hi + 1);
    let seg_len = DEFAULT_SEGMENT as u64;
    let n_segs = (hi - lo).div_ceil(seg_len);
    let parts: Vec<Part> = (0..n_segs)
        .into_par_iter()
        .map(|k| {
            let s_lo = lo + k * seg_len;
            let s_hi = (s_lo + seg_len).min(hi);
            let data = if tau {
                Segment {
                    lo: s_lo,
                    values: fill_tau(s_lo, s_hi + 1, &basis),
                    e: None,
                }
            } else {
                fill_h(s_lo, s_hi + 1, &basis, want_e)
            };
            walk(&data)
        })
        .collect();
    let mut acc = Dd::default();
    let mut count = 0u64;
    let mut out = Vec::with_capacity(checkpoints.len());
    for part in &parts {
        for &(x, prefix, c) in &part.cuts {
            let mut v = acc;
            v.add_dd(prefix);
            out.push((x, v.value(), count + c));
        }
        acc.add_dd(part.sum);
        count += part.count;
    }
    debug_assert_eq!(out.len(), checkpoints.len());
    Ok(out)
}

/// Compensated partial sums of a per-n functional with checkpoints.
///
/// Calls `term(n, h(n), h(n+1), E(n))` for every n in [1, x_max] and returns
/// the accumulated sum and term counter at each checkpoint. Checkpoints must
/// be sorted and end with x_max. Used by the Q and H evaluators; the E slot
/// is 1 when `want_e` is false.
pub fn checkpointed_sum<F>(
    checkpoints: &[u64],
    want_e: bool,
    term: F,
) -> Result<Vec<(u64, f64, u64)>>
where
    F: Fn(u64, u32, u32, f64) -> Option<f64> + Sync,
{
    checkpointed_core(checkpoints, false, want_e, term)
}

/// As `checkpointed_sum` but feeding `term(n, τ(n), τ(n+1), 1.0)`.
pub fn checkpointed_sum_tau<F>(checkpoints: &[u64], term: F) -> Result<Vec<(u64, f64, u64)>>
where
    F: Fn(u64, u32, u32, f64) -> Option<f64> + Sync,
{
    checkpointed_core(checkpoints, true, false, term)
}

/// Smallest-prime-factor table for 2 ≤ n ≤ n_max (index n, entries 0 and 1 unused).
pub fn spf_table(n_max: u64) -> Result<Vec<u32>> {
    if n_max > 20_000_000 {
        return Err(Error::RangeTooLarge(format!(
            "spf table of size {n_max} not supported"
        )));
    }
    let n = n_max as usize;
    let mut spf = vec![0u32; n + 1];
    let mut i = 2usize;
    while i * i <= n {
        if spf[i] == 0 {
            let mut j = i * i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        i += 1;
    }
    for (j, s) in spf.iter_mut().enumerate().skip(2) {
        if *s == 0 {
            *s = j as u32;
        }
    }
    Ok(spf)
}

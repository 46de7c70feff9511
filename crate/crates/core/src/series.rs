//! Partial sums Q(x) = ∑′ h(n)/h(n+1) and S(x) = ∑ τ(n)/τ(n+1), the
//! three-range divisor decomposition Q = Q₁ + Q₂ + Q₃, and the progression
//! error sum those ranges isolate.
//!
//! The prime on Q restricts to n with h(n+1) ≠ 0; a term with h(n) = 0 but
//! h(n+1) ≠ 0 contributes 0 yet still counts toward `terms_used`.

use crate::accum::Kahan;
use crate::arith::chi4;
use crate::error::{Error, Result};
use crate::sieve::{checkpointed_sum, checkpointed_sum_tau, sieve_h, spf_table};
use num::{BigRational, Zero};
use std::collections::HashMap;

/// Largest x for streaming float evaluation.
pub const MAX_FLOAT_X: u64 = 2_000_000_000;
/// Largest x for exact rational evaluation.
pub const MAX_EXACT_X: u64 = 1_000_000;
/// Largest x for per-n divisor enumeration.
pub const MAX_DIVISOR_X: u64 = 10_000_000;

/// A partial sum at a single evaluation point.
#[derive(Debug, Clone)]
pub struct PartialSum {
    pub x: u64,
    pub value: f64,
    pub exact: Option<BigRational>,
    pub terms_used: u64,
}

fn rational(num: u64, den: u64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// Q(x), float mode by default, exact rationals on request.
pub fn q_of_x(x: u64, exact: bool) -> Result<PartialSum> {
    if exact {
        if x > MAX_EXACT_X {
            return Err(Error::RangeTooLarge(format!(
                "exact mode caps at {MAX_EXACT_X}, got {x}"
            )));
        }
        let table = sieve_h(1, x + 2)?;
        let mut sum = BigRational::zero();
        let mut terms = 0u64;
        for n in 1..=x {
            let h1 = table.value_at(n + 1);
            if h1 != 0 {
                terms += 1;
                let h0 = table.value_at(n);
                if h0 != 0 {
                    sum += rational(h0 as u64, h1 as u64);
                }
            }
        }
        let float = q_of_x(x, false)?;
        Ok(PartialSum {
            x,
            value: float.value,
            exact: Some(sum),
            terms_used: terms,
        })
    } else {
        Ok(q_of_x_many(&[x])?.pop().expect("one checkpoint"))
    }
}

/// Q at several points in one sieve pass; `xs` must be ascending.
pub fn q_of_x_many(xs: &[u64]) -> Result<Vec<PartialSum>> {
    if xs.last().is_some_and(|&x| x > MAX_FLOAT_X) {
        return Err(Error::RangeTooLarge(format!(
            "float mode caps at {MAX_FLOAT_X}"
        )));
    }
    let rows = checkpointed_sum(xs, false, |_n, h, h1, _e| {
        (h1 != 0).then(|| h as f64 / h1 as f64)
    })?;
    Ok(rows
        .into_iter()
        .map(|(x, value, terms_used)| PartialSum {
            x,
            value,
            exact: None,
            terms_used,
        })
        .collect())
}

/// S(x) = ∑_{n≤x} τ(n)/τ(n+1); every n contributes since τ never vanishes.
pub fn s_of_x(x: u64, exact: bool) -> Result<PartialSum> {
    if x > MAX_FLOAT_X {
        return Err(Error::RangeTooLarge(format!(
            "float mode caps at {MAX_FLOAT_X}"
        )));
    }
    let rows = checkpointed_sum_tau(&[x], |_n, t, t1, _e| Some(t as f64 / t1 as f64))?;
    let (_, value, terms_used) = rows[0];
    let mut exact_sum = None;
    if exact {
        if x > MAX_EXACT_X {
            return Err(Error::RangeTooLarge(format!(
                "exact mode caps at {MAX_EXACT_X}, got {x}"
            )));
        }
        let table = crate::sieve::sieve_tau(1, x + 2)?;
        let mut sum = BigRational::zero();
        for n in 1..=x {
            sum += rational(table.value_at(n) as u64, table.value_at(n + 1) as u64);
        }
        exact_sum = Some(sum);
    }
    Ok(PartialSum {
        x,
        value,
        exact: exact_sum,
        terms_used,
    })
}

/// The divisor-range cut points √x·(ln x)^∓A. Below x = 2 the lower cut
/// degenerates to +∞ and every divisor lands in the first range.
pub fn range_cuts(x: u64, a: f64) -> (f64, f64) {
    let l = (x as f64).ln();
    let root = (x as f64).sqrt();
    (root * l.powf(-a), root * l.powf(a))
}

/// Q(x) split by the size of the divisor d in h(n) = ∑_{d|n} χ₄(d).
#[derive(Debug, Clone)]
pub struct QDecomposition {
    pub x: u64,
    pub a: f64,
    pub z1: f64,
    pub z2: f64,
    pub parts: [f64; 3],
    pub exact_parts: Option<[BigRational; 3]>,
}

impl QDecomposition {
    pub fn total(&self) -> f64 {
        self.parts.iter().sum()
    }

    pub fn exact_total(&self) -> Option<BigRational> {
        self.exact_parts
            .as_ref()
            .map(|p| p.iter().sum::<BigRational>())
    }
}

/// Enumerate the odd divisors of n from a smallest-prime-factor table.
fn odd_divisors(mut n: u64, spf: &[u32], out: &mut Vec<u64>) {
    out.clear();
    out.push(1);
    n >>= n.trailing_zeros();
    while n > 1 {
        let p = spf[n as usize] as u64;
        let mut exp = 0u32;
        while n % p == 0 {
            n /= p;
            exp += 1;
        }
        let base = out.len();
        let mut pe = 1u64;
        for _ in 0..exp {
            pe *= p;
            for i in 0..base {
                out.push(out[i] * pe);
            }
        }
    }
}

/// Q(x) = Q₁ + Q₂ + Q₃ by bucketing each divisor d of n into
/// d ≤ z₁, z₁ < d ≤ z₂, d > z₂. Exact mode proves the identity; float mode
/// scales to x = 10⁷.
pub fn q_decomposition(x: u64, a: f64, exact: bool) -> Result<QDecomposition> {
    if x > MAX_DIVISOR_X {
        return Err(Error::RangeTooLarge(format!(
            "divisor enumeration caps at {MAX_DIVISOR_X}, got {x}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::PreconditionViolated("A must be positive".into()));
    }
    let (z1, z2) = range_cuts(x, a);
    let table = sieve_h(1, x + 2)?;
    let spf = spf_table(x.max(2))?;
    let mut float_parts = [Kahan::default(), Kahan::default(), Kahan::default()];
    let mut exact_parts = exact.then(|| {
        [
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ]
    });
    let mut divs = Vec::with_capacity(64);
    for n in 1..=x {
        let h1 = table.value_at(n + 1);
        if h1 == 0 {
            continue;
        }
        odd_divisors(n, &spf, &mut divs);
        for &d in &divs {
            let sign = chi4(d as i64);
            let bucket = if (d as f64) <= z1 {
                0
            } else if (d as f64) <= z2 {
                1
            } else {
                2
            };
            float_parts[bucket].add(sign as f64 / h1 as f64);
            if let Some(parts) = exact_parts.as_mut() {
                let t = rational(1, h1 as u64);
                if sign > 0 {
                    parts[bucket] += t;
                } else {
                    parts[bucket] -= t;
                }
            }
        }
    }
    Ok(QDecomposition {
        x,
        a,
        z1,
        z2,
        parts: float_parts.map(|k| k.value()),
        exact_parts,
    })
}

/// The middle-range progression error: for z₁ < d ≤ z₂,
/// ∑ χ₄(d)·(∑′_{n≤x, n≡1 (d)} 1/h(n) − φ(d)^{-1}·∑′_{n≤x, (n,d)=1} 1/h(n)).
///
/// Coprime inner sums expand over squarefree e | d by inclusion–exclusion,
/// with the per-e multiple sums memoized across d. Requires z₂ ≤ x so that
/// every d admits a smallest-prime-factor lookup.
pub fn qerr2_direct(x: u64, a: f64) -> Result<f64> {
    if x > MAX_DIVISOR_X {
        return Err(Error::RangeTooLarge(format!(
            "direct evaluation caps at {MAX_DIVISOR_X}, got {x}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::PreconditionViolated("A must be positive".into()));
    }
    let (z1, z2) = range_cuts(x, a);
    if z2 > x as f64 {
        return Err(Error::PreconditionViolated(format!(
            "upper cut √x(ln x)^A = {z2:.1} exceeds x = {x}; pick a smaller A"
        )));
    }
    let table = sieve_h(1, x + 1)?;
    let spf = spf_table(x.max(2))?;
    let inv_h = |n: u64| -> f64 {
        let h = table.value_at(n);
        if h == 0 {
            0.0
        } else {
            1.0 / h as f64
        }
    };
    // S_e = ∑′_{m ≤ x, e|m} 1/h(m), memoized over squarefree odd e
    let mut multiples_memo: HashMap<u64, f64> = HashMap::new();
    let mut multiples_sum = |e: u64| -> f64 {
        *multiples_memo.entry(e).or_insert_with(|| {
            let mut k = Kahan::default();
            let mut m = e;
            while m <= x {
                k.add(inv_h(m));
                m += e;
            }
            k.value()
        })
    };
    let d_hi = z2.floor() as u64;
    if z1 >= z2 || d_hi < 3 {
        return Ok(0.0);
    }
    let d_lo = (z1.max(1.0).floor() as u64 + 1).max(3);
    let mut total = Kahan::default();
    let mut prime_divs: Vec<u64> = Vec::with_capacity(8);
    for d in d_lo..=d_hi {
        if d % 2 == 0 || (d as f64) <= z1 {
            continue;
        }
        let sign = chi4(d as i64) as f64;
        let mut progression = Kahan::default();
        let mut n = 1u64;
        while n <= x {
            progression.add(inv_h(n));
            n += d;
        }
        prime_divs.clear();
        let mut m = d;
        let mut phi = 1u64;
        while m > 1 {
            let p = spf[m as usize] as u64;
            let mut pe = 1u64;
            while m % p == 0 {
                m /= p;
                pe *= p;
            }
            phi *= pe - pe / p;
            prime_divs.push(p);
        }
        let mut coprime = Kahan::default();
        for mask in 0..1u32 << prime_divs.len() {
            let mut e = 1u64;
            for (i, &p) in prime_divs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    e *= p;
                }
            }
            let s = multiples_sum(e);
            coprime.add(if mask.count_ones() % 2 == 0 { s } else { -s });
        }
        total.add(sign * (progression.value() - coprime.value() / phi as f64));
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{factorize, h_of};
    use num::ToPrimitive;

    #[test]
    fn q_small_pinned() {
        assert_eq!(q_of_x(1, true).unwrap().exact.unwrap(), rational(1, 1));
        assert_eq!(q_of_x(4, true).unwrap().exact.unwrap(), rational(3, 2));
        assert_eq!(q_of_x(10, true).unwrap().exact.unwrap(), rational(3, 1));
        assert_eq!(q_of_x(10, false).unwrap().value, 3.0);
    }

    #[test]
    fn s_small_pinned() {
        assert_eq!(s_of_x(1, true).unwrap().exact.unwrap(), rational(1, 2));
        assert_eq!(s_of_x(2, true).unwrap().exact.unwrap(), rational(3, 2));
        let s3 = s_of_x(3, true).unwrap();
        assert_eq!(s3.exact.unwrap(), rational(3, 2) + rational(2, 3));
        assert_eq!(s3.terms_used, 3);
    }

    #[test]
    fn exclusion_rule_counts() {
        // n = 2 is excluded (h(3) = 0); n = 8 contributes 1/1; n ∈ {3, 7}
        // contribute 0 but count.
        let q = q_of_x(8, true).unwrap();
        assert_eq!(q.terms_used, 5); // n ∈ {1, 3, 4, 7, 8}
        assert_eq!(q.exact.unwrap(), rational(5, 2));
    }

    #[test]
    fn float_tracks_exact_at_1e5() {
        let q = q_of_x(100_000, true).unwrap();
        let exact = q.exact.as_ref().unwrap().to_f64().unwrap();
        assert!(
            (q.value - exact).abs() <= 1e-9 * exact.abs(),
            "float {} vs exact {exact}",
            q.value
        );
    }

    #[test]
    fn exact_matches_per_n_factorization() {
        let q = q_of_x(10_000, true).unwrap();
        let mut oracle = BigRational::zero();
        let h = |n: u64| h_of(&factorize(n));
        for n in 1..=10_000u64 {
            let h1 = h(n + 1);
            if h1 != 0 {
                oracle += rational(h(n), h1);
            }
        }
        assert_eq!(q.exact.unwrap(), oracle);
    }

    #[test]
    fn many_matches_single() {
        let many = q_of_x_many(&[100, 5_000, 20_000]).unwrap();
        for ps in &many {
            let single = q_of_x(ps.x, false).unwrap();
            assert_eq!(ps.value, single.value);
            assert_eq!(ps.terms_used, single.terms_used);
        }
    }

    #[test]
    fn decomposition_is_exact_identity() {
        for &(x, a) in &[(1u64, 1.0), (10, 1.0), (10_000, 2.0)] {
            let d = q_decomposition(x, a, true).unwrap();
            let q = q_of_x(x, true).unwrap();
            assert_eq!(
                d.exact_total().unwrap(),
                q.exact.unwrap(),
                "x = {x}, A = {a}"
            );
        }
    }

    #[test]
    fn decomposition_x1_lands_in_first_range() {
        let d = q_decomposition(1, 3.0, true).unwrap();
        assert_eq!(d.exact_parts.as_ref().unwrap()[0], rational(1, 1));
        assert!(d.exact_parts.as_ref().unwrap()[1].is_zero());
        assert!(d.exact_parts.as_ref().unwrap()[2].is_zero());
    }

    #[test]
    fn odd_divisor_enumeration() {
        let spf = spf_table(1_000).unwrap();
        let mut divs = Vec::new();
        odd_divisors(360, &spf, &mut divs);
        divs.sort_unstable();
        assert_eq!(divs, vec![1, 3, 5, 9, 15, 45]);
        odd_divisors(1, &spf, &mut divs);
        assert_eq!(divs, vec![1]);
    }

    #[test]
    fn qerr2_small() {
        assert_eq!(qerr2_direct(1, 1.0).unwrap(), 0.0);
        assert!(matches!(
            qerr2_direct(10_000, 5.0),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn qerr2_matches_brute_force() {
        // brute force with explicit coprime scans at x = 2000, A = 1.5
        let x = 2_000u64;
        let a = 1.5;
        let fast = qerr2_direct(x, a).unwrap();
        let (z1, z2) = range_cuts(x, a);
        let h = |n: u64| h_of(&factorize(n));
        let mut total = 0.0f64;
        for d in 2..=(z2.floor() as u64) {
            if (d as f64) <= z1 || d % 2 == 0 {
                continue;
            }
            let sign = chi4(d as i64) as f64;
            let mut prog = 0.0;
            let mut cop = 0.0;
            for n in 1..=x {
                let hv = h(n);
                if hv == 0 {
                    continue;
                }
                if n % d == 1 {
                    prog += 1.0 / hv as f64;
                }
                if num::integer::gcd(n, d) == 1 {
                    cop += 1.0 / hv as f64;
                }
            }
            let phi = factorize(d).phi();
            total += sign * (prog - cop / phi as f64);
        }
        assert!(
            (fast - total).abs() <= 1e-9 * total.abs().max(1.0),
            "fast {fast} vs brute {total}"
        );
    }
}

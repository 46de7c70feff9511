//! The main-term pipeline: the density E(n), the weighted sums H(x) and
//! H₁(x), the prediction Q^MT(x) = (πc/4)(H(x) + H(x/2) − 2H(x/4)), and the
//! asymptotic 𝒢(1)/Γ(1/4) · x/(ln x)^{3/4} that H(x) approaches.
//!
//! H is defined over real arguments as the sum to ⌊x⌋, with H(u) = 0 for
//! u < 1, which is what makes Q^MT well defined down to x = 1.

use crate::arith::Factorization;
use crate::constants::{const_c, g_at_one, gamma_quarter};
use crate::error::Result;
use crate::series::q_of_x_many;
use crate::sieve::checkpointed_sum;
use num::{BigRational, One};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Truncation point for the constants baked into Q^MT and the asymptotic;
/// their tails are far below every tolerance used against them.
pub const DEFAULT_PRIME_LIMIT: u64 = 1_000_000;

fn pi_c_over_4() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let c = const_c(DEFAULT_PRIME_LIMIT).expect("default limit is valid");
        0.25 * PI * c.value
    })
}

fn g_over_gamma() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let g = g_at_one(DEFAULT_PRIME_LIMIT).expect("default limit is valid");
        g.value / gamma_quarter()
    })
}

/// E(n): for each distinct odd prime p | n, the factor (p−1)²/(p²−p+1)
/// when p ≡ 1 (mod 4) and (p²−1)/(p²−p−1) when p ≡ 3; powers of 2 are
/// invisible, so E(2ℓ) = E(ℓ).
pub fn e_of(f: &Factorization) -> BigRational {
    let mut out = BigRational::one();
    for &(p, _) in &f.factors {
        if p == 2 {
            continue;
        }
        let p = num::BigInt::from(p);
        let sq = &p * &p;
        out *= if &p % 4u32 == 1u32.into() {
            let num = (&p - 1) * (&p - 1);
            BigRational::new(num, &sq - &p + 1)
        } else {
            BigRational::new(&sq - 1, &sq - &p - 1)
        };
    }
    out
}

/// H(x) = ∑′_{n≤⌊x⌋} E(n)/h(n) (restricted to odd n when flagged), at many
/// points in one sieve pass; `xs` ascending, entries ≥ 1.
pub fn h_of_x_many(xs: &[u64], odd_only: bool) -> Result<Vec<(u64, f64)>> {
    let rows = checkpointed_sum(xs, true, |n, h, _h1, e| {
        if h == 0 || (odd_only && n % 2 == 0) {
            None
        } else {
            Some(e / h as f64)
        }
    })?;
    Ok(rows.into_iter().map(|(x, v, _)| (x, v)).collect())
}

/// Single-point H(x).
pub fn h_of_x(x: u64, odd_only: bool) -> Result<f64> {
    Ok(h_of_x_many(&[x], odd_only)?[0].1)
}

fn h_combination(h: impl Fn(u64) -> f64, x: u64) -> f64 {
    h(x) + h(x / 2) - 2.0 * h(x / 4)
}

/// Q^MT(x) = (πc/4)·(H(x) + H(x/2) − 2H(x/4)).
pub fn q_mt(x: u64) -> Result<f64> {
    let mut cuts: Vec<u64> = [x / 4, x / 2, x].into_iter().filter(|&u| u >= 1).collect();
    cuts.dedup();
    let rows = h_of_x_many(&cuts, false)?;
    let table: HashMap<u64, f64> = rows.into_iter().collect();
    let h = |u: u64| table.get(&u).copied().unwrap_or(0.0);
    Ok(pi_c_over_4() * h_combination(h, x))
}

/// The H(x) asymptotic 𝒢(1)/Γ(1/4) · x/(ln x)^{3/4}; meaningful for x ≥ 3.
pub fn h_asymptotic(x: u64) -> f64 {
    debug_assert!(x >= 3);
    g_over_gamma() * x as f64 / (x as f64).ln().powf(0.75)
}

/// One row of the Q vs Q^MT comparison table.
#[derive(Debug, Clone, Copy)]
pub struct MainTermReport {
    pub x: u64,
    pub q_direct: f64,
    pub q_mt: f64,
    /// q_direct/q_mt.
    pub ratio: f64,
    pub h: f64,
    pub h_half: f64,
    pub h_quarter: f64,
    pub h_asym: f64,
    /// h/h_asym.
    pub ratio_h: f64,
}

/// Reports for ascending evaluation points, sharing one Q pass and one H
/// pass across all rows.
pub fn main_term_table(xs: &[u64]) -> Result<Vec<MainTermReport>> {
    let q_rows = q_of_x_many(xs)?;
    let mut cuts: Vec<u64> = xs
        .iter()
        .flat_map(|&x| [x / 4, x / 2, x])
        .filter(|&u| u >= 1)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let table: HashMap<u64, f64> = h_of_x_many(&cuts, false)?.into_iter().collect();
    let h = |u: u64| table.get(&u).copied().unwrap_or(0.0);
    Ok(q_rows
        .iter()
        .map(|qr| {
            let x = qr.x;
            let q_mt = pi_c_over_4() * h_combination(h, x);
            let h_asym = h_asymptotic(x.max(3));
            MainTermReport {
                x,
                q_direct: qr.value,
                q_mt,
                ratio: qr.value / q_mt,
                h: h(x),
                h_half: h(x / 2),
                h_quarter: h(x / 4),
                h_asym,
                ratio_h: h(x) / h_asym,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factorize;
    use num::ToPrimitive;
    use rand::{Rng, SeedableRng};

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn e_pinned_values() {
        assert_eq!(e_of(&factorize(1)), rat(1, 1));
        assert_eq!(e_of(&factorize(5)), rat(16, 21));
        assert_eq!(e_of(&factorize(3)), rat(8, 5));
        assert_eq!(e_of(&factorize(6)), rat(8, 5));
        assert_eq!(e_of(&factorize(96)), rat(8, 5));
        assert_eq!(e_of(&factorize(15)), rat(8, 5) * rat(16, 21));
    }

    #[test]
    fn e_multiplicative_on_coprime_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x2A);
        let mut checked = 0u32;
        while checked < 10_000 {
            let a = rng.gen_range(1..=10_000u64);
            let b = rng.gen_range(1..=10_000u64);
            if num::integer::gcd(a, b) != 1 {
                continue;
            }
            assert_eq!(
                e_of(&factorize(a * b)),
                e_of(&factorize(a)) * e_of(&factorize(b)),
                "a = {a}, b = {b}"
            );
            checked += 1;
        }
    }

    #[test]
    fn e_agrees_with_sieve_channel() {
        let exact: Vec<f64> = (1..=4_000u64)
            .map(|n| e_of(&factorize(n)).to_f64().unwrap())
            .collect();
        let rows = checkpointed_sum(&[4_000], true, |n, _h, _h1, e| {
            let want = exact[(n - 1) as usize];
            assert!((e - want).abs() <= 1e-14 * want, "n = {n}: {e} vs {want}");
            Some(e)
        })
        .unwrap();
        assert!(rows[0].1 > 0.0);
    }

    #[test]
    fn h_small_pinned() {
        assert_eq!(h_of_x(1, false).unwrap(), 1.0);
        assert_eq!(h_of_x(2, false).unwrap(), 2.0);
        assert_eq!(h_of_x(2, true).unwrap(), 1.0);
        // H(4) = E(1)/1 + E(2)/1 + E(4)/1, all three factors trivial
        assert_eq!(h_of_x(4, false).unwrap(), 3.0);
    }

    #[test]
    fn h_matches_independent_snapshot() {
        // frozen from a separate sieve implementation
        let rows = h_of_x_many(&[10_000, 1_000_000], false).unwrap();
        assert!((rows[0].1 - 1.225_888_455_072e3).abs() < 1e-6 * rows[0].1);
        assert!((rows[1].1 - 8.022_277_038_790e4).abs() < 1e-9 * rows[1].1);
    }

    #[test]
    fn odd_identity_h1_eq_h_minus_h_half() {
        for &x in &[1_000u64, 10_000, 1_000_000] {
            let h1 = h_of_x(x, true).unwrap();
            let full = h_of_x(x, false).unwrap();
            let half = h_of_x(x / 2, false).unwrap();
            assert!(
                (h1 - (full - half)).abs() <= 1e-12 * full,
                "x = {x}: {h1} vs {}",
                full - half
            );
        }
    }

    #[test]
    fn q_mt_small_values() {
        let pc4 = pi_c_over_4();
        assert!((pc4 - 0.668_448).abs() < 1e-4);
        // x = 1: H(1) + H(0) − 2H(0) = 1
        assert!((q_mt(1).unwrap() - pc4).abs() < 1e-15);
        // x = 4: H(4) + H(2) − 2H(1) = 3 + 2 − 2
        assert!((q_mt(4).unwrap() - 3.0 * pc4).abs() < 1e-14);
    }

    #[test]
    fn q_mt_monotone_over_decades() {
        let mut prev = 0.0;
        for &x in &[1_000u64, 10_000, 100_000, 1_000_000] {
            let v = q_mt(x).unwrap();
            assert!(v > prev, "q_mt({x}) = {v} not above {prev}");
            prev = v;
        }
    }

    #[test]
    fn asymptotic_shape() {
        let x = 100_000_000u64;
        let v = h_asymptotic(x);
        assert!(v.is_finite() && v > 0.0);
        let scale = h_asymptotic(2 * x) / v;
        let expect = 2.0 * ((x as f64).ln() / (2.0 * x as f64).ln()).powf(0.75);
        assert!((scale - expect).abs() < 1e-12);
        // 𝒢(1)/Γ(1/4)
        assert!((g_over_gamma() - 0.507_675_487).abs() < 1e-6);
    }

    #[test]
    fn ratio_h_decreasing_small_scale() {
        let reports = main_term_table(&[10_000, 100_000, 1_000_000]).unwrap();
        let devs: Vec<f64> = reports.iter().map(|r| (r.ratio_h - 1.0).abs()).collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        for r in &reports {
            assert!(r.h >= r.h_half && r.h_half >= 0.0);
        }
    }
}

//! Integer arithmetic: factorization, the character χ₄, the divisor function
//! h(n) = Σ_{d|n} χ₄(d), and the coupled-moduli CRT used by the dispersion
//! machinery.
//!
//! h is multiplicative with h(2^ν) = 1, h(p^ν) = ν + 1 for p ≡ 1 (mod 4) and
//! h(p^ν) = 1 for even ν, 0 for odd ν, when p ≡ 3 (mod 4). The count of
//! representations of n as a sum of two squares is 4h(n).

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Largest prime used for trial division before switching to Pollard rho.
const TRIAL_LIMIT: u64 = 1_000_000;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Extended Euclid on (a, b): returns (g, x, y) with a·x + b·y = g.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Inverse of a modulo q, as the canonical residue in [0, q).
///
/// `mod_inv(1, 1)` is 0, the only residue modulo 1.
pub fn mod_inv(a: i64, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::BadShape("modulus must be positive".into()));
    }
    if q == 1 {
        return Ok(0);
    }
    let a_red = a.rem_euclid(q as i64) as u64;
    let (g, x, _) = ext_gcd(a_red as i128, q as i128);
    if g != 1 {
        return Err(Error::NotCoprime {
            a: a_red,
            modulus: q,
        });
    }
    Ok(x.rem_euclid(q as i128) as u64)
}

#[inline]
pub fn mod_mul(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, base, m);
        }
        base = mod_mul(base, base, m);
        exp >>= 1;
    }
    acc
}

/// The nonprincipal character modulo 4: χ₄(n) = (−1)^((n−1)/2) for odd n, 0 for even.
#[inline]
pub fn chi4(n: i64) -> i32 {
    match n.rem_euclid(4) {
        1 => 1,
        3 => -1,
        _ => 0,
    }
}

/// Deterministic Miller–Rabin, valid for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    // n-1 = d·2^s
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 325, 9375, 28178, 450775, 9780504, 1795265022] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mod_mul(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn trial_primes() -> &'static Vec<u32> {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let n = TRIAL_LIMIT as usize;
        let mut sieve = vec![true; n + 1];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2usize;
        while i * i <= n {
            if sieve[i] {
                let mut j = i * i;
                while j <= n {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (2..=n).filter(|&i| sieve[i]).map(|i| i as u32).collect()
    })
}

/// Pollard rho with Brent cycle detection. `n` must be composite and free of
/// factors below the trial bound. The polynomial constants are swept in a
/// fixed order so repeated runs factor identically.
fn pollard_brent(n: u64) -> u64 {
    fn attempt(n: u64, c: u64) -> Option<u64> {
        let f = |x: u64| {
            let v = mod_mul(x, x, n) + c;
            if v >= n {
                v - n
            } else {
                v
            }
        };
        let mut y = 2u64;
        let mut r = 1u64;
        let mut q = 1u64;
        let mut g = 1u64;
        let mut x = 0u64;
        let mut ys = 0u64;
        let batch = 128u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..batch.min(r - k) {
                    y = f(y);
                    q = mod_mul(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += batch;
            }
            r <<= 1;
        }
        if g == n {
            g = 1;
            while g == 1 {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
            }
        }
        (g > 1 && g < n).then_some(g)
    }
    for c in 1u64..10_000 {
        if let Some(d) = attempt(n, c) {
            return d;
        }
    }
    unreachable!("rho parameter sweep exhausted")
}

/// Prime factorization, factors sorted by prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn tau(&self) -> u64 {
        self.factors.iter().map(|&(_, e)| (e + 1) as u64).product()
    }

    pub fn phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// All divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Squarefree divisors with their Möbius signs, for inclusion–exclusion.
    pub fn squarefree_divisors_signed(&self) -> Vec<(u64, i32)> {
        let mut out = vec![(1u64, 1i32)];
        for &(p, _) in &self.factors {
            let len = out.len();
            for i in 0..len {
                out.push((out[i].0 * p, -out[i].1));
            }
        }
        out
    }
}

pub fn factorize(n: u64) -> Factorization {
    let mut factors = Vec::new();
    if n <= 1 {
        return Factorization { n, factors };
    }
    let mut rem = n;
    for &p in trial_primes() {
        let p = p as u64;
        if p * p > rem {
            break;
        }
        if rem % p == 0 {
            let mut e = 0u32;
            while rem % p == 0 {
                rem /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    if rem > 1 {
        if rem <= TRIAL_LIMIT * TRIAL_LIMIT || is_prime(rem) {
            // trial covered all primes up to min(√n, 10⁶); a survivor below
            // 10¹² has no factor ≤ 10⁶, hence is prime
            factors.push((rem, 1));
        } else {
            let mut stack = vec![rem];
            let mut large = Vec::new();
            while let Some(m) = stack.pop() {
                if is_prime(m) {
                    large.push(m);
                    continue;
                }
                let d = pollard_brent(m);
                stack.push(d);
                stack.push(m / d);
            }
            large.sort_unstable();
            let mut i = 0;
            while i < large.len() {
                let p = large[i];
                let mut e = 0u32;
                while i < large.len() && large[i] == p {
                    e += 1;
                    i += 1;
                }
                factors.push((p, e));
            }
        }
    }
    factors.sort_unstable();
    Factorization { n, factors }
}

/// h(n) from a factorization.
pub fn h_of(f: &Factorization) -> u64 {
    if f.n == 0 {
        return 0;
    }
    let mut h = 1u64;
    for &(p, e) in &f.factors {
        match p % 4 {
            1 => h *= (e + 1) as u64,
            3 => {
                if e % 2 == 1 {
                    return 0;
                }
            }
            _ => {} // p = 2 contributes 1
        }
    }
    h
}

/// Direct h(n) for a single value.
pub fn h_value(n: u64) -> u64 {
    h_of(&factorize(n))
}

/// A pair of congruences m ≡ a (mod ΔΔ₁), m ≡ b (mod ΔΔ₂) with Δ₁, Δ₂
/// coprime and both composed only of primes dividing Δ. The system reduces
/// to coprime moduli P and Q with PQ = ΔΔ₁Δ₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrtSystem {
    pub delta: u64,
    pub delta1: u64,
    pub delta2: u64,
    pub p: u64,
    pub q: u64,
}

/// Split ΔΔ₁Δ₂ into the coprime pair (P, Q).
///
/// With 𝒟 the part of Δ prime to Δ₁Δ₂, 𝒟₁ the primary components of ΔΔ₁ at
/// primes dividing Δ₁, and 𝒟₂ those of ΔΔ₂ at primes dividing Δ₂, the pair is
/// P = 𝒟𝒟₁ and Q = 𝒟₂.
pub fn decompose_delta(delta: u64, delta1: u64, delta2: u64) -> Result<CrtSystem> {
    if delta == 0 || delta1 == 0 || delta2 == 0 {
        return Err(Error::BadShape("moduli must be positive".into()));
    }
    if gcd(delta1, delta2) != 1 {
        return Err(Error::BadShape(format!(
            "gcd({delta1}, {delta2}) must be 1"
        )));
    }
    // Δᵢ | Δ^∞: every prime of Δᵢ divides Δ
    for (name, di) in [("delta1", delta1), ("delta2", delta2)] {
        for &(p, _) in &factorize(di).factors {
            if delta % p != 0 {
                return Err(Error::BadShape(format!(
                    "{name} = {di} has prime {p} not dividing delta = {delta}"
                )));
            }
        }
    }
    let parts = |m: u64, keep: &dyn Fn(u64) -> bool| -> u64 {
        factorize(m)
            .factors
            .iter()
            .filter(|&&(p, _)| keep(p))
            .map(|&(p, e)| p.pow(e))
            .product()
    };
    let d0 = parts(delta, &|p| delta1 % p != 0 && delta2 % p != 0);
    let d1 = parts(delta * delta1, &|p| delta1 % p == 0);
    let d2 = parts(delta * delta2, &|p| delta2 % p == 0);
    let sys = CrtSystem {
        delta,
        delta1,
        delta2,
        p: d0 * d1,
        q: d2,
    };
    debug_assert_eq!(sys.p * sys.q, delta * delta1 * delta2);
    debug_assert_eq!(gcd(sys.p, sys.q), 1);
    Ok(sys)
}

/// Solve m ≡ a (mod ΔΔ₁), m ≡ b (mod ΔΔ₂).
///
/// Solvable exactly when a ≡ b (mod Δ); the solution is a single residue
/// λ modulo ΔΔ₁Δ₂, returned in [0, ΔΔ₁Δ₂).
pub fn lemma9_lambda(delta: u64, delta1: u64, delta2: u64, a: u64, b: u64) -> Result<u64> {
    let sys = decompose_delta(delta, delta1, delta2)?;
    if a % delta != b % delta {
        return Err(Error::NoSolution);
    }
    let (p, q) = (sys.p, sys.q);
    if q == 1 {
        return Ok(a % p);
    }
    if p == 1 {
        return Ok(b % q);
    }
    // λ = α·Q·(Q* mod P) + β·P·(P* mod Q) with α ≡ a (ΔΔ₁), β ≡ b (ΔΔ₂);
    // P | ΔΔ₁ and Q | ΔΔ₂ make the reductions of a and b well defined.
    let q_inv_p = mod_inv(q as i64, p)?;
    let p_inv_q = mod_inv(p as i64, q)?;
    let m = p as u128 * q as u128;
    let t1 = (a % p) as u128 * q as u128 % m * q_inv_p as u128 % m;
    let t2 = (b % q) as u128 * p as u128 % m * p_inv_q as u128 % m;
    Ok(((t1 + t2) % m) as u64)
}

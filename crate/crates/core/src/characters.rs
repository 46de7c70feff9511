//! Dirichlet characters mod q stored as exponent vectors against fixed
//! generators: one index per odd prime-power component of q against its
//! smallest primitive root, and an index pair (m₀, m₁) on the 2-power part
//! via n ≡ (−1)^{γ₀}5^{γ₁}. Values are exact rational angles (fractions of
//! a full turn); conductors come from trial induction over divisors, so the
//! 4d / d∕4 / d conductor law for χ·χ₄ is an assertion under test, not the
//! implementation.

use crate::arith::{factorize, gcd, mod_pow};
use crate::error::{Error, Result};
use num::complex::Complex64;
use num::rational::Rational64;
use num::{One, Zero};
use std::f64::consts::TAU;
use std::sync::Arc;

/// enumerate_characters accepts moduli up to this.
pub const MAX_MODULUS: u64 = 100_000;
/// char_h_sum accepts ranges up to this.
pub const MAX_HSUM_N: u64 = 10_000_000;

#[derive(Debug)]
struct OddComponent {
    p: u64,
    /// p^α
    pk: u64,
    /// φ(p^α)
    phi: u64,
    /// index of each residue against the smallest primitive root
    dlog: Vec<u32>,
}

/// The unit-group structure of (ℤ/q)*: discrete-log tables per component,
/// shared by all characters of the modulus.
#[derive(Debug)]
pub struct CharacterGroup {
    modulus: u64,
    /// 2-power part of q
    two_pow: u64,
    /// residue mod 2^α → (γ₀, γ₁) for α ≥ 2
    two_dlog: Vec<(u32, u32)>,
    odd: Vec<OddComponent>,
}

fn primitive_root(p: u64, pk: u64, phi: u64) -> u64 {
    let prime_parts: Vec<u64> = factorize(phi).factors.iter().map(|&(q, _)| q).collect();
    let mut g = 2u64;
    loop {
        if g % p != 0 && prime_parts.iter().all(|&q| mod_pow(g, phi / q, pk) != 1) {
            return g;
        }
        g += 1;
    }
}

impl CharacterGroup {
    fn new(q: u64) -> Arc<CharacterGroup> {
        let mut two_pow = 1u64;
        let mut m = q;
        while m % 2 == 0 {
            two_pow *= 2;
            m /= 2;
        }
        let mut two_dlog = Vec::new();
        if two_pow >= 4 {
            two_dlog = vec![(0u32, 0u32); two_pow as usize];
            let quarter = two_pow / 4;
            let mut v = 1u64;
            for g1 in 0..quarter.max(1) {
                two_dlog[v as usize] = (0, g1 as u32);
                two_dlog[(two_pow - v) as usize] = (1, g1 as u32);
                v = v * 5 % two_pow;
            }
        }
        let mut odd = Vec::new();
        for (p, a) in factorize(m).factors {
            let pk = p.pow(a);
            let phi = pk / p * (p - 1);
            let g = primitive_root(p, pk, phi);
            let mut dlog = vec![u32::MAX; pk as usize];
            let mut v = 1u64;
            for t in 0..phi {
                dlog[v as usize] = t as u32;
                v = v * g % pk;
            }
            odd.push(OddComponent { p, pk, phi, dlog });
        }
        Arc::new(CharacterGroup {
            modulus: q,
            two_pow,
            two_dlog,
            odd,
        })
    }

    /// index ranges (c₀ for −1, c₁ for 5, then each odd φ)
    fn radices(&self) -> Vec<u64> {
        let mut r = vec![
            if self.two_pow >= 4 { 2 } else { 1 },
            if self.two_pow >= 8 { self.two_pow / 4 } else { 1 },
        ];
        r.extend(self.odd.iter().map(|c| c.phi));
        r
    }
}

/// A character mod q as indices against the group's fixed generators.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    /// index on the (−1)-part of the 2-component
    m0: u64,
    /// index on the 5-part of the 2-component
    m1: u64,
    /// indices on the odd components
    e: Vec<u64>,
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    /// The angle of χ(n) as an exact fraction of a full turn in [0,1);
    /// None when gcd(n, q) > 1.
    pub fn eval_angle(&self, n: u64) -> Option<Rational64> {
        let g = &*self.group;
        let mut num = 0i64;
        let mut den = 1i64;
        let mut push = |a: u64, b: u64| {
            // angle += a/b, kept reduced so denominators stay ≤ φ(q)
            let r = Rational64::new(num, den) + Rational64::new((a % b) as i64, b as i64);
            num = *r.numer();
            den = *r.denom();
        };
        if g.two_pow >= 2 {
            if n % 2 == 0 {
                return None;
            }
            if g.two_pow >= 4 {
                let (g0, g1) = g.two_dlog[(n % g.two_pow) as usize];
                push(self.m0 * g0 as u64, 2);
                if g.two_pow >= 8 {
                    push(self.m1 * g1 as u64, g.two_pow / 4);
                }
            }
        }
        for (c, &e) in g.odd.iter().zip(&self.e) {
            let r = n % c.pk;
            if r % c.p == 0 {
                return None;
            }
            push(e * c.dlog[r as usize] as u64, c.phi);
        }
        let ang = Rational64::new(num, den);
        Some(ang - ang.floor())
    }

    /// χ(n) as a complex double; 0 when gcd(n, q) > 1.
    pub fn eval(&self, n: u64) -> Complex64 {
        match self.eval_angle(n) {
            None => Complex64::zero(),
            Some(a) => {
                if a.is_zero() {
                    Complex64::one()
                } else if a == Rational64::new(1, 2) {
                    -Complex64::one()
                } else {
                    Complex64::cis(TAU * (*a.numer() as f64) / (*a.denom() as f64))
                }
            }
        }
    }

    pub fn is_principal(&self) -> bool {
        self.m0 == 0 && self.m1 == 0 && self.e.iter().all(|&x| x == 0)
    }

    /// Smallest modulus of a character inducing χ, by trial induction:
    /// the least divisor d of q with χ(n) = 1 whenever n ≡ 1 (mod d) and
    /// gcd(n, q) = 1.
    pub fn conductor(&self) -> u64 {
        let q = self.group.modulus;
        'next: for d in factorize(q).divisors() {
            let mut n = 1 + d;
            while n <= q {
                if let Some(a) = self.eval_angle(n) {
                    if !a.is_zero() {
                        continue 'next;
                    }
                }
                n += d;
            }
            return d;
        }
        q
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor() == self.group.modulus
    }

    /// The primitive character mod conductor(χ) that induces χ.
    pub fn primitive_inducer(&self) -> DirichletCharacter {
        let f = self.conductor();
        let group = CharacterGroup::new(f);
        let angle_at = |r: u64, pk: u64| -> Rational64 {
            // lift r (mod pk) to ≡ 1 mod f/pk, then past any divisor of q
            let other = f / pk;
            let mut n = r;
            while n % other != 1 % other {
                n += pk;
            }
            while gcd(n, self.group.modulus) != 1 {
                n += f;
            }
            self.eval_angle(n).expect("coprime lift")
        };
        let index_from = |ang: Rational64, ord: u64| -> u64 {
            let scaled = ang * Rational64::new(ord as i64, 1);
            debug_assert!(scaled.is_integer(), "component index must be exact");
            scaled.to_integer() as u64 % ord
        };
        let mut m0 = 0;
        let mut m1 = 0;
        if group.two_pow >= 4 {
            m0 = index_from(angle_at(group.two_pow - 1, group.two_pow), 2);
            if group.two_pow >= 8 {
                m1 = index_from(angle_at(5, group.two_pow), group.two_pow / 4);
            }
        }
        let e = group
            .odd
            .iter()
            .map(|c| {
                let mut g = 1u64;
                for (r, &t) in c.dlog.iter().enumerate() {
                    if t == 1 {
                        g = r as u64;
                        break;
                    }
                }
                index_from(angle_at(g, c.pk), c.phi)
            })
            .collect();
        DirichletCharacter { group, m0, m1, e }
    }
}

/// All φ(q) characters mod q, principal first.
pub fn enumerate_characters(q: u64) -> Result<Vec<DirichletCharacter>> {
    if q == 0 {
        return Err(Error::PreconditionViolated("modulus must be ≥ 1".into()));
    }
    if q > MAX_MODULUS {
        return Err(Error::ModulusTooLarge(q));
    }
    let group = CharacterGroup::new(q);
    let radices = group.radices();
    let total: u64 = radices.iter().product();
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0u64; radices.len()];
    loop {
        out.push(DirichletCharacter {
            group: Arc::clone(&group),
            m0: idx[0],
            m1: idx[1],
            e: idx[2..].to_vec(),
        });
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < radices[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// χ·χ₄ as a character mod lcm(d, 4) together with the conductor of its
/// primitive inducer. χ must be primitive of modulus d ≥ 3.
pub fn times_chi4(chi: &DirichletCharacter) -> Result<(DirichletCharacter, u64)> {
    let d = chi.modulus();
    if d < 3 {
        return Err(Error::PreconditionViolated(format!(
            "need modulus ≥ 3, got {d}"
        )));
    }
    let f = chi.conductor();
    if f != d {
        return Err(Error::NotPrimitive {
            modulus: d,
            conductor: f,
        });
    }
    let l = d / gcd(d, 4) * 4;
    let group = CharacterGroup::new(l);
    let chi4_angle = |n: u64| -> Rational64 {
        if n % 4 == 3 {
            Rational64::new(1, 2)
        } else {
            Rational64::zero()
        }
    };
    let angle_at = |r: u64, pk: u64| -> Rational64 {
        let other = l / pk;
        let mut n = r;
        while n % other != 1 % other {
            n += pk;
        }
        let a = chi.eval_angle(n).expect("coprime to l implies coprime to d") + chi4_angle(n);
        a - a.floor()
    };
    let index_from = |ang: Rational64, ord: u64| -> u64 {
        let scaled = ang * Rational64::new(ord as i64, 1);
        debug_assert!(scaled.is_integer(), "product character index must be exact");
        scaled.to_integer() as u64 % ord
    };
    let m0 = index_from(angle_at(group.two_pow - 1, group.two_pow), 2);
    let m1 = if group.two_pow >= 8 {
        index_from(angle_at(5, group.two_pow), group.two_pow / 4)
    } else {
        0
    };
    let e = group
        .odd
        .iter()
        .map(|c| {
            let mut g = 1u64;
            for (r, &t) in c.dlog.iter().enumerate() {
                if t == 1 {
                    g = r as u64;
                    break;
                }
            }
            index_from(angle_at(g, c.pk), c.phi)
        })
        .collect();
    let product = DirichletCharacter { group, m0, m1, e };
    let cond = product.conductor();
    Ok((product, cond))
}

/// S_χ(N) = ∑_{n≤N, h(n)≠0} χ(n)/h(n), compensated in both coordinates.
pub fn char_h_sum(chi: &DirichletCharacter, n_max: u64) -> Result<Complex64> {
    if n_max > MAX_HSUM_N {
        return Err(Error::RangeTooLarge(format!(
            "char_h_sum limited to N ≤ {MAX_HSUM_N}, got {n_max}"
        )));
    }
    if n_max == 0 {
        return Ok(Complex64::zero());
    }
    let parts = crate::sieve::fold_h_segments(1, n_max + 1, false, |seg| {
        let mut re = crate::accum::Kahan::default();
        let mut im = crate::accum::Kahan::default();
        for (i, &hv) in seg.values.iter().enumerate() {
            if hv == 0 {
                continue;
            }
            let v = chi.eval(seg.lo + i as u64);
            if v != Complex64::zero() {
                re.add(v.re / hv as f64);
                im.add(v.im / hv as f64);
            }
        }
        (re.value(), im.value())
    })?;
    let mut re = crate::accum::Kahan::default();
    let mut im = crate::accum::Kahan::default();
    for (r, i) in parts {
        re.add(r);
        im.add(i);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

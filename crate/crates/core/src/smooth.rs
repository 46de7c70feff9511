//! Smooth cutoffs and their transforms: the bump ρ, the mollified step
//! σ(a,b,δ;·), the window ψ (plateau [1,2]) and the Mellin window f_δ
//! (plateau [2δ,1]), the Fourier transform ψ̂ with its e^{−√λ/2} decay, the
//! Mellin transform F_δ(it), Poisson-summation checks, and the truncated
//! Mellin inversion.
//!
//! σ evaluations route through a cumulative table of ∫ρ built once by
//! adaptive quadrature (quintic Hermite between nodes, error ≈ 10⁻¹⁵);
//! `BumpSpec::eval_by_quadrature` is the direct form the tests compare
//! against.

use crate::accum::Dd;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_complex, integrate_pieces};
use num::complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Largest derivative order carried by the exact polynomial recurrence.
pub const MAX_RHO_DERIV: u32 = 12;
/// ψ̂ and F_δ accept |λ|, |t| up to this.
pub const MAX_FREQ: f64 = 2.0e4;

/// ρ(x) = e^{1/(x²−1)} on |x| < 1, 0 elsewhere.
pub fn rho(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let t = 1.0 / (x * x - 1.0);
    if t < -746.0 {
        0.0
    } else {
        t.exp()
    }
}

/// Coefficients of P_j with ρ^{(j)} = P_j(x)/(x²−1)^{2j} · ρ(x); the
/// recurrence P_{j+1} = (x²−1)²P_j′ − 4jx(x²−1)P_j − 2xP_j keeps integer
/// coefficients (degree ≤ 3j, magnitudes < 2¹²⁷ through j = 12).
fn rho_polys() -> &'static Vec<Vec<i128>> {
    static CACHE: OnceLock<Vec<Vec<i128>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut polys: Vec<Vec<i128>> = vec![vec![1]];
        for j in 0..MAX_RHO_DERIV as usize {
            let p = &polys[j];
            let deg = p.len() - 1;
            let mut next = vec![0i128; deg + 4];
            for (k, &c) in p.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                // (x²−1)² P′ = (x⁴ − 2x² + 1)·k·c·x^{k−1}
                if k > 0 {
                    let d = c * k as i128;
                    next[k + 3] += d;
                    next[k + 1] -= 2 * d;
                    next[k - 1] += d;
                }
                // −4j·x(x²−1)·P = −4j·c·(x^{k+3} − x^{k+1})
                let f = 4 * j as i128 * c;
                next[k + 3] -= f;
                next[k + 1] += f;
                // −2x·P
                next[k + 1] -= 2 * c;
            }
            while next.len() > 1 && *next.last().unwrap() == 0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}

/// ρ^{(j)}(x) for j ≤ 12 via the exact rational-function recurrence;
/// identically 0 for |x| ≥ 1.
pub fn rho_deriv(x: f64, j: u32) -> Result<f64> {
    if j > MAX_RHO_DERIV {
        return Err(Error::DerivOrderTooHigh {
            j,
            max: MAX_RHO_DERIV,
        });
    }
    if j == 0 {
        return Ok(rho(x));
    }
    let r = rho(x);
    if r == 0.0 {
        return Ok(0.0);
    }
    let p = &rho_polys()[j as usize];
    let mut num = 0.0f64;
    for &c in p.iter().rev() {
        num = num * x + c as f64;
    }
    let u = x * x - 1.0;
    Ok(num / u.powi(2 * j as i32) * r)
}

struct RhoTable {
    /// cumulative ∫_{−1}^{y_i} ρ at 4097 nodes
    cum: Vec<f64>,
    /// ρ(y_i)
    val: Vec<f64>,
    /// ρ′(y_i)
    der: Vec<f64>,
}

const RHO_CELLS: usize = 4096;

fn rho_table() -> &'static RhoTable {
    static CACHE: OnceLock<RhoTable> = OnceLock::new();
    CACHE.get_or_init(|| {
        let h = 2.0 / RHO_CELLS as f64;
        let mut cum = Vec::with_capacity(RHO_CELLS + 1);
        let mut val = Vec::with_capacity(RHO_CELLS + 1);
        let mut der = Vec::with_capacity(RHO_CELLS + 1);
        let mut acc = Dd::default();
        cum.push(0.0);
        for i in 0..=RHO_CELLS {
            let y = -1.0 + i as f64 * h;
            val.push(rho(y));
            der.push(rho_deriv(y, 1).expect("order 1"));
            if i < RHO_CELLS {
                let piece = integrate(rho, y, y + h, 1e-16);
                acc.add(piece.value);
                cum.push(acc.value());
            }
        }
        RhoTable { cum, val, der }
    })
}

/// ∫_{−1}^{1} ρ ≈ 0.4439938, quadrature-derived.
pub fn rho_integral() -> f64 {
    *rho_table().cum.last().unwrap()
}

/// ∫_{−1}^{min(y,1)} ρ by quintic Hermite between table nodes.
fn rho_cumulative(y: f64) -> f64 {
    if y <= -1.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return rho_integral();
    }
    let table = rho_table();
    let h = 2.0 / RHO_CELLS as f64;
    let pos = (y + 1.0) / h;
    let i = (pos.floor() as usize).min(RHO_CELLS - 1);
    let t = pos - i as f64;
    let (f0, f1) = (table.cum[i], table.cum[i + 1]);
    let (d0, d1) = (h * table.val[i], h * table.val[i + 1]);
    let (s0, s1) = (h * h * table.der[i], h * h * table.der[i + 1]);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    f0 * (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5)
        + d0 * (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5)
        + s0 * (0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5)
        + f1 * (10.0 * t3 - 15.0 * t4 + 6.0 * t5)
        + d1 * (-4.0 * t3 + 7.0 * t4 - 3.0 * t5)
        + s1 * (0.5 * t3 - t4 + 0.5 * t5)
}

/// A smoothed indicator of [a, b] with transition width δ: the function
/// σ(a,b,δ;x) = (1/c)∫_{x−b}^{x−a} ρ(2t/δ) dt, which is 1 on
/// [a+δ/2, b−δ/2] and 0 outside (a−δ/2, b+δ/2).
#[derive(Debug, Clone, Copy)]
pub struct BumpSpec {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// c = ∫ρ(2t/δ)dt = (δ/2)∫ρ.
    pub norm: f64,
}

impl BumpSpec {
    pub fn new(a: f64, b: f64, delta: f64) -> Result<BumpSpec> {
        if !(delta > 0.0 && delta < b - a) {
            return Err(Error::BadShape(format!(
                "need 0 < δ < b−a, got a={a}, b={b}, δ={delta}"
            )));
        }
        Ok(BumpSpec {
            a,
            b,
            delta,
            norm: 0.5 * delta * rho_integral(),
        })
    }

    /// The window ψ = σ(3/4, 9/4, 1/2; ·): plateau [1,2], support (1/2,5/2).
    pub fn psi() -> BumpSpec {
        BumpSpec::new(0.75, 2.25, 0.5).expect("fixed valid shape")
    }

    /// The Mellin window f_δ = σ(3δ/2, 1+δ/2, δ; ·): plateau [2δ, 1],
    /// support (δ, 1+δ). Needs 0 < δ < 1/2.
    pub fn f_delta(delta: f64) -> Result<BumpSpec> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::BadShape(format!("need 0 < δ < 1/2, got {delta}")));
        }
        BumpSpec::new(1.5 * delta, 1.0 + 0.5 * delta, delta)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a - 0.5 * self.delta, self.b + 0.5 * self.delta)
    }

    pub fn plateau(&self) -> (f64, f64) {
        (self.a + 0.5 * self.delta, self.b - 0.5 * self.delta)
    }

    /// σ(x) via the cumulative-ρ table; exactly 1 on the plateau and
    /// exactly 0 outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let hi = 2.0 * (x - self.a) / self.delta;
        let lo = 2.0 * (x - self.b) / self.delta;
        if hi <= -1.0 || lo >= 1.0 {
            return 0.0;
        }
        if hi >= 1.0 && lo <= -1.0 {
            return 1.0;
        }
        (rho_cumulative(hi) - rho_cumulative(lo)) / rho_integral()
    }

    /// σ(x) by direct adaptive quadrature of ρ(2t/δ), target 10⁻¹².
    pub fn eval_by_quadrature(&self, x: f64) -> f64 {
        let lo = (x - self.b).max(-0.5 * self.delta);
        let hi = (x - self.a).min(0.5 * self.delta);
        if lo >= hi {
            return 0.0;
        }
        let d = self.delta;
        integrate(|t| rho(2.0 * t / d), lo, hi, 1e-14).value / self.norm
    }
}

fn psi_spec() -> &'static BumpSpec {
    static CACHE: OnceLock<BumpSpec> = OnceLock::new();
    CACHE.get_or_init(BumpSpec::psi)
}

/// ψ(x), the fixed window with plateau [1,2].
pub fn psi(x: f64) -> f64 {
    psi_spec().eval(x)
}

/// f_δ(u).
pub fn f_delta(delta: f64, u: f64) -> Result<f64> {
    Ok(BumpSpec::f_delta(delta)?.eval(u))
}

fn check_freq(v: f64) -> Result<()> {
    if !(v.abs() <= MAX_FREQ) {
        return Err(Error::RangeTooLarge(format!(
            "frequency {v} beyond supported {MAX_FREQ}"
        )));
    }
    Ok(())
}

fn psi_hat_with_tol(lambda: f64, tol: f64) -> (Complex64, f64) {
    integrate_complex(
        |x| Complex64::cis(-2.0 * PI * lambda * x) * psi(x),
        &[0.5, 1.0, 2.0, 2.5],
        tol,
    )
}

/// ψ̂(λ) = ∫ψ(x)e^{−2πiλx}dx with an error estimate.
pub fn psi_hat(lambda: f64) -> Result<(Complex64, f64)> {
    check_freq(lambda)?;
    Ok(psi_hat_with_tol(lambda, 1e-13))
}

/// ψ̂^{(k)}(λ) = ∫ψ(x)(−2πix)^k e^{−2πiλx} dx for k ≤ 3.
pub fn psi_hat_deriv(lambda: f64, k: u32) -> Result<(Complex64, f64)> {
    check_freq(lambda)?;
    if k > 3 {
        return Err(Error::DerivOrderTooHigh { j: k, max: 3 });
    }
    Ok(integrate_complex(
        |x| {
            let phase = Complex64::cis(-2.0 * PI * lambda * x);
            let factor = Complex64::new(0.0, -2.0 * PI * x).powu(k);
            phase * factor * psi(x)
        },
        &[0.5, 1.0, 2.0, 2.5],
        1e-13,
    ))
}

/// F_δ(it) = ∫₀^∞ f_δ(u) u^{it−1} du, supported on [δ, 1+δ].
pub fn f_delta_mellin(delta: f64, t: f64) -> Result<(Complex64, f64)> {
    check_freq(t)?;
    let spec = BumpSpec::f_delta(delta)?;
    Ok(integrate_complex(
        |u| Complex64::cis(t * u.ln()) * (spec.eval(u) / u),
        &[delta, 2.0 * delta, 1.0, 1.0 + delta],
        1e-13,
    ))
}

/// Two sides of a Poisson-type comparison.
#[derive(Debug, Clone, Copy)]
pub struct PoissonCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

impl PoissonCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        PoissonCheck {
            lhs,
            rhs,
            diff: lhs - rhs,
        }
    }
}

/// The Poisson identity for the shifted dilate of ψ:
/// ∑_{n∈ℤ} ψ((n+x)/H) = H·∑_{m∈ℤ} ψ̂(Hm)e^{2πimx}, both sides truncated
/// to numerical convergence.
pub fn poisson_identity_check(h: f64, x: f64) -> Result<PoissonCheck> {
    if !(h >= 1.0) {
        return Err(Error::PreconditionViolated(format!("need H ≥ 1, got {h}")));
    }
    let n_lo = (0.5 * h - x).floor() as i64;
    let n_hi = (2.5 * h - x).ceil() as i64;
    let mut lhs = 0.0f64;
    for n in n_lo..=n_hi {
        lhs += psi((n as f64 + x) / h);
    }
    let mut rhs = h * psi_hat(0.0)?.0.re;
    for m in 1..10_000 {
        let lam = h * m as f64;
        if lam > MAX_FREQ {
            break;
        }
        let term = psi_hat(lam)?.0 * Complex64::cis(2.0 * PI * m as f64 * x);
        rhs += 2.0 * h * term.re;
        // decay envelope e^{−√λ/2}: once λ is far past convergence, stop
        if lam > 100.0 && 2.0 * h * term.norm() < 1e-13 {
            break;
        }
    }
    Ok(PoissonCheck::new(lhs, rhs))
}

fn check_progression_pre(q: u64, a: u64, m: f64) -> Result<()> {
    if q < 2 || a >= q {
        return Err(Error::PreconditionViolated(format!(
            "need q ≥ 2 and a < q, got q={q}, a={a}"
        )));
    }
    let floor_m = (2.0 * (q as f64).ln()).sqrt().exp();
    if !(m > floor_m) {
        return Err(Error::PreconditionViolated(format!(
            "need M > exp(√(2 ln q)) = {floor_m:.3}, got {m}"
        )));
    }
    Ok(())
}

/// Minimal admissible truncation length (5q/M)(ln M)⁴ for the progression
/// check.
pub fn progression_min_h(q: u64, m: f64) -> f64 {
    5.0 * q as f64 / m * m.ln().powi(4)
}

/// ∑_{m≡a (q)} ψ(m/M) against the truncated Poisson side
/// Mψ̂(0)/q + (M/q)∑_{1≤|m|≤H} ψ̂(mM/q)e^{2πima/q}.
pub fn poisson_check_progression(q: u64, a: u64, m: f64, h: u64) -> Result<PoissonCheck> {
    check_progression_pre(q, a, m)?;
    if (h as f64) < progression_min_h(q, m) {
        return Err(Error::PreconditionViolated(format!(
            "need H ≥ (5q/M)(ln M)⁴ = {:.3}, got {h}",
            progression_min_h(q, m)
        )));
    }
    if h as f64 * m / q as f64 > MAX_FREQ {
        return Err(Error::RangeTooLarge(format!(
            "truncation reaches frequency {} beyond {MAX_FREQ}",
            h as f64 * m / q as f64
        )));
    }
    // the truncation tail being probed sits near the noise set by the
    // ψ̂ quadrature error times M/q, so those calls run at a tight target
    let mut lhs = crate::accum::Kahan::default();
    let steps = ((0.5 * m - a as f64) / q as f64).ceil().max(0.0) as u64;
    let mut k = a + steps * q;
    while (k as f64) < 2.5 * m {
        lhs.add(psi(k as f64 / m));
        k += q;
    }
    let psi0 = psi_hat_with_tol(0.0, 1e-14).0.re;
    let mut tail = crate::accum::Kahan::default();
    for j in 1..=h {
        let lam = j as f64 * m / q as f64;
        let term = psi_hat_with_tol(lam, 1e-14).0
            * Complex64::cis(2.0 * PI * j as f64 * a as f64 / q as f64);
        tail.add(2.0 * term.re); // ±j pair is real
    }
    let rhs = m * psi0 / q as f64 + m / q as f64 * tail.value();
    Ok(PoissonCheck::new(lhs.value(), rhs))
}

/// ∑_{(m,q)=1} ψ(m/M) against the main term φ(q)Mψ̂(0)/q; the difference
/// is the O(τ(q)(ln M)²) remainder.
pub fn poisson_check_coprime(q: u64, m: f64) -> Result<PoissonCheck> {
    check_progression_pre(q, 0, m)?;
    let mut lhs = 0.0f64;
    let mut k = (m / 2.0).floor() as u64;
    while (k as f64) < 2.5 * m {
        if num::integer::gcd(k, q) == 1 {
            lhs += psi(k as f64 / m);
        }
        k += 1;
    }
    let phi = crate::arith::factorize(q).phi();
    let rhs = phi as f64 * m * psi_hat(0.0)?.0.re / q as f64;
    Ok(PoissonCheck::new(lhs, rhs))
}

/// Truncated Mellin inversion of f_δ at u:
/// (1/2π)∫_{−T}^{T} F_δ(it)u^{−it}dt = (1/π)∫_δ^{1+δ} f_δ(v)·
/// sin(T·ln(v/u))/(v·ln(v/u)) dv, the t-integral taken in closed form.
/// Returns (f_δ(u), reconstruction, diff).
pub fn mellin_inversion_check(delta: f64, t_max: f64, u: f64) -> Result<(f64, f64, f64)> {
    if !(t_max >= 10.0) {
        return Err(Error::PreconditionViolated(format!(
            "need T ≥ 10, got {t_max}"
        )));
    }
    let spec = BumpSpec::f_delta(delta)?;
    if !(u > 0.0) {
        return Err(Error::PreconditionViolated(format!("need u > 0, got {u}")));
    }
    let kernel = |v: f64| {
        let w = (v / u).ln();
        let tw = t_max * w;
        if tw.abs() < 1e-8 {
            t_max * (1.0 - tw * tw / 6.0)
        } else {
            (tw).sin() / w
        }
    };
    let mut breaks = vec![delta, 2.0 * delta, 1.0, 1.0 + delta];
    if u > delta && u < 1.0 + delta {
        breaks.push(u); // kernel peak
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let recon = integrate_pieces(|v| spec.eval(v) * kernel(v) / v, &breaks, 1e-11).value / PI;
    let exact = spec.eval(u);
    Ok((exact, recon, exact - recon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rho_pinned() {
        assert!((rho(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(rho(1.5), 0.0);
        assert_eq!(rho(1.0), 0.0);
        assert_eq!(rho(-1.0), 0.0);
        assert_eq!(rho_deriv(0.0, 1).unwrap(), 0.0);
        assert!(rho(0.999999) >= 0.0);
    }

    #[test]
    fn rho_deriv_matches_closed_forms() {
        // ρ′ = −2x/(x²−1)²·ρ
        for &x in &[0.3, -0.7, 0.95] {
            let u = x * x - 1.0;
            let expect = -2.0 * x / (u * u) * rho(x);
            assert!((rho_deriv(x, 1).unwrap() - expect).abs() <= 1e-15 * expect.abs());
        }
        // second derivative by central differences away from ±1
        let x = 0.4;
        let h = 1e-5;
        let fd = (rho_deriv(x + h, 1).unwrap() - rho_deriv(x - h, 1).unwrap()) / (2.0 * h);
        let exact = rho_deriv(x, 2).unwrap();
        assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0));
        assert!(matches!(
            rho_deriv(0.0, 13),
            Err(Error::DerivOrderTooHigh { .. })
        ));
    }

    #[test]
    fn rho_deriv_bound_on_grid() {
        for j in 0..=8u32 {
            let bound = (2.0f64.powi(j as i32) * (1..=j).product::<u32>() as f64).powi(2);
            for i in 0..1_000 {
                let x = -1.2 + 2.4 * i as f64 / 999.0;
                let v = rho_deriv(x, j).unwrap();
                assert!(
                    v.abs() <= bound,
                    "|ρ^({j})({x})| = {} exceeds {bound}",
                    v.abs()
                );
            }
        }
    }

    #[test]
    fn rho_integral_value() {
        assert!((rho_integral() - 0.443_993_816_168).abs() < 1e-11);
        let direct = integrate(rho, -1.0, 1.0, 1e-13);
        assert!((rho_integral() - direct.value).abs() < 1e-12);
    }

    #[test]
    fn sigma_plateau_support_range() {
        let specs = [
            BumpSpec::psi(),
            BumpSpec::f_delta(0.2).unwrap(),
            BumpSpec::f_delta(0.05).unwrap(),
            BumpSpec::f_delta(0.01).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x2A);
        for spec in specs {
            let (s_lo, s_hi) = spec.support();
            let (p_lo, p_hi) = spec.plateau();
            for _ in 0..1_000 {
                let x = rng.gen_range(s_lo - 0.5..s_hi + 0.5);
                let v = spec.eval(x);
                if x <= s_lo || x >= s_hi {
                    assert_eq!(v, 0.0, "x = {x} outside support of {spec:?}");
                } else if (p_lo..=p_hi).contains(&x) {
                    assert_eq!(v, 1.0, "x = {x} on plateau of {spec:?}");
                } else {
                    assert!((0.0..=1.0).contains(&v), "σ({x}) = {v}");
                }
            }
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let spec = BumpSpec::psi();
        for i in 0..100 {
            let x = 0.3 + 2.4 * i as f64 / 99.0;
            let fast = spec.eval(x);
            let slow = spec.eval_by_quadrature(x);
            assert!((fast - slow).abs() <= 1e-12, "x = {x}: {fast} vs {slow}");
        }
    }

    #[test]
    fn psi_pinned() {
        assert_eq!(psi(1.5), 1.0);
        assert_eq!(psi(1.0), 1.0);
        assert_eq!(psi(2.0), 1.0);
        assert_eq!(psi(0.3), 0.0);
        assert_eq!(psi(0.5), 0.0);
        assert_eq!(psi(2.5), 0.0);
        let mid = psi(0.75);
        assert!(mid > 0.0 && mid < 1.0);
        assert!((mid - 0.5).abs() < 1e-12, "σ is odd-symmetric in transitions");
    }

    #[test]
    fn f_delta_pinned() {
        assert_eq!(f_delta(0.1, 0.5).unwrap(), 1.0);
        assert_eq!(f_delta(0.1, 0.05).unwrap(), 0.0);
        assert_eq!(f_delta(0.1, 0.2).unwrap(), 1.0);
        assert_eq!(f_delta(0.1, 1.15).unwrap(), 0.0);
        let t = f_delta(0.1, 0.15).unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!(BumpSpec::f_delta(0.6).is_err());
    }

    #[test]
    fn psi_hat_zero_and_symmetry() {
        let (v0, e0) = psi_hat(0.0).unwrap();
        assert!(v0.im.abs() < 1e-14 && e0 < 1e-12);
        assert!(v0.re > 1.0 && v0.re < 2.0);
        // ∫σ(a,b,δ) = b − a by transition symmetry
        assert!((v0.re - 1.5).abs() < 1e-12);
        let (plus, _) = psi_hat(7.25).unwrap();
        let (minus, _) = psi_hat(-7.25).unwrap();
        assert!((plus - minus.conj()).norm() < 1e-12);
    }

    #[test]
    fn psi_hat_decay_window() {
        let (v, _) = psi_hat(100.0).unwrap();
        let envelope = (-(100.0f64).sqrt() / 2.0).exp();
        assert!(v.norm() <= 1e3 * envelope, "|ψ̂(100)| = {}", v.norm());
    }

    #[test]
    fn psi_hat_deriv_bounded() {
        // |ψ̂^{(k)}(x)|·x^k stays bounded for k ≤ 3 on a coarse x-grid
        for k in 1..=3u32 {
            for &x in &[1.0f64, 5.0, 20.0, 80.0, 200.0] {
                let (v, _) = psi_hat_deriv(x, k).unwrap();
                let scaled = v.norm() * x.powi(k as i32);
                assert!(scaled <= 1e3, "k = {k}, x = {x}: {scaled}");
            }
        }
        assert!(matches!(
            psi_hat_deriv(1.0, 4),
            Err(Error::DerivOrderTooHigh { .. })
        ));
    }

    #[test]
    fn mellin_bounds_small_grid() {
        let delta = 0.01f64;
        let (v, _) = f_delta_mellin(delta, 10.0).unwrap();
        // Lemma 8 shape: |F_δ(it)| ≤ C/(δt²) with modest C
        assert!(v.norm() * delta * 100.0 <= 50.0);
        let (v0, _) = f_delta_mellin(delta, 0.0).unwrap();
        assert!(v0.im.abs() < 1e-12);
        // F_δ(0) = ∫ f_δ(u)/u du ≈ ln(1/δ) + O(1)
        assert!((v0.re - (1.0f64 / delta).ln()).abs() < 1.0);
    }

    #[test]
    fn poisson_identity_small() {
        for &h in &[10.0, 100.0] {
            for &x in &[0.0, 0.3] {
                let c = poisson_identity_check(h, x).unwrap();
                assert!(
                    c.diff.abs() <= 1e-8,
                    "H = {h}, x = {x}: lhs {} rhs {}",
                    c.lhs,
                    c.rhs
                );
            }
        }
    }

    #[test]
    fn progression_check_and_preconditions() {
        let m = 100.0;
        let h = progression_min_h(2, m).ceil() as u64;
        let c = poisson_check_progression(2, 1, m, h).unwrap();
        assert!(c.diff.abs() <= 1e-4, "diff = {}", c.diff);
        assert!(matches!(
            poisson_check_progression(1, 0, 100.0, 50),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            poisson_check_progression(2, 1, 100.0, 3),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn progression_envelope_shrinks_with_m() {
        // the O(1/(qM)) remainder: calibrated envelope 0.01/M, an order
        // tighter at M = 10³ than the 10⁻⁴ budget at M = 10²
        for m in [100.0f64, 1000.0] {
            let h = progression_min_h(3, m).ceil() as u64;
            let c = poisson_check_progression(3, 0, m, h).unwrap();
            assert!(c.diff.abs() <= 0.01 / m, "M = {m}: diff = {}", c.diff);
        }
    }

    #[test]
    fn coprime_check_magnitude() {
        let m = 200.0;
        let c = poisson_check_coprime(12, m).unwrap();
        let budget = 10.0 * crate::arith::factorize(12).tau() as f64 * m.ln().powi(2);
        assert!(c.diff.abs() <= budget, "diff = {} budget {budget}", c.diff);
        // the main term really is φ(q)/q of the full mass
        assert!((c.rhs - 4.0 / 12.0 * m * 1.5).abs() < 1e-9 * c.rhs);
    }

    #[test]
    fn mellin_inversion_truncation() {
        let (exact, recon, diff) = mellin_inversion_check(0.1, 1_000.0, 0.5).unwrap();
        assert_eq!(exact, 1.0);
        assert!(diff.abs() <= 1e-2, "recon {recon}, diff {diff}");
        // doubling T tightens the truncation error
        let (_, _, d2) = mellin_inversion_check(0.1, 2_000.0, 0.5).unwrap();
        assert!(d2.abs() <= diff.abs() * 0.75 + 1e-9, "{} vs {}", d2, diff);
        // outside the support the reconstruction is pure truncation error
        let (e3, r3, _) = mellin_inversion_check(0.1, 1_000.0, 3.0).unwrap();
        assert_eq!(e3, 0.0);
        assert!(r3.abs() <= 1e-2);
    }

    #[test]
    fn inversion_matches_nested_quadrature_at_small_t() {
        // the closed-form t-integral against the literal double integral
        let (delta, t_max, u) = (0.1, 10.0, 0.5);
        let (_, recon, _) = mellin_inversion_check(delta, t_max, u).unwrap();
        let spec = BumpSpec::f_delta(delta).unwrap();
        let direct = integrate(
            |t| {
                let f = integrate_complex(
                    |v| Complex64::cis(t * v.ln()) * (spec.eval(v) / v),
                    &[delta, 2.0 * delta, 1.0, 1.0 + delta],
                    1e-13,
                )
                .0;
                (f * Complex64::cis(-t * u.ln())).re
            },
            0.0,
            t_max,
            1e-10,
        )
        .value / PI;
        assert!((recon - direct).abs() < 1e-8, "{recon} vs {direct}");
    }
}

//! Brute-force checks of the algebraic identities behind the machinery:
//! the coupled-moduli CRT equivalence, the exact rational congruence
//! (acd)*_b/b + (abe)*_c/c ≡ 1/(abcd) − (bcd)*_a/a + (d−e)(abe)*_{cd}/cd
//! (mod 1), the closed forms for partials of g(ax₁/(x₂x₃)), the
//! multidimensional partial-summation identity, complete Kloosterman sums,
//! and the trilinear exponential-sum bound, plus order-of-magnitude
//! diagnostics for the progression/mean-value estimates used on h.

use crate::arith::{factorize, gcd, mod_inv};
use crate::error::{Error, Result};
use num::complex::Complex64;
use num::{BigInt, BigRational, One, Zero};
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Result of the exhaustive coupled-moduli CRT scan.
#[derive(Debug, Clone, Copy)]
pub struct Lemma9Report {
    pub pairs_checked: u64,
    /// first failing (a, b, m), if any
    pub counterexample: Option<(u64, u64, u64)>,
}

/// For every residue pair (a, b), the system m ≡ a (mod ΔΔ₁),
/// m ≡ b (mod ΔΔ₂) must have exactly the solutions {λ} over m mod ΔΔ₁Δ₂
/// when a ≡ b (mod Δ) and none otherwise; every m is scanned literally.
pub fn lemma9_verify(delta: u64, delta1: u64, delta2: u64) -> Result<Lemma9Report> {
    crate::arith::decompose_delta(delta, delta1, delta2)?;
    let m1 = delta * delta1;
    let m2 = delta * delta2;
    let full = delta * delta1 * delta2;
    let counterexample = (0..m1)
        .into_par_iter()
        .filter_map(|a| {
            for b in 0..m2 {
                let lam = if a % delta == b % delta {
                    Some(crate::arith::lemma9_lambda(delta, delta1, delta2, a, b).expect("compatible pair"))
                } else {
                    None
                };
                for m in 0..full {
                    let sys1 = m % m1 == a && m % m2 == b;
                    let sys2 = lam == Some(m);
                    if sys1 != sys2 {
                        return Some((a, b, m));
                    }
                }
            }
            None
        })
        .min(); // deterministic: smallest (a, b, m)
    Ok(Lemma9Report {
        pairs_checked: m1 * m2,
        counterexample,
    })
}

fn inv_term(x: u64, modulus: u64) -> Result<BigRational> {
    let inv = mod_inv((x % modulus) as i64, modulus)?;
    Ok(BigRational::new(BigInt::from(inv), BigInt::from(modulus)))
}

/// The mod-1 congruence between the two inverse-fraction combinations,
/// verified in exact rational arithmetic. Requires a, b, cd pairwise
/// coprime and gcd(cd, e) = 1.
pub fn lemma10_verify(a: u64, b: u64, c: u64, d: u64, e: u64) -> Result<bool> {
    if a == 0 || b == 0 || c == 0 || d == 0 || e == 0 {
        return Err(Error::PreconditionViolated("entries must be positive".into()));
    }
    let cd = c * d;
    for (x, y, names) in [
        (a, b, "(a, b)"),
        (a, cd, "(a, cd)"),
        (b, cd, "(b, cd)"),
        (cd, e, "(cd, e)"),
    ] {
        if gcd(x, y) != 1 {
            return Err(Error::PreconditionViolated(format!(
                "gcd{names} = {} must be 1",
                gcd(x, y)
            )));
        }
    }
    let lhs = inv_term(a * c * d, b)? + inv_term(a * b * e, c)?;
    let rhs = BigRational::new(BigInt::one(), BigInt::from(a * b * c * d))
        - inv_term(b * c * d, a)?
        + BigRational::new(BigInt::from(d as i64 - e as i64), BigInt::one())
            * inv_term(a * b * e, cd)?;
    Ok((lhs - rhs).is_integer())
}

/// Pseudo-random sweep of valid tuples with entries ≤ 10³; returns the
/// number that passed (the identity predicts all of them).
pub fn lemma10_sweep(tuples: u64) -> Result<u64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x2A);
    let mut passed = 0;
    let mut done = 0;
    while done < tuples {
        let a = rng.gen_range(1..=1000u64);
        let b = rng.gen_range(1..=1000u64);
        let c = rng.gen_range(1..=1000u64);
        let d = rng.gen_range(1..=1000u64);
        let e = rng.gen_range(1..=1000u64);
        let cd = c * d;
        if gcd(a, b) != 1 || gcd(a, cd) != 1 || gcd(b, cd) != 1 || gcd(cd, e) != 1 {
            continue;
        }
        done += 1;
        if lemma10_verify(a, b, c, d, e)? {
            passed += 1;
        }
    }
    Ok(passed)
}

/// Central cross-difference of f over the axes in `axes` at `point`, with
/// per-axis steps scale·max(|xᵢ|, 1).
fn cross_difference<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    point: &[f64; 3],
    axes: &[usize],
    scale: f64,
) -> f64 {
    let steps: Vec<f64> = axes.iter().map(|&i| scale * point[i].abs().max(1.0)).collect();
    let mut acc = 0.0;
    for mask in 0..1u32 << axes.len() {
        let mut p = *point;
        let mut sign = 1.0;
        for (k, &ax) in axes.iter().enumerate() {
            if mask >> k & 1 == 0 {
                p[ax] += steps[k];
            } else {
                p[ax] -= steps[k];
                sign = -sign;
            }
        }
        acc += sign * f(&p);
    }
    acc / steps.iter().map(|h| 2.0 * h).product::<f64>()
}

/// Richardson step pair per difference order. First order keeps
/// (10⁻³, 10⁻⁴); higher orders need larger steps — an s-th cross
/// difference divides machine noise by h^s, so a 10⁻⁴ step floods a
/// second difference with ~10⁻⁸ and a third with ~10⁻⁴ of jitter.
fn step_pair(order: usize) -> (f64, f64) {
    match order {
        1 => (1e-3, 1e-4),
        2 => (4e-3, 2e-3),
        _ => (8e-3, 4e-3),
    }
}

/// Machine-noise amplitude of the cross difference at `point`: ε/∏(2hᵢ).
fn fd_jitter(point: &[f64; 3], axes: &[usize]) -> f64 {
    let (_, t2) = step_pair(axes.len());
    let prod: f64 = axes
        .iter()
        .map(|&i| 2.0 * t2 * point[i].abs().max(1.0))
        .product();
    f64::EPSILON / prod
}

/// Mixed partial of f over `axes` by Richardson-extrapolated central
/// differences with order-scaled steps.
fn mixed_partial<F: Fn(&[f64; 3]) -> f64>(f: &F, point: &[f64; 3], axes: &[usize]) -> f64 {
    let (t1, t2) = step_pair(axes.len());
    let d1 = cross_difference(f, point, axes, t1);
    let d2 = cross_difference(f, point, axes, t2);
    (d2 * t1 * t1 - d1 * t2 * t2) / (t1 * t1 - t2 * t2)
}

/// One-dimensional j-th derivative of g by Richardson-extrapolated central
/// differences (same step policy as [`mixed_partial`]).
fn g_deriv<G: Fn(f64) -> f64>(g: &G, z: f64, j: u32) -> f64 {
    let (t1, t2) = step_pair(j as usize);
    let stencil = |t: f64| -> f64 {
        let h = t * z.abs().max(1.0);
        match j {
            1 => (g(z + h) - g(z - h)) / (2.0 * h),
            2 => (g(z + h) - 2.0 * g(z) + g(z - h)) / (h * h),
            _ => (g(z + 2.0 * h) - 2.0 * g(z + h) + 2.0 * g(z - h) - g(z - 2.0 * h))
                / (2.0 * h * h * h),
        }
    };
    let d1 = stencil(t1);
    let d2 = stencil(t2);
    (d2 * t1 * t1 - d1 * t2 * t2) / (t1 * t1 - t2 * t2)
}

/// F₁(z) = zg′, F₂(z) = zg′ + z²g″, F₃(z) = zg′ + 3z²g″ + z³g‴ — the
/// closed forms for the first, mixed-second, and triple-mixed partials of
/// g(ax₁/(x₂x₃)), up to sign and division by the xᵢ involved.
pub fn partial_closed_forms(z: f64, g1: f64, g2: f64, g3: f64) -> (f64, f64, f64) {
    (
        z * g1,
        z * g1 + z * z * g2,
        z * g1 + 3.0 * z * z * g2 + z * z * z * g3,
    )
}

/// Compare [`partial_closed_forms`] (with g′, g″, g‴ taken by Richardson
/// differences) against direct finite differences of F(x₁,x₂,x₃) =
/// g(ax₁/(x₂x₃)); returns the max relative error over all seven partials.
pub fn lemma10_5_verify<G: Fn(f64) -> f64>(g: G, a: f64, x: [f64; 3]) -> Result<f64> {
    if x[1] == 0.0 || x[2] == 0.0 {
        return Err(Error::PreconditionViolated("x₂, x₃ must be non-zero".into()));
    }
    let z = a * x[0] / (x[1] * x[2]);
    let g1 = g_deriv(&g, z, 1);
    let g2 = g_deriv(&g, z, 2);
    let g3 = g_deriv(&g, z, 3);
    let (f1, f2, f3) = partial_closed_forms(z, g1, g2, g3);
    let big_f = |p: &[f64; 3]| g(a * p[0] / (p[1] * p[2]));
    let mut worst = 0.0f64;
    let mut compare = |direct: f64, closed: f64| {
        let denom = direct.abs().max(closed.abs()).max(1e-12);
        worst = worst.max((direct - closed).abs() / denom);
    };
    for i in 0..3 {
        let sign = if i == 0 { 1.0 } else { -1.0 };
        compare(mixed_partial(&big_f, &x, &[i]), sign * f1 / x[i]);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let sign = if i == 0 { -1.0 } else { 1.0 };
            compare(
                mixed_partial(&big_f, &x, &[i, j]),
                sign * f2 / (x[i] * x[j]),
            );
        }
    }
    compare(
        mixed_partial(&big_f, &x, &[0, 1, 2]),
        f3 / (x[0] * x[1] * x[2]),
    );
    Ok(worst)
}

/// Prefix sums of c over the integer lattice ∏(Kᵢ, Lᵢ]; unused trailing
/// axes are padded with a single always-counted layer.
struct LatticePrefix {
    m: usize,
    dims: [usize; 3],
    base: [i64; 3],
    data: Vec<i64>,
}

impl LatticePrefix {
    fn build(m: usize, c: &dyn Fn(&[i64]) -> i64, k: &[f64], l: &[f64]) -> LatticePrefix {
        let mut dims = [1usize; 3];
        let mut base = [0i64; 3];
        for i in 0..m {
            base[i] = k[i].floor() as i64;
            dims[i] = (l[i].floor() as i64 - base[i]).max(0) as usize;
        }
        let (ny, nz) = (dims[1] + 1, dims[2] + 1);
        let mut data = vec![0i64; (dims[0] + 1) * ny * nz];
        let at = |d: &[i64], i: usize, j: usize, kk: usize| d[(i * ny + j) * nz + kk];
        for i in 1..=dims[0] {
            for j in 1..=dims[1] {
                for kk in 1..=dims[2] {
                    let pt = [base[0] + i as i64, base[1] + j as i64, base[2] + kk as i64];
                    let v = c(&pt[..m]);
                    data[(i * ny + j) * nz + kk] = v
                        + at(&data, i - 1, j, kk)
                        + at(&data, i, j - 1, kk)
                        + at(&data, i, j, kk - 1)
                        - at(&data, i - 1, j - 1, kk)
                        - at(&data, i - 1, j, kk - 1)
                        - at(&data, i, j - 1, kk - 1)
                        + at(&data, i - 1, j - 1, kk - 1);
                }
            }
        }
        LatticePrefix { m, dims, base, data }
    }

    /// C(x⃗) = sum of c over lattice points with ℓᵢ ≤ xᵢ on the live axes.
    fn sum_upto(&self, x: &[f64; 3]) -> f64 {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            idx[i] = if i < self.m {
                (x[i].floor() as i64 - self.base[i]).clamp(0, self.dims[i] as i64) as usize
            } else {
                self.dims[i]
            };
        }
        let (ny, nz) = (self.dims[1] + 1, self.dims[2] + 1);
        self.data[(idx[0] * ny + idx[1]) * nz + idx[2]] as f64
    }
}

fn integer_breaks(k: f64, l: f64) -> Vec<f64> {
    let mut b = vec![k];
    let mut t = k.floor() + 1.0;
    while t < l {
        if t > k {
            b.push(t);
        }
        t += 1.0;
    }
    b.push(l);
    b
}

/// The multidimensional partial-summation identity
/// S = C(L⃗)f(L⃗) + ∑_s (−1)^s ∑_{i₁<⋯<i_s} ∫⋯∫ C·∂^s f; the 2^m − 1
/// integral terms run adaptive quadrature split at the integer jumps of C.
/// Returns |direct − identity|.
pub fn lemma11_verify(
    c: &dyn Fn(&[i64]) -> i64,
    f: &dyn Fn(&[f64; 3]) -> f64,
    k: &[f64],
    l: &[f64],
) -> Result<f64> {
    let m = k.len();
    if m == 0 || m > 3 || l.len() != m {
        return Err(Error::BadShape("dimension must be 1, 2, or 3".into()));
    }
    for i in 0..m {
        if !(l[i] >= k[i] && l[i] - k[i] <= 30.0) {
            return Err(Error::BadShape(format!(
                "axis {i}: need Kᵢ ≤ Lᵢ ≤ Kᵢ + 30"
            )));
        }
    }
    let prefix = LatticePrefix::build(m, c, k, l);
    let mut point_l = [0.0f64; 3];
    point_l[..m].copy_from_slice(l);
    // direct side
    let mut direct = 0.0f64;
    let dims = prefix.dims;
    let pad = |i: usize| if i < m { dims[i] } else { 1 };
    for i in 1..=pad(0) {
        for j in 1..=pad(1) {
            for kk in 1..=pad(2) {
                let pt = [
                    prefix.base[0] + i as i64,
                    prefix.base[1] + j as i64,
                    prefix.base[2] + kk as i64,
                ];
                let mut xs = point_l;
                for (ax, x) in xs.iter_mut().enumerate().take(m) {
                    *x = pt[ax] as f64;
                }
                direct += c(&pt[..m]) as f64 * f(&xs);
            }
        }
    }
    // identity side
    let mut rhs = prefix.sum_upto(&point_l) * f(&point_l);
    let breaks: Vec<Vec<f64>> = (0..m).map(|i| integer_breaks(k[i], l[i])).collect();
    for subset in 1u32..1 << m {
        let axes: Vec<usize> = (0..m).filter(|&i| subset >> i & 1 == 1).collect();
        let sign = if axes.len() % 2 == 1 { -1.0 } else { 1.0 };
        rhs += sign * subset_integral(&prefix, f, &axes, 0, point_l, &breaks);
    }
    Ok((direct - rhs).abs())
}

/// ∫⋯∫ C(b⃗)·∂^s f(b⃗) over the subset axes, cell by cell: C is constant
/// between consecutive integer breaks, so each cell runs plain nested
/// adaptive quadrature of the smooth mixed partial. Tolerances tighten
/// with depth so inner noise stays below the outer target.
fn subset_integral(
    prefix: &LatticePrefix,
    f: &dyn Fn(&[f64; 3]) -> f64,
    axes: &[usize],
    depth: usize,
    point: [f64; 3],
    breaks: &[Vec<f64>],
) -> f64 {
    if depth == axes.len() {
        let c_here = prefix.sum_upto(&point);
        if c_here == 0.0 {
            return 0.0;
        }
        return c_here * cell_quadrature(f, axes, 0, point, breaks);
    }
    let ax = axes[depth];
    let mut total = 0.0;
    for w in breaks[ax].windows(2) {
        let mut p = point;
        p[ax] = 0.5 * (w[0] + w[1]); // any interior point of the cell
        total += subset_integral(prefix, f, axes, depth + 1, p, breaks);
    }
    total
}

/// Nested adaptive quadrature of ∂^s f over one cell; `point` carries the
/// cell's midpoints, from which each level recovers its integer bounds.
fn cell_quadrature(
    f: &dyn Fn(&[f64; 3]) -> f64,
    axes: &[usize],
    depth: usize,
    point: [f64; 3],
    breaks: &[Vec<f64>],
) -> f64 {
    if depth == axes.len() {
        return mixed_partial(&|p: &[f64; 3]| f(p), &point, axes);
    }
    let ax = axes[depth];
    let cell = breaks[ax]
        .windows(2)
        .find(|w| w[0] <= point[ax] && point[ax] <= w[1])
        .expect("midpoint lies in some cell");
    // keep each level's tolerance above the finite-difference noise floor,
    // widening by 30× per enclosing level, or the splitter churns
    let tol = (30.0 * fd_jitter(&point, axes)).max(1e-12)
        * 30f64.powi((axes.len() - 1 - depth) as i32);
    crate::quad::integrate(
        |x| {
            let mut p = point;
            p[ax] = x;
            cell_quadrature(f, axes, depth + 1, p, breaks)
        },
        cell[0],
        cell[1],
        tol,
    )
    .value
}

/// S(a, b; c) = ∑_{m<c, (m,c)=1} e((am + b·m*)/c), by direct enumeration.
pub fn kloosterman(a: u64, b: u64, c: u64) -> Result<Complex64> {
    if c == 0 || c > 1_000_000 {
        return Err(Error::RangeTooLarge(format!(
            "modulus must be in [1, 10⁶], got {c}"
        )));
    }
    let mut re = crate::accum::Kahan::default();
    let mut im = crate::accum::Kahan::default();
    for m in 0..c {
        if gcd(m, c) != 1 {
            continue;
        }
        let minv = mod_inv(m as i64, c)?;
        let phase = TAU * ((a % c) as f64 * m as f64 + (b % c) as f64 * minv as f64) / c as f64;
        re.add(phase.cos());
        im.add(phase.sin());
    }
    let value = Complex64::new(re.value(), im.value());
    if a % c == b % c {
        assert!(
            value.im.abs() <= 1e-10,
            "conjugation symmetry violated: im = {}",
            value.im
        );
    }
    Ok(value)
}

/// Trilinear exponential sum over dyadic boxes: sequences α, β, ν live on
/// the integer points of [M/2, M], [N/2, N], [A/2, A].
#[derive(Debug, Clone)]
pub struct TrilinearSpec {
    pub m: u64,
    pub n: u64,
    pub a: u64,
    /// non-zero integer phase multiplier
    pub theta: i64,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub nu: Vec<Complex64>,
}

/// Integer support [x/2, x].
pub fn dyadic_support(x: u64) -> std::ops::RangeInclusive<u64> {
    x.div_ceil(2)..=x
}

impl TrilinearSpec {
    pub fn all_ones(m: u64, n: u64, a: u64, theta: i64) -> TrilinearSpec {
        let len = |x: u64| (x - x.div_ceil(2) + 1) as usize;
        TrilinearSpec {
            m,
            n,
            a,
            theta,
            alpha: vec![Complex64::one(); len(m)],
            beta: vec![Complex64::one(); len(n)],
            nu: vec![Complex64::one(); len(a)],
        }
    }
}

/// The exact triple sum B = ∑∑∑ α_m β_n ν_a e(θ·a·m*_n/n) over coprime
/// (m, n), and its ratio against the bound shape
/// ‖α‖‖β‖‖ν‖(1+|θ|A/(MN))^{1/2}[(AMN)^{7/20+ε}(M+N)^{1/4} +
/// (AMN)^{3/8+ε}(AM+AN)^{1/8}] with constant 1 and ε = 0.01.
pub fn trilinear_b(spec: &TrilinearSpec) -> Result<(Complex64, f64)> {
    if spec.m > 200 || spec.n > 200 || spec.a > 200 {
        return Err(Error::SizeTooLarge(format!(
            "boxes limited to 200, got ({}, {}, {})",
            spec.m, spec.n, spec.a
        )));
    }
    if spec.theta == 0 {
        return Err(Error::PreconditionViolated("θ must be non-zero".into()));
    }
    let check_len = |name: &str, x: u64, v: &[Complex64]| -> Result<()> {
        let expect = (x - x.div_ceil(2) + 1) as usize;
        if v.len() != expect {
            return Err(Error::BadShape(format!(
                "{name} must have {expect} entries for box {x}, got {}",
                v.len()
            )));
        }
        Ok(())
    };
    check_len("alpha", spec.m, &spec.alpha)?;
    check_len("beta", spec.n, &spec.beta)?;
    check_len("nu", spec.a, &spec.nu)?;
    let mut value = Complex64::zero();
    for (ai, av) in dyadic_support(spec.a).zip(&spec.nu) {
        for (ni, nv) in dyadic_support(spec.n).zip(&spec.beta) {
            let mut inner = Complex64::zero();
            for (mi, mv) in dyadic_support(spec.m).zip(&spec.alpha) {
                if gcd(mi, ni) != 1 {
                    continue;
                }
                let minv = mod_inv(mi as i64, ni)?;
                let phase =
                    TAU * spec.theta as f64 * ai as f64 * minv as f64 / ni as f64;
                inner += mv * Complex64::cis(phase);
            }
            value += av * nv * inner;
        }
    }
    let norm2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (mf, nf, af) = (spec.m as f64, spec.n as f64, spec.a as f64);
    let eps = 0.01;
    let amn = af * mf * nf;
    let bound = norm2(&spec.alpha)
        * norm2(&spec.beta)
        * norm2(&spec.nu)
        * (1.0 + spec.theta.unsigned_abs() as f64 * af / (mf * nf)).sqrt()
        * (amn.powf(0.35 + eps) * (mf + nf).powf(0.25)
            + amn.powf(0.375 + eps) * (af * mf + af * nf).powf(0.125));
    Ok((value, value.norm() / bound))
}

/// LHS/RHS shape for the progression mean value of h over (x−y, x]:
/// ∑_{n≡a(q)} h(n) against (y/φ(q))(1/ln x)·exp(∑_{p≤x, p∤q} h(p)/p).
pub fn shiu_ratio(x: u64, y: u64, q: u64, a: u64) -> Result<f64> {
    if q == 0 || gcd(a, q) != 1 || y == 0 || y > x {
        return Err(Error::PreconditionViolated(format!(
            "need coprime a, q and 0 < y ≤ x, got a={a}, q={q}, y={y}, x={x}"
        )));
    }
    let lhs: f64 = crate::sieve::fold_h_segments(x - y + 1, x + 1, false, |seg| {
        let mut s = 0u64;
        for (i, &hv) in seg.values.iter().enumerate() {
            if (seg.lo + i as u64) % q == a {
                s += hv as u64;
            }
        }
        s
    })?
    .into_iter()
    .sum::<u64>() as f64;
    let primes = crate::sieve::primes_upto(x)?;
    let mut p_sum = crate::accum::Kahan::default();
    for p in primes.iter() {
        if q % p != 0 {
            let hp = if p % 4 == 1 {
                2.0
            } else if p == 2 {
                1.0
            } else {
                0.0
            };
            p_sum.add(hp / p as f64);
        }
    }
    let phi = factorize(q).phi();
    let rhs = y as f64 / phi as f64 / (x as f64).ln() * p_sum.value().exp();
    Ok(lhs / rhs)
}

/// LHS/RHS shape for the mean-value inequality with f = 1/h (0 where h
/// vanishes): ∑_{n≤x} f(n) against (x/ln x)·∑_{n≤x} f(n)/n.
pub fn mean_value_ratio(x: u64) -> Result<f64> {
    let parts = crate::sieve::fold_h_segments(1, x + 1, false, |seg| {
        let mut lhs = crate::accum::Kahan::default();
        let mut weighted = crate::accum::Kahan::default();
        for (i, &hv) in seg.values.iter().enumerate() {
            if hv != 0 {
                let f = 1.0 / hv as f64;
                lhs.add(f);
                weighted.add(f / (seg.lo + i as u64) as f64);
            }
        }
        (lhs.value(), weighted.value())
    })?;
    let (mut lhs, mut weighted) = (0.0, 0.0);
    for (l, w) in parts {
        lhs += l;
        weighted += w;
    }
    Ok(lhs / (x as f64 / (x as f64).ln() * weighted))
}

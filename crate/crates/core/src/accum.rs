//! Compensated accumulation.
//!
//! Long sums over 10⁸ terms lose around 10⁻¹⁰ of relative accuracy in plain
//! doubles, and products of 10⁷ Euler factors accumulated as logs lose a
//! similar amount. Both consumers here accumulate into a double-double value
//! (an unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2), which keeps roughly
//! 32 digits through the summation. A plain Kahan accumulator is provided for
//! shorter complex sums where full double-double width is not needed.

/// Error-free sum: returns (s, e) with s = fl(a+b) and a + b = s + e exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Like `two_sum` but requires |a| ≥ |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Double-double accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn add_dd(&mut self, other: Dd) {
        let (s1, e1) = two_sum(self.hi, other.hi);
        let (s2, e2) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s1, e1 + s2);
        let (hi, lo) = quick_two_sum(s, e + e2);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// e^{self}, accurate when the stored exponent is O(1).
    #[inline]
    pub fn exp_value(&self) -> f64 {
        self.hi.exp() * (1.0 + self.lo)
    }
}

/// Kahan–Babuška compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

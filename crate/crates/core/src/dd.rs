//! Minimal double-double arithmetic.
//!
//! A `Dd` holds an unevaluated sum `hi + lo` with |lo| <= ulp(hi)/2, giving
//! roughly 31 significant decimal digits. Used where a second-order stencil
//! is applied twice: the composed operator carries 1/h^4 coefficients, so in
//! plain f64 the rounding of the samples alone produces a defect floor of
//! about eps * |u| / h^4, which swamps the truncation error on fine grids.
//! Evaluating the stencil in double-double separates scheme consistency from
//! that floor.

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b|
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    // ln 2 to double-double precision
    const LN2: Dd = Dd {
        hi: 0.693_147_180_559_945_3,
        lo: 2.319_046_813_846_299_6e-17,
    };

    #[inline]
    pub fn from(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        // accurate double-double addition; the sloppy variant loses all
        // correlation under cancellation, which the Newton step in ln needs
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (s1, s2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: s1, lo: s2 }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        Dd::new(p, e)
    }

    #[inline]
    pub fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self.sub(rhs.mul(Dd::from(q1)));
        let q2 = r.hi / rhs.hi;
        let r = r.sub(rhs.mul(Dd::from(q2)));
        let q3 = r.hi / rhs.hi;
        Dd::new(q1, q2).add(Dd::from(q3))
    }

    #[inline]
    pub fn scale(self, k: f64) -> Dd {
        self.mul(Dd::from(k))
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }

    /// One Newton step from the f64 seed is enough for full precision.
    pub fn sqrt(self) -> Dd {
        debug_assert!(self.hi >= 0.0);
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let y = Dd::from(self.hi.sqrt());
        y.add(self.div(y)).scale(0.5)
    }

    /// exp for arguments in roughly [-700, 700]; argument reduction by ln 2
    /// followed by a Taylor series on |t| <= ln(2)/2.
    pub fn exp(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / Dd::LN2.hi).round();
        let t = self.sub(Dd::LN2.scale(k));
        // Taylor sum of exp(t)
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..30 {
            term = term.mul(t).div(Dd::from(i as f64));
            sum = sum.add(term);
            if term.hi.abs() < 1.0e-35 {
                break;
            }
        }
        // scale by 2^k exactly
        let scale = (2.0f64).powi(k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// ln for positive arguments: f64 seed plus one Newton step in
    /// double-double, y <- y + x*exp(-y) - 1.
    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0);
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            let e = y.neg().exp();
            y = y.add(self.mul(e)).sub(Dd::ONE);
        }
        y
    }
}

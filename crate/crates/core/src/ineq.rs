//! Birationality inequality calculus over exact rationals, and a replay
//! engine for derivation scripts.
//!
//! A [`GeomContext`] carries certified lower bounds for the fibration
//! invariants `mu`, `beta`, `xi`. Every bound knows whether it is strict
//! (`> value`) or not (`>= value`); several arguments hinge on that
//! distinction when an expression lands exactly on an integer, so
//! ceilings and floors here are open-interval aware. Refinement
//! operations never loosen a bound and report inapplicability instead
//! of passing values through silently.

use crate::{fmt_rat, int, parse_rat, rat, Rat};
use num_bigint::BigInt;
use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IneqError {
    #[error("invalid context: {0}")]
    BadContext(String),
    #[error("case condition violated: {0}")]
    CaseCondition(String),
    #[error("script parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A certified one-sided bound: the true quantity is `>= value`, or
/// `> value` when `strict`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bound {
    pub value: Rat,
    pub strict: bool,
}

impl Bound {
    pub fn at_least(value: Rat) -> Self {
        Bound {
            value,
            strict: false,
        }
    }

    pub fn above(value: Rat) -> Self {
        Bound {
            value,
            strict: true,
        }
    }

    /// Does this bound certify `quantity > t`?
    pub fn exceeds(&self, t: &Rat) -> bool {
        self.value > *t || (self.strict && self.value == *t)
    }

    /// `(v, strict)` dominates `(v, non-strict)`; larger values dominate
    /// either way.
    pub fn stronger_of(self, other: Bound) -> Bound {
        match self.value.cmp(&other.value) {
            Ordering::Greater => self,
            Ordering::Less => other,
            Ordering::Equal => Bound {
                strict: self.strict || other.strict,
                value: self.value,
            },
        }
    }

    /// Least integer certified `<=` the quantity's ceiling: `ceil(v)`,
    /// bumped by one when the bound is strict and `v` integral.
    pub fn ceil(&self) -> BigInt {
        if self.strict && self.value.is_integer() {
            self.value.numer() + 1
        } else {
            self.value.ceil().to_integer()
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            if self.strict { ">" } else { "" },
            fmt_rat(&self.value)
        )
    }
}

/// An upper evaluation of a monotone expression of the context bounds:
/// the expression is `<= value`, with equality attainable iff
/// `attained`.
#[derive(Debug, Clone)]
struct UpperEval {
    value: Rat,
    attained: bool,
}

impl UpperEval {
    /// Largest integer the floor of the expression can reach.
    fn floor(&self) -> BigInt {
        if !self.attained && self.value.is_integer() {
            self.value.numer() - 1
        } else {
            self.value.floor().to_integer()
        }
    }

    fn ceil(&self) -> BigInt {
        self.value.ceil().to_integer()
    }
}

/// Outcome of a refinement operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refine {
    Applied(Bound),
    NotApplicable,
}

impl Refine {
    pub fn bound_or(self, old: &Bound) -> Bound {
        match self {
            Refine::Applied(b) => b,
            Refine::NotApplicable => old.clone(),
        }
    }

    pub fn applied(&self) -> bool {
        matches!(self, Refine::Applied(_))
    }
}

/// Certified lower bounds for the fibration invariants, plus the
/// canonical degree of the moving curve class (2 for the genus-2 class
/// of a (1,2)-surface fibration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeomContext {
    pub mu: Bound,
    pub beta: Bound,
    pub xi: Bound,
    pub deg_kc: i64,
}

impl GeomContext {
    pub fn new(mu: Bound, beta: Bound, xi: Bound, deg_kc: i64) -> Result<Self, IneqError> {
        if mu.value < int(1) {
            return Err(IneqError::BadContext(format!("mu bound {mu} below 1")));
        }
        if beta.value <= int(0) && !beta.strict {
            return Err(IneqError::BadContext(format!(
                "beta bound {beta} not positive"
            )));
        }
        if xi.value <= int(0) && !xi.strict {
            return Err(IneqError::BadContext(format!("xi bound {xi} not positive")));
        }
        Ok(GeomContext {
            mu,
            beta,
            xi,
            deg_kc,
        })
    }

    /// The default regime of a (1,2)-surface fibration:
    /// `mu >= 1`, `beta >= 1/2`, `xi >= 2/3`, `deg K_C = 2`.
    pub fn surface12() -> Self {
        GeomContext {
            mu: Bound::at_least(int(1)),
            beta: Bound::at_least(rat(1, 2)),
            xi: Bound::at_least(rat(2, 3)),
            deg_kc: 2,
        }
    }

    /// Lower bound for the coefficient `m - 1 - 1/mu - 1/beta`, with a
    /// flag telling whether the true coefficient can exceed it.
    fn alpha_coeff(&self, m: i64) -> (Rat, bool) {
        let value = int(m - 1) - self.mu.value.recip() - self.beta.value.recip();
        (value, self.mu.strict || self.beta.strict)
    }

    /// Certified lower bound for `alpha(m) = (m-1-1/mu-1/beta) xi`, or
    /// `None` when the coefficient cannot be certified non-negative
    /// (then no finite lower bound exists from this context).
    pub fn alpha(&self, m: i64) -> Option<Bound> {
        let (coeff, coeff_strict) = self.alpha_coeff(m);
        if coeff < int(0) {
            return None;
        }
        let value = coeff.clone() * self.xi.value.clone();
        let strict = (coeff > int(0) && self.xi.strict) || coeff_strict;
        Some(Bound { value, strict })
    }

    /// `alpha_0(m) = ceil(alpha(m))` under the same certification.
    pub fn alpha0(&self, m: i64) -> Option<BigInt> {
        self.alpha(m).map(|a| a.ceil())
    }

    /// Inequality `m xi >= deg(K_C) + alpha_0(m)`, applicable when
    /// `alpha(m) > 1` is certified. Returns the refined (never weaker)
    /// `xi` bound.
    pub fn refine_xi_kieq1(&self, m: i64) -> Refine {
        assert!(m >= 1);
        let Some(alpha) = self.alpha(m) else {
            return Refine::NotApplicable;
        };
        if !alpha.exceeds(&int(1)) {
            return Refine::NotApplicable;
        }
        let candidate =
            Bound::at_least((int(self.deg_kc) + Rat::from_integer(alpha.ceil())) / int(m));
        Refine::Applied(candidate.stronger_of(self.xi.clone()))
    }

    /// `xi >= deg(K_C) / (1 + 1/mu + 1/beta)`.
    pub fn xi_floor_kieq2(&self) -> Bound {
        let denom = int(1) + self.mu.value.recip() + self.beta.value.recip();
        Bound {
            value: int(self.deg_kc) / denom,
            strict: self.mu.strict || self.beta.strict,
        }
    }

    /// `K^3 >= mu beta xi`.
    pub fn k3_floor_kcube(&self) -> Bound {
        Bound {
            value: self.mu.value.clone() * self.beta.value.clone() * self.xi.value.clone(),
            strict: self.mu.strict || self.beta.strict || self.xi.strict,
        }
    }

    /// Shared ceiling-form refinement: from `(n+1) xi >= ceil(A) + 2`
    /// where `A = coeff * xi + addend`, applicable when both `coeff > 0`
    /// and `A > 1` are certified.
    fn refine_ceiling_form(&self, coeff: Rat, coeff_strict: bool, addend: Rat, n: i64) -> Refine {
        let coeff_positive = coeff > int(0) || (coeff == int(0) && coeff_strict);
        if !coeff_positive {
            return Refine::NotApplicable;
        }
        let a = Bound {
            value: coeff.clone() * self.xi.value.clone() + addend,
            strict: (coeff > int(0) && self.xi.strict) || coeff_strict,
        };
        if !a.exceeds(&int(1)) {
            return Refine::NotApplicable;
        }
        let candidate = Bound::at_least((Rat::from_integer(a.ceil()) + int(2)) / int(n + 1));
        Refine::Applied(candidate.stronger_of(self.xi.clone()))
    }

    /// `(n+1) xi >= ceil((n - m1/j - 1/beta) xi + delta/j) + 2`.
    pub fn refine_xi_thm32iv(&self, m1: i64, j: i64, delta: i64, n: i64) -> Refine {
        assert!(m1 >= 1 && j >= 1 && n >= 1 && delta >= 0);
        let coeff = int(n) - rat(m1, j) - self.beta.value.recip();
        self.refine_ceiling_form(coeff, self.beta.strict, rat(delta, j), n)
    }

    /// Variant `i1`: `(n+1) xi >= ceil((n - m1/j1 - (j1-j2)/j1 * 1/beta) xi + delta2/j1) + 2`;
    /// variant `ii1` replaces the second term by `(1/mu)(1 - j1/j2)` and
    /// divides `delta2` by `j2`.
    pub fn refine_xi_thm33(
        &self,
        variant: TwoSystemVariant,
        m1: i64,
        j1: i64,
        j2: i64,
        delta2: i64,
        n: i64,
    ) -> Result<Refine, IneqError> {
        let (coeff, coeff_strict) = self.two_system_coeff(variant, m1, j1, j2, n)?;
        let j_div = match variant {
            TwoSystemVariant::I1 => j1,
            TwoSystemVariant::Ii1 => j2,
        };
        Ok(self.refine_ceiling_form(coeff, coeff_strict, rat(delta2, j_div), n))
    }

    /// Same linear forms as `refine_xi_thm33` with no curve-intersection
    /// addend.
    pub fn refine_xi_thm34(
        &self,
        variant: TwoSystemVariant,
        m1: i64,
        j1: i64,
        j2: i64,
        n: i64,
    ) -> Result<Refine, IneqError> {
        let (coeff, coeff_strict) = self.two_system_coeff(variant, m1, j1, j2, n)?;
        Ok(self.refine_ceiling_form(coeff, coeff_strict, int(0), n))
    }

    fn two_system_coeff(
        &self,
        variant: TwoSystemVariant,
        m1: i64,
        j1: i64,
        j2: i64,
        n: i64,
    ) -> Result<(Rat, bool), IneqError> {
        if m1 < 1 || j1 < 1 || j2 < 1 {
            return Err(IneqError::CaseCondition(format!(
                "m1={m1}, j1={j1}, j2={j2} must be positive"
            )));
        }
        match variant {
            TwoSystemVariant::I1 => {
                if j1 < j2 {
                    return Err(IneqError::CaseCondition(format!(
                        "variant i.1 needs j1 >= j2, got j1={j1} < j2={j2}"
                    )));
                }
                let coeff = int(n) - rat(m1, j1) - rat(j1 - j2, j1) * self.beta.value.recip();
                // The beta term vanishes when j1 == j2.
                Ok((coeff, self.beta.strict && j1 != j2))
            }
            TwoSystemVariant::Ii1 => {
                if j2 < j1 {
                    return Err(IneqError::CaseCondition(format!(
                        "variant ii.1 needs j2 >= j1, got j2={j2} < j1={j1}"
                    )));
                }
                let coeff = int(n) - rat(m1, j2) - self.mu.value.recip() * rat(j2 - j1, j2);
                Ok((coeff, self.mu.strict && j1 != j2))
            }
        }
    }

    /// Upper evaluation of `c_xi / xi + c_beta / beta + c_mu / mu + c0`
    /// over all values consistent with the context. All coefficients
    /// must be non-negative so the extremum sits at the bound values.
    fn upper_eval(&self, c_xi: Rat, c_beta: Rat, c_mu: Rat, c0: Rat) -> UpperEval {
        debug_assert!(c_xi >= int(0) && c_beta >= int(0) && c_mu >= int(0));
        let value = c_xi.clone() * self.xi.value.recip()
            + c_beta.clone() * self.beta.value.recip()
            + c_mu.clone() * self.mu.value.recip()
            + c0;
        let attained = !((c_xi > int(0) && self.xi.strict)
            || (c_beta > int(0) && self.beta.strict)
            || (c_mu > int(0) && self.mu.strict));
        UpperEval { value, attained }
    }

    /// The least `m` for which the named statement certifies that the
    /// `m`-canonical map is birational in this context.
    pub fn birational_threshold(&self, rule: &ThresholdRule) -> Result<i64, IneqError> {
        use ThresholdRule::*;
        let to_i64 = |b: BigInt| -> i64 { i64::try_from(b).expect("threshold fits i64") };
        match rule {
            T32i { m1, j, delta } => {
                if *delta > 2 * j {
                    return Err(IneqError::CaseCondition(format!(
                        "3.2(i) needs delta <= 2j, got delta={delta}, j={j}"
                    )));
                }
                // floor( (1/xi)(2 - delta/j) + m1/j + 1/beta ) + 2
                let e = self.upper_eval(int(2) - rat(*delta, *j), int(1), int(0), rat(*m1, *j));
                Ok(to_i64(e.floor()) + 2)
            }
            T32iPrime { m1, j, delta } => {
                if *delta > *j {
                    return Err(IneqError::CaseCondition(format!(
                        "3.2(i)' needs delta <= j, got delta={delta}, j={j}"
                    )));
                }
                // floor( (2/xi)(1 - delta/j) + 2 m1/j ) + 3
                let e = self.upper_eval(
                    int(2) * (int(1) - rat(*delta, *j)),
                    int(0),
                    int(0),
                    rat(2 * m1, *j),
                );
                Ok(to_i64(e.floor()) + 3)
            }
            T32ii { m1, j, delta } => {
                if *delta <= 2 * j {
                    return Err(IneqError::CaseCondition(format!(
                        "3.2(ii) needs delta > 2j, got delta={delta}, j={j}"
                    )));
                }
                // floor( 2 m1/delta + 1/beta + (1/mu)(1 - 2j/delta) ) + 2
                let e = self.upper_eval(
                    int(0),
                    int(1),
                    int(1) - rat(2 * j, *delta),
                    rat(2 * m1, *delta),
                );
                Ok(to_i64(e.floor()) + 2)
            }
            T32iiPrime { m1, j } => {
                // ceil( m1/j + 1/beta ) + 1
                let e = self.upper_eval(int(0), int(1), int(0), rat(*m1, *j));
                Ok(to_i64(e.ceil()) + 1)
            }
            T33i2 { m1, j1, j2, delta2 } => {
                if j1 < j2 {
                    return Err(IneqError::CaseCondition(format!(
                        "3.3(i.2) needs j1 >= j2, got j1={j1} < j2={j2}"
                    )));
                }
                let e = if *delta2 < 2 * j1 {
                    // floor( (1/xi)(2 - d2/j1) + m1/j1 + (j1-j2)/j1 * 1/beta ) + 2
                    self.upper_eval(
                        int(2) - rat(*delta2, *j1),
                        rat(j1 - j2, *j1),
                        int(0),
                        rat(*m1, *j1),
                    )
                } else {
                    // floor( 2m1/d2 + (1/mu)(1 - 2j1/d2) + (1/beta)(1 - 2j2/d2) ) + 2
                    self.upper_eval(
                        int(0),
                        int(1) - rat(2 * j2, *delta2),
                        int(1) - rat(2 * j1, *delta2),
                        rat(2 * m1, *delta2),
                    )
                };
                Ok(to_i64(e.floor()) + 2)
            }
            T33ii2 { m1, j1, j2, delta2 } => {
                if j2 < j1 {
                    return Err(IneqError::CaseCondition(format!(
                        "3.3(ii.2) needs j2 >= j1, got j2={j2} < j1={j1}"
                    )));
                }
                let e = if *delta2 < 2 * j2 {
                    // floor( (1/xi)(2 - d2/j2) + m1/j2 + (1/mu)(j2-j1)/j2 ) + 2
                    self.upper_eval(
                        int(2) - rat(*delta2, *j2),
                        int(0),
                        rat(j2 - j1, *j2),
                        rat(*m1, *j2),
                    )
                } else {
                    // floor( (1/mu)(1 - 2j1/d2) + (1/beta)(1 - 2j2/d2) ) + 2
                    self.upper_eval(
                        int(0),
                        int(1) - rat(2 * j2, *delta2),
                        int(1) - rat(2 * j1, *delta2),
                        int(0),
                    )
                };
                Ok(to_i64(e.floor()) + 2)
            }
            T34i2 { m1, j1, j2 } => {
                if j1 < j2 {
                    return Err(IneqError::CaseCondition(format!(
                        "3.4(i.2) needs j1 >= j2, got j1={j1} < j2={j2}"
                    )));
                }
                let e = self.upper_eval(int(2), rat(j1 - j2, *j1), int(0), rat(*m1, *j1));
                Ok(to_i64(e.floor()) + 2)
            }
            T34ii2 { m1, j1, j2 } => {
                if j2 < j1 {
                    return Err(IneqError::CaseCondition(format!(
                        "3.4(ii.2) needs j2 >= j1, got j2={j2} < j1={j1}"
                    )));
                }
                let e = self.upper_eval(int(2), int(0), rat(j2 - j1, *j2), rat(*m1, *j2));
                Ok(to_i64(e.floor()) + 2)
            }
            AlphaRule => {
                for m in 2..10_000 {
                    if let Some(a) = self.alpha(m) {
                        if a.exceeds(&int(2)) {
                            return Ok(m);
                        }
                    }
                }
                Err(IneqError::BadContext(
                    "alpha(m) > 2 unreachable in this context".into(),
                ))
            }
        }
    }
}

/// Which side of a two-system statement applies: `i.1` (`j1 >= j2`,
/// beta correction) or `ii.1` (`j2 >= j1`, mu correction).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSystemVariant {
    I1,
    Ii1,
}

/// Parameterized birational-threshold statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThresholdRule {
    T32i {
        m1: i64,
        j: i64,
        delta: i64,
    },
    T32iPrime {
        m1: i64,
        j: i64,
        delta: i64,
    },
    T32ii {
        m1: i64,
        j: i64,
        delta: i64,
    },
    T32iiPrime {
        m1: i64,
        j: i64,
    },
    T33i2 {
        m1: i64,
        j1: i64,
        j2: i64,
        delta2: i64,
    },
    T33ii2 {
        m1: i64,
        j1: i64,
        j2: i64,
        delta2: i64,
    },
    T34i2 {
        m1: i64,
        j1: i64,
        j2: i64,
    },
    T34ii2 {
        m1: i64,
        j1: i64,
        j2: i64,
    },
    AlphaRule,
}

/// The largest root of `(m x - l v)^2 = (m - l) w x`, i.e. the least
/// `x > 0` satisfying both `m x - l v >= 0` and
/// `(m x - l v)^2 >= (m - l) w x`. Kept exact as a quadratic algebraic
/// number `a x^2 - b x + c = 0`.
#[derive(Debug, Clone)]
pub struct VolBound {
    a: Rat,
    b: Rat,
    c: Rat,
}

impl VolBound {
    pub fn solve(m: i64, l: i64, v: Rat, w: Rat) -> Result<VolBound, IneqError> {
        if m < 1 || l < 0 || l > m {
            return Err(IneqError::CaseCondition(format!(
                "need 0 <= l <= m with m >= 1, got m={m}, l={l}"
            )));
        }
        if v < int(0) || w < int(0) {
            return Err(IneqError::CaseCondition("need v >= 0 and w >= 0".into()));
        }
        Ok(VolBound {
            a: int(m * m),
            b: int(2 * m * l) * v.clone() + int(m - l) * w,
            c: int(l * l) * v.clone() * v,
        })
    }

    fn vertex(&self) -> Rat {
        self.b.clone() / (int(2) * self.a.clone())
    }

    fn eval(&self, x: &Rat) -> Rat {
        self.a.clone() * x * x - self.b.clone() * x + self.c.clone()
    }

    fn discriminant(&self) -> Rat {
        self.b.clone() * self.b.clone() - int(4) * self.a.clone() * self.c.clone()
    }

    /// Exact comparison of the root against a rational.
    pub fn cmp_rat(&self, t: &Rat) -> Ordering {
        if *t < self.vertex() {
            return Ordering::Greater; // root >= vertex > t
        }
        let q = self.eval(t);
        if q > int(0) {
            Ordering::Less
        } else if q == int(0) {
            Ordering::Equal
        } else {
            Ordering::Greater
        }
    }

    /// Certified `root > t`.
    pub fn exceeds(&self, t: &Rat) -> bool {
        self.cmp_rat(t) == Ordering::Greater
    }

    /// Exact rational value when the discriminant is a perfect square.
    pub fn exact_rational(&self) -> Option<Rat> {
        let d = self.discriminant();
        let num = d.numer().sqrt();
        let den = d.denom().sqrt();
        if &num * &num == *d.numer() && &den * &den == *d.denom() {
            Some((self.b.clone() + Rat::new(num, den)) / (int(2) * self.a.clone()))
        } else {
            None
        }
    }

    /// A rational `x0 <= root` with `root - x0 <= 10^-digits`; strictly
    /// below the root whenever the root is irrational.
    pub fn lower_witness(&self, digits: u32) -> Rat {
        if let Some(exact) = self.exact_rational() {
            return exact;
        }
        let eps = Rat::new(BigInt::from(1), BigInt::from(10).pow(digits));
        let mut lo = self.vertex();
        let mut hi = lo.clone() + int(1);
        while self.cmp_rat(&hi) == Ordering::Greater {
            hi = &lo + (&hi - &lo) * int(2);
        }
        while (&hi - &lo) > eps {
            let mid = (&lo + &hi) / int(2);
            if self.cmp_rat(&mid) == Ordering::Greater {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Do both defining inequalities hold at the rational `x`
    /// (given the original `m`, `l`, `v`, `w` folded into the
    /// quadratic)? Holds iff `x` is at or above the root.
    pub fn satisfied_at(&self, x: &Rat) -> bool {
        self.cmp_rat(x) != Ordering::Greater
    }
}

// ---------------------------------------------------------------------
// Derivation scripts
// ---------------------------------------------------------------------

/// One claimed bound inside a script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub value: Rat,
    pub strict: bool,
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            if self.strict { ">" } else { "" },
            fmt_rat(&self.value)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Mu,
    Beta,
    Xi,
}

/// One executable step of a derivation script.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Inject a case assumption (not derived, recorded as such).
    Assume {
        target: Target,
        bound: Bound,
    },
    RefineKieq1 {
        m: i64,
        claim: Claim,
    },
    XiFloorKieq2 {
        claim: Claim,
    },
    Kcube {
        claim: Claim,
    },
    BetaFromMu {
        claim: Claim,
    },
    AlphaGt {
        m: i64,
        rhs: Rat,
    },
    RefineThm32iv {
        m1: i64,
        j: i64,
        delta: i64,
        n: i64,
        claim: Claim,
    },
    RefineThm33 {
        variant: TwoSystemVariant,
        m1: i64,
        j1: i64,
        j2: i64,
        delta2: i64,
        n: i64,
        claim: Claim,
    },
    RefineThm34 {
        variant: TwoSystemVariant,
        m1: i64,
        j1: i64,
        j2: i64,
        n: i64,
        claim: Claim,
    },
    Birational {
        rule: ThresholdRule,
        claim_m: i64,
    },
    VolEstimate {
        m: i64,
        l: i64,
        v: Rat,
        w: Rat,
        claim: Rat,
    },
}

/// `beta >= mu/(mu+1)`, from the extension-theorem restriction.
pub fn beta_from_cri(mu: &Bound) -> Bound {
    let value = mu.value.clone() / (mu.value.clone() + int(1));
    Bound {
        value,
        strict: mu.strict,
    }
}

/// A named initial context plus an ordered list of steps, each carrying
/// the bound it claims; replay fails on the first mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationScript {
    pub name: String,
    pub init: GeomContext,
    pub steps: Vec<(Step, String)>,
}

#[derive(Debug, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub text: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub passed: bool,
    pub steps: Vec<StepReport>,
}

impl DerivationScript {
    /// Parses the line-oriented text form. Lines: `name <id>`,
    /// `init mu=1 beta=1/2 xi>2/3 [degkc=2]`, `assume xi>4/5`,
    /// `step <op> k=v ... claim <kind> <value>`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, IneqError> {
        let mut name = String::new();
        let mut init: Option<GeomContext> = None;
        let mut steps: Vec<(Step, String)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let head = tokens.next().unwrap();
            let rest: Vec<&str> = tokens.collect();
            match head {
                "name" => {
                    name = rest.join(" ");
                }
                "init" => {
                    init = Some(parse_init(&rest, line)?);
                }
                "assume" => {
                    let spec = rest.join("");
                    let (target, bound) = parse_bound_assign(&spec, line)?;
                    steps.push((Step::Assume { target, bound }, content.to_string()));
                }
                "step" => {
                    let step = parse_step(&rest, line)?;
                    steps.push((step, content.to_string()));
                }
                other => {
                    return Err(IneqError::Parse {
                        line,
                        msg: format!("unknown directive `{other}`"),
                    });
                }
            }
        }

        let init = init.ok_or(IneqError::Parse {
            line: 0,
            msg: "missing `init` line".into(),
        })?;
        if name.is_empty() {
            return Err(IneqError::Parse {
                line: 0,
                msg: "missing `name` line".into(),
            });
        }
        Ok(DerivationScript { name, init, steps })
    }

    /// Replays the script, threading the refined context through the
    /// steps. Fails on the first step whose recomputed bound differs
    /// from the claim or whose preconditions do not hold.
    pub fn run(&self) -> RunReport {
        let mut ctx = self.init.clone();
        let mut reports = Vec::new();
        let mut passed = true;

        for (index, (step, text)) in self.steps.iter().enumerate() {
            if !passed {
                reports.push(StepReport {
                    index,
                    text: text.clone(),
                    ok: false,
                    detail: "skipped after earlier failure".into(),
                });
                continue;
            }
            let outcome = execute_step(&mut ctx, step);
            let ok = outcome.is_ok();
            let detail = match outcome {
                Ok(d) => d,
                Err(d) => d,
            };
            if !ok {
                passed = false;
            }
            reports.push(StepReport {
                index,
                text: text.clone(),
                ok,
                detail,
            });
        }

        RunReport {
            name: self.name.clone(),
            passed,
            steps: reports,
        }
    }
}

fn check_claim(kind: &str, computed: &Bound, claim: &Claim) -> Result<String, String> {
    let computed_claim = Claim {
        value: computed.value.clone(),
        strict: computed.strict,
    };
    if computed.value == claim.value && computed.strict == claim.strict {
        Ok(format!("{kind} = {computed_claim}"))
    } else {
        Err(format!(
            "claimed {kind} {claim} but recomputed {computed_claim}"
        ))
    }
}

fn execute_step(ctx: &mut GeomContext, step: &Step) -> Result<String, String> {
    match step {
        Step::Assume { target, bound } => {
            let slot = match target {
                Target::Mu => &mut ctx.mu,
                Target::Beta => &mut ctx.beta,
                Target::Xi => &mut ctx.xi,
            };
            *slot = bound.clone();
            Ok(format!("assumption recorded: {bound}"))
        }
        Step::RefineKieq1 { m, claim } => match ctx.refine_xi_kieq1(*m) {
            Refine::Applied(b) => {
                let msg = check_claim("xi", &b, claim)?;
                ctx.xi = b;
                Ok(msg)
            }
            Refine::NotApplicable => Err(format!("alpha({m}) > 1 not certified")),
        },
        Step::XiFloorKieq2 { claim } => {
            let b = ctx.xi_floor_kieq2().stronger_of(ctx.xi.clone());
            let msg = check_claim("xi", &b, claim)?;
            ctx.xi = b;
            Ok(msg)
        }
        Step::Kcube { claim } => {
            let b = ctx.k3_floor_kcube();
            check_claim("k3", &b, claim)
        }
        Step::BetaFromMu { claim } => {
            let b = beta_from_cri(&ctx.mu).stronger_of(ctx.beta.clone());
            let msg = check_claim("beta", &b, claim)?;
            ctx.beta = b;
            Ok(msg)
        }
        Step::AlphaGt { m, rhs } => match ctx.alpha(*m) {
            Some(a) if a.exceeds(rhs) => Ok(format!(
                "alpha({m}) bound {} certifies > {}",
                a,
                fmt_rat(rhs)
            )),
            Some(a) => Err(format!(
                "alpha({m}) bound {a} does not certify > {}",
                fmt_rat(rhs)
            )),
            None => Err(format!("alpha({m}) has no certified lower bound")),
        },
        Step::RefineThm32iv {
            m1,
            j,
            delta,
            n,
            claim,
        } => match ctx.refine_xi_thm32iv(*m1, *j, *delta, *n) {
            Refine::Applied(b) => {
                let msg = check_claim("xi", &b, claim)?;
                ctx.xi = b;
                Ok(msg)
            }
            Refine::NotApplicable => Err(format!("3.2(iv) inapplicable at n={n}")),
        },
        Step::RefineThm33 {
            variant,
            m1,
            j1,
            j2,
            delta2,
            n,
            claim,
        } => {
            match ctx
                .refine_xi_thm33(*variant, *m1, *j1, *j2, *delta2, *n)
                .map_err(|e| e.to_string())?
            {
                Refine::Applied(b) => {
                    let msg = check_claim("xi", &b, claim)?;
                    ctx.xi = b;
                    Ok(msg)
                }
                Refine::NotApplicable => Err(format!("3.3 refinement inapplicable at n={n}")),
            }
        }
        Step::RefineThm34 {
            variant,
            m1,
            j1,
            j2,
            n,
            claim,
        } => {
            match ctx
                .refine_xi_thm34(*variant, *m1, *j1, *j2, *n)
                .map_err(|e| e.to_string())?
            {
                Refine::Applied(b) => {
                    let msg = check_claim("xi", &b, claim)?;
                    ctx.xi = b;
                    Ok(msg)
                }
                Refine::NotApplicable => Err(format!("3.4 refinement inapplicable at n={n}")),
            }
        }
        Step::Birational { rule, claim_m } => {
            let m = ctx.birational_threshold(rule).map_err(|e| e.to_string())?;
            if m == *claim_m {
                Ok(format!("phi_{m} birational"))
            } else {
                Err(format!("claimed birational at {claim_m}, recomputed {m}"))
            }
        }
        Step::VolEstimate { m, l, v, w, claim } => {
            let root = VolBound::solve(*m, *l, v.clone(), w.clone()).map_err(|e| e.to_string())?;
            if root.exceeds(claim) {
                Ok(format!(
                    "k3 root ~ {} > {}",
                    fmt_rat(&root.lower_witness(6)),
                    fmt_rat(claim)
                ))
            } else {
                Err(format!(
                    "volume root ~ {} does not exceed {}",
                    fmt_rat(&root.lower_witness(6)),
                    fmt_rat(claim)
                ))
            }
        }
    }
}

/// `xi>2/3` or `beta=1/2` (strict bounds use `>` in place of `=`).
fn parse_bound_assign(s: &str, line: usize) -> Result<(Target, Bound), IneqError> {
    let err = |msg: String| IneqError::Parse { line, msg };
    let (key, strict, value) = if let Some((k, v)) = s.split_once(">=") {
        (k, false, v)
    } else if let Some((k, v)) = s.split_once('>') {
        (k, true, v)
    } else if let Some((k, v)) = s.split_once('=') {
        (k, false, v)
    } else {
        return Err(err(format!("expected key=value or key>value, got `{s}`")));
    };
    let target = match key {
        "mu" => Target::Mu,
        "beta" => Target::Beta,
        "xi" => Target::Xi,
        other => return Err(err(format!("unknown bound target `{other}`"))),
    };
    let value = parse_rat(value).ok_or_else(|| err(format!("bad rational in `{s}`")))?;
    Ok((target, Bound { value, strict }))
}

fn parse_init(tokens: &[&str], line: usize) -> Result<GeomContext, IneqError> {
    let err = |msg: String| IneqError::Parse { line, msg };
    let mut ctx = GeomContext::surface12();
    for tok in tokens {
        if let Some(v) = tok.strip_prefix("degkc=") {
            ctx.deg_kc = v
                .parse()
                .map_err(|_| err(format!("bad degkc in `{tok}`")))?;
            continue;
        }
        let (target, bound) = parse_bound_assign(tok, line)?;
        match target {
            Target::Mu => ctx.mu = bound,
            Target::Beta => ctx.beta = bound,
            Target::Xi => ctx.xi = bound,
        }
    }
    GeomContext::new(ctx.mu, ctx.beta, ctx.xi, ctx.deg_kc).map_err(|e| err(e.to_string()))
}

struct Params<'a> {
    line: usize,
    kv: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn get(&self, key: &str) -> Result<&'a str, IneqError> {
        self.kv
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or(IneqError::Parse {
                line: self.line,
                msg: format!("missing parameter `{key}`"),
            })
    }

    fn int(&self, key: &str) -> Result<i64, IneqError> {
        self.get(key)?.parse().map_err(|_| IneqError::Parse {
            line: self.line,
            msg: format!("parameter `{key}` is not an integer"),
        })
    }

    fn rat(&self, key: &str) -> Result<Rat, IneqError> {
        parse_rat(self.get(key)?).ok_or(IneqError::Parse {
            line: self.line,
            msg: format!("parameter `{key}` is not a rational"),
        })
    }
}

fn parse_step(tokens: &[&str], line: usize) -> Result<Step, IneqError> {
    let err = |msg: String| IneqError::Parse { line, msg };
    if tokens.is_empty() {
        return Err(err("empty step".into()));
    }
    let op = tokens[0];
    let claim_pos = tokens.iter().position(|t| *t == "claim");
    let param_slice = &tokens[1..claim_pos.unwrap_or(tokens.len())];
    let kv: Vec<(&str, &str)> = param_slice
        .iter()
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{t}`")))
        })
        .collect::<Result<_, _>>()?;
    let params = Params { line, kv };

    let claim_parts: Option<(&str, &str)> = match claim_pos {
        Some(pos) => {
            if pos + 2 >= tokens.len() {
                return Err(err("claim needs a kind and a value".into()));
            }
            Some((tokens[pos + 1], tokens[pos + 2]))
        }
        None => None,
    };
    let bound_claim = |expected_kind: &str| -> Result<Claim, IneqError> {
        let (kind, value) = claim_parts.ok_or_else(|| err(format!("`{op}` needs a claim")))?;
        if kind != expected_kind {
            return Err(err(format!(
                "`{op}` claims `{expected_kind}`, script says `{kind}`"
            )));
        }
        let (strict, body) = match value.strip_prefix('>') {
            Some(rest) => (true, rest),
            None => (false, value),
        };
        let value = parse_rat(body).ok_or_else(|| err(format!("bad claim value `{value}`")))?;
        Ok(Claim { value, strict })
    };

    let variant = |p: &Params| -> Result<TwoSystemVariant, IneqError> {
        match p.get("variant")? {
            "i1" | "i.1" => Ok(TwoSystemVariant::I1),
            "ii1" | "ii.1" => Ok(TwoSystemVariant::Ii1),
            other => Err(err(format!("unknown variant `{other}`"))),
        }
    };

    match op {
        "refine_kieq1" => Ok(Step::RefineKieq1 {
            m: params.int("m")?,
            claim: bound_claim("xi")?,
        }),
        "xi_floor_kieq2" => Ok(Step::XiFloorKieq2 {
            claim: bound_claim("xi")?,
        }),
        "kcube" => Ok(Step::Kcube {
            claim: bound_claim("k3")?,
        }),
        "beta_from_mu" => Ok(Step::BetaFromMu {
            claim: bound_claim("beta")?,
        }),
        "alpha_gt" => Ok(Step::AlphaGt {
            m: params.int("m")?,
            rhs: params.rat("rhs")?,
        }),
        "refine_thm32iv" => Ok(Step::RefineThm32iv {
            m1: params.int("m1")?,
            j: params.int("j")?,
            delta: params.int("delta")?,
            n: params.int("n")?,
            claim: bound_claim("xi")?,
        }),
        "refine_thm33" => Ok(Step::RefineThm33 {
            variant: variant(&params)?,
            m1: params.int("m1")?,
            j1: params.int("j1")?,
            j2: params.int("j2")?,
            delta2: params.int("delta2")?,
            n: params.int("n")?,
            claim: bound_claim("xi")?,
        }),
        "refine_thm34" => Ok(Step::RefineThm34 {
            variant: variant(&params)?,
            m1: params.int("m1")?,
            j1: params.int("j1")?,
            j2: params.int("j2")?,
            n: params.int("n")?,
            claim: bound_claim("xi")?,
        }),
        "birational" => {
            let rule = match params.get("rule")? {
                "alpha" | "alpha_rule" => ThresholdRule::AlphaRule,
                "3.2i" => ThresholdRule::T32i {
                    m1: params.int("m1")?,
                    j: params.int("j")?,
                    delta: params.int("delta")?,
                },
                "3.2i'" => ThresholdRule::T32iPrime {
                    m1: params.int("m1")?,
                    j: params.int("j")?,
                    delta: params.int("delta")?,
                },
                "3.2ii" => ThresholdRule::T32ii {
                    m1: params.int("m1")?,
                    j: params.int("j")?,
                    delta: params.int("delta")?,
                },
                "3.2ii'" => ThresholdRule::T32iiPrime {
                    m1: params.int("m1")?,
                    j: params.int("j")?,
                },
                "3.3i.2" => ThresholdRule::T33i2 {
                    m1: params.int("m1")?,
                    j1: params.int("j1")?,
                    j2: params.int("j2")?,
                    delta2: params.int("delta2")?,
                },
                "3.3ii.2" => ThresholdRule::T33ii2 {
                    m1: params.int("m1")?,
                    j1: params.int("j1")?,
                    j2: params.int("j2")?,
                    delta2: params.int("delta2")?,
                },
                "3.4i.2" => ThresholdRule::T34i2 {
                    m1: params.int("m1")?,
                    j1: params.int("j1")?,
                    j2: params.int("j2")?,
                },
                "3.4ii.2" => ThresholdRule::T34ii2 {
                    m1: params.int("m1")?,
                    j1: params.int("j1")?,
                    j2: params.int("j2")?,
                },
                other => return Err(err(format!("unknown rule `{other}`"))),
            };
            let (kind, value) =
                claim_parts.ok_or_else(|| err("`birational` needs a claim".into()))?;
            if kind != "birational" {
                return Err(err(format!(
                    "`birational` claims `birational`, script says `{kind}`"
                )));
            }
            let claim_m = value
                .parse()
                .map_err(|_| err(format!("bad birational claim `{value}`")))?;
            Ok(Step::Birational { rule, claim_m })
        }
        "vol_estimate" => {
            let (kind, value) =
                claim_parts.ok_or_else(|| err("`vol_estimate` needs a claim".into()))?;
            if kind != "k3_gt" {
                return Err(err(format!(
                    "`vol_estimate` claims `k3_gt`, script says `{kind}`"
                )));
            }
            let claim =
                parse_rat(value).ok_or_else(|| err(format!("bad claim value `{value}`")))?;
            Ok(Step::VolEstimate {
                m: params.int("m")?,
                l: params.int("l")?,
                v: params.rat("v")?,
                w: params.rat("w")?,
                claim,
            })
        }
        other => Err(err(format!("unknown operation `{other}`"))),
    }
}

//! Exact-rational invariant calculus for minimal projective 3-folds of
//! general type, driven by baskets of terminal quotient singularities.
//!
//! The crate has three layers:
//!
//! * [`basket`] and [`rr`] — the basket data model (prime packings,
//!   canonical form) and the Riemann-Roch evaluation of plurigenera
//!   `chi_m` and the canonical volume `K^3` from a weighted basket.
//! * [`b5`] and [`s2`] — the constraint solver that enumerates all
//!   degree-5 candidate baskets compatible with the plurigenus
//!   constraint system, and the packing search that expands them into
//!   the final classification list.
//! * [`ineq`] and [`whs`] — the birationality inequality toolkit with a
//!   replayable derivation-script engine, and weighted-hypersurface
//!   invariants used as smoke-test inputs.
//!
//! Everything is exact: all rational quantities are `BigRational`, no
//! floating point is used anywhere.

pub mod b5;
pub mod basket;
pub mod ineq;
pub mod rr;
pub mod s2;
pub mod whs;

pub use b5::{B5Candidate, ConstraintSet, PlurigenusTuple};
pub use basket::{Basket, BasketPoint, PackingMove};
pub use ineq::{DerivationScript, GeomContext};
pub use rr::WeightedBasket;
pub use s2::S2Entry;

use num_bigint::BigInt;
use num_rational::BigRational;

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Shorthand for a rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Integer as a rational.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses "p/q" or "p" into an exact rational.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q == BigInt::from(0) {
                return None;
            }
            Some(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(p))
        }
    }
}

/// Renders a rational as "p/q" ("p" when the denominator is 1).
pub fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

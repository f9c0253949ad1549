//! Riemann-Roch evaluation for weighted baskets: local correction terms,
//! canonical volume `K^3` and plurigenera `chi_m`.
//!
//! The plurigenus formula used here is
//!
//! ```text
//! chi_m = m(m-1)(2m-1)/12 * K^3 + (1-2m) * chi + l(m)
//! ```
//!
//! with the local term `l(m) = Σ_p Σ_{j=1}^{m-1} jb(r-jb)/2r` (residues
//! mod r). `K^3` is defined by inverting the `m = 2` case, so
//! `chi_2 = P_2` holds identically; the solver's round-trip checks
//! (`chi_m = P_m` for `m = 3..6` on every emitted candidate) pin the
//! sign convention.

use crate::basket::{Basket, BasketPoint};
use crate::{int, rat, Rat};
use serde::{Deserialize, Serialize};

/// Local Reid correction term of one point at level `m`:
/// `Σ_{j=1}^{m-1} (jb mod r)(r - (jb mod r)) / 2r`. Zero for `m = 1`.
pub fn local_l(p: &BasketPoint, m: i64) -> Rat {
    assert!(m >= 1, "local_l needs m >= 1");
    let (b, r) = (p.b(), p.r());
    let mut num = 0i64; // Σ (jb mod r)(r - jb mod r), over denominator 2r
    for j in 1..m {
        let s = (j * b) % r;
        num += s * (r - s);
    }
    rat(num, 2 * r)
}

/// Basket-level correction term `l(m) = Σ_p local_l(p, m)`.
pub fn l_sum(basket: &Basket, m: i64) -> Rat {
    basket
        .points()
        .iter()
        .map(|p| local_l(p, m))
        .fold(int(0), |acc, x| acc + x)
}

/// The weighted (formal) basket: a basket together with the second
/// plurigenus and the Euler characteristic of the structure sheaf.
/// These three data determine all `chi_m` and `K^3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeightedBasket {
    pub basket: Basket,
    pub p2: i64,
    pub chi: i64,
}

impl WeightedBasket {
    pub fn new(basket: Basket, p2: i64, chi: i64) -> Self {
        WeightedBasket { basket, p2, chi }
    }

    /// Canonical volume `K^3 = 2(P_2 + 3chi - l(2))`. May be negative or
    /// zero for formal input; downstream filters decide what survives.
    pub fn k3(&self) -> Rat {
        (int(self.p2) + int(3 * self.chi) - l_sum(&self.basket, 2)) * int(2)
    }

    /// Formal plurigenus `chi_m` for `m >= 2`; equals `p2` at `m = 2` by
    /// construction.
    pub fn chi_m(&self, m: i64) -> Rat {
        assert!(m >= 2, "chi_m needs m >= 2");
        self.chi_m_given_k3(m, &self.k3())
    }

    /// `chi_m` with the volume already in hand, so batch evaluations do
    /// not recompute `l(2)` per call.
    pub fn chi_m_given_k3(&self, m: i64, k3: &Rat) -> Rat {
        rat(m * (m - 1) * (2 * m - 1), 12) * k3
            + int((1 - 2 * m) * self.chi)
            + l_sum(&self.basket, m)
    }
}

//! Invariants of general weighted hypersurfaces `X_d` in a weighted
//! projective 4-space `P(a_0..a_4)`: canonical volume and plurigenera.
//!
//! With canonical weight `k = d - Σ a_i >= 1`, the volume is
//! `K^3 = k^3 d / (a_0 a_1 a_2 a_3 a_4)` and `P_m` is the coefficient
//! of `t^{mk}` in `(1 - t^d) / Π (1 - t^{a_i})`. Well-formedness and
//! quasismoothness are not checked here; inputs are taken at face
//! value.

use crate::{rat, Rat};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WhsError {
    #[error("weights must be positive, got {0}")]
    BadWeight(i64),
    #[error("canonical weight d - sum(a) = {0} must be >= 1")]
    NotCanonical(i64),
}

/// A weighted hypersurface given by its degree and the five ambient
/// weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedHypersurface {
    pub degree: i64,
    pub weights: [i64; 5],
}

impl WeightedHypersurface {
    pub fn new(degree: i64, weights: [i64; 5]) -> Result<Self, WhsError> {
        if let Some(&w) = weights.iter().find(|&&w| w <= 0) {
            return Err(WhsError::BadWeight(w));
        }
        let h = WeightedHypersurface { degree, weights };
        if h.canonical_weight() < 1 {
            return Err(WhsError::NotCanonical(h.canonical_weight()));
        }
        Ok(h)
    }

    /// `k = d - Σ a_i`.
    pub fn canonical_weight(&self) -> i64 {
        self.degree - self.weights.iter().sum::<i64>()
    }

    /// `K^3 = k^3 d / Π a_i`.
    pub fn k3(&self) -> Rat {
        let k = self.canonical_weight();
        let prod: i64 = self.weights.iter().product();
        rat(k * k * k * self.degree, prod)
    }

    /// `P_m` = coefficient of `t^{mk}` in `(1 - t^d) / Π (1 - t^{a_i})`,
    /// computed by exact integer series expansion.
    pub fn plurigenus(&self, m: i64) -> i64 {
        assert!(m >= 1, "plurigenus needs m >= 1");
        let target = m * self.canonical_weight();
        let counts = self.monomial_counts(target);
        let mut p = counts[target as usize];
        if self.degree <= target {
            p -= counts[(target - self.degree) as usize];
        }
        p
    }

    /// First six plurigenera `P_1..P_6`.
    pub fn plurigenera(&self) -> [i64; 6] {
        let mut out = [0; 6];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.plurigenus(i as i64 + 1);
        }
        out
    }

    /// Coefficients of `1 / Π (1 - t^{a_i})` up to the given degree:
    /// counts of monomials of each weight.
    fn monomial_counts(&self, up_to: i64) -> Vec<i64> {
        let n = up_to as usize;
        let mut counts = vec![0i64; n + 1];
        counts[0] = 1;
        for &a in &self.weights {
            let a = a as usize;
            for w in a..=n {
                counts[w] += counts[w - a];
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x16() -> WeightedHypersurface {
        WeightedHypersurface::new(16, [1, 1, 2, 3, 8]).unwrap()
    }

    fn x14() -> WeightedHypersurface {
        WeightedHypersurface::new(14, [1, 1, 2, 2, 7]).unwrap()
    }

    #[test]
    fn k3_of_fletcher_examples() {
        assert_eq!(x16().k3(), rat(1, 3));
        assert_eq!(x14().k3(), rat(1, 2));
        // Sextic in straight P^4: k = 1, K^3 = 1^3 * 6 / 1 = 6.
        let sextic = WeightedHypersurface::new(6, [1, 1, 1, 1, 1]).unwrap();
        assert_eq!(sextic.k3(), rat(6, 1));
    }

    #[test]
    fn geometric_genus_of_fletcher_examples() {
        assert_eq!(x16().plurigenus(1), 2);
        assert_eq!(x14().plurigenus(1), 2);
        // Weight-2 monomials on X16: x0^2, x0*x1, x1^2, y.
        assert_eq!(x16().plurigenus(2), 4);
    }

    #[test]
    fn plurigenera_non_decreasing() {
        for h in [x16(), x14()] {
            let p = h.plurigenera();
            for w in p.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    /// Independent oracle: count exponent vectors by brute force.
    fn brute_count(weights: [i64; 5], degree: i64, w: i64) -> i64 {
        let mut count = 0i64;
        let bound = |a: i64| w / a;
        for e0 in 0..=bound(weights[0]) {
            for e1 in 0..=bound(weights[1]) {
                for e2 in 0..=bound(weights[2]) {
                    for e3 in 0..=bound(weights[3]) {
                        for e4 in 0..=bound(weights[4]) {
                            let total = e0 * weights[0]
                                + e1 * weights[1]
                                + e2 * weights[2]
                                + e3 * weights[3]
                                + e4 * weights[4];
                            if total == w {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        let _ = degree;
        count
    }

    #[test]
    fn full_tuples_match_brute_force() {
        for h in [x16(), x14()] {
            for m in 1..=6i64 {
                let w = m * h.canonical_weight();
                let mut expect = brute_count(h.weights, h.degree, w);
                if h.degree <= w {
                    expect -= brute_count(h.weights, h.degree, w - h.degree);
                }
                assert_eq!(h.plurigenus(m), expect);
            }
        }
        assert_eq!(x16().plurigenera(), [2, 4, 7, 11, 16, 23]);
        assert_eq!(x14().plurigenera(), [2, 5, 8, 14, 20, 30]);
    }

    #[test]
    fn degree_correction_kicks_in() {
        // Quintic in P^4 has k = 0 -> rejected; degree-7 with a weight-2
        // coordinate has k = 1 and the t^d correction matters from m = 7.
        assert_eq!(
            WeightedHypersurface::new(5, [1, 1, 1, 1, 1]),
            Err(WhsError::NotCanonical(0))
        );
        assert_eq!(
            WeightedHypersurface::new(10, [1, 1, 1, 1, 0]),
            Err(WhsError::BadWeight(0))
        );
        let h = WeightedHypersurface::new(7, [1, 1, 1, 1, 2]).unwrap();
        // 200 weight-7 monomials minus the single relation in degree 7.
        assert_eq!(h.plurigenus(7), 199);
    }

    #[test]
    fn x16_tuple_fits_search_region() {
        // chi = 1 - q + h^2 - p_g = -1; the X16 tuple satisfies the
        // tuple constraints (1)-(6) of the solver.
        let c = crate::b5::ConstraintSet::standard(5);
        let p = x16().plurigenera();
        let t = crate::b5::PlurigenusTuple {
            chi: -1,
            p2: p[1],
            p3: p[2],
            p4: p[3],
            p5: p[4],
            p6: p[5],
        };
        assert_eq!(t.violated_constraints(&c), Vec::<usize>::new());
        // X14 is the P2 = 5 example and falls outside range (1).
        let p = x14().plurigenera();
        let t = crate::b5::PlurigenusTuple {
            chi: -1,
            p2: p[1],
            p3: p[2],
            p4: p[3],
            p5: p[4],
            p6: p[5],
        };
        assert!(t.violated_constraints(&c).contains(&1));
    }
}

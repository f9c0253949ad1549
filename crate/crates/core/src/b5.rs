//! Enumeration of degree-5 candidate baskets from the plurigenus
//! constraint system.
//!
//! A candidate is determined linearly by `(chi, P_2..P_6)` and the tail
//! weight `sigma_5`:
//!
//! ```text
//! n_{1,2} = 3chi + 6P2 - 3P3 +  P4 - 2P5 + P6 + sigma5
//! n_{2,5} = 2chi       -  P3       + 2P5 - P6 - sigma5
//! n_{1,3} = 2chi + 2P2 + 3P3 - 3P4 -  P5 + P6 + sigma5
//! n_{1,4} =  chi - 3P2 +  P3 + 2P4 -  P5      - sigma5
//! ```
//!
//! with `0 <= sigma5 <= 2chi - P3 + 2P5 - P6` distributed over tail
//! points `(1, r)`, `r >= 5`. All coefficients must be non-negative for
//! the candidate to be a basket; the canonical-volume floors then cut
//! the list down further.

use crate::basket::Basket;
use crate::rr::WeightedBasket;
use crate::{fmt_rat, rat, Rat};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum B5Error {
    #[error("plurigenus linear system inconsistent at {tuple:?} sigma5={sigma5}: chi_{m} = {got}, expected {want}")]
    Inconsistent {
        tuple: PlurigenusTuple,
        sigma5: i64,
        m: i64,
        got: String,
        want: i64,
    },
}

/// `(chi, P_2, ..., P_6)` subject to the plurigenus constraint system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlurigenusTuple {
    pub chi: i64,
    pub p2: i64,
    pub p3: i64,
    pub p4: i64,
    pub p5: i64,
    pub p6: i64,
}

impl PlurigenusTuple {
    pub fn plurigenera(&self) -> [i64; 5] {
        [self.p2, self.p3, self.p4, self.p5, self.p6]
    }

    /// Upper bound for the tail weight: `2chi - P3 + 2P5 - P6`.
    /// Negative means no feasible `sigma5` at all.
    pub fn sigma5_upper(&self) -> i64 {
        2 * self.chi - self.p3 + 2 * self.p5 - self.p6
    }

    /// Indices (1..=6) of the tuple constraints this tuple violates.
    pub fn violated_constraints(&self, c: &ConstraintSet) -> Vec<usize> {
        let mut out = Vec::new();
        if self.p2 < c.p2_min || self.p2 > c.p2_max {
            out.push(1);
        }
        if self.p3 < self.p2 + 2 || self.p3 > c.p3_max {
            out.push(2);
        }
        if self.p4 < self.p3 + 4 || self.p4 > c.p4_max {
            out.push(3);
        }
        if self.p5 < self.p4 + 4 || self.p5 > c.p5_max {
            out.push(4);
        }
        if self.p6 < self.p5 + 7 || self.p6 > c.p6_max {
            out.push(5);
        }
        if !c.chi_values.contains(&self.chi) {
            out.push(6);
        }
        out
    }
}

/// The four degree-5 multiplicities as exact linear forms in the tuple
/// and `sigma5`. Values may be negative; the caller filters.
pub fn n5_coefficients(t: &PlurigenusTuple, sigma5: i64) -> (i64, i64, i64, i64) {
    let PlurigenusTuple {
        chi,
        p2,
        p3,
        p4,
        p5,
        p6,
    } = *t;
    let n12 = 3 * chi + 6 * p2 - 3 * p3 + p4 - 2 * p5 + p6 + sigma5;
    let n25 = 2 * chi - p3 + 2 * p5 - p6 - sigma5;
    let n13 = 2 * chi + 2 * p2 + 3 * p3 - 3 * p4 - p5 + p6 + sigma5;
    let n14 = chi - 3 * p2 + p3 + 2 * p4 - p5 - sigma5;
    (n12, n25, n13, n14)
}

/// All multisets of values in `[5, r_max]` with total multiplicity
/// `sigma5`, as maps `r -> count`. Exactly `[{}]` when `sigma5 = 0`.
pub fn tail_partitions(sigma5: i64, r_max: i64) -> Vec<BTreeMap<i64, i64>> {
    assert!(sigma5 >= 0, "tail_partitions needs sigma5 >= 0");
    assert!(r_max >= 5, "tail_partitions needs r_max >= 5");
    let mut out = Vec::new();
    let mut current = BTreeMap::new();
    fn go(
        remaining: i64,
        min_r: i64,
        r_max: i64,
        current: &mut BTreeMap<i64, i64>,
        out: &mut Vec<BTreeMap<i64, i64>>,
    ) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for r in min_r..=r_max {
            *current.entry(r).or_insert(0) += 1;
            go(remaining - 1, r, r_max, current, out);
            let n = current.get_mut(&r).unwrap();
            *n -= 1;
            if *n == 0 {
                current.remove(&r);
            }
        }
    }
    go(sigma5, 5, r_max, &mut current, &mut out);
    out
}

/// One staged canonical-volume floor: applies when `P_6 >= p6_min`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedFloor {
    pub p6_min: i64,
    pub bound: Rat,
    pub strict: bool,
}

/// The full numeric constraint system: tuple ranges, the global
/// canonical-volume floor, the staged floors, and the tail cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    pub chi_values: Vec<i64>,
    pub p2_min: i64,
    pub p2_max: i64,
    pub p3_max: i64,
    pub p4_max: i64,
    pub p5_max: i64,
    pub p6_max: i64,
    /// Global floor `K^3 >= k3_floor`; also the packing-search pruning
    /// threshold.
    pub k3_floor: Rat,
    /// Staged floors, thresholds strictly increasing and bounds
    /// non-decreasing.
    pub staged: Vec<StagedFloor>,
    /// Largest tail index `r` the enumeration considers.
    pub r_max: i64,
}

impl ConstraintSet {
    /// The constraint system with its published numeric values. The
    /// strict decimal bounds are kept as the exact rationals 4328/10000
    /// and 4714/10000 with strict comparison.
    pub fn standard(r_max: i64) -> Self {
        ConstraintSet {
            chi_values: vec![0, -1],
            p2_min: 3,
            p2_max: 4,
            p3_max: 8,
            p4_max: 13,
            p5_max: 21,
            p6_max: 31,
            k3_floor: rat(5, 14),
            staged: vec![
                StagedFloor {
                    p6_min: 26,
                    bound: rat(11, 28),
                    strict: false,
                },
                StagedFloor {
                    p6_min: 27,
                    bound: rat(4328, 10000),
                    strict: true,
                },
                StagedFloor {
                    p6_min: 28,
                    bound: rat(4714, 10000),
                    strict: true,
                },
                StagedFloor {
                    p6_min: 31,
                    bound: rat(8, 15),
                    strict: false,
                },
            ],
            r_max,
        }
    }

    /// Checks the global floor and every staged floor applicable at the
    /// given `P_6`.
    pub fn k3_ok(&self, p6: i64, k3: &Rat) -> bool {
        if *k3 < self.k3_floor {
            return false;
        }
        for f in &self.staged {
            if p6 >= f.p6_min {
                let pass = if f.strict {
                    *k3 > f.bound
                } else {
                    *k3 >= f.bound
                };
                if !pass {
                    return false;
                }
            }
        }
        true
    }

    /// Index (7..=11) of the first volume constraint failing at this
    /// `(P_6, K^3)`, for diagnostics.
    pub fn k3_first_violation(&self, p6: i64, k3: &Rat) -> Option<usize> {
        if *k3 < self.k3_floor {
            return Some(7);
        }
        for (i, f) in self.staged.iter().enumerate() {
            if p6 >= f.p6_min {
                let pass = if f.strict {
                    *k3 > f.bound
                } else {
                    *k3 >= f.bound
                };
                if !pass {
                    return Some(8 + i);
                }
            }
        }
        None
    }

    /// All tuples satisfying constraints (1)-(6), in lexicographic order.
    pub fn tuples(&self) -> Vec<PlurigenusTuple> {
        let mut out = Vec::new();
        for &chi in &self.chi_values {
            for p2 in self.p2_min..=self.p2_max {
                for p3 in p2 + 2..=self.p3_max {
                    for p4 in p3 + 4..=self.p4_max {
                        for p5 in p4 + 4..=self.p5_max {
                            for p6 in p5 + 7..=self.p6_max {
                                out.push(PlurigenusTuple {
                                    chi,
                                    p2,
                                    p3,
                                    p4,
                                    p5,
                                    p6,
                                });
                            }
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// A degree-5 candidate: multiplicities, tail distribution, and the
/// materialized weighted basket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct B5Candidate {
    pub source: PlurigenusTuple,
    pub sigma5: i64,
    pub n12: i64,
    pub n25: i64,
    pub n13: i64,
    pub n14: i64,
    pub tail: BTreeMap<i64, i64>,
    pub weighted: WeightedBasket,
}

impl B5Candidate {
    pub fn k3(&self) -> Rat {
        self.weighted.k3()
    }
}

fn materialize(
    t: &PlurigenusTuple,
    coeffs: (i64, i64, i64, i64),
    tail: &BTreeMap<i64, i64>,
) -> WeightedBasket {
    let (n12, n25, n13, n14) = coeffs;
    let mut pairs = Vec::new();
    pairs.extend(std::iter::repeat((1, 2)).take(n12 as usize));
    pairs.extend(std::iter::repeat((2, 5)).take(n25 as usize));
    pairs.extend(std::iter::repeat((1, 3)).take(n13 as usize));
    pairs.extend(std::iter::repeat((1, 4)).take(n14 as usize));
    for (&r, &n) in tail {
        pairs.extend(std::iter::repeat((1, r)).take(n as usize));
    }
    let basket = Basket::from_pairs(pairs).expect("basket atoms are valid");
    WeightedBasket::new(basket, t.p2, t.chi)
}

/// Rejection tallies from one enumeration pass, for diagnostics.
#[derive(Debug, Clone, Default, Serialize)]
pub struct B5Stats {
    pub tuples_visited: usize,
    /// Tuples with `sigma5_upper < 0` (no feasible tail weight).
    pub tuples_infeasible_sigma5: usize,
    /// `(tuple, sigma5)` pairs dropped for a negative multiplicity.
    pub rejected_negative_coeff: usize,
    /// Tail-expanded candidates dropped by volume constraint index
    /// (7 = global floor, 8..=11 = staged floors in order).
    pub rejected_by_volume: BTreeMap<usize, usize>,
    pub kept: usize,
}

/// Enumerates every candidate compatible with the constraint system:
/// all tuples under (1)-(6), all feasible `sigma5` and tail
/// distributions, coefficient non-negativity, the cross-check that the
/// materialized basket reproduces `P_3..P_6`, and the volume floors
/// (7)-(11). Output is deterministic and sorted.
pub fn enumerate_b5(c: &ConstraintSet) -> Result<Vec<B5Candidate>, B5Error> {
    enumerate_b5_with_stats(c).map(|(out, _)| out)
}

/// Same as [`enumerate_b5`] but also reports rejection tallies.
pub fn enumerate_b5_with_stats(c: &ConstraintSet) -> Result<(Vec<B5Candidate>, B5Stats), B5Error> {
    let mut out = Vec::new();
    let mut stats = B5Stats::default();
    for t in c.tuples() {
        stats.tuples_visited += 1;
        let upper = t.sigma5_upper();
        if upper < 0 {
            stats.tuples_infeasible_sigma5 += 1;
            continue;
        }
        for sigma5 in 0..=upper {
            let coeffs = n5_coefficients(&t, sigma5);
            let (n12, n25, n13, n14) = coeffs;
            if n12 < 0 || n25 < 0 || n13 < 0 || n14 < 0 {
                stats.rejected_negative_coeff += 1;
                continue;
            }
            for tail in tail_partitions(sigma5, c.r_max) {
                let weighted = materialize(&t, coeffs, &tail);
                for (m, want) in [(3, t.p3), (4, t.p4), (5, t.p5), (6, t.p6)] {
                    let got = weighted.chi_m(m);
                    if got != crate::int(want) {
                        return Err(B5Error::Inconsistent {
                            tuple: t,
                            sigma5,
                            m,
                            got: fmt_rat(&got),
                            want,
                        });
                    }
                }
                if let Some(idx) = c.k3_first_violation(t.p6, &weighted.k3()) {
                    *stats.rejected_by_volume.entry(idx).or_insert(0) += 1;
                    continue;
                }
                stats.kept += 1;
                out.push(B5Candidate {
                    source: t,
                    sigma5,
                    n12,
                    n25,
                    n13,
                    n14,
                    tail,
                    weighted,
                });
            }
        }
    }
    out.sort_by(|a, b| (a.source, a.sigma5, &a.weighted).cmp(&(b.source, b.sigma5, &b.weighted)));
    Ok((out, stats))
}

/// Serialization record for one candidate, one JSON object per line.
#[derive(Debug, Serialize, Deserialize)]
pub struct B5Record {
    pub chi: i64,
    pub p: [i64; 5],
    pub sigma5: i64,
    pub basket: Basket,
    pub k3: String,
}

impl From<&B5Candidate> for B5Record {
    fn from(c: &B5Candidate) -> Self {
        B5Record {
            chi: c.source.chi,
            p: c.source.plurigenera(),
            sigma5: c.sigma5,
            basket: c.weighted.basket.clone(),
            k3: fmt_rat(&c.k3()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::int;

    fn anchor_tuple() -> PlurigenusTuple {
        PlurigenusTuple {
            chi: 0,
            p2: 3,
            p3: 5,
            p4: 9,
            p5: 13,
            p6: 20,
        }
    }

    #[test]
    fn coefficients_of_anchor_tuple() {
        assert_eq!(n5_coefficients(&anchor_tuple(), 0), (6, 1, 1, 1));
        assert_eq!(n5_coefficients(&anchor_tuple(), 1), (7, 0, 2, 0));
        let zero = PlurigenusTuple {
            chi: 0,
            p2: 0,
            p3: 0,
            p4: 0,
            p5: 0,
            p6: 0,
        };
        assert_eq!(n5_coefficients(&zero, 0), (0, 0, 0, 0));
    }

    #[test]
    fn sigma5_step_changes_coefficients_by_signs() {
        for t in ConstraintSet::standard(5).tuples() {
            let (a12, a25, a13, a14) = n5_coefficients(&t, 0);
            let (b12, b25, b13, b14) = n5_coefficients(&t, 1);
            assert_eq!((b12 - a12, b25 - a25, b13 - a13, b14 - a14), (1, -1, 1, -1));
        }
    }

    #[test]
    fn sigma5_upper_examples() {
        assert_eq!(anchor_tuple().sigma5_upper(), 1);
        let t = PlurigenusTuple {
            chi: -1,
            p2: 3,
            p3: 5,
            p4: 9,
            p5: 13,
            p6: 21,
        };
        assert_eq!(t.sigma5_upper(), -2);
        let zero = PlurigenusTuple {
            chi: 0,
            p2: 0,
            p3: 0,
            p4: 0,
            p5: 0,
            p6: 0,
        };
        assert_eq!(zero.sigma5_upper(), 0);
    }

    #[test]
    fn tail_partition_enumeration() {
        assert_eq!(tail_partitions(0, 9), vec![BTreeMap::new()]);

        let one = tail_partitions(1, 7);
        assert_eq!(one.len(), 3);
        for (map, r) in one.iter().zip([5, 6, 7]) {
            assert_eq!(map, &BTreeMap::from([(r, 1)]));
        }

        let two = tail_partitions(2, 6);
        assert_eq!(
            two,
            vec![
                BTreeMap::from([(5, 2)]),
                BTreeMap::from([(5, 1), (6, 1)]),
                BTreeMap::from([(6, 2)]),
            ]
        );
    }

    #[test]
    fn enumerate_keeps_anchor_candidate() {
        let c = ConstraintSet::standard(5);
        let all = enumerate_b5(&c).unwrap();
        let anchor = all
            .iter()
            .find(|cand| cand.source == anchor_tuple() && cand.sigma5 == 0)
            .expect("anchor candidate retained");
        assert_eq!(
            (anchor.n12, anchor.n25, anchor.n13, anchor.n14),
            (6, 1, 1, 1)
        );
        assert_eq!(anchor.k3(), crate::rat(23, 60));
        // 23/60 > 5/14, so the global floor keeps it.
        assert!(c.k3_ok(20, &anchor.k3()));
    }

    #[test]
    fn enumerate_round_trips_all_plurigenera() {
        let c = ConstraintSet::standard(6);
        for cand in enumerate_b5(&c).unwrap() {
            for (m, want) in [
                (2, cand.source.p2),
                (3, cand.source.p3),
                (4, cand.source.p4),
                (5, cand.source.p5),
                (6, cand.source.p6),
            ] {
                assert_eq!(cand.weighted.chi_m(m), int(want));
            }
        }
    }

    #[test]
    fn k3_floor_filters() {
        let mut c = ConstraintSet::standard(5);
        let kept = enumerate_b5(&c).unwrap().len();
        assert!(kept > 0);
        c.k3_floor = int(1000);
        assert!(enumerate_b5(&c).unwrap().is_empty());
    }

    #[test]
    fn standard_floors_are_ordered() {
        let c = ConstraintSet::standard(5);
        assert!(c
            .staged
            .windows(2)
            .all(|w| w[0].p6_min < w[1].p6_min && w[0].bound <= w[1].bound));
        assert!(c.staged.iter().all(|f| f.bound >= c.k3_floor));
    }

    #[test]
    fn staged_floor_checks() {
        let c = ConstraintSet::standard(5);
        assert!(c.k3_ok(25, &rat(5, 14)));
        assert!(!c.k3_ok(26, &rat(5, 14)));
        assert!(c.k3_ok(26, &rat(11, 28)));
        // Strict bound: equality fails at P6 >= 27.
        assert!(!c.k3_ok(27, &rat(4328, 10000)));
        assert!(c.k3_ok(27, &rat(4329, 10000)));
        assert_eq!(c.k3_first_violation(31, &rat(1, 2)), Some(11));
        assert_eq!(c.k3_first_violation(31, &rat(8, 15)), None);
        assert_eq!(c.k3_first_violation(20, &rat(1, 3)), Some(7));
    }
}

//! Packing-descendant search: expands each degree-5 candidate into all
//! baskets reachable by prime packings that preserve `P_2..P_6` and
//! satisfy the canonical-volume floors.
//!
//! `K^3` strictly decreases by `1/(r1 r2 (r1+r2))` along every packing
//! edge, so the whole subtree below a node with `K^3` under the global
//! floor is dead and can be pruned. The plurigenus conditions are *not*
//! monotone under packing (the local terms wrap around residues), so
//! they are checked per node, never used for pruning.

use crate::b5::{enumerate_b5, B5Candidate, B5Error, ConstraintSet};
use crate::basket::Basket;
use crate::rr::{local_l, WeightedBasket};
use crate::{fmt_rat, int, Rat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet, VecDeque};

/// One element of the final list: an accepted weighted basket with its
/// plurigenera, volume, and discovery metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct S2Entry {
    pub weighted: WeightedBasket,
    pub plurigenera: [i64; 5],
    pub k3: Rat,
    /// Tuple and `sigma5` of the degree-5 root this entry was first
    /// reached from (diagnostics only; the entry itself is
    /// root-independent).
    pub origin: crate::b5::PlurigenusTuple,
    pub origin_sigma5: i64,
    /// Number of packings from the degree-5 root at first discovery.
    pub depth: usize,
}

impl S2Entry {
    /// Deduplication key: the basket together with `(P_2, chi)`
    /// determines every `chi_m`, so nothing else can disambiguate.
    pub fn key(&self) -> &WeightedBasket {
        &self.weighted
    }
}

/// Accepts a node iff its formal plurigenera reproduce the root tuple
/// and all volume floors applicable at the tuple's `P_6` hold.
fn accepted(w: &WeightedBasket, k3: &Rat, root: &B5Candidate, c: &ConstraintSet) -> bool {
    if !c.k3_ok(root.source.p6, k3) {
        return false;
    }
    [
        (3, root.source.p3),
        (4, root.source.p4),
        (5, root.source.p5),
        (6, root.source.p6),
    ]
    .iter()
    .all(|&(m, want)| w.chi_m_given_k3(m, k3) == int(want))
}

/// Breadth-first traversal of the packing tree below one root, with
/// subtree pruning at the global volume floor and deduplication by
/// canonical basket. The root itself counts as its own descendant.
pub fn descendants(root: &B5Candidate, c: &ConstraintSet) -> Vec<S2Entry> {
    let mut out = Vec::new();
    let mut seen: HashSet<Basket> = HashSet::new();
    let mut queue: VecDeque<(Basket, usize)> = VecDeque::new();
    seen.insert(root.weighted.basket.clone());
    queue.push_back((root.weighted.basket.clone(), 0));

    while let Some((basket, depth)) = queue.pop_front() {
        let w = WeightedBasket::new(basket, root.source.p2, root.source.chi);
        let k3 = w.k3();
        if k3 < c.k3_floor {
            // Volume only decreases below this node.
            continue;
        }
        if accepted(&w, &k3, root, c) {
            out.push(S2Entry {
                plurigenera: root.source.plurigenera(),
                k3,
                origin: root.source,
                origin_sigma5: root.sigma5,
                depth,
                weighted: w.clone(),
            });
        }
        for m in w.basket.available_packings() {
            let child = w.basket.apply_packing(&m).expect("move is fresh");
            if seen.insert(child.clone()) {
                queue.push_back((child, depth + 1));
            }
        }
    }
    out
}

/// Union of descendants over all degree-5 roots, deduplicated on the
/// weighted basket and canonically sorted. Parallel over roots; output
/// independent of thread count.
pub fn enumerate_s2(c: &ConstraintSet) -> Result<Vec<S2Entry>, B5Error> {
    let roots = enumerate_b5(c)?;
    let per_root: Vec<Vec<S2Entry>> = roots.par_iter().map(|root| descendants(root, c)).collect();
    let mut entries: Vec<S2Entry> = per_root.into_iter().flatten().collect();
    // First key sort groups duplicates; depth then origin break ties so
    // the survivor of deduplication is deterministic.
    entries.sort_by(|a, b| {
        (a.key(), a.depth, a.origin, a.origin_sigma5).cmp(&(
            b.key(),
            b.depth,
            b.origin,
            b.origin_sigma5,
        ))
    });
    entries.dedup_by(|a, b| a.key() == b.key());
    Ok(entries)
}

/// One stabilization-sweep row: the list size at a given tail cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub r_max: i64,
    pub count: usize,
}

/// Result of sweeping the tail cap upward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least swept cap from which the count stays constant, provided
    /// the constant run contains at least two caps.
    pub stable_at: Option<i64>,
}

/// Runs the full enumeration once per cap in `r_values` (increasing)
/// and reports the counts together with the stabilization flag.
pub fn stabilization_sweep(c: &ConstraintSet, r_values: &[i64]) -> Result<SweepReport, B5Error> {
    assert!(
        r_values.windows(2).all(|w| w[0] < w[1]),
        "r_values must be increasing"
    );
    let mut rows = Vec::new();
    for &r_max in r_values {
        let mut cr = c.clone();
        cr.r_max = r_max;
        rows.push(SweepRow {
            r_max,
            count: enumerate_s2(&cr)?.len(),
        });
    }
    let stable_at = stable_prefix(&rows);
    Ok(SweepReport { rows, stable_at })
}

fn stable_prefix(rows: &[SweepRow]) -> Option<i64> {
    if rows.len() < 2 {
        return None;
    }
    let last = rows.last().unwrap().count;
    let mut idx = rows.len();
    while idx > 0 && rows[idx - 1].count == last {
        idx -= 1;
    }
    // The run must contain at least two caps to count as a plateau.
    if rows.len() - idx >= 2 {
        Some(rows[idx].r_max)
    } else {
        None
    }
}

/// One candidate family whose tail index is unbounded: for every
/// `r >= 5`, the root built from `head + (sigma5 - 1) x (1,5) + (1,r)`
/// satisfies every applicable volume floor.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceWitness {
    pub tuple: crate::b5::PlurigenusTuple,
    pub sigma5: i64,
    /// The non-tail multiplicities `(n12, n25, n13, n14)`.
    pub head: (i64, i64, i64, i64),
    /// `K^3` of the witness root as the free tail index grows;
    /// approached strictly from above, so floors at exactly this value
    /// still pass for every finite `r`.
    pub limit_k3: String,
}

/// Tail-cap analysis: either every family dies past `cap`, or the
/// listed families pass their floors for arbitrarily large tail index.
#[derive(Debug, Clone, Serialize)]
pub struct TailAnalysis {
    pub cap: Option<i64>,
    pub witnesses: Vec<DivergenceWitness>,
}

/// Decides whether any finite tail cap is exhaustive.
///
/// For a fixed tuple and `sigma5 >= 1`, the root of maximal volume
/// containing a point `(1, r)` puts every other tail point at `(1, 5)`;
/// its volume is `(a - 1) + 1/r` with `a` constant in `r`, strictly
/// decreasing. Once that root fails a floor applicable at the tuple's
/// `P_6`, every root using an index `>= r` fails it, and packing only
/// lowers the volume further. If instead the limit `a - 1` clears every
/// applicable floor, the family survives for all `r` and the
/// enumeration has no finite cap; such families are reported as
/// witnesses.
pub fn tail_analysis(c: &ConstraintSet) -> TailAnalysis {
    let mut cap: i64 = 5;
    let mut witnesses = Vec::new();
    for t in c.tuples() {
        let upper = t.sigma5_upper();
        for sigma5 in 1..=upper.max(0) {
            let (n12, n25, n13, n14) = crate::b5::n5_coefficients(&t, sigma5);
            if n12 < 0 || n25 < 0 || n13 < 0 || n14 < 0 {
                continue;
            }
            let l2 =
                |b: i64, r: i64| local_l(&crate::basket::BasketPoint::normalize(b, r).unwrap(), 2);
            let base = int(n12) * l2(1, 2)
                + int(n25) * l2(2, 5)
                + int(n13) * l2(1, 3)
                + int(n14) * l2(1, 4)
                + int(sigma5 - 1) * l2(1, 5);
            let a = int(2) * (int(t.p2 + 3 * t.chi) - base);
            let limit = a.clone() - int(1);
            let mut tuple_cap: Option<i64> = None; // None = unbounded so far
            let mut feasible = true;
            let mut floors: Vec<(Rat, bool)> = vec![(c.k3_floor.clone(), false)];
            for f in &c.staged {
                if t.p6 >= f.p6_min {
                    floors.push((f.bound.clone(), f.strict));
                }
            }
            for (bound, strict) in floors {
                // Need 1/r >= bound + 1 - a (or > for strict floors).
                let rhs = bound + int(1) - a.clone();
                if rhs <= int(0) {
                    // Every r satisfies this floor (1/r > 0).
                    continue;
                }
                let inv = rhs.recip();
                let mut max_r = inv.floor().to_integer();
                if strict && inv.is_integer() {
                    max_r -= 1;
                }
                let max_r = i64::try_from(max_r).unwrap_or(i64::MAX);
                if max_r < 5 {
                    feasible = false;
                    break;
                }
                tuple_cap = Some(tuple_cap.map_or(max_r, |c: i64| c.min(max_r)));
            }
            if !feasible {
                continue;
            }
            match tuple_cap {
                None => witnesses.push(DivergenceWitness {
                    tuple: t,
                    sigma5,
                    head: (n12, n25, n13, n14),
                    limit_k3: fmt_rat(&limit),
                }),
                Some(r) => cap = cap.max(r),
            }
        }
    }
    TailAnalysis {
        cap: if witnesses.is_empty() {
            Some(cap)
        } else {
            None
        },
        witnesses,
    }
}

/// Everything needed to judge a reproduction attempt against a target
/// cardinality: the sweep table, the tail analysis with divergence
/// witnesses, rejection tallies, and the per-class histogram at the
/// largest swept cap. This is the machine-readable discrepancy report
/// when the target is not met.
#[derive(Debug, Serialize)]
pub struct ReproductionReport {
    pub target: usize,
    pub sweep: SweepReport,
    pub tail: TailAnalysis,
    /// `Some(count)` only when the sweep stabilized.
    pub final_count: Option<usize>,
    pub matched: bool,
    pub summary_at_largest_cap: S2Summary,
    pub b5_stats_at_largest_cap: crate::b5::B5Stats,
}

/// Runs the sweep and assembles the full report against `target`.
pub fn reproduction_report(
    c: &ConstraintSet,
    r_values: &[i64],
    target: usize,
) -> Result<ReproductionReport, B5Error> {
    let sweep = stabilization_sweep(c, r_values)?;
    let tail = tail_analysis(c);
    let final_count = match (sweep.stable_at, tail.cap) {
        // A plateau only counts as final when the analysis confirms no
        // family survives past the swept range.
        (Some(_), Some(cap)) if *r_values.last().unwrap() >= cap => {
            Some(sweep.rows.last().unwrap().count)
        }
        _ => None,
    };
    let mut cl = c.clone();
    cl.r_max = *r_values.last().unwrap();
    let (_, stats) = crate::b5::enumerate_b5_with_stats(&cl)?;
    let entries = enumerate_s2(&cl)?;
    Ok(ReproductionReport {
        target,
        matched: final_count == Some(target),
        final_count,
        sweep,
        tail,
        summary_at_largest_cap: summarize(&entries),
        b5_stats_at_largest_cap: stats,
    })
}

/// Summary statistics for a finished enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S2Summary {
    pub total: usize,
    /// Histogram over `(chi, P_2)` as "chi,p2" keys in sorted order.
    pub by_chi_p2: BTreeMap<String, usize>,
    pub min_k3: Option<String>,
    pub max_k3: Option<String>,
}

pub fn summarize(entries: &[S2Entry]) -> S2Summary {
    let mut by_chi_p2: BTreeMap<String, usize> = BTreeMap::new();
    for e in entries {
        *by_chi_p2
            .entry(format!("{},{}", e.weighted.chi, e.weighted.p2))
            .or_insert(0) += 1;
    }
    let min_k3 = entries.iter().map(|e| &e.k3).min().map(fmt_rat);
    let max_k3 = entries.iter().map(|e| &e.k3).max().map(fmt_rat);
    S2Summary {
        total: entries.len(),
        by_chi_p2,
        min_k3,
        max_k3,
    }
}

/// Serialization record for one entry, one JSON object per line.
#[derive(Debug, Serialize, Deserialize)]
pub struct S2Record {
    pub chi: i64,
    pub p: [i64; 5],
    pub sigma5: i64,
    pub basket: Basket,
    pub k3: String,
    pub depth: usize,
}

impl From<&S2Entry> for S2Record {
    fn from(e: &S2Entry) -> Self {
        S2Record {
            chi: e.weighted.chi,
            p: e.plurigenera,
            sigma5: e.origin_sigma5,
            basket: e.weighted.basket.clone(),
            k3: fmt_rat(&e.k3),
            depth: e.depth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::b5::PlurigenusTuple;
    use crate::rat;

    fn anchor_root() -> B5Candidate {
        let c = ConstraintSet::standard(5);
        enumerate_b5(&c)
            .unwrap()
            .into_iter()
            .find(|cand| {
                cand.source
                    == PlurigenusTuple {
                        chi: 0,
                        p2: 3,
                        p3: 5,
                        p4: 9,
                        p5: 13,
                        p6: 20,
                    }
                    && cand.sigma5 == 0
            })
            .unwrap()
    }

    #[test]
    fn root_with_no_packings_is_its_own_descendant() {
        let c = ConstraintSet::standard(5);
        let mut root = anchor_root();
        // Replace the basket by a singleton with the same invariants
        // class: (1,2) alone admits no packing.
        root.weighted = WeightedBasket::new(
            Basket::from_pairs([(1, 2)]).unwrap(),
            root.source.p2,
            root.source.chi,
        );
        let ds = descendants(&root, &c);
        // chi_m of this artificial basket does not match the tuple, so
        // nothing is accepted; the traversal still terminates at depth 0.
        assert!(ds.is_empty());

        let real = anchor_root();
        let ds = descendants(&real, &c);
        assert!(ds
            .iter()
            .any(|e| e.depth == 0 && e.weighted == real.weighted));
    }

    #[test]
    fn packing_child_drops_k3_by_exact_step() {
        let root = anchor_root();
        // (1,2)+(1,3) -> (2,5) inside the anchor basket.
        let mv = root
            .weighted
            .basket
            .available_packings()
            .into_iter()
            .find(|m| m.result == crate::basket::BasketPoint::normalize(2, 5).unwrap())
            .unwrap();
        let child = root.weighted.basket.apply_packing(&mv).unwrap();
        let child_w = WeightedBasket::new(child, root.source.p2, root.source.chi);
        assert_eq!(root.weighted.k3() - child_w.k3(), rat(1, 30));
    }

    #[test]
    fn diamond_is_reported_once() {
        // Basket with two disjoint packable pairs: the doubly-packed
        // basket is reachable along two orders but listed once.
        let c = ConstraintSet::standard(5);
        let root = anchor_root();
        let mut counts: BTreeMap<Basket, usize> = BTreeMap::new();
        for e in descendants(&root, &c) {
            *counts.entry(e.weighted.basket.clone()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&n| n == 1));
    }

    #[test]
    fn dedup_and_determinism_across_thread_counts() {
        let c = ConstraintSet::standard(5);
        let baseline = enumerate_s2(&c).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let run = pool.install(|| enumerate_s2(&c).unwrap());
            assert_eq!(run, baseline);
        }
        // Keys are unique after deduplication.
        let mut keys: Vec<_> = baseline.iter().map(|e| e.key().clone()).collect();
        keys.dedup();
        assert_eq!(keys.len(), baseline.len());
    }

    #[test]
    fn sweep_flags_plateau() {
        let rows = vec![
            SweepRow {
                r_max: 5,
                count: 10,
            },
            SweepRow {
                r_max: 6,
                count: 12,
            },
            SweepRow {
                r_max: 7,
                count: 12,
            },
        ];
        assert_eq!(stable_prefix(&rows), Some(6));

        let rows = vec![
            SweepRow {
                r_max: 5,
                count: 10,
            },
            SweepRow {
                r_max: 6,
                count: 12,
            },
        ];
        assert_eq!(stable_prefix(&rows), None);

        let rows = vec![
            SweepRow {
                r_max: 5,
                count: 10,
            },
            SweepRow {
                r_max: 6,
                count: 10,
            },
            SweepRow {
                r_max: 7,
                count: 10,
            },
        ];
        assert_eq!(stable_prefix(&rows), Some(5));
    }

    #[test]
    fn raising_the_floor_empties_the_list() {
        let mut c = ConstraintSet::standard(5);
        c.k3_floor = int(10);
        assert!(enumerate_s2(&c).unwrap().is_empty());
    }

    #[test]
    fn tail_analysis_finds_unbounded_families() {
        // Under the standard constraints, {9x(1,2), (1,r)} with tuple
        // (chi=0, 3,5,11,17,28) passes for every r: no finite cap.
        let c = ConstraintSet::standard(5);
        let analysis = tail_analysis(&c);
        assert_eq!(analysis.cap, None);
        let witness = analysis
            .witnesses
            .iter()
            .find(|w| w.head == (9, 0, 0, 0) && w.sigma5 == 1)
            .expect("known witness present");
        assert_eq!(
            (witness.tuple.chi, witness.tuple.p2, witness.tuple.p3),
            (0, 3, 5)
        );
        assert_eq!(witness.limit_k3, "1/2");

        // Verify the witness concretely at two big indices: accepted
        // root each time, so the list grows with the cap.
        for r in [50, 500] {
            let mut pairs = vec![(1, 2); 9];
            pairs.push((1, r));
            let w = WeightedBasket::new(
                Basket::from_pairs(pairs).unwrap(),
                witness.tuple.p2,
                witness.tuple.chi,
            );
            assert!(c.k3_ok(witness.tuple.p6, &w.k3()));
            for (m, want) in [
                (3, witness.tuple.p3),
                (4, witness.tuple.p4),
                (5, witness.tuple.p5),
                (6, witness.tuple.p6),
            ] {
                assert_eq!(w.chi_m(m), int(want));
            }
            assert!(w.basket.available_packings().is_empty());
        }

        // With the floor high enough that no tail family survives, the
        // analysis returns a finite cap.
        let mut strict = c.clone();
        strict.k3_floor = rat(9, 10);
        let analysis = tail_analysis(&strict);
        assert!(analysis.witnesses.is_empty());
        assert!(analysis.cap.is_some());
    }

    #[test]
    fn reproduction_report_shape() {
        let c = ConstraintSet::standard(5);
        let report = reproduction_report(&c, &[5, 6], 263).unwrap();
        assert_eq!(report.target, 263);
        assert!(!report.matched);
        assert_eq!(report.final_count, None);
        assert_eq!(report.sweep.rows.len(), 2);
        assert!(report.sweep.rows[1].count > report.sweep.rows[0].count);
        assert!(!report.tail.witnesses.is_empty());
        assert_eq!(
            report.summary_at_largest_cap.total,
            report.sweep.rows[1].count
        );
        assert!(report.b5_stats_at_largest_cap.kept > 0);
    }
}

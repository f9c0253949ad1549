//! Baskets of terminal quotient singularities and the prime-packing move.
//!
//! A basket point `(b, r)` stands for a cyclic quotient singularity of
//! type `1/r (1, -1, b)`; the pairs `(b, r)` and `(r-b, r)` describe the
//! same singularity, so points are kept in the normalized form
//! `0 < 2b <= r`. A basket is a finite multiset of points held in a
//! total canonical order so that equality, hashing and deduplication
//! are well defined.

use crate::{rat, Rat};
use num_integer::Integer;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BasketError {
    #[error("basket point ({b},{r}) needs 0 < b < r")]
    OutOfRange { b: i64, r: i64 },
    #[error("basket point ({b},{r}) needs gcd(b,r) = 1")]
    NotCoprime { b: i64, r: i64 },
    #[error("malformed basket point `{0}`, expected b/r")]
    Parse(String),
    #[error("packing move is stale: {0}")]
    StaleMove(String),
}

/// One terminal quotient singularity, normalized so `0 < 2b <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasketPoint {
    b: i64,
    r: i64,
}

impl BasketPoint {
    /// Normalizes `(b, r)` to the representative with `2b <= r`,
    /// identifying `(b, r)` with `(r-b, r)`.
    pub fn normalize(b: i64, r: i64) -> Result<Self, BasketError> {
        if b <= 0 || b >= r {
            return Err(BasketError::OutOfRange { b, r });
        }
        if b.gcd(&r) != 1 {
            return Err(BasketError::NotCoprime { b, r });
        }
        Ok(BasketPoint { b: b.min(r - b), r })
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn r(&self) -> i64 {
        self.r
    }

    /// Determinant `b1*r2 - b2*r1` deciding whether two points pack.
    pub fn det(&self, other: &BasketPoint) -> i64 {
        self.b * other.r - other.b * self.r
    }

    /// The merged point `(b1+b2, r1+r2)`. Only meaningful when
    /// `det == ±1`; coprimality and normalization then hold
    /// automatically.
    pub fn merge(&self, other: &BasketPoint) -> BasketPoint {
        BasketPoint {
            b: self.b + other.b,
            r: self.r + other.r,
        }
    }
}

impl fmt::Display for BasketPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.b, self.r)
    }
}

/// A finite multiset of basket points in canonical order (sorted by
/// `(r, b)`). Two baskets are equal iff their canonical sequences are.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Basket {
    points: Vec<BasketPoint>,
}

impl Basket {
    pub fn new(mut points: Vec<BasketPoint>) -> Self {
        points.sort_by_key(|p| (p.r, p.b));
        Basket { points }
    }

    /// Builds a basket from raw `(b, r)` pairs, normalizing each.
    pub fn from_pairs<I: IntoIterator<Item = (i64, i64)>>(pairs: I) -> Result<Self, BasketError> {
        let points = pairs
            .into_iter()
            .map(|(b, r)| BasketPoint::normalize(b, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Basket::new(points))
    }

    pub fn points(&self) -> &[BasketPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sigma = Σ b_i`.
    pub fn sigma(&self) -> i64 {
        self.points.iter().map(|p| p.b).sum()
    }

    /// `sigma' = Σ b_i^2 / r_i`, exact.
    pub fn sigma_prime(&self) -> Rat {
        self.points
            .iter()
            .map(|p| rat(p.b * p.b, p.r))
            .fold(rat(0, 1), |acc, x| acc + x)
    }

    /// All prime packings available on this basket: unordered pairs
    /// `{p_i, p_j}` with `|b_i r_j - b_j r_i| = 1`, listed once per
    /// multiset-distinct pair. Indices refer to the canonical order.
    pub fn available_packings(&self) -> Vec<PackingMove> {
        let mut moves = Vec::new();
        for i in 0..self.points.len() {
            // Skip duplicates of the first point: a pair of equal points
            // has determinant 0, and any later copy yields the same
            // multiset pair.
            if i > 0 && self.points[i] == self.points[i - 1] {
                continue;
            }
            for j in (i + 1)..self.points.len() {
                if j > i + 1 && self.points[j] == self.points[j - 1] {
                    continue;
                }
                let p = &self.points[i];
                let q = &self.points[j];
                if p.det(q).abs() == 1 {
                    moves.push(PackingMove {
                        first: i,
                        second: j,
                        result: p.merge(q),
                    });
                }
            }
        }
        moves
    }

    /// Applies a prime packing: removes the two source points and
    /// inserts the merged point, keeping canonical order. Rejects moves
    /// that no longer describe this basket.
    pub fn apply_packing(&self, m: &PackingMove) -> Result<Basket, BasketError> {
        if m.first >= m.second || m.second >= self.points.len() {
            return Err(BasketError::StaleMove(format!(
                "indices ({}, {}) out of range for {} points",
                m.first,
                m.second,
                self.points.len()
            )));
        }
        let p = self.points[m.first];
        let q = self.points[m.second];
        if p.det(&q).abs() != 1 {
            return Err(BasketError::StaleMove(format!(
                "points {p} and {q} do not satisfy the determinant condition"
            )));
        }
        if p.merge(&q) != m.result {
            return Err(BasketError::StaleMove(format!(
                "recorded result {} differs from {}",
                m.result,
                p.merge(&q)
            )));
        }
        let mut points = Vec::with_capacity(self.points.len() - 1);
        for (i, pt) in self.points.iter().enumerate() {
            if i != m.first && i != m.second {
                points.push(*pt);
            }
        }
        points.push(m.result);
        Ok(Basket::new(points))
    }
}

/// A prime packing: two source points (by index into the canonical
/// order) merged into `(b1+b2, r1+r2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingMove {
    pub first: usize,
    pub second: usize,
    pub result: BasketPoint,
}

impl fmt::Display for Basket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.points.is_empty() {
            return write!(f, "-");
        }
        let parts: Vec<String> = self.points.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Basket {
    type Err = BasketError;

    /// Parses the text form "b/r,b/r,...". Input order is free; the
    /// result is canonical. "-" or the empty string is the empty basket.
    fn from_str(s: &str) -> Result<Self, BasketError> {
        let s = s.trim();
        if s.is_empty() || s == "-" {
            return Ok(Basket::default());
        }
        let mut pairs = Vec::new();
        for part in s.split(',') {
            let (b, r) = part
                .split_once('/')
                .ok_or_else(|| BasketError::Parse(part.to_string()))?;
            let b: i64 = b
                .trim()
                .parse()
                .map_err(|_| BasketError::Parse(part.to_string()))?;
            let r: i64 = r
                .trim()
                .parse()
                .map_err(|_| BasketError::Parse(part.to_string()))?;
            pairs.push((b, r));
        }
        Basket::from_pairs(pairs)
    }
}

impl Basket {
    fn to_pairs(&self) -> Vec<[i64; 2]> {
        self.points.iter().map(|p| [p.b, p.r]).collect()
    }
}

/// Standalone JSON form: `{"points": [[b, r], ...]}`.
impl Serialize for Basket {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            points: Vec<[i64; 2]>,
        }
        Repr {
            points: self.to_pairs(),
        }
        .serialize(serializer)
    }
}

/// Accepts both the object form and a bare pair array.
impl<'de> Deserialize<'de> for Basket {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Object { points: Vec<[i64; 2]> },
            Bare(Vec<[i64; 2]>),
        }
        let pairs = match Repr::deserialize(deserializer)? {
            Repr::Object { points } => points,
            Repr::Bare(points) => points,
        };
        Basket::from_pairs(pairs.into_iter().map(|[b, r]| (b, r)))
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Record fields serialize the basket as the bare pair array, matching
/// the JSON-lines schema.
pub mod pairs_form {
    use super::*;

    pub fn serialize<S: Serializer>(basket: &Basket, serializer: S) -> Result<S::Ok, S::Error> {
        basket.to_pairs().serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Basket, D::Error> {
        Basket::deserialize(deserializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::int;

    fn pt(b: i64, r: i64) -> BasketPoint {
        BasketPoint::normalize(b, r).unwrap()
    }

    #[test]
    fn normalize_representative() {
        assert_eq!(pt(1, 2), BasketPoint { b: 1, r: 2 });
        assert_eq!(pt(4, 5), BasketPoint { b: 1, r: 5 });
        assert_eq!(pt(3, 7), BasketPoint { b: 3, r: 7 });
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert_eq!(
            BasketPoint::normalize(2, 4),
            Err(BasketError::NotCoprime { b: 2, r: 4 })
        );
        assert_eq!(
            BasketPoint::normalize(0, 3),
            Err(BasketError::OutOfRange { b: 0, r: 3 })
        );
        assert_eq!(
            BasketPoint::normalize(3, 3),
            Err(BasketError::OutOfRange { b: 3, r: 3 })
        );
        assert_eq!(
            BasketPoint::normalize(5, 3),
            Err(BasketError::OutOfRange { b: 5, r: 3 })
        );
    }

    #[test]
    fn sigma_of_empty_basket() {
        let b = Basket::default();
        assert_eq!(b.sigma(), 0);
        assert_eq!(b.sigma_prime(), int(0));
    }

    #[test]
    fn sigma_of_single_point() {
        let b = Basket::from_pairs([(1, 2)]).unwrap();
        assert_eq!(b.sigma(), 1);
        assert_eq!(b.sigma_prime(), rat(1, 2));
    }

    #[test]
    fn sigma_of_reference_basket() {
        // 6x(1,2), (2,5), (1,3), (1,4): direct summation oracle.
        let mut pairs = vec![(1, 2); 6];
        pairs.extend([(2, 5), (1, 3), (1, 4)]);
        let b = Basket::from_pairs(pairs).unwrap();
        assert_eq!(b.sigma(), 10);
        // 6*(1/2) + 4/5 + 1/3 + 1/4 = 263/60
        assert_eq!(b.sigma_prime(), rat(263, 60));
    }

    #[test]
    fn packings_of_small_baskets() {
        let b = Basket::from_pairs([(1, 2), (1, 3)]).unwrap();
        let moves = b.available_packings();
        assert_eq!(moves.len(), 1);
        assert_eq!(moves[0].result, pt(2, 5));

        let b = Basket::from_pairs([(1, 2), (1, 2)]).unwrap();
        assert!(b.available_packings().is_empty());
    }

    #[test]
    fn packings_listed_once_per_distinct_pair() {
        let b = Basket::from_pairs([(1, 2), (2, 5), (1, 3)]).unwrap();
        let mut results: Vec<BasketPoint> =
            b.available_packings().iter().map(|m| m.result).collect();
        results.sort();
        assert_eq!(results, vec![pt(2, 5), pt(3, 7), pt(3, 8)]);

        // Duplicated sources must not duplicate the move.
        let b = Basket::from_pairs([(1, 2), (1, 2), (1, 3)]).unwrap();
        assert_eq!(b.available_packings().len(), 1);
    }

    #[test]
    fn apply_packing_merges_and_keeps_rest() {
        let b = Basket::from_pairs([(1, 2), (1, 3)]).unwrap();
        let m = &b.available_packings()[0];
        assert_eq!(
            b.apply_packing(m).unwrap(),
            Basket::from_pairs([(2, 5)]).unwrap()
        );

        let b = Basket::from_pairs([(1, 2), (2, 5)]).unwrap();
        let m = &b.available_packings()[0];
        assert_eq!(
            b.apply_packing(m).unwrap(),
            Basket::from_pairs([(3, 7)]).unwrap()
        );

        let b = Basket::from_pairs([(1, 2), (1, 2), (1, 3)]).unwrap();
        let m = &b.available_packings()[0];
        assert_eq!(
            b.apply_packing(m).unwrap(),
            Basket::from_pairs([(1, 2), (2, 5)]).unwrap()
        );
    }

    #[test]
    fn apply_packing_rejects_stale_moves() {
        let b = Basket::from_pairs([(1, 2), (1, 3)]).unwrap();
        let m = b.available_packings()[0];
        let packed = b.apply_packing(&m).unwrap();
        assert!(matches!(
            packed.apply_packing(&m),
            Err(BasketError::StaleMove(_))
        ));

        let wrong_result = PackingMove {
            first: 0,
            second: 1,
            result: pt(3, 7),
        };
        assert!(matches!(
            b.apply_packing(&wrong_result),
            Err(BasketError::StaleMove(_))
        ));
    }

    #[test]
    fn text_and_json_forms() {
        let b = Basket::from_pairs([(2, 5), (1, 2), (1, 2), (1, 3)]).unwrap();
        assert_eq!(b.to_string(), "1/2,1/2,1/3,2/5");
        assert_eq!("1/2, 1/2, 2/5, 1/3".parse::<Basket>().unwrap(), b);
        assert_eq!("".parse::<Basket>().unwrap(), Basket::default());
        assert!("1/2,zzz".parse::<Basket>().is_err());

        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[[1,2],[1,2],[1,3],[2,5]]");
        let back: Basket = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn canonical_order_is_insertion_invariant() {
        let a = Basket::from_pairs([(1, 4), (1, 2), (2, 5)]).unwrap();
        let b = Basket::from_pairs([(2, 5), (1, 4), (1, 2)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "1/2,1/4,2/5");
    }
}

//! Higher-order objects as families of finite approximations: function
//! tables between natural-number stages with restriction, the index sets on
//! which such a family is coherent, finite ordinals, and decimal
//! approximants of reals that refine by appending digits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::indexing::IndexPoint;

/// Largest number of fractional digits [`sqrt2_approximant`] computes.
pub const SQRT2_GUARD: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HolError {
    #[error("{argument} maps to {value}, outside the codomain bound {bound}")]
    RangeEscape {
        argument: u32,
        value: u32,
        bound: IndexPoint,
    },
    #[error("cannot restrict {from_i}->{from_j} to the larger {to_i}->{to_j}")]
    NotSmaller {
        from_i: IndexPoint,
        from_j: IndexPoint,
        to_i: IndexPoint,
        to_j: IndexPoint,
    },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("{requested} digits requested, at most {guard} supported")]
    PrecisionExceeded { requested: usize, guard: usize },
    #[error("`{0}` is not a decimal numeral")]
    InvalidDecimal(String),
}

/// A total function from `{0..i-1}` to `{0..j-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FunctionApproximation {
    domain: IndexPoint,
    codomain: IndexPoint,
    table: Vec<u32>,
}

impl FunctionApproximation {
    pub fn new(
        domain: IndexPoint,
        codomain: IndexPoint,
        table: Vec<u32>,
    ) -> Result<Self, HolError> {
        if table.len() != domain as usize {
            return Err(HolError::InvalidTable(format!(
                "{} values for a domain of size {domain}",
                table.len()
            )));
        }
        if let Some((n, &v)) = table.iter().enumerate().find(|(_, &v)| v >= codomain) {
            return Err(HolError::RangeEscape {
                argument: n as u32,
                value: v,
                bound: codomain,
            });
        }
        Ok(FunctionApproximation {
            domain,
            codomain,
            table,
        })
    }

    /// The approximation of `f` on `{0..i-1}` into `{0..j-1}`.
    pub fn from_fn(
        domain: IndexPoint,
        codomain: IndexPoint,
        f: impl Fn(u32) -> u32,
    ) -> Result<Self, HolError> {
        Self::new(domain, codomain, (0..domain).map(f).collect())
    }

    pub fn domain(&self) -> IndexPoint {
        self.domain
    }

    pub fn codomain(&self) -> IndexPoint {
        self.codomain
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn apply(&self, n: u32) -> Option<u32> {
        self.table.get(n as usize).copied()
    }

    /// The restriction to `{0..i-1}` into `{0..j-1}`.
    pub fn restrict(&self, i: IndexPoint, j: IndexPoint) -> Result<Self, HolError> {
        if i > self.domain || j > self.codomain {
            return Err(HolError::NotSmaller {
                from_i: self.domain,
                from_j: self.codomain,
                to_i: i,
                to_j: j,
            });
        }
        Self::new(i, j, self.table[..i as usize].to_vec())
    }
}

/// Free-function form of [`FunctionApproximation::restrict`].
pub fn restrict(
    f: &FunctionApproximation,
    i: IndexPoint,
    j: IndexPoint,
) -> Result<FunctionApproximation, HolError> {
    f.restrict(i, j)
}

/// Index pairs `(i, j)` with `1 <= i, j <= bound`, listed explicitly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SuitableIndexSet {
    bound: IndexPoint,
    members: BTreeSet<(IndexPoint, IndexPoint)>,
}

impl SuitableIndexSet {
    pub fn from_pairs(
        bound: IndexPoint,
        pairs: impl IntoIterator<Item = (IndexPoint, IndexPoint)>,
    ) -> Self {
        SuitableIndexSet {
            bound,
            members: pairs.into_iter().collect(),
        }
    }

    /// `{(i, j) : j > max_{n<i} f(n)}` for `f` given on `{0..bound-1}`.
    pub fn above_maximum(f: &[u32], bound: IndexPoint) -> Self {
        let mut members = BTreeSet::new();
        for i in 1..=bound.min(f.len() as IndexPoint) {
            let m = prefix_max(f, i);
            members.extend((m + 1..=bound).map(|j| (i, j)));
        }
        SuitableIndexSet { bound, members }
    }

    pub fn contains(&self, i: IndexPoint, j: IndexPoint) -> bool {
        self.members.contains(&(i, j))
    }

    pub fn members(&self) -> impl Iterator<Item = (IndexPoint, IndexPoint)> + '_ {
        self.members.iter().copied()
    }

    pub fn bound(&self) -> IndexPoint {
        self.bound
    }
}

fn prefix_max(f: &[u32], i: IndexPoint) -> u32 {
    f[..i as usize].iter().copied().max().unwrap_or(0)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuitabilityReport {
    pub members: usize,
    /// Pairs where membership disagrees with `j > max_{n<i} f(n)`.
    pub membership_mismatches: Vec<(IndexPoint, IndexPoint)>,
    /// Members whose table cannot even be formed.
    pub invalid_members: Vec<(IndexPoint, IndexPoint)>,
    /// Member pairs `(small, large)` where restricting the larger table does
    /// not give the smaller one.
    pub incoherent: Vec<((IndexPoint, IndexPoint), (IndexPoint, IndexPoint))>,
}

impl SuitabilityReport {
    pub fn passed(&self) -> bool {
        self.membership_mismatches.is_empty()
            && self.invalid_members.is_empty()
            && self.incoherent.is_empty()
    }
}

/// Checks `h` against the closed form for `f` on all pairs up to `bound`,
/// and checks that the family `f_{i->j}` over `h` is coherent under
/// restriction.
pub fn check_suitable(
    f: &[u32],
    h: &SuitableIndexSet,
    bound: IndexPoint,
) -> Result<SuitabilityReport, HolError> {
    if f.len() < bound as usize {
        return Err(HolError::InvalidTable(format!(
            "f is given on {} points, {bound} needed",
            f.len()
        )));
    }
    let mut report = SuitabilityReport::default();
    for i in 1..=bound {
        let m = prefix_max(f, i);
        for j in 1..=bound {
            if h.contains(i, j) != (j > m) {
                report.membership_mismatches.push((i, j));
            }
        }
    }
    let mut family = Vec::new();
    for (i, j) in h.members().filter(|&(i, j)| i <= bound && j <= bound) {
        report.members += 1;
        match FunctionApproximation::new(i, j, f[..i as usize].to_vec()) {
            Ok(a) => family.push(a),
            Err(_) => report.invalid_members.push((i, j)),
        }
    }
    for small in &family {
        for large in &family {
            if (small.domain, small.codomain) == (large.domain, large.codomain)
                || small.domain > large.domain
                || small.codomain > large.codomain
            {
                continue;
            }
            if large.restrict(small.domain, small.codomain).as_ref() != Ok(small) {
                report.incoherent.push((
                    (small.domain, small.codomain),
                    (large.domain, large.codomain),
                ));
            }
        }
    }
    Ok(report)
}

/// The von Neumann ordinal `n`, represented by its elements `0..n-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrdinalApproximant {
    pub n: u32,
    pub elements: Vec<u32>,
}

impl OrdinalApproximant {
    pub fn contains(&self, m: u32) -> bool {
        m < self.n
    }

    pub fn is_subset_of(&self, other: &OrdinalApproximant) -> bool {
        self.elements.iter().all(|&m| other.contains(m))
    }
}

pub fn omega_stage(n: u32) -> OrdinalApproximant {
    OrdinalApproximant {
        n,
        elements: (0..n).collect(),
    }
}

/// The successor map on the finite ordinals: `n -> n'` iff `n` is an
/// element of `n'`.
pub fn smap_omega(n: u32, n2: u32) -> bool {
    omega_stage(n2).contains(n)
}

/// A decimal numeral such as `1` or `1.41`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct DecimalApproximant(String);

impl DecimalApproximant {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn fractional_digits(&self) -> usize {
        self.0.split_once('.').map_or(0, |(_, f)| f.len())
    }
}

impl FromStr for DecimalApproximant {
    type Err = HolError;

    fn from_str(s: &str) -> Result<Self, HolError> {
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        let ok = match s.split_once('.') {
            Some((int, frac)) => digits(int) && digits(frac),
            None => digits(s),
        };
        if ok {
            Ok(DecimalApproximant(s.to_string()))
        } else {
            Err(HolError::InvalidDecimal(s.to_string()))
        }
    }
}

impl fmt::Display for DecimalApproximant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Truncation of the square root of two to `k` fractional digits, from the
/// integer square root of `2 * 10^(2k)`.
pub fn sqrt2_approximant(k: usize) -> Result<DecimalApproximant, HolError> {
    if k > SQRT2_GUARD {
        return Err(HolError::PrecisionExceeded {
            requested: k,
            guard: SQRT2_GUARD,
        });
    }
    let r = (2 * 10u128.pow(2 * k as u32)).isqrt().to_string();
    let (int, frac) = r.split_at(r.len() - k);
    Ok(DecimalApproximant(if k == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    }))
}

/// The ten refinements of `a` by one more digit.
pub fn differentiate(a: &DecimalApproximant) -> Vec<DecimalApproximant> {
    let sep = if a.0.contains('.') { "" } else { "." };
    (0..10)
        .map(|d| DecimalApproximant(format!("{}{sep}{d}", a.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling(n: u32) -> FunctionApproximation {
        FunctionApproximation::from_fn(n, 2 * n - 1, |x| 2 * x).unwrap()
    }

    #[test]
    fn restriction_examples() {
        let f = doubling(5);
        assert_eq!(f.codomain(), 9);
        assert_eq!(f.restrict(3, 5).unwrap().table(), &[0, 2, 4]);
        assert_eq!(f.restrict(5, 9).unwrap(), f);
        assert_eq!(
            f.restrict(4, 5),
            Err(HolError::RangeEscape {
                argument: 3,
                value: 6,
                bound: 5
            })
        );
        assert!(matches!(f.restrict(6, 9), Err(HolError::NotSmaller { .. })));
    }

    #[test]
    fn suitable_examples() {
        let dbl: Vec<u32> = (0..20).map(|n| 2 * n).collect();
        let h = SuitableIndexSet::above_maximum(&dbl, 20);
        assert!(h.contains(3, 5));
        assert!(!h.contains(3, 4));
        assert!(check_suitable(&dbl, &h, 20).unwrap().passed());
        let zero = vec![0; 10];
        let h = SuitableIndexSet::above_maximum(&zero, 10);
        assert!((1..=10).all(|i| (1..=10).all(|j| h.contains(i, j))));
    }

    #[test]
    fn wrong_index_set_is_reported() {
        let dbl: Vec<u32> = (0..6).map(|n| 2 * n).collect();
        let mut pairs: Vec<_> = SuitableIndexSet::above_maximum(&dbl, 6).members().collect();
        pairs.push((3, 4));
        let r = check_suitable(&dbl, &SuitableIndexSet::from_pairs(6, pairs), 6).unwrap();
        assert_eq!(r.membership_mismatches, vec![(3, 4)]);
        assert_eq!(r.invalid_members, vec![(3, 4)]);
    }

    #[test]
    fn ordinals() {
        assert_eq!(omega_stage(3).elements, vec![0, 1, 2]);
        assert!(smap_omega(2, 3));
        assert!(!smap_omega(3, 3));
        for n in 0..8 {
            for m in 0..8 {
                assert_eq!(omega_stage(n).is_subset_of(&omega_stage(m)), n <= m);
            }
        }
    }

    #[test]
    fn sqrt2_and_differentiation() {
        assert_eq!(sqrt2_approximant(0).unwrap().as_str(), "1");
        assert_eq!(sqrt2_approximant(2).unwrap().as_str(), "1.41");
        assert_eq!(sqrt2_approximant(3).unwrap().as_str(), "1.414");
        assert!(sqrt2_approximant(13).is_err());
        let kids: Vec<String> = differentiate(&"1.41".parse().unwrap())
            .iter()
            .map(|d| d.to_string())
            .collect();
        assert_eq!(
            kids,
            [
                "1.410", "1.411", "1.412", "1.413", "1.414", "1.415", "1.416", "1.417", "1.418",
                "1.419"
            ]
        );
        let kids = differentiate(&"1".parse().unwrap());
        assert_eq!(kids.first().unwrap().as_str(), "1.0");
        assert_eq!(kids.last().unwrap().as_str(), "1.9");
        assert!("1.".parse::<DecimalApproximant>().is_err());
        assert!("x".parse::<DecimalApproximant>().is_err());
    }
}

//! Bundles of goods as fixed-width bit vectors.
//!
//! A bundle is a nonempty subset of a catalog of `n` goods (`1 <= n <= 16`).
//! Bit `i` is set when good `i` is present. Bundles order by their integer
//! bit value, which gives a deterministic iteration order everywhere else in
//! the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported catalog.
pub const MAX_GOODS: usize = 16;

/// Index of a single good in the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoodId(pub usize);

impl GoodId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Monetary amount; any finite real, negative values allowed.
pub type Price = f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Bundle {
    bits: u16,
    n: u8,
}

pub(crate) fn check_catalog(n: usize) -> Result<()> {
    if (1..=MAX_GOODS).contains(&n) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "catalog size must be in 1..={MAX_GOODS}, got {n}"
        )))
    }
}

impl Bundle {
    pub fn new(n: usize, bits: u32) -> Result<Self> {
        check_catalog(n)?;
        if bits == 0 {
            return Err(Error::Usage("the empty set is not a bundle".into()));
        }
        if bits >> n != 0 {
            return Err(Error::Usage(format!(
                "bits {bits:#b} reference goods outside a catalog of {n}"
            )));
        }
        Ok(Self {
            bits: bits as u16,
            n: n as u8,
        })
    }

    pub fn from_goods(n: usize, goods: &[usize]) -> Result<Self> {
        let mut bits = 0u32;
        for &g in goods {
            if g >= n {
                return Err(Error::Usage(format!("good {g} outside a catalog of {n}")));
            }
            bits |= 1 << g;
        }
        Self::new(n, bits)
    }

    /// The bundle containing every good.
    pub fn full(n: usize) -> Result<Self> {
        check_catalog(n)?;
        Self::new(n, (1u32 << n) - 1)
    }

    pub fn bits(self) -> u32 {
        self.bits as u32
    }

    pub fn catalog_size(self) -> usize {
        self.n as usize
    }

    /// Number of goods in the bundle.
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn contains(self, good: GoodId) -> bool {
        good.0 < self.n as usize && self.bits & (1 << good.0) != 0
    }

    pub fn goods(self) -> impl Iterator<Item = GoodId> {
        let bits = self.bits;
        (0..self.n as usize)
            .filter(move |i| bits & (1 << i) != 0)
            .map(GoodId)
    }

    pub fn is_subset_of(self, other: Bundle) -> bool {
        self.bits & !other.bits == 0
    }

    /// Flips one good; `None` when the result would be empty.
    pub fn toggled(self, good: GoodId) -> Option<Bundle> {
        let bits = self.bits ^ (1 << good.0);
        (bits != 0).then_some(Bundle { bits, n: self.n })
    }

    /// Binary string, most significant good first: `{0,2}` with `n = 4` is `"0101"`.
    pub fn to_bit_string(self) -> String {
        (0..self.n as usize)
            .rev()
            .map(|i| if self.bits & (1 << i) != 0 { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bit_string(s: &str) -> Result<Self> {
        let n = s.len();
        check_catalog(n)?;
        let mut bits = 0u32;
        for (pos, c) in s.chars().enumerate() {
            match c {
                '1' => bits |= 1 << (n - 1 - pos),
                '0' => {}
                _ => return Err(Error::Usage(format!("invalid bundle string {s:?}"))),
            }
        }
        Self::new(n, bits)
    }
}

/// Sorted good-index list, e.g. `{0,2,5}`.
impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, g) in self.goods().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", g.0)?;
        }
        write!(f, "}}")
    }
}

impl FromStr for Bundle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_bit_string(s)
    }
}

impl TryFrom<String> for Bundle {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse_bit_string(&s)
    }
}

impl From<Bundle> for String {
    fn from(b: Bundle) -> String {
        b.to_bit_string()
    }
}

/// Every nonempty subset of an `n`-good catalog, ascending by bit value.
pub fn all_bundles(n: usize) -> Result<Vec<Bundle>> {
    check_catalog(n)?;
    Ok((1u32..(1 << n))
        .map(|bits| Bundle {
            bits: bits as u16,
            n: n as u8,
        })
        .collect())
}

pub fn hamming(a: Bundle, b: Bundle) -> Result<u32> {
    if a.n != b.n {
        return Err(Error::Usage(format!(
            "hamming distance between catalogs of size {} and {}",
            a.n, b.n
        )));
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// All bundles at Hamming distance one from `b`, ascending by bit value.
pub fn neighborhood(b: Bundle) -> Vec<Bundle> {
    let mut out: Vec<Bundle> = (0..b.n as usize)
        .filter_map(|i| b.toggled(GoodId(i)))
        .collect();
    out.sort_unstable();
    out
}

/// Position of a bundle in [`all_bundles`] order.
pub(crate) fn bundle_index(b: Bundle) -> usize {
    b.bits as usize - 1
}

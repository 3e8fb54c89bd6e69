//! Bundle negotiation between customers and a recommending shop.
//!
//! Customers and the shop bargain over bundles of goods by alternating
//! offers. While bargaining, the shop may propose a neighboring bundle
//! (one good added or removed) that it expects to yield larger gains from
//! trade; which neighbor to propose comes from a [`background::NeighborRanker`].

pub mod background;
pub mod bundle;
pub mod error;
pub mod foreground;
pub mod mvn;
pub mod negotiation;
pub mod preferences;
pub mod seeds;

pub use bundle::{Bundle, GoodId, Price};
pub use error::{Error, Result};

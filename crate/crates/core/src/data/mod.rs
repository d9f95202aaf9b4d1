//! Schemas, typed CSV tables, encoding and splits.
//!
//! A schema file has one column per line, `name,kind[,extra]`:
//!
//! ```text
//! # comment
//! income,continuous
//! age,ordinal,0          # optional decimals, default 1
//! education,discrete,hs|college|grad
//! ```

mod encode;
mod schema;
mod table;

pub use encode::{decode, encode, load_split, split, EncodedDataset, Standardizer};
pub use schema::{Block, Column, ColumnKind, TabularSchema, DEFAULT_ORDINAL_DECIMALS};
pub use table::{ColumnData, Table};

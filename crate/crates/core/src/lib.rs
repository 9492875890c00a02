//! Security-closure kernel for row-based IC layouts.
//!
//! Everything in this crate operates on an in-memory layout model with
//! integer-nanometer coordinates: a rectangle-geometry kernel, occupancy
//! and vulnerable-region analysis, a nudge/push placement hardener, a
//! track-grid maze router with a DRC checker, asset-exposure analysis
//! with the two-phase routing hardener, and the weighted scoring engine.
//!
//! The crate is `no_std` (with `alloc`); parsing, file formats, and the
//! command-line pipeline live in the companion `secclose` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod exposure;
pub mod geom;
pub mod layout;
pub mod metrics;
pub mod route;
pub mod tech;
#[cfg(test)]
pub(crate) mod testutil;
pub mod ti;
pub mod vuln;

pub use config::RunConfig;
pub use geom::{exposed_region, union_area, Rect};
pub use layout::{AssetSet, Instance, IoPin, Layout, Net, Orient, PinRef, Row, SiteGrid};
pub use tech::{Dir, Layer, MacroDef, MacroPin, PinDir, Technology, ViaDef};

//! Equilibria, linear stability and Hopf detection.

pub mod characteristic;
pub mod equilibria;
pub mod oracles;
pub mod roots;
pub mod scan;

pub use characteristic::{build_characteristic, CharacteristicFn, StageLinearization};
pub use equilibria::{
    equilibrium_residual, equilibrium_state, find_equilibria, stage_balance_residual, Equilibrium, EquilibriumKind,
    EquilibriumReport,
};
pub use oracles::{
    cubic_roots, knauer_char_oracle, knauer_jacobian_char, knauer_jacobian_cubic, knauer_matrix_char,
    knauer_published_cubic, knauer_routh_hurwitz_crossing, routh_hurwitz_margin, yildirim_char_oracle,
};
pub use roots::{find_roots, find_roots_fn, find_roots_with, Grid, Region, Root, RootReport};
pub use scan::{analyze_point, hopf_scan, Crossing, ScanOptions, ScanPoint, ScanReport};

//! Seeded experiment sweeps reproducing the decoding, parsing and separation
//! measurements, with CSV output.

pub mod sampling;
mod separation;
mod sweep;

pub use separation::{
    run_separation_probe, write_separation_csv, SeparationReport, SeparationSpec,
};
pub use sweep::{
    boundary_search, run_list_sweep, run_parse_sweep, run_sweep, run_tree_sweep,
    write_boundary_csv, write_cells_csv, CellResult, SweepKind, SweepSpec,
};

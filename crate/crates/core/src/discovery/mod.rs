//! PC causal discovery over a [`DataTable`](crate::data::DataTable).

pub mod ci;
mod graph;
mod pc;

pub use ci::{
    correlation_matrix, critical_value, fisher_z_test, partial_correlation, CiTest, CiTestResult, DSeparationOracle,
    FisherZ,
};
pub use graph::{Cpdag, Dag, EdgeMark, EdgeRecord, GraphJson};
pub use pc::{
    apply_meek_rules, consistent_dag_extension, default_max_cond_size, orient_v_structures, pc, pc_skeleton,
    pc_with_test, OrientationConflict, PcResult, Skeleton, SepsetTable,
};

//! Hölder-function approximators built from the gadget library.

pub mod build;
pub mod hierarchical;
pub mod partition;
pub mod target;

pub use build::{
    build_check_net, build_holder_approximator, build_inner_net, build_patch_net, build_weight_net,
    holder_architecture, holder_weight_bound, score_grid, sup_error, Layout,
};
pub use hierarchical::{build_hierarchical_approximator, HierarchicalComposition, NodePlan};
pub use partition::{make_partitions, weight_w, Level, PartitionSpec, Partitions};
pub use target::TargetFunction;

//! Directions, projections, distance-set counting and conical density in the plane.

pub mod conical;
pub mod direction;
pub mod distance;
pub mod projection;

pub use conical::{conical_scan, empty_cone_ratio, exceptional_set, has_empty_cone, well_surrounded};
pub use direction::{direction, in_cone, Cone, Direction};
pub use distance::{
    distance_set_count, half_distance_entropy, pinned_distance_count, pinned_scan, PinPolicy,
    PinnedScan,
};
pub use projection::{
    direction_continuity_check, expected_projected_entropy, projected_entropy, projection_profile,
};

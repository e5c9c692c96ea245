//! Max-min fair sensing rates and routings for energy-harvesting sensor
//! networks over a finite horizon.

pub mod error;
pub mod fixed;
pub mod fixtures;
pub mod flow;
pub mod lp;
pub mod model;
pub mod packing;
pub mod routing;
pub mod unsplittable;

pub use error::{ModelError, SolveError};
pub use model::{
    check_feasible, descendant_counts, simulate_batteries, validate_instance, BatteryTrace, EnergyCosts,
    FeasibilityReport, FlowAssignment, Grid, NetworkInstance, NodeId, RateMatrix, RoutingPaths, ValidationReport,
    Violation,
};

/// Default search precision δ.
pub const DEFAULT_DELTA: f64 = 1e-9;

/// Bisection on a monotone predicate over `[lo, hi]` where `ok(lo)` holds.
/// Runs until the midpoint is no longer representable between the bounds,
/// or until the width falls below `width` when that is positive.
pub(crate) fn bisect_max(mut lo: f64, mut hi: f64, width: f64, mut ok: impl FnMut(f64) -> bool) -> f64 {
    if ok(hi) {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= width {
            return lo;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

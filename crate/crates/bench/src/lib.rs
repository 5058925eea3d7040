//! Fixtures shared by the benchmarks.

use gprt::experiment::{gen_instance, GeneratorConfig};
use gprt::expr::{parse_expr, ExprTree};
use gprt::sim::TerminalInstance;

/// The default desk-scale terminal: 2 quay cranes, 4 yard cranes, 6 trucks, 100 tasks.
pub fn desk_instance() -> TerminalInstance {
    gen_instance(1, &GeneratorConfig::desk()).expect("desk instance")
}

/// A mid-sized evolved-looking heuristic.
pub fn sample_heuristic() -> ExprTree {
    parse_expr("if_else >= travel 5 * qc_trucks qc_remain - max idle 2 / travel + dst_wait 1").expect("valid expression")
}

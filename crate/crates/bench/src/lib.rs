//! Fixtures shared by the benchmarks.

use smoothtest_core::signal::gen_null;
use smoothtest_core::{CoefficientTree, Layout, TestParams};

/// Parameters with cutoff level `j` for `t = 1` (`n = 2^{2.5 j + 1}`).
pub fn params_at_level(j: u32) -> TestParams {
    let n = 2f64.powf(2.5 * j as f64 + 1.0);
    TestParams::new(n, 1.0, 2.0, 1.0, 0.1).expect("valid parameters")
}

/// Worst-case null member covering levels `0..=l_max`.
pub fn null_tree(l_max: u32) -> CoefficientTree {
    gen_null(2.0, 1.0, Layout::default(), l_max, 1.0, 7).expect("valid null")
}

//! Fixtures shared by the benchmarks.

use fraclab_core::measures::{make_cantor_measure, product_measure};
use fraclab_core::{AtomBudget, CantorSpec, DiscreteMeasure};

/// Product of two middle-thirds Cantor measures at `depth`, `4^depth` atoms.
pub fn cantor_square(depth: u32) -> DiscreteMeasure {
    let c = make_cantor_measure(&CantorSpec::middle_thirds(depth), AtomBudget::DEFAULT).expect("within budget");
    product_measure(&c, &c, AtomBudget::DEFAULT).expect("within budget")
}

//! Fixtures shared by the benchmarks in `benches/`.

use semilab_core::model::{FieldExpr, GaussianAtom, Scenario};
use semilab_core::wigner::Observable;

pub fn gaussian(center: [f64; 3], inv_variance: f64) -> FieldExpr {
    FieldExpr::atom(GaussianAtom::plain(1.0, center.to_vec(), inv_variance))
}

/// Observable localized near the source with momenta along the outgoing rays.
pub fn observable() -> Observable {
    Observable::new(gaussian([0.5, 0.5, 0.0], 1.0), gaussian([-0.7, -0.7, 0.0], 2.0))
}

pub fn scenario() -> Scenario {
    Scenario::reference()
}

pub mod gaussian;
pub mod harness;
pub mod helmholtz;
pub mod liouville;
pub mod model;
pub mod norms;
pub mod oscillatory;
pub mod quadrature;
pub mod special;
pub mod wigner;

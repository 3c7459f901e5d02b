pub mod horizon;
pub mod lattice;
pub mod lp;
pub mod model;
pub mod rgp;
pub mod portfolio;

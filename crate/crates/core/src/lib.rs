pub mod asymptotics;
pub mod convex_order;
pub mod coupling;
pub mod disorder;
pub mod experiments;
pub mod lattice;
pub mod noise;
pub mod polymer;
pub mod quadrature;
pub mod rng;
pub mod stats;

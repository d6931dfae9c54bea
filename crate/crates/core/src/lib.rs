pub mod linalg;
pub mod mps;
pub mod models;
pub mod controller;
pub mod dmrg;

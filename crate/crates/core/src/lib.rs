//! Exact p-adic arithmetic, Haar measures on compact open sets, the ax+b
//! matched pair, eigenvalue lists of ITPFI factors and their type
//! classification.

pub mod bicrossed;
pub mod classifier;
pub mod eigen;
pub mod haar;
pub mod matched_pair;
pub mod padic;
pub mod rational;
pub mod rules;
pub mod series;
pub mod spec;
pub mod subset;

pub mod barriers;
pub mod cli;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod operator;
pub mod regularity;
pub mod solver;

pub mod basis;
pub mod cli;
pub mod compressible;
pub mod config;
pub mod csvio;
pub mod exec;
pub mod expr;
pub mod field;
pub mod grid;
pub mod incompressible;
pub mod inequality;
pub mod limit_lab;
pub mod operators;
pub mod presets;
pub mod quadrature;
mod source;

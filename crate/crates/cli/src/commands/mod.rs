//! One module per pipeline step.

pub mod evaluate;
pub mod gen_data;
pub mod heatmap;
pub mod prepare;
pub mod simulate;
pub mod train;

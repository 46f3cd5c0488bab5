//! Raw forward/backward kernels over flat slices. The tape wires them together.

pub mod attention;
pub mod conv;
pub mod loss;
pub mod norm;
pub mod pool;

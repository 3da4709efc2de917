//! Tensor kernels used by the backbone and by attention.

mod conv;
mod elementwise;
mod pool;

pub use conv::{conv2d, Padding};
pub use elementwise::{minmax_normalize, relu, resize_nn};
pub use pool::{avg_pool_2x2, ecc_avg_pool, ecc_rf_size, pooled_len, EccPoolConfig};

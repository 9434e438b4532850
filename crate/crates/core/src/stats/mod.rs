pub mod special;
pub mod welch;

pub use welch::{mean, sample_variance, welch_t_test, WelchResult, P_VALUE_FLOOR};

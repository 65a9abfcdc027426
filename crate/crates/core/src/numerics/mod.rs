//! Special functions, quantile inversion, root bracketing and reproducible
//! random-number streams.

mod rng;
mod root;
mod special;

pub use rng::{RngStream, StreamRng};
pub use root::{bracketed_root, RootOptions};
pub use special::{
    chisq_cdf, chisq_quantile, chisq_sf, gamma_p, gamma_q, ln_gamma, normal_cdf,
    normal_quantile, ChiSquared,
};

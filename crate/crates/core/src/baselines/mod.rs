//! Comparison recommenders.

mod tifuknn;
mod topfreq;
mod upcf;

pub use tifuknn::{
    group_sizes, pif, tifuknn_fit, tifuknn_grid, tifuknn_predict, PifVector, TifuknnGrid,
    TifuknnModel, TifuknnParams,
};
pub use topfreq::{g_topfreq, gp_topfreq, p_topfreq, GlobalPopularity};
pub use upcf::{similarity, upcf_fit, upcf_grid, upcf_predict, uwp, Recency, UpcfGrid, UpcfModel, UpcfParams};

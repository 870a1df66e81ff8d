pub mod corpus;
pub mod coxlasso;
pub mod error;
pub mod glasso;
pub mod linalg;
pub mod netselect;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod subsetval;
pub mod survstrat;
pub mod synthgen;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/glasso.md")]
    mod glasso {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cox.md")]
    mod cox {}
    #[doc = include_str!("../../../book/src/stratification.md")]
    mod stratification {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

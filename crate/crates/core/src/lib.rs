//! Pointer-generator abstractive summarization with the tooling to study
//! domain adaptation: extractive pre-training, in-domain, out-of-domain and
//! mixed-domain training, ROUGE/BLEU evaluation, and attention-based transfer
//! analysis.

pub mod analysis;
pub mod autodiff;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod training;

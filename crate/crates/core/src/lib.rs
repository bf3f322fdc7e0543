//! Multi-source simultaneous translation toolkit: transcript corpora, MT and
//! ASR metrics, a lexical ASR noise model, cross-lingual error independence
//! analysis, and a streaming decoding engine with mock translators.

pub mod corpus;
pub mod independence;
pub mod metrics;
pub mod mock_mt;
pub mod noise;
pub mod simul;
pub mod synthetic;

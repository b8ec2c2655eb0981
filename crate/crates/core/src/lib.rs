//! Statistical automatic post-editing (APE) of machine-translation output.
//!
//! The crate learns to correct raw MT output from parallel (MT, post-edited)
//! text. It is organised as a pipeline:
//!
//! * [`corpus`]: sentences, POS tags, tokenisation.
//! * [`edit_aligner`]: staged exact/stem/synonym monolingual alignment that
//!   minimises crossing links.
//! * [`stat_aligner`]: IBM Model 1 EM, Viterbi alignment and
//!   grow-diag-final-and symmetrisation.
//! * [`hybrid_align`]: combination of the two aligners over surface, stem,
//!   POS and bigram-POS views.
//! * [`rule_extract`]: phrase pairs, hierarchical SCFG rules, feature
//!   estimation and Good-Turing smoothing.
//! * [`ngram_lm`]: Katz back-off n-gram language model.
//! * [`decoder`]: CKY chart decoding with glue grammar, LM state and k-best
//!   extraction.
//! * [`tuner`]: coordinate-ascent MERT with exact line search.
//! * [`evaluate`]: BLEU, TER and METEOR.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the
//! command-line front end live in the `sape` crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod decoder;
pub mod edit_aligner;
mod error;
pub mod evaluate;
pub mod hybrid_align;
pub(crate) mod math;
pub mod ngram_lm;
pub mod rule_extract;
pub mod smoothing;
pub mod stat_aligner;
pub mod tuner;

pub use corpus::{Sentence, TaggedSentence, Triplet, TripletCorpus};
pub use decoder::{Decoder, DecoderParams, Derivation, Grammar, WeightVector};
pub use edit_aligner::{Alignment, EditAligner, Link, SynonymLexicon};
pub use error::{Error, Result};
pub use ngram_lm::NGramLM;
pub use rule_extract::{FeatureVector, ScfgRule};
pub use stat_aligner::TranslationTable;

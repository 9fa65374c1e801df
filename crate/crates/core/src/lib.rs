//! Hierarchical compound–protein interaction modelling.
//!
//! Atom graphs are read from SDF/PDB ([`molio`]), fragmented into motif
//! graphs ([`motif`]), and encoded by graph transformers whose attention is
//! biased by Gaussian distance encodings ([`encoder`]). The [`training`]
//! module implements masked cross-distance pre-training over atom, motif and
//! motif-conditioned atom encoders, affinity fine-tuning, and evaluation
//! metrics.

pub mod encoder;
pub mod molio;
pub mod motif;
pub mod numerics;
pub mod synth;
pub mod training;

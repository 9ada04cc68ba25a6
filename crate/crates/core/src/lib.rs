pub mod corpus;
pub mod cpe;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod nvd;
pub mod svm;
pub mod synth;
pub mod textprep;

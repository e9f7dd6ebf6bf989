//! Japanese text-to-speech front-end.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod implicit;
pub mod labels;
pub mod lexicon;
pub mod model;
pub mod pipeline;
pub mod predict;
pub mod rules;
pub mod text;

//! Multi-space retrieval engine for structured documents.

pub mod acoa;
pub mod corpus;
pub mod doc;
pub mod eval;
pub mod gateway;
pub mod retrieval;
pub mod spaces;
pub mod text;

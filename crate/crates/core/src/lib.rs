pub mod bench;
pub mod eval;
pub mod gateway;
pub mod http;
pub mod pipelines;
pub mod retrieval;
pub mod text;

#[cfg(test)]
mod testutil;

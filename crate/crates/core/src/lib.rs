pub mod cache;
pub mod depgraph;
pub mod fabric;
pub mod flit;
pub mod io;
pub mod mem;
pub mod perf;
pub mod protocol;
pub mod sim;

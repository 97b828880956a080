//! One module per subcommand; each takes its resolved config and writes its
//! artifacts into the prepared output directory.

pub mod bench;
pub mod decode;
pub mod diagnose;
pub mod eval;
pub mod synth;
pub mod train;

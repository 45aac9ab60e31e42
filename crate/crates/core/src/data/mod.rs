pub mod io;
pub mod synth;

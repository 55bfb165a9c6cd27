pub mod oracles;
pub mod sweeps;

pub mod bandits;
pub mod distributions;
pub mod harness;
pub mod mdp;
pub mod omerm;
pub mod oracles;
pub mod pce;
pub mod rng;

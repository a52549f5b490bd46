pub mod analytic;
pub mod calibrate;
pub mod cli;
pub mod constitutive;
pub mod datagen;
pub mod error;
pub mod icnn;
pub mod invariants;
pub mod loadcases;
pub mod pann;
pub mod tensor3;
pub mod verify;

pub mod compare;
pub mod estimate;
pub mod mesh_gen;
pub mod run;
pub mod synth_meas;

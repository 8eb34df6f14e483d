pub mod cnot;
pub mod concurrence;
pub mod hom;
pub mod timetag;

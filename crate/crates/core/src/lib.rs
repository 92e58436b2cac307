pub mod cli;
pub mod error;
pub mod flows;
pub mod hamiltonians;
pub mod linalg;
pub mod operators;
pub mod relaxation;
pub mod solutions;
pub mod tensor;

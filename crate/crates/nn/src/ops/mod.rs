pub mod elementwise;
pub mod linalg;
pub mod nnops;
pub mod shape;

//! Bidirectional LSTM/GRU sequence classifiers trained with a
//! Fisher-discriminant-augmented softmax loss, plus the surrounding
//! machinery: IMU-style signal preprocessing, dataset handling, a
//! synthetic gesture generator, training loop and model serialization.
//!
//! Everything is 64-bit floating point and deterministic given a seed.

// The numeric kernels walk several same-length arrays by index; zipped
// iterators obscure those loops more than they help.
#![allow(clippy::needless_range_loop)]

pub mod cells;
pub mod data;
pub mod gradcheck;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod optim;
pub mod preprocess;

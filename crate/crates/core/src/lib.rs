//! Search for the CNOT entanglement layout of a layered variational quantum
//! embedding, scored by the validation loss of the trained classifier.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: exact statevector simulation of `RY`/`CNOT` circuits with
//!   adjoint and parameter-shift gradients.
//! - [`layout`]: the directed-edge encoding of entanglement layouts
//!   ("genotypes") and exact search-space cardinalities.
//! - [`model`]: the quantum classifier (data rotations, genotype CNOT block,
//!   trainable rotations, per-qubit `⟨Z⟩` readout, linear head), the optional
//!   classical encoder, and a classical MLP for comparisons.
//! - [`train`]: cross-entropy loss, Adam/SGD, and the training loop.
//! - [`search`]: sequential model-based optimisation with a Tree Parzen
//!   Estimator over genotype positions, random search, and the k-sweep.
//! - [`data`]: bundled datasets, CSV ingestion, synthetic data, scaling and
//!   stratified splits.
//! - [`analysis`]: run summaries, t-tests and comparison tables.
//! - [`experiment`]: the glue that turns a dataset and a genotype into a
//!   validation loss, and checkpoints.

pub mod analysis;
pub mod data;
pub mod error;
pub mod experiment;
pub mod layout;
pub mod model;
pub mod search;
pub mod seed;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use layout::{EdgeSet, Genotype};
pub use sim::{Circuit, StateVector};

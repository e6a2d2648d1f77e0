//! Discriminative feature feedback: learners, a simulated teacher, and the
//! machinery to check their mistake bounds empirically.

pub mod harness;
pub mod learners;
pub mod model;
pub mod protocol;
pub mod rng;
pub mod stochastic;
pub mod world;

pub use learners::{Learner, LearnerSpec};
pub use model::{
    Conjunction, Example, FeatureId, Label, Literal, ModelError, Representation,
};
pub use world::{Feedback, Instance, StreamEvent};

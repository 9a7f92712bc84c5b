//! Online convex optimization, parameter-free learning and bandit algorithms.
//!
//! Every learner implements [`game::Learner`]: it emits a prediction, then observes
//! one piece of feedback. [`game::play`] runs a learner against a loss stream and
//! returns a [`game::RegretLedger`].

pub mod bandit;
pub mod classification;
pub mod environments;
pub mod error;
pub mod first_order;
pub mod ftrl;
pub mod game;
pub mod geometry;
pub mod mirror_descent;
pub mod parameter_free;
pub mod second_order;
pub mod vecops;

pub use error::{OcoError, Result};
pub use game::{evaluate, play, regret, subgradient, Feedback, FeedbackMode, Learner, LossKind, LossSpec, RegretLedger, RoundRecord};
pub use geometry::{project, FeasibleSet};

//! Safety-critical quadrotor flight simulation with barrier-constrained
//! collision avoidance and risk-aware sensor pointing.
//!
//! The crate pairs a full flight control stack with the perception layer
//! that decides where a body-fixed, field-of-view-limited sensor should
//! look. Obstacle risk is mapped into a polar density surface from the
//! live barrier constraint values; convolving that surface with the
//! sensor's angular quality profile scores every candidate heading, and a
//! global grid search picks the yaw reference. The same barrier rows feed a
//! small quadratic program that filters the tracking controller's
//! acceleration so the vehicle stays out of every tracked obstacle's
//! safe-set.
//!
//! Modules:
//!
//! - [`math`]: vectors, quaternions, angle wrapping, seedable RNG
//! - [`dynamics`]: rigid-body integration and obstacle kinematics
//! - [`tracking`]: LQR position loop and quaternion attitude loop
//! - [`safety`]: barrier/Lyapunov rows and the active-set QP filter
//! - [`perception`]: density surface, quality profile, yaw optimization
//! - [`sensing`]: FOV detection and track maintenance
//! - [`policy`]: heuristic yaw policies used as comparison arms
//! - [`config`]: strict TOML configuration covering every parameter
//! - [`harness`]: missions, closed-loop flights, Monte-Carlo batches

pub mod config;
pub mod dynamics;
pub mod harness;
pub mod math;
pub mod perception;
pub mod policy;
pub mod safety;
pub mod sensing;
pub mod tracking;

//! Shape recovery of 2D penetrable scatterers from phaseless far-field
//! amplitudes at several frequencies.
//!
//! `scatter` simulates far fields of 64×64 binary shapes, `mie` provides the
//! cylinder series used to check it, and `models` holds the three networks:
//! an adversarial autoencoder whose generator spans the shape space, a
//! forward surrogate from shape to far field, and an inverse network trained
//! through both frozen decoders. Networks and metrics are generic over the
//! scalar; the physics is `f64`.

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mie;
pub mod models;
pub mod nn;
pub mod scalar;
pub mod scatter;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix32 = nn::Matrix<f32>;
pub type Matrix64 = nn::Matrix<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Adam32 = nn::Adam<f32>;
pub type Adam64 = nn::Adam<f64>;

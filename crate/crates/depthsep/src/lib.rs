//! Numerical workbench for depth separation: deep-to-shallow network
//! compilation with certificates, Fourier-domain lower bounds for
//! heavy-tailed measures, and spherical-harmonic approximability tools.

pub mod fouriernet;
pub mod harness;
pub mod netir;
pub mod numeric;
pub mod shallowify;
pub mod spectral;
pub mod sphere;
pub mod uniapprox;

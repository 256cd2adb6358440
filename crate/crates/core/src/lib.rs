//! Goodness-of-fit diagnostics for PCA and admixture models of genotype
//! data, built on the residual correlation matrix: the empirical residual
//! correlations are compared against the correlations the fitted projection
//! predicts, and systematic differences flag model misfit.
//!
//! The crate also ships a seeded genotype simulator for five demographic
//! scenarios, PLINK .bed/.bim/.fam and ADMIXTURE .Q/.P readers, and SVG
//! figure emission, all orchestrated by the `admixfit` CLI.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod plot;
pub mod estimators;
pub mod io;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};

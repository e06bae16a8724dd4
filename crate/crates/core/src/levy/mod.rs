//! Lévy measures and characteristic triplets.

pub mod density;
pub mod measure;
pub mod triplet;

pub use density::{DensityPart, JumpMap, Side, TabulatedDensity};
pub use measure::{
    open_unit, Activity, Atom, AtomSequence, Integrand, IntegrationConfig, JumpSampler, LevyMeasure1D, Region,
    SmallJumpVariation,
};
pub use triplet::{curve_region, doleans_xi_from_eta, JointAtom, LevyMeasure2D, LevyTriplet1D, LevyTriplet2D, Mean};

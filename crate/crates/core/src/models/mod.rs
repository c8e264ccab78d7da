//! The three dynamical systems: the bursting prototype, 2D Kolmogorov flow and
//! the modified nonlinear Schrodinger equation.

pub mod kolmogorov;
pub mod mnls;
pub mod prototype;

//! Lagrangian/Hamiltonian mechanics for `L = ½g(v,v) − f − ω(v) + c`:
//! Legendre transform, energy, Euler-Lagrange flow integration and action
//! evaluation. The closed form ω drops out of the flow; it enters only the
//! action and the momenta.

mod integrate;
pub mod shooting;
mod spec;
mod trajectory;

pub use integrate::rk4_step;
pub use spec::{CotangentState, LagrangianSpec, PhaseState};
pub use trajectory::Trajectory;

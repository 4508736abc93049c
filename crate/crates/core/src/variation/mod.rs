//! Second-variation machinery along extremals: parallel frames, Jacobi-field
//! matrix frames, conjugate- and cut-point detection, reverse-Lagrangian
//! symmetry, and the index form.

mod conjugate;
mod cut;
mod frames;
mod index_form;

pub use conjugate::{
    conjugate_points, frame_linearity_defect, reverse_conjugacy_check, ConjugateReport,
    ReverseReport,
};
pub use cut::{classify_cut, is_cut_point, ActionOracle, CutClass, CutParams, CutReport};
pub use frames::{
    parallel_transport, propagate_jacobi_frame, propagate_jacobi_frame_synthetic, JacobiFrame,
    ParallelFrame,
};
pub use index_form::{
    index_form, index_form_boundary, index_form_reduced, second_variation_check, IndexFormValue,
    PiecewiseField, SecondVariationReport,
};

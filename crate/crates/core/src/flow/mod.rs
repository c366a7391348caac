//! Momentum, pressure and free-surface dynamics with the contact-point law,
//! the interaction terms of the differentiated problems and the coupled
//! time stepper.

mod contact;
mod coupled;
mod forcing;
mod momentum;

pub use contact::{
    apply_contact_law, curvature_remainder, curvature_remainder_ds, linear_weight, solve_contact_speed,
    surface_tension_operator, ContactEnds, ContactModel, SurfaceTraction,
};
pub use coupled::{
    coupled_step, initial_state, relative_velocity, Checkpoint, CoupledState, InitialData, Level, Simulation,
    SplitOrder, StepCaches, StepConfig, StepReport, HISTORY_LEN,
};
pub use forcing::{apply_matrix, assemble_flow_forcing, transport_operator_r, FlowForcing, ForcingLevel};
pub use momentum::{
    flow_invariants, momentum_step, momentum_step_cached, project_velocity, FlowInvariants, FlowOptions, FlowProblem,
    FlowState, MomentumCache, MomentumReport,
};

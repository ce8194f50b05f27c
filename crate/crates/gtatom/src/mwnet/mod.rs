//! Closed-form distributed-element model of the device: line sections,
//! lumped parasitics, and the transmon island as a capacitance network with
//! a linear SQUID inductance. Lossless elements only: the module reproduces
//! the ideal closed-form response, not loss-narrowed experimental profiles.

mod abcd;
mod netlist;
mod solve;

pub use abcd::{cpw_section, series_inductor, shunt_branch, Abcd};
pub use netlist::{Branch, BranchKind, NodalNetwork, Node};
pub use solve::{
    solve_s21, sweep_inductance, sweep_inductance_normalized, InductanceSweep, NetworkSweep,
    SweepPoint,
};

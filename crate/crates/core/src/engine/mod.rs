//! Netlist loading, topology checks and the time-ordered trial loop.

pub mod experiment;
pub mod netlist;
pub mod topology;
pub mod trial;
pub mod units;

pub use netlist::{Netlist, SweepSpec};
pub use topology::{load_topology, Topology};
pub use trial::{analytic_probabilities, run_trial, AnalyticOutcome, TrialOutcome};
pub use experiment::{run_experiment, wilson, ExperimentOptions, Interval, PointStats, StatisticsTable};

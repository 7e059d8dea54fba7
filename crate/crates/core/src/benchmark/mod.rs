//! Synthetic benchmarks: data generators, missingness, metrics and the
//! experiment runner.

pub mod dgp;
pub mod kappa;
pub mod metrics;
pub mod missingness;
pub mod runner;
pub mod topology;

pub use dgp::{
    erdos_renyi_dag, gen_adversarial, gen_graph_data, gen_standalone, AdversarialKind, AdversarialSpec, EdgeFunction,
    EdgeKind, EdgeMechanism, GraphDgpSpec, StandaloneData, StandaloneFamily, StandaloneSpec,
};
pub use kappa::{kappa_estimate, KappaAccumulator, KappaDiagnostics};
pub use metrics::{graph_metrics, GraphMetrics};
pub use missingness::{inject_missingness, Mechanism, MissingnessSpec};
pub use runner::{
    ci_problem, graph_problem, run_ci_method, run_experiment, BenchmarkRecord, CiDgp, CiOutcome, CiProblem,
    CiRecord, ExperimentPlan, GraphProblem, PlanKind, Records, RunOptions,
};
pub use topology::{load_topology, parse_topology, Topology};

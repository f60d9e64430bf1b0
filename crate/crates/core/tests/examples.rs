// Every runnable example doubles as a test.

mod solve_trace {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/solve_trace.rs"));
}

mod maxcut {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/maxcut.rs"));
}

mod graph_partition {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/graph_partition.rs"));
}

mod diag_precond {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/diag_precond.rs"));
}

mod infeasibility {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/infeasibility.rs"));
}

mod schur_techniques {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/schur_techniques.rs"));
}

mod lanczos_step {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lanczos_step.rs"));
}

mod presolve_structures {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/presolve_structures.rs"));
}

mod sdpa_roundtrip {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sdpa_roundtrip.rs"));
}

mod bench_sgm {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/bench_sgm.rs"));
}

#[test]
fn solve_trace_example_runs() {
    solve_trace::run_example().expect("solve_trace example failed");
}

#[test]
fn maxcut_example_runs() {
    maxcut::run_example().expect("maxcut example failed");
}

#[test]
fn graph_partition_example_runs() {
    graph_partition::run_example().expect("graph_partition example failed");
}

#[test]
fn diag_precond_example_runs() {
    diag_precond::run_example().expect("diag_precond example failed");
}

#[test]
fn infeasibility_example_runs() {
    infeasibility::run_example().expect("infeasibility example failed");
}

#[test]
fn schur_techniques_example_runs() {
    schur_techniques::run_example().expect("schur_techniques example failed");
}

#[test]
fn lanczos_step_example_runs() {
    lanczos_step::run_example().expect("lanczos_step example failed");
}

#[test]
fn presolve_structures_example_runs() {
    presolve_structures::run_example().expect("presolve_structures example failed");
}

#[test]
fn sdpa_roundtrip_example_runs() {
    sdpa_roundtrip::run_example().expect("sdpa_roundtrip example failed");
}

#[test]
fn bench_sgm_example_runs() {
    bench_sgm::run_example().expect("bench_sgm example failed");
}

//! The command-line interface: verdicts, exit codes and output files.

use std::process::Command;

fn cpds() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpds"))
}

fn model_path() -> String {
    format!("{}/examples/models/figure.cpds", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn reachable_exits_with_one_and_writes_the_witness() {
    let dir = std::env::temp_dir().join(format!("cpds-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let witness = dir.join("w.json");
    let out = cpds()
        .args(["check", &model_path(), "--engine", "naive", "--witness"])
        .arg(&witness)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("witness: r1 r2 r3 r4"), "{stdout}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&witness).unwrap()).unwrap();
    assert_eq!(doc["tree"]["control"], "q1");
    assert_eq!(doc["rules"][3], "r4");
}

#[test]
fn unreachable_exits_with_zero() {
    let dir = std::env::temp_dir().join(format!("cpds-cli-u-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = dir.join("m.cpds");
    let text = std::fs::read_to_string(model_path()).unwrap().replace("target q5", "target q9\nrule q9 a rew a q9");
    std::fs::write(&model, text).unwrap();
    for forward in ["on", "prune", "off"] {
        let out = cpds().args(["check", "--forward", forward]).arg(&model).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{forward}");
    }
}

#[test]
fn errors_exit_with_two() {
    let out = cpds().args(["check", "/nonexistent/model"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("cpds-cli-e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = dir.join("alt.cpds");
    std::fs::write(&model, "order 2\nalphabet a\ninit p [[a]]\ntarget q\nalt p {q}\n").unwrap();
    let out = cpds().args(["check", "--mode", "nonalt"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("inconclusive"));
}

#[test]
fn explicit_automaton_and_dumps() {
    let dir = std::env::temp_dir().join(format!("cpds-cli-a-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let aut = dir.join("a0.aut");
    std::fs::write(&aut, "q5 -- d / {} --> ({};{})\n").unwrap();
    let (sat, graph) = (dir.join("sat.aut"), dir.join("graph.txt"));
    let out = cpds()
        .args(["check", &model_path(), "--automaton"])
        .arg(&aut)
        .arg("--dump-automaton")
        .arg(&sat)
        .arg("--dump-graph")
        .arg(&graph)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(std::fs::read_to_string(&sat).unwrap().contains("q1 -- b / {} --> ({};{q4})"));
    assert!(std::fs::read_to_string(&graph).unwrap().contains("edge (q4,c) r4 (q5,d)"));
}

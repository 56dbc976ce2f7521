use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ratesplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratesplit")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json_at(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn entropy_of_epr_pair() {
    let out = ratesplit(&["entropy", "--state", "epr2", "--quantity", "hmin", "--condition", "B", "--epsilon", "0"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["tool"], "ratesplit");
    assert_eq!(doc["command"], "entropy");
    assert_eq!(doc["config"]["state"], "epr2");
    let v = doc["result"]["value"].as_f64().unwrap();
    assert!((v + 1.0).abs() < 1e-6, "{}", v);
    assert!(String::from_utf8_lossy(&out.stderr).contains("-1.000000"));
}

#[test]
fn von_neumann_of_maximally_mixed_qubit() {
    let out = ratesplit(&["entropy", "--state", "mixed2", "--quantity", "vonneumann"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.000000"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&ratesplit(&["entropy", "--state", "epr2"])), 64);
    assert_eq!(code(&ratesplit(&["decouple", "--variant", "single", "--trials", "10"])), 64);
    assert_eq!(code(&ratesplit(&["region", "--channel", "builtin:identity", "--mode", "qmac"])), 64);
    assert_eq!(code(&ratesplit(&["region", "--channel", "builtin:nope", "--mode", "p2p"])), 64);
    assert_eq!(code(&ratesplit(&["entropy", "--state", "epr2", "--quantity", "hmin", "--condition", "Z"])), 64);
    assert_eq!(code(&ratesplit(&["frobnicate"])), 64);
}

#[test]
fn entropy_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("h.csv");
    let out = ratesplit(&["entropy", "--state", "epr2", "--quantity", "hmin", "--condition", "B", "--format", "csv", "--out", arg(&out_path)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "quantity,system,condition,epsilon,value,lower,upper,gap,status,iterations");
    assert!(lines.next().unwrap().starts_with("hmin,A,B,0.00000000e0,-1.00000000e0"));
}

#[test]
fn iid_pentagon_of_two_wires() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("wires");
    let out = ratesplit(&["region", "--channel", "builtin:qmac_product", "--mode", "iid", "--out", arg(&prefix)]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("wires.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for col in ["H(A)", "I(A>BC)", "H(B)", "I(B>AC)", "I(AB>C)"] {
        assert_eq!(header.iter().filter(|h| **h == col).count(), 1, "{}", col);
    }
    assert_eq!(csv.lines().count(), 6);
    let doc = json_at(&dir.path().join("wires.json"));
    let pent = &doc["result"]["pentagon"];
    assert!((pent["I(AB>C)"].as_f64().unwrap() - 2.0).abs() < 1e-9, "{}", pent);
}

#[test]
fn zero_crosstalk_gives_the_trivial_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("qic");
    let out = ratesplit(&["region", "--mode", "qic", "--channel", "builtin:qic_crosstalk:0.0,0.0", "--theta-steps", "5", "--out", arg(&prefix)]);
    assert_eq!(code(&out), 0);
    let doc = json_at(&dir.path().join("qic.json"));
    let corners = doc["result"]["corners"].as_array().unwrap();
    for p in doc["result"]["points"].as_array().unwrap() {
        let name = format!("trivial_{}", p["branch"].as_str().unwrap());
        let c = corners.iter().find(|c| c["name"] == name.as_str()).unwrap();
        for (k, v) in c["rates"].as_object().unwrap() {
            assert_eq!(&p["rates"][k], v, "{}", k);
        }
    }
}

#[test]
fn point_to_point_trace_has_41_rows_and_matching_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("p2p");
    let out = ratesplit(&["region", "--mode", "p2p", "--channel", "builtin:depolarizing:0.1", "--epsilon", "0.5", "--theta-steps", "41", "--jobs", "2", "--out", arg(&prefix)]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("p2p.csv")).unwrap();
    assert_eq!(csv.lines().count(), 42);
    let doc = json_at(&dir.path().join("p2p.json"));
    let points = doc["result"]["points"].as_array().unwrap();
    let corner = |n: &str| doc["result"]["corners"].as_array().unwrap().iter().find(|c| c["name"] == n).unwrap().clone();
    for (p, c) in [(&points[0], corner("theta0_E0")), (&points[40], corner("theta1_E0"))] {
        for r in ["Q_A0", "Q_A1"] {
            let d = p["rates"][r].as_f64().unwrap() - c["rates"][r].as_f64().unwrap();
            assert!(d.abs() < 1e-6, "{}", r);
        }
    }
}

#[test]
fn all_points_infeasible_exits_3() {
    let out = ratesplit(&["region", "--mode", "qic", "--channel", "builtin:qic_crosstalk:0.5,0.1", "--q0", "5", "--theta-steps", "2"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible at theta=0"));
}

#[test]
fn single_sender_decoupling() {
    let out = ratesplit(&["decouple", "--variant", "single", "--trials", "200", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &doc["result"];
    assert!(r["mean"].as_f64().unwrap() <= r["theoretical_bound"].as_f64().unwrap());
    assert_eq!(r["pass"], true);
}

#[test]
fn protocol_over_identity() {
    let out = ratesplit(&["decouple", "--variant", "protocol", "--channel", "builtin:identity"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["result"]["fidelity"].as_f64().unwrap() >= 0.99);
}

#[test]
fn failed_protocol_exits_4() {
    let out = ratesplit(&["decouple", "--variant", "protocol", "--channel", "builtin:dephasing:1.0"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn channel_file_drives_a_region() {
    let dir = tempfile::tempdir().unwrap();
    let ch = ratesplit::files::ChannelFile::from_channel(&ratesplit_core::Channel::builtin("erasure", &[0.2]).unwrap());
    let path = dir.path().join("erasure.json");
    std::fs::write(&path, serde_json::to_string_pretty(&ch).unwrap()).unwrap();
    let out = ratesplit(&["region", "--mode", "p2p", "--channel", arg(&path), "--epsilon", "0.5", "--theta-steps", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // without --out the trace goes to stdout as CSV
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("theta,branch"));
    assert_eq!(text.lines().count(), 4);
}

fn reruns_identical(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let prefix = dir.path().join(name);
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", arg(&prefix)]);
        let out = ratesplit(&full);
        assert!(matches!(code(&out), 0 | 4), "{:?}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(name))
            .collect();
        files.sort();
        files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run("first"), run("second"));
    assert!(!a.is_empty());
    // the config echo holds the output path, so compare with it blanked
    let strip = |bytes: &[u8], name: &str| String::from_utf8_lossy(bytes).replace(name, "OUT");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(strip(x, "first"), strip(y, "second"), "{:?}", args);
    }
}

#[test]
fn reruns_are_byte_identical() {
    reruns_identical(&["entropy", "--state", "ghz3", "--quantity", "hmin", "--system", "A", "--condition", "B", "--epsilon", "0.1"]);
    reruns_identical(&["region", "--mode", "qmac", "--channel", "builtin:qmac_adder:0.1", "--epsilon", "0.5", "--theta-steps", "3", "--jobs", "3"]);
    reruns_identical(&["decouple", "--variant", "twohaar", "--trials", "40", "--seed", "5", "--jobs", "4"]);
    reruns_identical(&["decouple", "--variant", "single", "--trials", "40", "--seed", "5", "--format", "csv"]);
}

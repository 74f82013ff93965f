//! End-to-end tests driving the installed binary: file round trips, exit
//! codes, and byte stability of the emitted artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qpolar")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qpolar-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn every_subcommand_documents_its_flags() {
    let expectations: &[(&str, &[&str])] = &[
        ("channel-info", &["--channel", "--builder", "--r", "--eps"]),
        (
            "polarize",
            &["--n", "--max-outputs", "--epsilon", "--delta", "--output", "--histogram", "--threads"],
        ),
        (
            "construct",
            &["--n", "--epsilon", "--target-bits", "--frozen-fill", "--frozen-seed", "--output"],
        ),
        ("encode", &["--construction", "--data", "--output", "--format"]),
        ("decode", &["--construction", "--received", "--output"]),
        (
            "simulate",
            &["--trials", "--seed", "--genie", "--max-frame-errors", "--output", "--csv"],
        ),
        ("validate", &["--random", "--seed", "--tol", "--delta-prime"]),
        ("rate-curve", &["--alpha", "--n-list", "--paths", "--seed", "--output"]),
    ];
    for (sub, flags) in expectations {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let help = String::from_utf8_lossy(&out.stdout);
        for flag in *flags {
            assert!(help.contains(flag), "{sub} --help does not document {flag}");
        }
    }
    let out = run(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("qpolar"));
}

#[test]
fn channel_info_reports_erasure_statistics() {
    let out = run(&[
        "channel-info",
        "--builder",
        "ordered-erasure",
        "--r",
        "2",
        "--eps",
        "0.5,0.4,0.1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("capacity_bits: 1.4000000000000004e0"));
    assert!(text.contains("z_level: 5.0000000000000011e-1,1.0000000000000001e-1"));
    assert!(text.contains("closed_form_capacity"));
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = run(&["polarize", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_builder_is_a_domain_error() {
    let out = run(&[
        "channel-info",
        "--builder",
        "bogus",
        "--r",
        "2",
        "--eps",
        "0.5,0.5,0.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown builder"));
}

/// Noiseless pipeline: construct on the erasure channel with no erasures,
/// encode random bits, feed the codeword back (output index = symbol on the
/// noiseless channel) and recover the bits exactly.
#[test]
fn polarize_construct_encode_decode_round_trip() {
    let dir = tmp_dir("roundtrip");
    let noiseless = ["--builder", "ordered-erasure", "--r", "2", "--eps", "1.0,0.0,0.0"];
    let table = dir.join("table.csv");
    let hist = dir.join("hist.csv");
    let out = run(&[
        &["polarize", "--n", "4", "--output", table.to_str().unwrap(),
          "--histogram", hist.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table_text = read(&table);
    assert!(table_text.starts_with("# "), "provenance comment missing");
    assert!(table_text.lines().nth(1).unwrap().starts_with("index,path,capacity,z1,z2,class_k,quantized"));
    assert_eq!(table_text.lines().count(), 2 + 16);
    assert!(read(&hist).contains("good_bits"));

    let construction = dir.join("construction.json");
    let out = run(&[
        &["construct", "--n", "4", "--target-bits", "20",
          "--output", construction.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let data = dir.join("data.txt");
    std::fs::write(&data, "10110011101010101101\n").unwrap();
    let codeword = dir.join("codeword.txt");
    let out = run(&[
        "encode",
        "--construction",
        construction.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--output",
        codeword.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // On the noiseless channel output index equals the transmitted symbol.
    let decoded = dir.join("decoded.txt");
    let out = run(&[
        &["decode", "--construction", construction.to_str().unwrap(),
          "--received", codeword.to_str().unwrap(),
          "--output", decoded.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&decoded).trim(), "10110011101010101101");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn decode_failure_and_fingerprint_mismatch_exit_codes() {
    let dir = tmp_dir("exitcodes");
    let noiseless = ["--builder", "ordered-erasure", "--r", "2", "--eps", "1.0,0.0,0.0"];
    let construction = dir.join("construction.json");
    let out = run(&[
        &["construct", "--n", "2", "--epsilon", "0.1",
          "--output", construction.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    assert!(out.status.success());

    // Observing the fully-erased output (index 6) is impossible evidence
    // when the erasure probabilities vanish.
    let received = dir.join("erased.txt");
    std::fs::write(&received, "6 6 6 6\n").unwrap();
    let decoded = dir.join("decoded.txt");
    let out = run(&[
        &["decode", "--construction", construction.to_str().unwrap(),
          "--received", received.to_str().unwrap(),
          "--output", decoded.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(3), "decode failure must exit 3");

    // A construction built for a different channel is refused outright.
    let other = ["--builder", "ordered-erasure", "--r", "2", "--eps", "0.5,0.4,0.1"];
    let out = run(&[
        &["decode", "--construction", construction.to_str().unwrap(),
          "--received", received.to_str().unwrap(),
          "--output", decoded.to_str().unwrap()][..],
        &other[..],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_codeword_format() {
    let dir = tmp_dir("binary");
    let noiseless = ["--builder", "ordered-erasure", "--r", "2", "--eps", "1.0,0.0,0.0"];
    let construction = dir.join("construction.json");
    run(&[
        &["construct", "--n", "1", "--target-bits", "4",
          "--output", construction.to_str().unwrap()][..],
        &noiseless[..],
    ]
    .concat());
    let data = dir.join("data.txt");
    std::fs::write(&data, "1101").unwrap();
    let codeword = dir.join("codeword.bin");
    let out = run(&[
        "encode",
        "--construction",
        construction.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--output",
        codeword.to_str().unwrap(),
        "--format",
        "binary",
    ]);
    assert!(out.status.success());
    // u = (11b, 01b) = (3, 1); x = (u1+u2 mod 4, u2) = (0, 1).
    assert_eq!(std::fs::read(&codeword).unwrap(), vec![0u8, 1]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn validate_random_batch_passes() {
    let out = run(&["validate", "--random", "20", "--random-r", "2", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all relations hold"));
}

#[test]
fn outputs_are_byte_stable_across_runs() {
    let dir = tmp_dir("stability");
    let fig1 = ["--builder", "ordered-erasure", "--r", "2", "--eps", "0.5,0.4,0.1"];

    let mut tables = Vec::new();
    for tag in ["a", "b"] {
        let path = dir.join(format!("table-{tag}.csv"));
        let out = run(&[
            &["polarize", "--n", "6", "--output", path.to_str().unwrap()][..],
            &fig1[..],
        ]
        .concat());
        assert!(out.status.success());
        tables.push(std::fs::read(&path).unwrap());
    }
    // The provenance line differs only in the output path; compare the rest.
    let strip = |bytes: &[u8]| -> Vec<u8> {
        let pos = bytes.iter().position(|&b| b == b'\n').unwrap();
        bytes[pos + 1..].to_vec()
    };
    assert_eq!(strip(&tables[0]), strip(&tables[1]));

    let construction = dir.join("construction.json");
    run(&[
        &["construct", "--n", "4", "--epsilon", "0.1",
          "--output", construction.to_str().unwrap()][..],
        &fig1[..],
    ]
    .concat());
    let mut reports = Vec::new();
    for tag in ["a", "b"] {
        let path = dir.join(format!("report-{tag}.json"));
        let out = run(&[
            &["simulate", "--construction", construction.to_str().unwrap(),
              "--trials", "500", "--seed", "11", "--genie",
              "--output", path.to_str().unwrap()][..],
            &fig1[..],
        ]
        .concat());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut v: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
        v["wall_time"] = serde_json::Value::Null;
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1], "reports differ beyond wall_time");

    let mut curves = Vec::new();
    for tag in ["a", "b"] {
        let path = dir.join(format!("curve-{tag}.csv"));
        let out = run(&[
            &["rate-curve", "--alpha", "0.45", "--n-list", "4,6", "--paths", "200",
              "--seed", "3", "--output", path.to_str().unwrap()][..],
            &fig1[..],
        ]
        .concat());
        assert!(out.status.success());
        curves.push(strip(&std::fs::read(&path).unwrap()));
    }
    assert_eq!(curves[0], curves[1]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn channel_file_round_trip_through_cli() {
    let dir = tmp_dir("chanfile");
    // Write a channel file by hand and verify channel-info reads it.
    let path = dir.join("w.json");
    std::fs::write(
        &path,
        r#"{"r":1,"outputs":["a","b"],"matrix":[[0.9,0.1],[0.2,0.8]]}"#,
    )
    .unwrap();
    let out = run(&["channel-info", "--channel", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("q: 2"));

    std::fs::write(&path, r#"{"r":1,"outputs":["a"],"matrix":[[1.0],[0.5]]}"#).unwrap();
    let out = run(&["channel-info", "--channel", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "invalid channel is a domain error");
    std::fs::remove_dir_all(&dir).unwrap();
}

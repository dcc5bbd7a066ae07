mod common;

use std::fs;

use common::{bin, path_str, run, synthetic};

fn stdout(out: &std::process::Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn train_writes_model_files_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, _) = synthetic(1, 50, 10, 0.2).write(dir.path());
    let (a, b) = (dir.path().join("m1"), dir.path().join("m2"));
    for out in [&a, &b] {
        stdout(&run(&[
            "train",
            "-s",
            path_str(&s),
            "-t",
            path_str(&t),
            "-o",
            path_str(out),
        ]));
    }
    for name in [
        "ttable.fwd",
        "ttable.rev",
        "vocab.src",
        "vocab.tgt",
        "config.txt",
    ] {
        let first = fs::read(a.join(name)).unwrap();
        assert!(!first.is_empty(), "{name} is empty");
        assert_eq!(
            first,
            fs::read(b.join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}

#[test]
fn missing_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "-s",
        "/nonexistent/src",
        "-t",
        "/nonexistent/tgt",
        "-o",
        path_str(dir.path()),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/src"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn single_token_pair_aligns_to_zero_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t) = (dir.path().join("s"), dir.path().join("t"));
    fs::write(&s, "a\n").unwrap();
    fs::write(&t, "x\n").unwrap();
    let model = dir.path().join("model");
    stdout(&run(&[
        "train",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-o",
        path_str(&model),
    ]));
    let out = stdout(&run(&[
        "align",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-m",
        path_str(&model),
    ]));
    assert_eq!(out, "0-0\n");
}

#[test]
fn pipeline_keeps_one_line_per_input_line() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t) = (dir.path().join("s"), dir.path().join("t"));
    // the empty and over-long pairs are skipped but still get a line
    let long = vec!["w"; 30].join(" ");
    fs::write(&s, format!("das haus\n\nein buch\n{long}\ndas buch\n")).unwrap();
    fs::write(
        &t,
        format!("the house\nnothing\na book\n{long}\nthe book\n"),
    )
    .unwrap();
    for extra in [&[][..], &["--vbh"][..]] {
        let mut args = vec![
            "pipeline",
            "-s",
            path_str(&s),
            "-t",
            path_str(&t),
            "--max-sentence-len",
            "20",
        ];
        args.extend_from_slice(extra);
        let out = stdout(&run(&args));
        let lines: Vec<&str> = out.split('\n').collect();
        assert_eq!(lines.len(), 6, "{out:?}");
        assert_eq!(lines[1], "");
        assert_eq!(lines[3], "");
        assert!(!lines[0].is_empty() && !lines[2].is_empty() && !lines[4].is_empty());
    }
}

#[test]
fn joined_input_matches_split_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(2, 40, 10, 0.2);
    let (s, t, _) = data.write(dir.path());
    let joined = dir.path().join("joined");
    let text: String = data
        .source
        .iter()
        .zip(&data.target)
        .map(|(a, b)| format!("{} ||| {}\n", a.join(" "), b.join(" ")))
        .collect();
    fs::write(&joined, text).unwrap();
    let split = stdout(&run(&["pipeline", "-s", path_str(&s), "-t", path_str(&t)]));
    let one = stdout(&run(&["pipeline", "-j", path_str(&joined)]));
    assert_eq!(split, one);
}

#[test]
fn align_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, _) = synthetic(3, 300, 20, 0.3).write(dir.path());
    let model = dir.path().join("model");
    stdout(&run(&[
        "train",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-o",
        path_str(&model),
    ]));
    let align = |threads: &str| {
        stdout(&run(&[
            "--threads",
            threads,
            "align",
            "-s",
            path_str(&s),
            "-t",
            path_str(&t),
            "-m",
            path_str(&model),
        ]))
    };
    assert_eq!(align("1"), align("8"));
    let env = bin()
        .env("HIERALIGN_THREADS", "3")
        .args([
            "--threads",
            "1",
            "align",
            "-s",
            path_str(&s),
            "-t",
            path_str(&t),
            "-m",
            path_str(&model),
        ])
        .output()
        .unwrap();
    assert_eq!(stdout(&env), align("1"));
}

#[test]
fn bad_thread_env_is_rejected() {
    let out = bin()
        .env("HIERALIGN_THREADS", "lots")
        .args(["eval", "--gold", "x", "--hyp", "y"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("HIERALIGN_THREADS"));
}

#[test]
fn align_overrides_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, _) = synthetic(4, 30, 10, 0.2).write(dir.path());
    let model = dir.path().join("model");
    stdout(&run(&[
        "train",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-o",
        path_str(&model),
    ]));
    let dump = dir.path().join("matrix.tsv");
    let out = run(&[
        "align",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-m",
        path_str(&model),
        "--sigma-theta",
        "1",
        "--no-distortion",
        "--stats",
        "--dump-matrix",
        path_str(&dump),
    ]);
    assert_eq!(stdout(&out).lines().count(), 30);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs/s"));
    let matrix = fs::read_to_string(&dump).unwrap();
    assert_eq!(
        matrix
            .split("\n\n")
            .filter(|b| !b.trim().is_empty())
            .count(),
        30
    );
    let first = matrix.lines().next().unwrap();
    assert_eq!(first.split('\t').count(), 3);
    assert!(first.starts_with("0\t0\t"));
}

#[test]
fn align_rejects_a_broken_model() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, _) = synthetic(5, 10, 10, 0.2).write(dir.path());
    let model = dir.path().join("model");
    stdout(&run(&[
        "train",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-o",
        path_str(&model),
    ]));
    fs::remove_file(model.join("ttable.rev")).unwrap();
    let out = run(&[
        "align",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-m",
        path_str(&model),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ttable.rev"));
}

#[test]
fn symmetrize_heuristics() {
    let dir = tempfile::tempdir().unwrap();
    let (f, r) = (dir.path().join("f"), dir.path().join("r"));
    fs::write(&f, "0-0 1-1\n0-1\n").unwrap();
    fs::write(&r, "0-0\n1-0\n").unwrap();
    let sym = |h: &str| {
        stdout(&run(&[
            "symmetrize",
            "--fwd",
            path_str(&f),
            "--rev",
            path_str(&r),
            "--heuristic",
            h,
        ]))
    };
    assert_eq!(sym("intersection"), "0-0\n\n");
    assert_eq!(sym("union"), "0-0 1-1\n0-1 1-0\n");
    assert_eq!(sym("gdfa"), "0-0 1-1\n0-1 1-0\n");
    let out = run(&[
        "symmetrize",
        "--fwd",
        path_str(&f),
        "--rev",
        path_str(&r),
        "--heuristic",
        "grow",
    ]);
    assert!(!out.status.success());
}

#[test]
fn eval_reports_four_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let (g, h) = (dir.path().join("g"), dir.path().join("h"));
    fs::write(&g, "0-0 1?1\n0-0 1-1 2-2\n").unwrap();
    fs::write(&h, "0-0\n0-0 1-2\n").unwrap();
    let out = stdout(&run(&[
        "eval",
        "--gold",
        path_str(&g),
        "--hyp",
        path_str(&h),
    ]));
    // |A|=3 |S|=4 |A∩S|=2 |A∩P|=2
    assert_eq!(out, "precision=0.6667 recall=0.5000 aer=0.4286\n");
    let per = stdout(&run(&[
        "eval",
        "--gold",
        path_str(&g),
        "--hyp",
        path_str(&h),
        "--per-sentence",
    ]));
    let lines: Vec<&str> = per.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[2], "1\t1.0000\t1.0000\t0.0000");
    fs::write(&h, "0-0\n").unwrap();
    assert!(
        !run(&["eval", "--gold", path_str(&g), "--hyp", path_str(&h)])
            .status
            .success()
    );
}

#[test]
fn extract_counts_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, a) = (
        dir.path().join("s"),
        dir.path().join("t"),
        dir.path().join("a"),
    );
    fs::write(&s, "das haus\ndas haus\n").unwrap();
    fs::write(&t, "the house\nthe house\n").unwrap();
    fs::write(&a, "0-0 1-1\n0-0 1-1\n").unwrap();
    let dump = dir.path().join("phrases.tsv");
    let out = stdout(&run(&[
        "extract",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "--align",
        path_str(&a),
        "--max-len",
        "7",
        "--dump",
        path_str(&dump),
    ]));
    assert_eq!(out, "entries=3\n");
    assert_eq!(
        fs::read_to_string(&dump).unwrap(),
        "das\tthe\ndas haus\tthe house\nhaus\thouse\n"
    );
}

#[test]
fn sweep_prints_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, g) = synthetic(6, 60, 10, 0.2).write(dir.path());
    let model = dir.path().join("model");
    stdout(&run(&[
        "train",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-o",
        path_str(&model),
    ]));
    let out = stdout(&run(&[
        "sweep",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-m",
        path_str(&model),
        "--gold",
        path_str(&g),
        "--thetas",
        "1,3",
        "--deltas",
        "2,5,8",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "sigma_theta\tsigma_delta\tprecision\trecall\taer");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("1\t2\t"));
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t, _) = synthetic(7, 5, 5, 0.2).write(dir.path());
    for flags in [
        ["--beam", "0"],
        ["--sigma-theta", "0"],
        ["--distortion-threshold", "2"],
    ] {
        let mut args = vec!["pipeline", "-s", path_str(&s), "-t", path_str(&t)];
        args.extend_from_slice(&flags);
        let out = run(&args);
        assert!(!out.status.success(), "{flags:?} accepted");
        assert!(out.stdout.is_empty());
    }
}

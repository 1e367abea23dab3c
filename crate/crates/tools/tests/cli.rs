use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pivots(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pivots"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn build(dir: &Path, n: &str, workers: &str) {
    stdout(&pivots(&[
        "build",
        "--n",
        n,
        "--out-dir",
        dir.to_str().unwrap(),
        "--workers",
        workers,
    ]));
}

#[test]
fn class_counts() {
    for (n, want) in [("1", "1,2,2"), ("2", "2,10,7"), ("5", "5,376992,5624")] {
        let out = stdout(&pivots(&["classes", "--n", n]));
        assert!(out.starts_with("# pivots "));
        assert_eq!(body(&out), ["n,row_classes,classes", want]);
    }
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("keys.bin");
    stdout(&pivots(&[
        "classes",
        "--n",
        "3",
        "--dump-keys",
        keys.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&keys).unwrap().len(), 8 * 36);
}

#[test]
fn exit_codes() {
    assert_eq!(pivots(&["classes", "--n", "7"]).status.code(), Some(3));
    assert_eq!(pivots(&["classes", "--n", "9"]).status.code(), Some(3));
    assert_eq!(pivots(&["classes"]).status.code(), Some(1));
    assert_eq!(pivots(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        pivots(&["eval", "--strategy", "random", "--n", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(pivots(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let missing = pivots(&["query", "--atlas", d, "--pattern", "11/01"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("pivots build"));
    build(dir.path(), "2", "1");
    assert_eq!(
        pivots(&["query", "--atlas", d, "--pattern", "12/01"])
            .status
            .code(),
        Some(1)
    );
    let bad = dir.path().join("atlas_2.pivdb");
    let mut bytes = fs::read(&bad).unwrap();
    bytes.pop();
    fs::write(&bad, bytes).unwrap();
    assert_eq!(
        pivots(&["query", "--atlas", d, "--pattern", "11/01"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn builds_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    build(a.path(), "5", "1");
    build(b.path(), "5", "3");
    for n in 1..=5 {
        for name in [format!("atlas_{n}.pivdb"), format!("atlas_{n}.csv")] {
            assert_eq!(
                fs::read(a.path().join(&name)).unwrap(),
                fs::read(b.path().join(&name)).unwrap(),
                "{name}"
            );
        }
    }
    assert_eq!(
        fs::metadata(a.path().join("atlas_4.pivdb")).unwrap().len(),
        24 + 40 * 317
    );
    let csv = fs::read_to_string(a.path().join("atlas_4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4 * 317);
}

#[test]
fn query_stats_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    build(dir.path(), "4", "2");

    let q = stdout(&pivots(&[
        "query",
        "--atlas",
        d,
        "--pattern",
        "1100/1110/0111/0011",
    ]));
    let p = stdout(&pivots(&[
        "query",
        "--atlas",
        d,
        "--pattern",
        "0011/0111/1110/1100",
    ]));
    assert_eq!(body(&q), body(&p));
    assert_eq!(body(&q).len(), 5);
    let z = stdout(&pivots(&[
        "query",
        "--atlas",
        d,
        "--pattern",
        "..../..../..../....",
    ]));
    assert!(body(&z)[1..].iter().all(|l| l.contains(",0,0,0,,")));

    let s = stdout(&pivots(&[
        "stats",
        "--atlas-dir",
        d,
        "--figure",
        "optimal_fraction",
        "--n-max",
        "4",
        "--weighting",
        "per-class",
    ]));
    let rows = body(&s);
    assert_eq!(rows[0], "n,model,aggregation,weighting,value");
    assert!(rows.contains(&"2,field,none,per_class,100.0000"));
    assert!(rows.contains(&"4,field,none,per_class,97.1609"));
    let h = stdout(&pivots(&[
        "stats",
        "--atlas-dir",
        d,
        "--figure",
        "density",
        "--n-max",
        "4",
    ]));
    assert_eq!(body(&h)[0], "bucket_lo,bucket_hi,model,baseline,value");
    assert_eq!(body(&h).len(), 1 + 10 * 2 * 2 * 3 * 2);
    let s2 = stdout(&pivots(&[
        "stats",
        "--atlas-dir",
        d,
        "--figure",
        "savings2",
        "--n-max",
        "4",
    ]));
    assert_eq!(body(&s2).len(), 1 + 3 * 2 * 3 * 2);

    let mean = |strategy: &str| -> f64 {
        let out = stdout(&pivots(&[
            "eval",
            "--strategy",
            strategy,
            "--n",
            "4",
            "--model",
            "field",
            "--samples",
            "20000",
            "--seed",
            "3",
            "--atlas-dir",
            d,
        ]));
        body(&out)[1].rsplit(',').next().unwrap().parse().unwrap()
    };
    let (opt, mk, rnd) = (mean("optimal"), mean("markowitz"), mean("random"));
    assert!(opt <= mk && mk < rnd, "{opt} {mk} {rnd}");
    let one = pivots(&[
        "eval",
        "--strategy",
        "random",
        "--n",
        "4",
        "--samples",
        "3000",
        "--seed",
        "8",
        "--workers",
        "1",
    ]);
    let again = pivots(&[
        "eval",
        "--strategy",
        "random",
        "--n",
        "4",
        "--samples",
        "3000",
        "--seed",
        "8",
        "--workers",
        "1",
    ]);
    let three = pivots(&[
        "eval",
        "--strategy",
        "random",
        "--n",
        "4",
        "--samples",
        "3000",
        "--seed",
        "8",
        "--workers",
        "3",
    ]);
    assert_eq!(stdout(&one), stdout(&again));
    assert_eq!(body(&stdout(&one)), body(&stdout(&three)));
}

#[test]
fn train_and_evaluate_an_agent() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("agent.bin");
    let curve = dir.path().join("curve.csv");
    let args = [
        "train",
        "--n",
        "3",
        "--model",
        "ring",
        "--episodes",
        "2500",
        "--seed",
        "4",
        "--weights-out",
        w.to_str().unwrap(),
        "--curve-out",
        curve.to_str().unwrap(),
    ];
    stdout(&pivots(&args));
    let first = fs::read(&w).unwrap();
    let text = fs::read_to_string(&curve).unwrap();
    assert_eq!(body(&text)[0], "episode,mean_cost,epsilon");
    assert_eq!(body(&text).len(), 1 + 3);
    stdout(&pivots(&args));
    assert_eq!(fs::read(&w).unwrap(), first);
    assert_eq!(fs::read_to_string(&curve).unwrap(), text);

    let ev = stdout(&pivots(&[
        "eval-agent",
        "--weights",
        w.to_str().unwrap(),
        "--model",
        "ring",
        "--samples",
        "2000",
        "--seed",
        "1",
    ]));
    let rows = body(&ev);
    assert_eq!(
        rows[0],
        "n,model,samples,seed,agent_mean,markowitz_mean,improvement_pct"
    );
    assert!(rows[1].starts_with("3,ring,2000,1,"));
    let wrong = pivots(&[
        "eval-agent",
        "--weights",
        w.to_str().unwrap(),
        "--model",
        "ring",
        "--n",
        "4",
        "--seed",
        "1",
    ]);
    assert_eq!(wrong.status.code(), Some(2));
}

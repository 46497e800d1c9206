use std::path::Path;
use std::process::{Command, Output};

use dysample::baselines::bilinear_upsample;
use dysample::io::{read_npy, save_weights, write_npy};
use dysample::{OpKind, Rng, Shape, Tensor, Upsampler, Variant};

fn dysample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dysample"))
        .args(args)
        .env_remove("RESAMPLE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn tables_fpn4() {
    let o = dysample(&["tables", "--preset", "fpn4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for line in ["dysample-s,4096", "dysample-s+,8192", "dysample,32768", "dysample+,65536"] {
        assert!(out.lines().any(|l| l == line), "missing {line} in\n{out}");
    }
}

#[test]
fn tables_other_presets() {
    let out = stdout(&dysample(&["tables", "--preset", "segformer6"]));
    assert!(out.contains("\ndysample,49152\n"));
    let out = stdout(&dysample(&["tables", "--preset", "pfpn3"]));
    assert!(out.contains("\ndysample,24576\n"));
    assert_eq!(dysample(&["tables", "--preset", "unet"]).status.code(), Some(2));
}

#[test]
fn upsample_bilinear_small() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("x.npy"), dir.path().join("y.npy"));
    let x = Tensor::from_data(Shape::new(1, 1, 2, 2).unwrap(), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    write_npy(&inp, &x).unwrap();
    let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", "bilinear", "--scale", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let y = read_npy(&out).unwrap().to_f64();
    assert_eq!(y.shape(), Shape::new(1, 1, 4, 4).unwrap());
    assert_eq!(y, bilinear_upsample(&x, 2).unwrap());
}

#[test]
fn upsample_fresh_dysample_is_bilinear() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("x.npy"), dir.path().join("y.npy"));
    let x = Tensor::<f64>::randn(Shape::new(1, 32, 5, 7).unwrap(), &mut Rng::new(4), 1.0).unwrap();
    write_npy(&inp, &x).unwrap();
    for op in ["dysample", "dysample+", "dysample-s", "dysample-s+"] {
        let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", op]);
        assert_eq!(o.status.code(), Some(0), "{op}: {}", stderr(&o));
        let y = read_npy(&out).unwrap().to_f64();
        assert!(y.max_abs_diff(&bilinear_upsample(&x, 2).unwrap()).unwrap() <= 1e-12, "{op}");
    }
}

#[test]
fn upsample_keeps_f32() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out) = (dir.path().join("x.npy"), dir.path().join("y.npy"));
    let x = Tensor::<f32>::randn(Shape::new(1, 8, 3, 3).unwrap(), &mut Rng::new(1), 1.0).unwrap();
    write_npy(&inp, &x).unwrap();
    let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", "carafe", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_npy(&out).unwrap().dtype(), dysample::DType::F32);
}

#[test]
fn unknown_op_is_usage_error() {
    let o = dysample(&["upsample", "--in", "x.npy", "--out", "y.npy", "--op", "bicubic"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for name in OpKind::ALL {
        assert!(err.contains(name.name()), "{err}");
    }
}

#[test]
fn missing_and_truncated_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.npy");
    let missing = dir.path().join("none.npy");
    let o = dysample(&["upsample", "--in", s(&missing), "--out", s(&out), "--op", "nearest"]);
    assert_eq!(o.status.code(), Some(3));

    let bad = dir.path().join("bad.npy");
    let mut bytes = dysample::io::npy::encode(&Tensor::<f64>::zeros(Shape::new(1, 1, 2, 2).unwrap()));
    bytes.truncate(bytes.len() - 8);
    std::fs::write(&bad, bytes).unwrap();
    let o = dysample(&["upsample", "--in", s(&bad), "--out", s(&out), "--op", "nearest"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("expected 32 bytes, found 24"), "{}", stderr(&o));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inp = dir.path().join("x.npy");
    write_npy(&inp, &Tensor::<f64>::randn(Shape::new(1, 4, 3, 3).unwrap(), &mut Rng::new(0), 1.0).unwrap()).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", "deconv", "--seed", "9"]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.npy"), run("b.npy"));
}

#[test]
fn loaded_weights_are_used() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, out, wdir) = (dir.path().join("x.npy"), dir.path().join("y.npy"), dir.path().join("w"));
    let x = Tensor::<f64>::randn(Shape::new(1, 8, 4, 4).unwrap(), &mut Rng::new(0), 1.0).unwrap();
    write_npy(&inp, &x).unwrap();
    let mut op = Upsampler::<f64>::build(OpKind::DySample(Variant::DySample), 8, 2, &mut Rng::new(0)).unwrap();
    let Upsampler::DySample(m) = &mut op else { unreachable!() };
    m.randomize(&mut Rng::new(5), 0.1).unwrap();
    save_weights(&wdir, &op).unwrap();
    let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", "dysample", "--weights", s(&wdir)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let y = read_npy(&out).unwrap().to_f64();
    assert_eq!(y, op.forward(&x).unwrap());

    // Weights for another operator do not fit.
    let o = dysample(&["upsample", "--in", s(&inp), "--out", s(&out), "--op", "carafe", "--weights", s(&wdir)]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn bench_default_ops_small_shape() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let json = dir.path().join("b.json");
    let o = dysample(&[
        "bench", "--shape", "1,256,4,4", "--iters", "2", "--warmup", "0", "--out", s(&csv), "--json", s(&json),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = dysample::io::read_report_csv(&csv).unwrap();
    assert_eq!(rows.len(), 6);
    let names: Vec<_> = rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["dysample", "dysample+", "dysample-s", "dysample-s+", "bilinear", "carafe"]);
    assert_eq!(rows[0].params, 8192);
    assert!(rows.iter().all(|r| r.latency_median_ns.is_some()));
    let reports = dysample::io::read_report_json(&json).unwrap();
    assert_eq!(reports.len(), 6);
    assert_eq!(reports[0].param_count, rows[0].params);
    // the binary installs the counting allocator
    assert!(reports.iter().all(|r| r.memory_delta_bytes.is_some()));
}

#[test]
fn bench_to_stdout_and_bad_shape() {
    let o = dysample(&["bench", "--op", "nearest,bilinear", "--shape", "1,2,3,3", "--iters", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert_eq!(dysample(&["bench", "--shape", "1,2,3"]).status.code(), Some(2));
    assert_eq!(dysample(&["bench", "--shape", "1,0,3,3"]).status.code(), Some(2));
}

#[test]
fn gradcheck_dysample_passes() {
    let o = dysample(&["gradcheck", "--op", "dysample", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("PASS dysample max_rel_err="), "{out}");
    assert!(out.contains("tolerance=1e-4"), "{out}");
    assert_eq!(dysample(&["gradcheck", "--op", "softmax"]).status.code(), Some(2));
}

#[test]
fn gradcheck_failure_exit_code() {
    // A step this coarse cannot resolve the gradient within tolerance.
    let o = dysample(&["gradcheck", "--op", "dysample", "--trials", "1", "--eps", "0.3"]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn fit_writes_decreasing_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("loss.csv");
    let o = dysample(&["fit", "--variant", "dysample", "--steps", "60", "--size", "32", "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let losses: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 61);
    assert!(losses[60] < losses[0]);
    // trend: every 10-step window mean decreases
    let means: Vec<f64> = losses.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn viz_zero_weights_draw_zero_arrows() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, svg, wdir) = (dir.path().join("x.npy"), dir.path().join("o.svg"), dir.path().join("w"));
    write_npy(&inp, &Tensor::<f64>::randn(Shape::new(1, 8, 4, 4).unwrap(), &mut Rng::new(0), 1.0).unwrap()).unwrap();
    let op = Upsampler::<f64>::build(OpKind::DySample(Variant::DySample), 8, 2, &mut Rng::new(0)).unwrap();
    save_weights(&wdir, &op).unwrap();
    let o = dysample(&["viz", "--in", s(&inp), "--weights", s(&wdir), "--out", s(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("<line")).collect();
    assert_eq!(lines.len(), 16 * 4);
    for l in lines {
        let attr = |k: &str| -> String {
            let start = l.find(&format!("{k}=\"")).unwrap() + k.len() + 2;
            l[start..].split('"').next().unwrap().to_string()
        };
        assert_eq!((attr("x1"), attr("y1")), (attr("x2"), attr("y2")));
    }
}

#[test]
fn config_file_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# tables\npreset = pfpn3\n").unwrap();
    let out = stdout(&dysample(&["--config", s(&cfg), "tables"]));
    assert!(out.contains("dysample,24576"), "{out}");
    let out = stdout(&dysample(&["tables", "--config", s(&cfg), "--preset", "fpn4"]));
    assert!(out.contains("dysample,32768"), "{out}");

    std::fs::write(&cfg, "preset = fpn4\ncolour = blue\n").unwrap();
    let o = dysample(&["tables", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key 'colour'"), "{}", stderr(&o));
}

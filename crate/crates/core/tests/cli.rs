use msimg::config::ExperimentConfig;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn msimg(args: &[&str], out: &Path, seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_msimg"));
    cmd.args(args).arg("--out").arg(out).env_remove("MSIMG_SEED");
    if let Some(s) = seed {
        cmd.env("MSIMG_SEED", s);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn line_config(count: usize, resolution: usize, directions: &str, extra: &str) -> String {
    format!(
        r#"{{
  "name": "t",
  "trajectory": {{"kind": "line", "speed": 1, "angle": "pi/2", "offset": [0, 0], "interval": [1, 3]}},
  "band": {{"k_max": "3pi", "count": {count}}},
  "directions": {{"angles": [{directions}]}},
  "mode": "rigorous",
  "grid": {{"bounds": [[-2, 2], [0, 4]], "resolution": [{resolution}, {resolution}]}}{extra}
}}"#
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .count()
}

#[test]
fn single_direction_synth_writes_one_file_per_direction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &line_config(18, 21, r#""pi/2""#, ""));
    let out = tmp.path().join("out");
    let o = msimg(&["synth", "--config", &cfg], &out, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert_eq!(data_rows(&out.join("farfield_1.csv")), 18);
}

#[test]
fn spatial_example_writes_nine_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = examples().join("example4_line3d_observable.json");
    let o = msimg(&["synth", "--config", cfg.to_str().unwrap()], tmp.path(), None);
    assert_eq!(code(&o), 0);
    for j in 1..=9 {
        assert_eq!(data_rows(&tmp.path().join(format!("farfield_{j}.csv"))), 18);
    }
    assert!(!tmp.path().join("farfield_10.csv").exists());
}

#[test]
fn seed_override_changes_noise() {
    let cfg = examples().join("noise_line_single.json");
    let cfg = cfg.to_str().unwrap();
    let read = |seed: Option<&str>| {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(code(&msimg(&["synth", "--config", cfg], tmp.path(), seed)), 0);
        fs::read(tmp.path().join("farfield_1.csv")).unwrap()
    };
    let default = read(None);
    assert_eq!(default, read(Some("2022")));
    assert_ne!(default, read(Some("7")));
    assert_eq!(read(Some("7")), read(Some("7")));
}

#[test]
fn repeated_pipeline_is_byte_identical() {
    let cfg = examples().join("mixed_line_filter.json");
    let cfg = cfg.to_str().unwrap();
    let run = || {
        let tmp = tempfile::tempdir().unwrap();
        for cmd in ["synth", "image", "compare"] {
            assert_eq!(
                code(&msimg(&[cmd, "--config", cfg, "--threads", "3"], tmp.path(), None)),
                0
            );
        }
        let mut files: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().into(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    assert_eq!(run(), run());
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let good = write_config(tmp.path(), "good.json", &line_config(18, 21, r#""pi/2""#, ""));

    let unknown = write_config(
        tmp.path(),
        "unknown.json",
        &line_config(18, 21, r#""pi/2""#, r#", "colour": 1"#),
    );
    assert_eq!(code(&msimg(&["synth", "--config", &unknown], &out, None)), 2);

    let empty_band = write_config(tmp.path(), "band.json", &line_config(0, 21, r#""pi/2""#, ""));
    assert_eq!(code(&msimg(&["synth", "--config", &empty_band], &out, None)), 2);

    let bad_angle = write_config(tmp.path(), "angle.json", &line_config(18, 21, r#""pie""#, ""));
    assert_eq!(code(&msimg(&["synth", "--config", &bad_angle], &out, None)), 2);

    assert_eq!(code(&msimg(&["synth", "--config", &good], &out, Some("abc"))), 2);
    assert_eq!(
        code(&msimg(&["synth", "--config", &good, "--threads", "0"], &out, None)),
        2
    );
    assert_eq!(
        code(&msimg(&["synth", "--config", &good, "--mode", "fast"], &out, None)),
        2
    );
    assert_eq!(code(&msimg(&["render", "--config", &good], &out, None)), 2);
}

#[test]
fn unresolvable_far_field_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = line_config(18, 21, r#""pi/2""#, "").replace(r#""speed": 1"#, r#""speed": 1e9"#);
    let cfg = write_config(tmp.path(), "fast.json", &text);
    let o = msimg(&["synth", "--config", &cfg], &tmp.path().join("out"), None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn band_mismatch_between_synth_and_image_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let synth = write_config(tmp.path(), "a.json", &line_config(18, 21, r#""pi/2""#, ""));
    let image = write_config(tmp.path(), "b.json", &line_config(12, 21, r#""pi/2""#, ""));
    assert_eq!(code(&msimg(&["synth", "--config", &synth], &out, None)), 0);
    let o = msimg(&["image", "--config", &image], &out, None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn grid_mismatch_between_image_and_compare_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let coarse = write_config(tmp.path(), "a.json", &line_config(18, 21, r#""pi/2""#, ""));
    let fine = write_config(tmp.path(), "b.json", &line_config(18, 31, r#""pi/2""#, ""));
    for cmd in ["synth", "image"] {
        assert_eq!(code(&msimg(&[cmd, "--config", &coarse], &out, None)), 0);
    }
    assert_eq!(code(&msimg(&["compare", "--config", &coarse], &out, None)), 0);
    assert_eq!(code(&msimg(&["compare", "--config", &fine], &out, None)), 2);
}

#[test]
fn image_without_far_field_data_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &line_config(18, 21, r#""pi/2""#, ""));
    assert_eq!(
        code(&msimg(&["image", "--config", &cfg], &tmp.path().join("out"), None)),
        1
    );
}

#[test]
fn image_reports_dropped_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &line_config(18, 41, r#""pi/2", "5pi/4""#, ""));
    for cmd in ["synth", "image"] {
        assert_eq!(code(&msimg(&[cmd, "--config", &cfg], tmp.path(), None)), 0);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("image_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dropped_count"], 1);
    assert!(tmp.path().join("field_multi.csv").exists());
    assert!(tmp.path().join("field_multi.pgm").exists());
}

#[test]
fn classify_matches_closed_form_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = examples().join("example1_case2_decreasing.json");
    assert_eq!(
        code(&msimg(
            &["classify", "--config", cfg.to_str().unwrap()],
            tmp.path(),
            None
        )),
        0
    );
    let table = fs::read_to_string(tmp.path().join("classify.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let class = header.iter().position(|h| *h == "class").unwrap();
    let closed_form = header.iter().position(|h| *h == "closed_form").unwrap();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[class], cols[closed_form], "{line}");
    }
}

#[test]
fn shipped_configs_build() {
    let mut count = 0;
    for entry in fs::read_dir(examples()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 20);
}

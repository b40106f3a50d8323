mod common;

use std::fs;

use common::*;
use tvflow::pgm::{self, ImageDatum};

#[test]
fn solve_writes_one_index_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", STEP_CONFIG);
    let o = tvflow(&["solve", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let index = out.join("index.csv");
    assert_eq!(csv_header(&index), ["step", "time", "X", "Y", "energy", "residual"]);
    let rows = csv_rows(&index);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[4][0], "5");
    for f in ["estimate.csv", "checks.csv", "constants.csv", "u_000000.field", "u_000005.field"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    // The energy column never increases for the unforced flow.
    let e: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn save_every_thins_the_dump_but_keeps_the_last_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("{STEP_CONFIG}save-every = 2\n"));
    assert_eq!(code(&tvflow(&["solve", &cfg])), 0);
    let names: Vec<String> = listing(&dir.path().join("out"))
        .iter()
        .filter_map(|p| p.file_name()?.to_str().map(str::to_string))
        .filter(|n| n.ends_with(".field"))
        .collect();
    assert_eq!(names, ["u_000000.field", "u_000002.field", "u_000004.field", "u_000005.field"]);
}

#[test]
fn zero_eps_uses_the_dyadic_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let body = STEP_CONFIG.replace("eps = 0.01", "eps = 0\ntol-limit = 1e-2");
    let cfg = write_config(dir.path(), "run.cfg", &body);
    let o = tvflow(&["solve", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let trace = csv_rows(&out.join("eps_trace.csv"));
    assert!(trace.len() >= 2);
    for (k, row) in trace.iter().enumerate() {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.5f64.powi(k as i32));
    }
    assert!(out.join("selection.csv").is_file());
}

#[test]
fn missing_beta_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &STEP_CONFIG.replace("beta = 0.1\n", ""));
    let o = tvflow(&["solve", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`beta`"), "{}", stderr(&o));
}

#[test]
fn bad_values_and_unknown_keys_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        STEP_CONFIG.replace("tau = 0.1", "tau = -1"),
        STEP_CONFIG.replace("alpha = 1", "alpha = -1"),
        format!("{STEP_CONFIG}colour = red\n"),
        STEP_CONFIG.replace("u0 = preset:step", "u0 = missing.field"),
        format!("{STEP_CONFIG}eps-schedule = 1,0.5\n"),
    ] {
        let cfg = write_config(dir.path(), "bad.cfg", &body);
        let o = tvflow(&["solve", &cfg]);
        assert_eq!(code(&o), 1, "{body}\n{}", stderr(&o));
    }
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = STEP_CONFIG.replace("eps = 0.01", "eps = 1e-4") + "max-newton = 1\n";
    let cfg = write_config(dir.path(), "run.cfg", &body);
    let o = tvflow(&["solve", &cfg]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("solver error"));
    // The partial trajectory is kept.
    assert!(dir.path().join("out/u_000000.field").is_file());
}

#[test]
fn verify_passes_on_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let body = "dim = 2\nn = 8,6\nL = 1,0.75\nT = 1\ntau = 0.1\neps = 0.1\nalpha = 1\nbeta = 0.5\nu0 = c.field\n";
    let g = tvflow_core::Grid::new_2d(8, 6, 1.0, 0.75).unwrap();
    tvflow::fieldio::save_field(&dir.path().join("c.field"), &tvflow_core::ScalarField::constant(g, 0.3)).unwrap();
    let cfg = write_config(dir.path(), "const.cfg", body);
    let o = tvflow(&["verify", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("all asserted invariants hold"));
}

#[test]
fn loosened_tolerance_widens_the_slack_and_still_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let tight = write_config(dir.path(), "tight.cfg", &STEP_CONFIG.replace("output-dir = out", "output-dir = tight"));
    let loose = write_config(
        dir.path(),
        "loose.cfg",
        &(STEP_CONFIG.replace("output-dir = out", "output-dir = loose") + "tol-rel = 1e-2\n"),
    );
    for cfg in [&tight, &loose] {
        let o = tvflow(&["verify", cfg]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let rows = |name: &str| csv_rows(&dir.path().join(name).join("estimate.csv"));
    let slack = |name: &str| -> f64 {
        rows(name).iter().skip(1).map(|r| 10.0 * r[8].parse::<f64>().unwrap()).fold(0.0, f64::max)
    };
    let (s_tight, s_loose) = (slack("tight"), slack("loose"));
    assert!(s_loose > 1e6 * s_tight, "{s_tight:e} vs {s_loose:e}");
}

#[test]
fn corrupted_trajectories_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", STEP_CONFIG);
    assert_eq!(code(&tvflow(&["solve", &cfg])), 0);
    let check = write_config(
        dir.path(),
        "check.cfg",
        &(STEP_CONFIG.replace("output-dir = out", "output-dir = checked") + "trajectory = out\n"),
    );
    // The untouched dump verifies.
    let o = tvflow(&["verify", &check]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // Changing one value breaks the step equation.
    let f = dir.path().join("out/u_000003.field");
    let mut bytes = fs::read(&f).unwrap();
    let n = bytes.len();
    bytes[n - 8..].copy_from_slice(&0.25f64.to_le_bytes());
    fs::write(&f, &bytes).unwrap();
    let o = tvflow(&["verify", &check]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(msg.contains("lhs =") && msg.contains("rhs ="), "{msg}");

    // So does a truncated file.
    fs::write(&f, &bytes[..n - 3]).unwrap();
    let o = tvflow(&["verify", &check]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("corrupt trajectory"));

    // And a missing one.
    fs::remove_file(&f).unwrap();
    assert_eq!(code(&tvflow(&["verify", &check])), 3);
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let body = STEP_CONFIG.replace("u0 = preset:step", "u0 = preset:sine") + "seed = 7\n";
    let a = write_config(dir.path(), "a.cfg", &body.replace("output-dir = out", "output-dir = a"));
    let b = write_config(dir.path(), "b.cfg", &body.replace("output-dir = out", "output-dir = b"));
    for cfg in [&a, &b] {
        assert_eq!(code(&tvflow(&["solve", cfg])), 0);
        assert_eq!(code(&tvflow(&["verify", cfg])), 0);
    }
    let (la, lb) = (listing(&dir.path().join("a")), listing(&dir.path().join("b")));
    assert_eq!(la.len(), lb.len());
    for (x, y) in la.iter().zip(&lb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{:?}", x.file_name());
    }
}

#[test]
fn sweep_outputs_match_individual_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", STEP_CONFIG);
    let o = tvflow(&["sweep", &cfg, "--key", "eps", "--values", "0.1,0.05,0.02", "--jobs", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = csv_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(summary.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["0.1", "0.05", "0.02"]);
    assert!(summary.iter().all(|r| r[1] == "ok" && r[4] == "true"));

    let single = write_config(
        dir.path(),
        "single.cfg",
        &STEP_CONFIG.replace("eps = 0.01", "eps = 0.05").replace("output-dir = out", "output-dir = single"),
    );
    assert_eq!(code(&tvflow(&["solve", &single])), 0);
    for f in ["index.csv", "u_000005.field"] {
        assert_eq!(
            fs::read(dir.path().join("out/eps=0.05").join(f)).unwrap(),
            fs::read(dir.path().join("single").join(f)).unwrap()
        );
    }
}

#[test]
fn sweep_reports_failed_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("{STEP_CONFIG}max-newton = 1\n"));
    let o = tvflow(&["sweep", &cfg, "--key", "eps", "--values", "1,1e-4", "--jobs", "2"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let summary = csv_rows(&dir.path().join("out/sweep.csv"));
    assert_eq!(summary[1][1], "exit 2");
}

#[test]
fn study_writes_gaps_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let body = STEP_CONFIG.replace("u0 = preset:step", "u0 = preset:sine").replace("eps = 0.01", "eps = 0.1");
    let cfg = write_config(dir.path(), "run.cfg", &body);
    let o = tvflow(&["study", &cfg, "--axis", "tau", "--levels", "0.1,0.05,0.025", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let path = dir.path().join("out/study.csv");
    assert_eq!(csv_header(&path), ["tau", "gap_to_next", "rate"]);
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 3);
    let rate: f64 = rows[0][2].parse().unwrap();
    assert!(rate > 0.5, "rate {rate}");
    // Too few levels is a config error.
    assert_eq!(code(&tvflow(&["study", &cfg, "--axis", "eps", "--levels", "0.1,0.05"])), 1);
}

fn write_image(path: &std::path::Path, img: &ImageDatum) {
    fs::write(path, pgm::encode_plain(img)).unwrap();
}

#[test]
fn denoising_a_constant_image_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageDatum::new(12, 9, 255, vec![77; 108]).unwrap();
    let input = dir.path().join("flat.pgm");
    write_image(&input, &img);
    let output = dir.path().join("flat-out.pgm");
    let o = tvflow(&["denoise", input.to_str().unwrap(), "-o", output.to_str().unwrap(), "--steps", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(pgm::read_pgm(&output).unwrap(), img);
    let ledger = csv_rows(&dir.path().join("flat-out.csv"));
    assert_eq!(ledger.len(), 6);
    assert!(ledger.iter().all(|r| r[6] == "true"));
}

#[test]
fn denoising_salt_and_pepper_reduces_variance() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (24, 24);
    let mut pixels = vec![128u16; w * h];
    for (k, p) in pixels.iter_mut().enumerate() {
        match (k * 7919) % 23 {
            0 => *p = 0,
            1 => *p = 255,
            _ => {}
        }
    }
    let img = ImageDatum::new(w, h, 255, pixels).unwrap();
    let input = dir.path().join("noisy.pgm");
    write_image(&input, &img);
    let output = dir.path().join("clean.pgm");
    let report = dir.path().join("ledger/clean.csv");
    let o = tvflow(&[
        "denoise",
        input.to_str().unwrap(),
        "-o",
        output.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--alpha",
        "edge-stop:0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = pgm::read_pgm(&output).unwrap();
    assert_eq!(&fs::read(&output).unwrap()[..2], b"P5");
    assert!(out.mean_and_variance().1 < img.mean_and_variance().1);
    let energy: Vec<f64> = csv_rows(&report).iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-8));
}

#[test]
fn malformed_images_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.pgm");
    fs::write(&input, b"P5\n4 4\n255\n\x01\x02").unwrap();
    let o = tvflow(&["denoise", input.to_str().unwrap(), "-o", dir.path().join("x.pgm").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("malformed PGM"));
}

#[test]
fn image_preset_reads_the_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageDatum::new(6, 4, 15, (0..24).map(|k| (k % 16) as u16).collect()).unwrap();
    write_image(&dir.path().join("u0.pgm"), &img);
    let body = "T = 0.2\ntau = 0.1\neps = 0.1\nalpha = edge-stop:1\nbeta = 0.2\nu0 = preset:image\nimage = u0.pgm\n";
    let cfg = write_config(dir.path(), "img.cfg", body);
    let o = tvflow(&["solve", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let u0 = tvflow::fieldio::load_field(&dir.path().join("tvflow-out/u_000000.field")).unwrap();
    assert_eq!(u0.grid().counts(), &[6, 4]);
    assert_eq!(u0.values()[5], 5.0 / 15.0);
}

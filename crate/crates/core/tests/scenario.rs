use std::path::{Path, PathBuf};

use fluctua::scenario::{parse_scenario, run, RunOptions, RunStatus, Scenario};
use fluctua::Error;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn problems(text: &str) -> Vec<String> {
    match Scenario::from_json(text) {
        Err(Error::Scenario(p)) => p,
        other => panic!("expected scenario errors, got {other:?}"),
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (head, rows)
}

#[test]
fn shipped_scenarios_round_trip() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let s = parse_scenario(&path).unwrap();
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again, "{}", path.display());
    }
}

#[test]
fn dangling_reference_names_material_and_location() {
    let p = problems(
        r#"{
        "stacks": { "film": { "layers": [ { "material": "vacuum" }, { "material": "au" } ] } },
        "emitters": [ { "name": "e", "z": "1e-8 m", "omega0": "1e15 rad/s", "dipole": ["0 C*m", "0 C*m", "1e-29 C*m"] } ],
        "observables": [ { "kind": "purcell", "stack": "film", "emitter": "e" } ]
    }"#,
    );
    assert_eq!(
        p,
        vec!["stacks.film.layers[1].material: undefined material \"au\"".to_string()]
    );
}

#[test]
fn all_problems_are_reported_together() {
    let p = problems(
        r#"{
        "materials": { "m": { "background": 2.0, "colour": "red",
            "channels": [ { "kind": "drude", "f": 1.0, "gamma": "1e13 Hz", "omega_p": "1e16 rad/s" } ] } },
        "stacks": { "s": { "layers": [ { "material": "m" }, { "material": "vacuum", "thickness": "1 m" } ] } },
        "emitters": [ { "name": "e", "z": "1e-8 m", "omega0": "1e15 rad/s", "dipole": ["0 C*m", "0 C*m", "0 C*m"] } ],
        "sweeps": [ { "axis": "d", "from": "1 m", "to": "2 m", "points": 3 } ],
        "observables": [ { "kind": "purcell", "stack": "s", "emitter": "ghost" } ]
    }"#,
    );
    let joined = p.join("\n");
    for needle in [
        "materials.m.colour: unknown key",
        "materials.m.channels[0].gamma: unit \"Hz\"",
        "stacks.s.layers[1]: half-spaces take no thickness",
        "undefined emitter \"ghost\"",
        "axis \"d\" does not apply to purcell",
    ] {
        assert!(joined.contains(needle), "missing {needle:?} in\n{joined}");
    }
}

#[test]
fn malformed_json_is_an_error() {
    assert!(matches!(
        Scenario::from_json("{ \"observables\": ["),
        Err(Error::Scenario(_))
    ));
}

#[test]
fn purcell_sweep_above_mirror() {
    let mut s = parse_scenario(&scenarios().join("purcell_mirror.json")).unwrap();
    s.sweeps[0].points = 12;
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&s, dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(rep.status, RunStatus::Completed);
    for (file, perp) in [("purcell_perp__z_0.csv", true), ("purcell_par__z_0.csv", false)] {
        let (head, rows) = read_csv(&dir.path().join(file));
        assert_eq!(head, ["z", "purcell_factor", "abs_error", "stable"]);
        assert_eq!(rows.len(), 12);
        for r in &rows {
            // Image dipole in a perfect mirror, x = 2 ω₀ z / c.
            let x = 2.0 * r[0] * 2e15 / fluctua::constants::C;
            let (j0, j1) = (x.sin() / x, x.sin() / (x * x) - x.cos() / x);
            let exact = if perp {
                1.0 + 3.0 * j1 / x
            } else {
                1.0 - 1.5 * (j0 - j1 / x)
            };
            assert!(
                (r[1] - exact).abs() < 1e-2 * exact.max(0.05),
                "z={:e}: {} vs {exact}",
                r[0],
                r[1]
            );
            assert_eq!(r[3], 1.0);
        }
        assert!((rows[11][1] - 1.0).abs() < 0.1);
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.manifest).unwrap()).unwrap();
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["scenario"]["sweeps"][0]["points"], 12);
    assert!(manifest["constants"]["hbar"].is_f64());
}

#[test]
fn casimir_sweep_follows_inverse_fourth_power() {
    let mut s = parse_scenario(&scenarios().join("casimir_mirror.json")).unwrap();
    s.observables.truncate(1);
    s.sweeps[0].points = 4;
    let dir = tempfile::tempdir().unwrap();
    run(&s, dir.path(), &RunOptions::default()).unwrap();
    let (_, rows) = read_csv(&dir.path().join("pressure__d_0.csv"));
    let n = rows.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0].ln(), (-r[1]).ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 4.0).abs() < 0.01, "slope {slope}");
}

#[test]
fn reruns_give_identical_csv() {
    let mut s = parse_scenario(&scenarios().join("emitter_near_surface.json")).unwrap();
    s.observables.truncate(2);
    s.sweeps[0].points = 2;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(
        &s,
        a.path(),
        &RunOptions {
            threads: Some(1),
            ..RunOptions::default()
        },
    )
    .unwrap();
    run(
        &s,
        b.path(),
        &RunOptions {
            threads: Some(2),
            ..RunOptions::default()
        },
    )
    .unwrap();
    for f in ["rate__z_0.csv", "shift__z_0.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn friction_sweep_stops_at_threshold() {
    let mut s = parse_scenario(&scenarios().join("friction_threshold.json")).unwrap();
    s.sweeps[0].from.value = 5e5;
    s.sweeps[0].points = 3;
    let dir = tempfile::tempdir().unwrap();
    let rep = run(&s, dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(rep.status, RunStatus::Unstable);
    assert_eq!(rep.status.exit_code(), 3);
    let out = &rep.outputs[0];
    // 5e5 and ~1.4e6 are below threshold, 4e6 above it.
    assert_eq!(out.rows, 2);
    assert_eq!(out.stopped_at, Some(4e6));
    let (lo, hi) = out.threshold_bracket.expect("bracket recorded");
    assert!(lo > 1.4e6 && hi < 4e6 && hi - lo <= 0.01 * hi);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep.manifest).unwrap()).unwrap();
    assert_eq!(manifest["outputs"][0]["threshold_bracket"][0], lo);
    let (_, rows) = read_csv(&dir.path().join(&out.file));
    assert!(rows.iter().all(|r| r[1] < 0.0));
}

//! Configuration files read from disk, including external forcing.

use std::fs;

use cryoflow::config::{parse_config, ForcingSource};
use cryoflow::ensemble::run_ensemble;
use cryoflow::forcing::{forcing_to_csv, SinusoidalForcing};
use cryoflow::output::series_path;

const SCENARIO: &str = "\
[scenario]
name = column
mesh.depth = 2
mesh.n_cells = 12
spinup.max_years = 0
";

#[test]
fn forcing_file_matches_the_generator_it_was_written_from() {
    let dir = tempfile::tempdir().unwrap();
    let generated = SinusoidalForcing { mean_temperature: -1.0, breakpoints: 37, ..SinusoidalForcing::default() };
    fs::create_dir(dir.path().join("data")).unwrap();
    fs::write(dir.path().join("data/climate.csv"), forcing_to_csv(&generated.build().unwrap())).unwrap();

    let from_file = dir.path().join("file.cfg");
    fs::write(&from_file, format!("[forcing]\nfile = data/climate.csv\n\n{SCENARIO}")).unwrap();
    let from_generator = dir.path().join("gen.cfg");
    fs::write(&from_generator, format!("[forcing]\nmean_temperature = -1\nbreakpoints = 37\n\n{SCENARIO}")).unwrap();

    let a = parse_config(&from_file).unwrap();
    assert_eq!(a.forcing, ForcingSource::File(dir.path().join("data/climate.csv")));
    let b = parse_config(&from_generator).unwrap();
    assert_eq!(a.forcing.load().unwrap(), b.forcing.load().unwrap());

    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    run_ensemble(&a.scenarios, &a.forcing.load().unwrap(), 1, &out_a, false).unwrap();
    run_ensemble(&b.scenarios, &b.forcing.load().unwrap(), 1, &out_b, false).unwrap();
    let read = |dir: &std::path::Path| fs::read(series_path(dir, "column")).unwrap();
    assert_eq!(read(&out_a), read(&out_b));
}

#[test]
fn bad_forcing_row_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "time_s,precip_m_s,pet_m_s,t_north_c,t_south_c\n0,0,0,-5,-3\n# comment\n86400,-1e-8,0,-5,-3\n";
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("[forcing]\nfile = f.csv\n\n{SCENARIO}")).unwrap();
    let err = parse_config(&cfg).unwrap().forcing.load().unwrap_err().to_string();
    assert!(err.contains("f.csv:4:"), "{err}");
}

#[test]
fn layers_chain_and_fill_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let text = format!(
        "{SCENARIO}\n[layer]\nz_bottom = 0.3\nk_sat = 1e-5\n\n[layer]\nz_bottom = 1.1\n\n[layer]\nvg_n = 1.3\n"
    );
    fs::write(&cfg, text).unwrap();
    let c = parse_config(&cfg).unwrap();
    let layers = c.scenarios[0].profile.layers();
    let bounds: Vec<(f64, f64)> = layers.iter().map(|l| (l.z_top, l.z_bottom)).collect();
    assert_eq!(bounds, [(0.0, 0.3), (0.3, 1.1), (1.1, 2.0)]);
    assert_eq!(layers[0].k_sat, 1e-5);
    assert_eq!(layers[2].vg_n, 1.3);

    // the second [layer] header is on line 10
    fs::write(&cfg, format!("{SCENARIO}\n[layer]\nz_bottom = 0.3\n\n[layer]\nz_top = 0.4\n")).unwrap();
    let err = parse_config(&cfg).unwrap_err().to_string();
    assert!(err.contains("run.cfg:10:"), "{err}");
}

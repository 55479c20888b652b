use std::path::Path;

use gpmmc::harness::{build_model, Method, RunConfig};

fn presets() -> Vec<(String, RunConfig)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), RunConfig::load(&p).unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_preset_loads_and_names_its_output() {
    let all = presets();
    assert!(all.len() >= 20);
    for (name, cfg) in &all {
        let stem = name.trim_end_matches(".toml");
        assert_eq!(cfg.output.as_deref(), Some(Path::new("runs").join(stem).as_path()), "{name}");
    }
}

#[test]
fn presets_follow_the_published_settings() {
    for (name, cfg) in presets() {
        if cfg.method == Method::Gpmmc {
            assert_eq!(cfg.gamma, Some(1e-4), "{name}");
        }
        match cfg.model.as_str() {
            "min_distance" if cfg.dimension.is_none() => assert_eq!((cfg.lo, cfg.hi, cfg.bins), (Some(-1.0), Some(54.0), 55)),
            "beam" => assert_eq!((cfg.lo, cfg.hi, cfg.bins), (Some(0.56), Some(0.66), 40)),
            "poisson_kl" => {
                assert_eq!((cfg.lo, cfg.hi, cfg.bins), (Some(-2.0), Some(0.0), 20));
                assert_eq!(cfg.iterations, Some(10));
                assert_eq!(cfg.samples_per_iteration, Some(20_000));
            }
            _ => {}
        }
    }
}

#[test]
fn cheap_preset_models_build() {
    for (name, cfg) in presets() {
        if cfg.model != "poisson_kl" {
            let model = build_model(&cfg).unwrap();
            let expected = match (cfg.model.as_str(), cfg.dimension) {
                ("beam", _) => 5,
                (_, Some(d)) => d,
                _ => 2,
            };
            assert_eq!(model.dimension(), expected, "{name}");
        }
    }
}

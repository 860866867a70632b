//! Every config printed in the README parses, resolves and builds.

use bmc::config::{self, Built};

fn readme_configs() -> Vec<String> {
    let text = include_str!("../../../README.md");
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```json\n") {
        let body = &rest[start + 8..];
        let end = body.find("```").expect("closed block");
        if body[..end].contains("\"state_space\"") {
            out.push(body[..end].to_string());
        }
        rest = &body[end + 3..];
    }
    out
}

#[test]
fn readme_configs_build() {
    let configs = readme_configs();
    assert_eq!(configs.len(), 10, "one config per subcommand");
    let mut studies = Vec::new();
    for text in &configs {
        let raw = config::parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let study = raw.experiment.study.clone().expect("study named");
        let resolved = raw.resolve(&study).unwrap_or_else(|e| panic!("{study}: {e}"));
        let built = Built::new(&resolved).unwrap_or_else(|e| panic!("{study}: {e}"));
        if !matches!(study.as_str(), "green" | "check") {
            built.initial().unwrap_or_else(|e| panic!("{study}: {e}"));
        }
        built.watched().unwrap_or_else(|e| panic!("{study}: {e}"));
        built.test_function().unwrap_or_else(|e| panic!("{study}: {e}"));
        match study.as_str() {
            "boundary" => drop(built.boundary_params().unwrap()),
            "disappear" => drop(built.disappear_params().unwrap()),
            "inequalities" => drop(built.inequality_params().unwrap()),
            "green" => drop(built.green_params().unwrap()),
            _ => {}
        }
        studies.push(study);
    }
    studies.sort();
    let mut expected = vec![
        "boundary", "boundary-table", "check", "disappear", "green", "gw", "inequalities", "martingale", "positivity",
        "simulate",
    ];
    expected.sort();
    assert_eq!(studies, expected);
}

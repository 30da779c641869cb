//! Scenario files bundled with the crate, keyed by figure id.

use super::config::{ConfigError, ScenarioConfig};

const BUNDLED: &[(&str, &str)] = &[
    (
        "baseline-generic",
        include_str!("../../scenarios/baseline-generic.toml"),
    ),
    ("generic", include_str!("../../scenarios/generic.toml")),
    ("generic-ct", include_str!("../../scenarios/generic-ct.toml")),
    (
        "generic-ct-gcl1-1",
        include_str!("../../scenarios/generic-ct-gcl1-1.toml"),
    ),
    (
        "generic-ct-gcl1-1-gb",
        include_str!("../../scenarios/generic-ct-gcl1-1-gb.toml"),
    ),
    (
        "generic-ct-gcl1-3",
        include_str!("../../scenarios/generic-ct-gcl1-3.toml"),
    ),
    (
        "generic-ct-gcl1-3-gb",
        include_str!("../../scenarios/generic-ct-gcl1-3-gb.toml"),
    ),
    (
        "generic-ct-gcl2-1",
        include_str!("../../scenarios/generic-ct-gcl2-1.toml"),
    ),
    (
        "generic-ct-gcl2-3",
        include_str!("../../scenarios/generic-ct-gcl2-3.toml"),
    ),
    (
        "generic-ct-gcl3-1",
        include_str!("../../scenarios/generic-ct-gcl3-1.toml"),
    ),
    (
        "generic-ct-gcl3-3",
        include_str!("../../scenarios/generic-ct-gcl3-3.toml"),
    ),
    (
        "generic-ct-gcl4-1",
        include_str!("../../scenarios/generic-ct-gcl4-1.toml"),
    ),
    (
        "generic-ct-gcl4-1-gb",
        include_str!("../../scenarios/generic-ct-gcl4-1-gb.toml"),
    ),
    (
        "generic-ct-gcl4-3",
        include_str!("../../scenarios/generic-ct-gcl4-3.toml"),
    ),
    (
        "generic-ct-gcl4-3-gb",
        include_str!("../../scenarios/generic-ct-gcl4-3-gb.toml"),
    ),
    ("generic-ct-spq", include_str!("../../scenarios/generic-ct-spq.toml")),
    ("generic-spq", include_str!("../../scenarios/generic-spq.toml")),
    ("omega-ct-spq", include_str!("../../scenarios/omega-ct-spq.toml")),
    ("psi-ct-spq", include_str!("../../scenarios/psi-ct-spq.toml")),
    ("ptp-precision", include_str!("../../scenarios/ptp-precision.toml")),
    (
        "ptp-precision-ct",
        include_str!("../../scenarios/ptp-precision-ct.toml"),
    ),
    ("txinject", include_str!("../../scenarios/txinject.toml")),
];

/// Ids of all bundled scenarios, sorted.
pub fn ids() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(id, _)| *id)
}

/// TOML text of a bundled scenario.
pub fn text(id: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(k, _)| *k == id).map(|(_, t)| *t)
}

pub fn load(id: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    text(id).map(ScenarioConfig::from_toml_str)
}

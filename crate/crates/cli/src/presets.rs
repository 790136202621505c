//! Configurations shipped with the binary.

const PRESETS: [(&str, &str); 9] = [
    ("cifar-two-phase", include_str!("../presets/cifar-two-phase.toml")),
    ("equivalence-quadratic", include_str!("../presets/equivalence-quadratic.toml")),
    ("fig1-large", include_str!("../presets/fig1-large.toml")),
    ("fig1-small", include_str!("../presets/fig1-small.toml")),
    ("fig11-small", include_str!("../presets/fig11-small.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("transition-toy", include_str!("../presets/transition-toy.toml")),
    ("two-phase-toy", include_str!("../presets/two-phase-toy.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

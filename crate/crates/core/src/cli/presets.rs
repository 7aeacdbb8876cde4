//! Built-in configs for the standard parameter sets. Rates in units of κ.

pub struct Preset {
    pub name: &'static str,
    pub command: &'static str,
    pub config: &'static str,
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "fig3",
        command: "evolve",
        config: r#"# Mismatch dynamics at U = 0.4, Lambda3Tilde = 2.
[model]
U = 0.4
Lambda3Tilde = 2
dim = 130

[time]
t_end = 20
stride = 0.1
method = "pade"
max_step = 0.05

[sweep]
param = "deltaLambda1"
values = [0.0, 0.02, 0.05, 0.1]
"#,
    },
    Preset {
        name: "fig4",
        command: "evolve",
        config: r#"# Weak-Kerr blockade across drive strengths, deltaLambda1 = 0.01.
# The Lambda3Tilde grid is a choice of this tool.
[model]
U = 0.075
Lambda3Tilde = 1
deltaLambda1 = 0.01
dim = 60

[time]
t_end = 10
stride = 0.05
leakage_budget = 1e-4

[sweep]
param = "Lambda3Tilde"
values = [0.125, 0.25, 0.5, 1, 2]
"#,
    },
    Preset {
        name: "fig6",
        command: "antiresonance",
        config: r#"# Steady-state antiresonance at r = 1, kappa = 0.1 Lambda3Tilde.
[model]
U = 0.5
kappa = 0.1
Lambda3Tilde = 1
dim = 60

[antiresonance]
min_offset = 1e-8
max_offset = 0.5
points_per_side = 60

[sweep]
param = "U"
values = [0.6, 0.5, 0.4]
"#,
    },
    Preset {
        name: "fig1c",
        command: "protocol",
        config: r#"# Fock-state protocol with additive displacement noise, nbar_th = 0.005.
[model]
U = 0.4
Lambda3Tilde = 2
dim = 50

[protocol]
target_P1 = 0.5

[noise]
kind = "additive"
sigma = 0.07071067811865475

[sweep]
param = "U"
values = [0.4, 0.2, 0.1, 0.05]
"#,
    },
    Preset {
        name: "figS1",
        command: "protocol",
        config: r#"# Fock-state protocol with displacement phase noise.
[model]
U = 0.4
Lambda3Tilde = 2
dim = 50

[protocol]
target_P1 = 0.5

[noise]
kind = "phase"
sigma = 0.005

[sweep]
param = "U"
values = [0.4, 0.2, 0.1, 0.05]
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

//! Built-in experiment configurations.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// `key=value` lines applied on top of the defaults.
    pub body: &'static str,
}

/// Sample count restored by `--paper-scale`.
pub const FULL_SAMPLES: usize = 10_000;

const WAVE: &str = "equation=wave\nquantity=wave-energy\nkappa=64\nN=500\nM=2000\n\
                    levy.gamma_spectrum=1 4\ninitial.kind=gaussian\n";
const SCHRODINGER: &str = "equation=schrodinger\nkappa=8\nN=300\nM=2000\n\
                           levy.kind=compensated\nlevy.gamma_spectrum=1 4\ninitial.kind=gaussian\n";
const MAXWELL: &str = "equation=maxwell\nquantity=maxwell-energy\nkappa=32\nN=300\nM=2000\n\
                       levy.kind=compensated\nlevy.gamma_spectrum=1 4\ninitial.kind=gaussian\nmonopole=true\n";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "wave-fig1",
        summary: "wave energy, compensated noise, T=3",
        body: "scheme=exp\nlevy.kind=compensated\nT=3\n",
    },
    Preset {
        name: "wave-fig2",
        summary: "wave energy, compensated noise, T=100 (tau=0.2)",
        body: "scheme=exp\nlevy.kind=compensated\nT=100\n",
    },
    Preset {
        name: "wave-nonzero-mean",
        summary: "wave energy, non-compensated noise, adapted scheme, T=3",
        body: "scheme=adapted\nlevy.kind=noncompensated\nT=3\n",
    },
    Preset {
        name: "wave-nonzero-mean-long",
        summary: "wave energy, non-compensated noise, adapted scheme, T=100",
        body: "scheme=adapted\nlevy.kind=noncompensated\nT=100\n",
    },
    Preset {
        name: "schrodinger-fig",
        summary: "Schrödinger mass, T=3",
        body: "scheme=exp\nquantity=schrodinger-mass\nT=3\n",
    },
    Preset {
        name: "schrodinger-fig-long",
        summary: "Schrödinger mass, T=100 (tau=1/3)",
        body: "scheme=exp\nquantity=schrodinger-mass\nT=100\n",
    },
    Preset {
        name: "schrodinger-mass-bem",
        summary: "Schrödinger mass under backward Euler, T=3",
        body: "scheme=bem\nquantity=schrodinger-mass\nT=3\n",
    },
    Preset {
        name: "schrodinger-energy",
        summary: "Schrödinger energy, T=3",
        body: "scheme=exp\nquantity=schrodinger-energy\nT=3\n",
    },
    Preset {
        name: "schrodinger-energy-long",
        summary: "Schrödinger energy, T=100",
        body: "scheme=exp\nquantity=schrodinger-energy\nT=100\n",
    },
    Preset {
        name: "maxwell-fig",
        summary: "Maxwell energy with monopole channels, T=3",
        body: "scheme=exp\nT=3\n",
    },
    Preset {
        name: "maxwell-fig-long",
        summary: "Maxwell energy with monopole channels, T=100",
        body: "scheme=exp\nT=100\n",
    },
    Preset {
        name: "zero-noise",
        summary: "Schrödinger mass without noise, T=3",
        body: "scheme=exp\nquantity=schrodinger-mass\nT=3\nlevy.gamma_spectrum=0 4 0\n",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Base block for the preset's equation followed by its own lines.
pub fn text(preset: &Preset) -> String {
    let base = if preset.name.starts_with("wave") {
        WAVE
    } else if preset.name.starts_with("maxwell") {
        MAXWELL
    } else {
        SCHRODINGER
    };
    format!("{base}{}", preset.body)
}

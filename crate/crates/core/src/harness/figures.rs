use crate::error::{Error, Result};

use super::config::ExperimentConfig;

macro_rules! bundled {
    ($($file:literal),+ $(,)?) => {
        &[$(($file, include_str!(concat!("../../configs/", $file, ".toml")))),+]
    };
}

/// Every figure id with its bundled config files.
pub const FIGURES: &[(&str, &[(&str, &str)])] = &[
    ("fig4", bundled!("fig4")),
    ("fig5", bundled!("fig5")),
    ("fig6", bundled!("fig6")),
    ("fig7", bundled!("fig7")),
    ("fig8", bundled!("fig8")),
    ("fig9", bundled!("fig9")),
    ("fig10", bundled!("fig10")),
    ("fig11", bundled!("fig11")),
    ("fig12", bundled!("fig12")),
    ("fig13", bundled!("fig13")),
    ("fig14", bundled!("fig14")),
    ("fig15", bundled!("fig15")),
    ("fig16", bundled!("fig16")),
    ("fig17", bundled!("fig17")),
    ("fig18", bundled!("fig18")),
    ("fig19", bundled!("fig19_bach", "fig19_oja")),
    ("fig20", bundled!("fig20_bach", "fig20_oja")),
];

/// Calibrated TOHM PCA run; not tied to a figure.
pub const TOHM_PCA: &str = include_str!("../../configs/tohm_pca.toml");

pub fn figure_ids() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|(id, _)| *id)
}

/// Parsed configs for a figure, with desk overrides applied when `desk` is set.
pub fn figure_configs(id: &str, desk: bool) -> Result<Vec<ExperimentConfig>> {
    let (_, files) = FIGURES.iter().find(|(f, _)| *f == id).ok_or_else(|| {
        Error::Config(format!(
            "unknown figure `{id}` (expected one of {})",
            figure_ids().collect::<Vec<_>>().join(", ")
        ))
    })?;
    files
        .iter()
        .map(|(file, text)| {
            let mut c = ExperimentConfig::from_toml_str(text)
                .map_err(|e| Error::Config(format!("bundled {file}: {e}")))?;
            if desk {
                c.apply_desk();
            }
            Ok(c)
        })
        .collect()
}

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument for an operation (e.g. negative quantum number).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or unusable configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Pulse-train generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// Population reached the top of the angular-momentum basis.
    #[error(
        "leakage guard tripped at kick {kick_index}: population {population:.3e} \
         within two lattice sites of j_max (threshold {threshold:.0e})"
    )]
    Leakage {
        kick_index: usize,
        population: f64,
        threshold: f64,
    },

    /// On-site energy evaluated at a tangent pole; the caller must perturb
    /// the quasienergy away from the resonance.
    #[error("tangent pole: phi = {phi} is within {tol:.0e} of pi/2")]
    Pole { phi: f64, tol: f64 },

    /// Fit window too short or otherwise unusable.
    #[error("fit-range error: {0}")]
    FitRange(String),

    /// Line-shape fit failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Unexpected numerical failure.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

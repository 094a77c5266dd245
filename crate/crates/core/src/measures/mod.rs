//! Laws on the diagonal group and on `U`, and diagnostics for curve pushforwards.

mod curve;
mod diagonal;
mod pushforward;
mod unipotent;

pub use curve::{CurveKind, CurveSpec};
pub use diagonal::{DiagonalLawSpec, Gap, LawKind, ALPHA_SUM_TOL};
pub use pushforward::{
    f_psi, nonplanarity_check, nu_bar_mass_split, pushforward_density_check, theta_block,
    DensityDiagnostic, Grid, MassSplitReport, NonplanarityReport,
};
pub use unipotent::{uniform_ball, AuxLaw, UnipotentLawSpec};

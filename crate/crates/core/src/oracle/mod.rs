//! Brute-force ground truth on small, fully enumerable state spaces.
//!
//! Everything here is computed by exhaustive summation or direct ODE
//! integration. The code deliberately avoids the rate evaluation, path
//! sampling and loss paths of the rest of the crate so that it can audit them.

mod coupling;
mod distance;
mod kfe;
mod lemmas;
mod marginal;
mod propagation;
mod space;
mod table;
mod theorem;

pub use coupling::{Atom, WeightedCoupling};
pub use distance::edit_distance;
pub use kfe::{integrate_kfe, KfeTrajectory};
pub use lemmas::{
    strip_cells, verify_deterministic_rate_lemma, verify_time_independent_rate_lemma, LemmaReport,
};
pub use marginal::{enumerate_marginal, enumerate_marginal_p, Marginal};
pub use propagation::{
    event_driven_mask, exact_mask_distribution, ks_against_cdf, ks_statistic, mask_histogram,
    total_variation, tv_noise_floor,
};
pub use space::{EnumeratedSpace, SPACE_CAP};
pub use table::{ExactRateTable, TableDirection};
pub use theorem::{verify_theorem1, Theorem1Report, Theorem1Row};

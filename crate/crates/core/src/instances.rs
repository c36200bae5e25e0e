//! Explicit Fock-space instances of g-twisted modules, used as fixtures and as targets for
//! induced maps.

use num_traits::Zero;

use crate::algebra::AlgebraSpec;
use crate::error::ModuleError;
use crate::fock::{build_fock, FockParams};
use crate::module::TruncatedModule;
use crate::rational::Rational;

/// The g-twisted Fock module: modes of generator i run over g_weight(i) + ℤ and the fields
/// carry x^{−N_g}. Fails with `InvalidSeed` when no translation operator exists on a
/// one-dimensional ground space (e.g. a nilpotent N_g pairing a generator with a central mode).
pub fn fock_instance(v: &AlgebraSpec, cutoff: &Rational) -> Result<TruncatedModule, ModuleError> {
    let twisted = !v.is_untwisted();
    let params = FockParams {
        name: format!("{} {} Fock module", v.name(), if twisted { "twisted" } else { "untwisted" }),
        mode_class: v.generators.iter().map(|g| g.g_weight.clone()).collect(),
        ground_weight: Rational::zero(),
        ground_parity: 0,
        ground_class: Rational::zero(),
        cutoff: cutoff.clone(),
        log_fields: v.generators.iter().any(|g| g.nilpotent_image.is_some()),
        solve_translation: true,
    };
    build_fock(&v.free_field(), &params)
}

/// V as a module over itself, truncated at `cutoff`.
pub fn vacuum_instance(v: &AlgebraSpec, cutoff: &Rational) -> Result<TruncatedModule, ModuleError> {
    let params = FockParams {
        name: format!("{} vacuum module", v.name()),
        mode_class: vec![Rational::zero(); v.generators.len()],
        ground_weight: Rational::zero(),
        ground_parity: 0,
        ground_class: Rational::zero(),
        cutoff: cutoff.clone(),
        log_fields: false,
        solve_translation: false,
    };
    build_fock(&v.free_field(), &params)
}

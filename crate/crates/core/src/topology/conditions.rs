use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Gains, ModifiedLaplacian, SyncBasis};
use crate::error::Result;

/// Outcome of the tracking / synchronization gain conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `L` was asymmetric and the conditions were evaluated on `(L + L')/2`.
    pub symmetrized: bool,
    /// `L > 0`: every member tracks the reference exponentially.
    pub tracking_ok: bool,
    /// `L + U > 0`: the members synchronize.
    pub sync_ok: bool,
    /// `D1 = 0` with `D2 > 0`: synchronization without tracking.
    pub indifferent: bool,
    pub rate_tracking: f64,
    pub rate_sync: f64,
    pub min_eig_l: f64,
    pub min_eig_l_plus_u: f64,
    pub d1_spectrum: Vec<f64>,
    pub d2_spectrum: Vec<f64>,
    /// `[1]` fails to be an eigenblock when this is nonzero (for example after
    /// adding an inhibitory link).
    pub cross_coupling: f64,
}

/// Evaluates the gain conditions for `lap` using the split in `basis`.
///
/// `basis` must have been built from the symmetric part of `lap.l`.
pub fn check_conditions(lap: &ModifiedLaplacian, basis: &SyncBasis) -> ConditionReport {
    let symmetrized = !lap.is_symmetric();
    let ls = lap.symmetrized();
    let scale = ls.amax().max(1.0);
    let tol = 1e-9 * scale;

    let min_eig_l = min_eig(&ls);
    let min_eig_l_plus_u = min_eig(&(&ls + &lap.u));
    let d1_spectrum = basis.d1_spectrum();
    let d2_spectrum = basis.d2_spectrum();
    let rate_tracking = d1_spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let rate_sync = d2_spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let indifferent = basis.d1.amax() <= tol && rate_sync > tol;

    ConditionReport {
        symmetrized,
        tracking_ok: min_eig_l > tol,
        sync_ok: min_eig_l_plus_u > tol,
        indifferent,
        rate_tracking,
        rate_sync,
        min_eig_l,
        min_eig_l_plus_u,
        d1_spectrum,
        d2_spectrum,
        cross_coupling: basis.cross_coupling,
    }
}

impl ModifiedLaplacian {
    /// Builds the split of the symmetric part and checks every condition.
    pub fn report(&self) -> Result<(SyncBasis, ConditionReport)> {
        let basis = SyncBasis::new(&self.symmetrized(), self.p, self.n)?;
        let report = check_conditions(self, &basis);
        Ok((basis, report))
    }
}

/// Closed-form sufficient condition for `L > 0` on a ring of scalar-diagonal
/// gains: `K1 - K2 > 0` for two members, `K1 - 2 K2 > 0` otherwise.
pub fn ring_tracking_margin(gains: &Gains, p: usize) -> (&'static str, DVector<f64>) {
    if p == 2 {
        ("K1 - K2", &gains.k1 - &gains.k2)
    } else {
        ("K1 - 2K2", &gains.k1 - &gains.k2 * 2.0)
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "symmetrized:   {}", self.symmetrized)?;
        writeln!(f, "tracking_ok:   {} (min eig L = {:.6})", self.tracking_ok, self.min_eig_l)?;
        writeln!(
            f,
            "sync_ok:       {} (min eig L+U = {:.6})",
            self.sync_ok, self.min_eig_l_plus_u
        )?;
        writeln!(f, "indifferent:   {}", self.indifferent)?;
        writeln!(f, "D1 spectrum:   [{}]", fmt_list(&self.d1_spectrum))?;
        writeln!(f, "D2 spectrum:   [{}]", fmt_list(&self.d2_spectrum))?;
        writeln!(f, "rate_tracking: {:.6}", self.rate_tracking)?;
        write!(f, "rate_sync:     {:.6}", self.rate_sync)
    }
}

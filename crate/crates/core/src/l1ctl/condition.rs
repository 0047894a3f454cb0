use serde::{Deserialize, Serialize};

use super::{L1Config, L1Error};
use crate::lti::{
    l1_norm, parallel, poly_add, poly_mul, series, FirstOrderTF, L1NormOptions, LtiSystem,
    TransferFunction,
};

/// Outcome of the design-time L1-norm condition `||G||_L1 * L < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConditionReport {
    /// `||H (1 - C)||_L1`; infinite when `H` is unstable.
    pub g_norm: f64,
    pub lipschitz_l: f64,
    pub product: f64,
    pub satisfied: bool,
    pub h_stable: bool,
    /// False when the norm quadrature horizon was too short to trust.
    pub norm_horizon_sufficient: bool,
}

/// `H = A M / (C A + (1 - C) M)` as an exact rational function.
///
/// The common denominators of `A`, `M` and `C` are cleared analytically, so a
/// pole of the plant (for example an integrator) never shows up as a spurious
/// mode of `H`.
pub fn closed_loop_h(
    plant: &TransferFunction,
    ref_pole: f64,
    filter_cutoff: f64,
) -> Result<TransferFunction, L1Error> {
    let m = FirstOrderTF::new(ref_pole)?.transfer_function();
    let c = FirstOrderTF::new(filter_cutoff)?.transfer_function();
    let (na, da) = (&plant.num, &plant.den);
    let (nm, dm) = (&m.num, &m.den);
    let (nc, dc) = (&c.num, &c.den);
    let num = poly_mul(&poly_mul(na, nm), dc);
    let dc_minus_nc = poly_add(dc, &nc.iter().map(|v| -v).collect::<Vec<_>>());
    let den = poly_add(
        &poly_mul(&poly_mul(nc, na), dm),
        &poly_mul(&poly_mul(&dc_minus_nc, nm), da),
    );
    Ok(TransferFunction::new(num, den)?)
}

/// `H` assembled from state-space blocks as `A / (1 + (C / M)(A - M))`.
///
/// This realization keeps the plant modes (it is not minimal); it serves as an
/// independent route to the same frequency response as [`closed_loop_h`].
pub fn closed_loop_h_state_space(
    plant: &LtiSystem,
    ref_pole: f64,
    filter_cutoff: f64,
) -> Result<LtiSystem, L1Error> {
    let m = LtiSystem::first_order(ref_pole)?;
    // C / M = (w / m) (s + m) / (s + w)
    let c_over_m = TransferFunction::new(
        vec![filter_cutoff / ref_pole, filter_cutoff],
        vec![1.0, filter_cutoff],
    )?
    .to_system()?;
    let mismatch = parallel(plant, &m.scaled(-1.0))?;
    let loop_gain = series(&mismatch, &c_over_m)?;
    let sensitivity = crate::lti::feedback(&LtiSystem::gain(1.0), &loop_gain)?;
    Ok(series(&sensitivity, plant)?)
}

/// Checks the L1-norm condition for one axis with plant stand-in `plant`.
pub fn check_norm_condition(
    plant: &LtiSystem,
    ref_pole: f64,
    filter_cutoff: f64,
    lipschitz: f64,
) -> Result<NormConditionReport, L1Error> {
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(L1Error::Config(format!(
            "Lipschitz constant must be nonnegative, got {lipschitz}"
        )));
    }
    let plant_tf = TransferFunction::from_system(plant)?;
    let h = closed_loop_h(&plant_tf, ref_pole, filter_cutoff)?.to_system()?;
    let h_stable = h.is_stable();
    if !h_stable {
        return Ok(NormConditionReport {
            g_norm: f64::INFINITY,
            lipschitz_l: lipschitz,
            product: f64::INFINITY,
            satisfied: false,
            h_stable,
            norm_horizon_sufficient: false,
        });
    }
    let c = LtiSystem::first_order(filter_cutoff)?;
    let highpass = parallel(&LtiSystem::gain(1.0), &c.scaled(-1.0))?;
    let g = series(&highpass, &h)?;
    let norm = l1_norm(&g, L1NormOptions::default())?;
    let product = norm.value * lipschitz;
    Ok(NormConditionReport {
        g_norm: norm.value,
        lipschitz_l: lipschitz,
        product,
        satisfied: product < 1.0,
        h_stable,
        norm_horizon_sufficient: norm.horizon_sufficient,
    })
}

impl L1Config {
    /// Runs [`check_norm_condition`] for every axis against its plant stand-in.
    pub fn check_norm_condition(
        &self,
        plants: &[LtiSystem],
        lipschitz: f64,
    ) -> Result<Vec<NormConditionReport>, L1Error> {
        self.validate()?;
        if plants.len() != self.axes() {
            return Err(L1Error::Axes {
                expected: self.axes(),
                got: plants.len(),
            });
        }
        plants
            .iter()
            .enumerate()
            .map(|(i, p)| {
                check_norm_condition(p, self.ref_poles[i], self.filter_cutoffs[i], lipschitz)
            })
            .collect()
    }
}

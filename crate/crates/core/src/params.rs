//! Roll parameters for the modified Ginzburg-Landau system.

use serde::{Deserialize, Serialize};

/// Parameter point of the modified Ginzburg-Landau system: roll wavenumber
/// `q`, diffusivity `D > 0` of the conserved component and coupling `gamma`.
///
/// The real Ginzburg-Landau equation is the special case `gamma = 0` with
/// the conserved component identically zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollParams {
    pub q: f64,
    pub d: f64,
    pub gamma: f64,
}

impl RollParams {
    pub fn new(q: f64, d: f64, gamma: f64) -> Self {
        assert!(d > 0.0, "diffusivity must be positive");
        RollParams { q, d, gamma }
    }

    /// Real Ginzburg-Landau parameters (no conservation-law coupling).
    pub fn real_gl(q: f64) -> Self {
        Self::new(q, 1.0, 0.0)
    }

    pub fn one_minus_q2(&self) -> f64 {
        1.0 - self.q * self.q
    }

    /// Margin of the sideband condition q^2 < 1/3 (positive when stable).
    pub fn eckhaus_margin(&self) -> f64 {
        1.0 / 3.0 - self.q * self.q
    }

    /// Margin of D + gamma - 2 D q^2 / (1 - q^2) (positive when stable).
    pub fn coupling_margin(&self) -> f64 {
        self.d + self.gamma - 2.0 * self.d * self.q * self.q / self.one_minus_q2()
    }

    /// Spectral stability of the roll: both margins strictly positive.
    pub fn spectrally_stable(&self) -> bool {
        self.q * self.q < 1.0 / 3.0 && self.coupling_margin() > 0.0
    }
}

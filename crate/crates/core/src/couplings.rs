//! Reservoir-mediated couplings between emitters placed along a rectangular
//! hollow metal waveguide, restricted to the dominant (1,1) mode.
//!
//! Lengths are measured in the same units as `c / omega`; with the default
//! normalized geometry `c = 1` and the collective rate `A = 1`, so times are in
//! units of `1/A`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveguideGeometry {
    /// Transverse side lengths, when the cutoff was derived from them.
    pub transverse: Option<(f64, f64)>,
    pub omega0: f64,
    pub omega11: f64,
    pub gamma11: f64,
    pub c: f64,
}

impl WaveguideGeometry {
    pub fn new(omega0: f64, omega11: f64, gamma11: f64, c: f64) -> Result<Self> {
        let geom = Self {
            transverse: None,
            omega0,
            omega11,
            gamma11,
            c,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry with the (1,1) cutoff `c * pi * sqrt(1/a^2 + 1/b^2)`.
    pub fn from_dimensions(a: f64, b: f64, omega0: f64, gamma11: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(invalid("a/b", "transverse lengths must be positive"));
        }
        let omega11 = c * PI * (1.0 / (a * a) + 1.0 / (b * b)).sqrt();
        let geom = Self {
            transverse: Some((a, b)),
            omega0,
            omega11,
            gamma11,
            c,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Natural units: `c = 1` and `gamma11` chosen so the collective rate is 1.
    pub fn normalized(omega0: f64, omega11: f64) -> Result<Self> {
        let mut geom = Self {
            transverse: None,
            omega0,
            omega11,
            gamma11: 1.0,
            c: 1.0,
        };
        geom.validate()?;
        geom.gamma11 = geom.c / (geom.zeta() * geom.omega11);
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", format!("must be positive and finite, got {}", self.c)));
        }
        if !(self.omega11 > 0.0 && self.omega11.is_finite()) {
            return Err(invalid("omega11", format!("must be positive, got {}", self.omega11)));
        }
        if !(self.omega0 > self.omega11 && self.omega0.is_finite()) {
            return Err(invalid(
                "omega0",
                format!(
                    "must exceed the cutoff omega11 = {} (got {})",
                    self.omega11, self.omega0
                ),
            ));
        }
        if !(self.gamma11 >= 0.0 && self.gamma11.is_finite()) {
            return Err(invalid("gamma11", format!("must be finite and non-negative, got {}", self.gamma11)));
        }
        let zeta = self.zeta();
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(invalid("omega0", format!("coupling length is not finite: {zeta}")));
        }
        Ok(())
    }

    /// Spatial period of the couplings, `c / sqrt(omega0^2 - omega11^2)`.
    pub fn zeta(&self) -> f64 {
        self.c / (self.omega0 * self.omega0 - self.omega11 * self.omega11).sqrt()
    }

    /// Collective rate `A = gamma11 * zeta * omega11 / c`.
    pub fn collective_rate(&self) -> f64 {
        self.gamma11 * self.zeta() * self.omega11 / self.c
    }
}

impl Default for WaveguideGeometry {
    /// `omega0 = 1`, cutoff at half the transition frequency, `A = 1`.
    fn default() -> Self {
        Self::normalized(1.0, 0.5).expect("default geometry is valid")
    }
}

/// Rate prefactor of the (1,1) mode for a z-polarized dipole `d` at transverse
/// position `(x, y)`.
pub fn gamma11_from_dipole(d: f64, a: f64, b: f64, x: f64, y: f64, epsilon0: f64, c: f64) -> f64 {
    let omega11 = c * PI * (1.0 / (a * a) + 1.0 / (b * b)).sqrt();
    let u = d * (PI * x / a).sin() * (PI * y / b).sin();
    4.0 * omega11 * u * u / (epsilon0 * c * a * b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub z: Vec<f64>,
}

impl Placement {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(invalid("placement", "at least one emitter is required"));
        }
        if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
            return Err(invalid("placement", format!("non-finite coordinate {bad}")));
        }
        Ok(Self { z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Positions `z_i = 2 i pi zeta`, `i = 1..=n`, for which every pair satisfies
/// `|z_i +- z_j| = 2 n pi zeta`.
pub fn ideal_placement(n: usize, geom: &WaveguideGeometry) -> Result<Placement> {
    if n == 0 {
        return Err(invalid("n", "at least one emitter is required"));
    }
    geom.validate()?;
    let zeta = geom.zeta();
    Placement::new((1..=n).map(|i| 2.0 * PI * zeta * i as f64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Correlated spectral density `G^{+-}_{ij}(omega)` of the (1,1) mode.
pub fn spectral_density(geom: &WaveguideGeometry, zi: f64, zj: f64, omega: f64, sign: Sign) -> f64 {
    if omega <= geom.omega11 {
        return 0.0;
    }
    let k = (omega * omega - geom.omega11 * geom.omega11).sqrt() / geom.c;
    let sep = match sign {
        Sign::Plus => zi + zj,
        Sign::Minus => zi - zj,
    };
    let ratio = omega / geom.omega11;
    geom.gamma11 / (2.0 * PI) * (k * sep).cos() / (ratio * ratio - 1.0).sqrt()
}

/// Dipole-dipole shifts and correlated decay/squeezing rates.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSet {
    pub delta: DMatrix<f64>,
    pub gamma_minus: DMatrix<f64>,
    pub gamma_plus: DMatrix<f64>,
    pub a: f64,
}

impl CouplingSet {
    pub fn len(&self) -> usize {
        self.delta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.nrows() == 0
    }

    /// Couplings of a perfectly collective array: no shifts, every rate `a`.
    pub fn uniform(n: usize, a: f64) -> Self {
        Self {
            delta: DMatrix::zeros(n, n),
            gamma_minus: DMatrix::from_element(n, n, a),
            gamma_plus: DMatrix::from_element(n, n, a),
            a,
        }
    }
}

pub fn build_couplings(geom: &WaveguideGeometry, placement: &Placement) -> Result<CouplingSet> {
    geom.validate()?;
    if placement.is_empty() {
        return Err(invalid("placement", "at least one emitter is required"));
    }
    let zeta = geom.zeta();
    let a = geom.collective_rate();
    let z = &placement.z;
    let n = z.len();
    let delta = DMatrix::from_fn(n, n, |i, j| -0.5 * a * ((z[i] - z[j]).abs() / zeta).sin());
    let gamma_minus = DMatrix::from_fn(n, n, |i, j| a * ((z[i] - z[j]).abs() / zeta).cos());
    let gamma_plus = DMatrix::from_fn(n, n, |i, j| a * ((z[i] + z[j]).abs() / zeta).cos());
    Ok(CouplingSet {
        delta,
        gamma_minus,
        gamma_plus,
        a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> WaveguideGeometry {
        WaveguideGeometry::default()
    }

    #[test]
    fn normalized_geometry_has_unit_rate() {
        let g = geom();
        assert!((g.collective_rate() - 1.0).abs() < 1e-14);
        assert!((g.zeta() - 1.0 / 0.75f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn below_cutoff_density_vanishes() {
        let g = geom();
        assert_eq!(spectral_density(&g, 0.3, 1.1, 0.5 * g.omega11, Sign::Minus), 0.0);
        assert_eq!(spectral_density(&g, 0.3, 1.1, g.omega11, Sign::Plus), 0.0);
    }

    #[test]
    fn coincident_density_at_root_two_cutoff() {
        let g = geom();
        let v = spectral_density(&g, 0.7, 0.7, 2f64.sqrt() * g.omega11, Sign::Minus);
        assert!((v - g.gamma11 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn quarter_period_pair() {
        let g = geom();
        let zeta = g.zeta();
        // |z1 - z2| = pi zeta / 2, |z1 + z2| = pi zeta
        let p = Placement::new(vec![PI * zeta / 4.0, 3.0 * PI * zeta / 4.0]).unwrap();
        let cs = build_couplings(&g, &p).unwrap();
        assert!((cs.delta[(0, 1)] + 0.5).abs() < 1e-12);
        assert!((cs.gamma_plus[(0, 1)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_placement_small_cases() {
        let g = geom();
        let p = ideal_placement(2, &g).unwrap();
        let zeta = g.zeta();
        assert!((p.z[0] - 2.0 * PI * zeta).abs() < 1e-12);
        assert!((p.z[1] - 4.0 * PI * zeta).abs() < 1e-12);

        let one = build_couplings(&g, &ideal_placement(1, &g).unwrap()).unwrap();
        assert_eq!(one.delta[(0, 0)], 0.0);
        assert_eq!(one.gamma_minus[(0, 0)], one.a);

        let five = build_couplings(&g, &ideal_placement(5, &g).unwrap()).unwrap();
        let uni = CouplingSet::uniform(5, 1.0);
        assert!((five.delta - uni.delta).amax() < 1e-12);
        assert!((five.gamma_minus - uni.gamma_minus).amax() < 1e-12);
        assert!((five.gamma_plus - uni.gamma_plus).amax() < 1e-12);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(WaveguideGeometry::new(0.5, 1.0, 1.0, 1.0).is_err());
        assert!(WaveguideGeometry::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ideal_placement(0, &geom()).is_err());
        assert!(Placement::new(vec![]).is_err());
        assert!(Placement::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn dimensions_give_the_waveguide_cutoff() {
        let g = WaveguideGeometry::from_dimensions(2.0, 1.0, 4.0, 1.0, 1.0).unwrap();
        assert!((g.omega11 - PI * (0.25f64 + 1.0).sqrt()).abs() < 1e-14);
        assert!(WaveguideGeometry::from_dimensions(0.1, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dipole_prefactor_peaks_at_center() {
        let center = gamma11_from_dipole(1.0, 2.0, 1.0, 1.0, 0.5, 1.0, 1.0);
        let off = gamma11_from_dipole(1.0, 2.0, 1.0, 0.5, 0.5, 1.0, 1.0);
        assert!(center > off);
        assert_eq!(gamma11_from_dipole(1.0, 2.0, 1.0, 0.0, 0.5, 1.0, 1.0), 0.0);
    }
}

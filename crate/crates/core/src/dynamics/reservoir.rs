use serde::{Deserialize, Serialize};

use crate::couplings::CouplingSet;
use crate::error::{invalid, Error, Result};
use crate::linalg::C64;
use crate::spin::{Basis, N_MAX_FULL};

/// Squeezed-vacuum reservoir of strength `r` and angle `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedReservoir {
    pub r: f64,
    pub alpha: f64,
}

impl SqueezedReservoir {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("squeezing strength must be finite and >= 0, got {r}")));
        }
        if !alpha.is_finite() {
            return Err(invalid("alpha", format!("squeezing angle must be finite, got {alpha}")));
        }
        Ok(Self { r, alpha })
    }

    /// `sinh^2 r`.
    pub fn n_bar(&self) -> f64 {
        self.r.sinh().powi(2)
    }

    /// `sqrt(n (n + 1)) e^{i alpha}`, written as `sinh r cosh r` to avoid
    /// cancellation.
    pub fn m_complex(&self) -> C64 {
        C64::from_polar(self.r.sinh() * self.r.cosh(), self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    /// Permutation-symmetric model in the Dicke basis.
    Collective,
    /// Site-resolved model in the product basis.
    Full(CouplingSet),
}

/// Everything the master equation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub mode: Mode,
    pub n: usize,
    /// Collective rate; taken from the couplings in full mode.
    pub a: f64,
    /// Lamb-shift parameter `Delta`.
    pub delta_param: f64,
    pub reservoir: SqueezedReservoir,
}

impl ModelSpec {
    pub fn collective(n: usize, a: f64, delta_param: f64, reservoir: SqueezedReservoir) -> Result<Self> {
        let spec = Self {
            mode: Mode::Collective,
            n,
            a,
            delta_param,
            reservoir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn full(couplings: CouplingSet, delta_param: f64, reservoir: SqueezedReservoir) -> Result<Self> {
        let spec = Self {
            n: couplings.len(),
            a: couplings.a,
            mode: Mode::Full(couplings),
            delta_param,
            reservoir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "at least one emitter is required"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("A", format!("collective rate must be positive, got {}", self.a)));
        }
        if !self.delta_param.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        SqueezedReservoir::new(self.reservoir.r, self.reservoir.alpha)?;
        if let Mode::Full(cs) = &self.mode {
            if self.n > N_MAX_FULL {
                return Err(Error::TooLarge(format!(
                    "product basis supports N <= {N_MAX_FULL}, got N = {}",
                    self.n
                )));
            }
            let finite = cs.delta.iter().chain(cs.gamma_minus.iter()).chain(cs.gamma_plus.iter()).all(|v| v.is_finite());
            if !finite || cs.gamma_minus.nrows() != self.n || cs.gamma_plus.nrows() != self.n {
                return Err(invalid("couplings", "coupling matrices must be finite and N x N"));
            }
        }
        Ok(())
    }

    /// `Delta_N = (2 n + 1) Delta`.
    pub fn delta_n(&self) -> f64 {
        (2.0 * self.reservoir.n_bar() + 1.0) * self.delta_param
    }

    pub fn basis(&self) -> Basis {
        match self.mode {
            Mode::Collective => Basis::Dicke { n: self.n },
            Mode::Full(_) => Basis::Full { n: self.n },
        }
    }

    pub fn is_collective(&self) -> bool {
        matches!(self.mode, Mode::Collective)
    }
}

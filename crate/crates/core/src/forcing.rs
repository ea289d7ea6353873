//! Boundary data `G(t, y, theta_0)`: sums of Gaussian-windowed harmonics in
//! `theta_0`, switched on smoothly after `t = 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::smooth_cutoff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    /// Center of the Gaussian envelope in `t`.
    pub center: f64,
    pub width: f64,
    /// Harmonic in `theta_0`; 0 gives a non-oscillating contribution.
    pub harmonic: i64,
    /// One amplitude per boundary row.
    pub amplitude: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub terms: Vec<ForcingTerm>,
    /// Length of the switch-on window starting at `t = 0`.
    pub onset: f64,
}

/// Largest amplitude accepted as weakly nonlinear data.
pub const AMPLITUDE_CAP: f64 = 0.25;

impl Forcing {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), onset: 0.1 }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.onset > 0.0) {
            return Err(Error::InvalidInput("forcing onset must be positive".into()));
        }
        for t in &self.terms {
            if t.amplitude.len() != p {
                return Err(Error::InvalidInput(format!("forcing amplitude has {} rows, boundary operator has {p}", t.amplitude.len())));
            }
            if !(t.width > 0.0) {
                return Err(Error::InvalidInput("forcing width must be positive".into()));
            }
            if t.amplitude.iter().any(|a| a.abs() > AMPLITUDE_CAP) {
                return Err(Error::InvalidInput(format!("forcing amplitude above {AMPLITUDE_CAP}")));
            }
        }
        Ok(())
    }

    /// Switch-on factor: 0 for `t <= 0`, 1 after the onset window.
    pub fn window(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            1.0 - smooth_cutoff(t / self.onset)
        }
    }

    pub fn max_harmonic(&self) -> i64 {
        self.terms.iter().map(|t| t.harmonic.abs()).max().unwrap_or(0)
    }

    /// Coefficient of `e^{i n theta_0}` at time `t`, one entry per row.
    pub fn harmonic(&self, n: i64, t: f64, p: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); p];
        let w = self.window(t);
        if w == 0.0 {
            return out;
        }
        for term in &self.terms {
            let env = w * (-0.5 * ((t - term.center) / term.width).powi(2)).exp();
            let c = if term.harmonic == 0 {
                if n == 0 {
                    C64::new(term.phase.cos(), 0.0)
                } else {
                    continue;
                }
            } else if n == term.harmonic {
                C64::from_polar(0.5, term.phase)
            } else if n == -term.harmonic {
                C64::from_polar(0.5, -term.phase)
            } else {
                continue;
            };
            for (o, a) in out.iter_mut().zip(&term.amplitude) {
                *o += c * env * *a;
            }
        }
        out
    }

    /// Physical value at `(t, theta_0)`.
    pub fn value(&self, t: f64, theta0: f64, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        let w = self.window(t);
        for term in &self.terms {
            let env = w * (-0.5 * ((t - term.center) / term.width).powi(2)).exp();
            let osc = (term.harmonic as f64 * theta0 + term.phase).cos();
            for (o, a) in out.iter_mut().zip(&term.amplitude) {
                *o += env * osc * a;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonics_reconstruct_value() {
        let g = Forcing { terms: vec![ForcingTerm { center: 0.4, width: 0.1, harmonic: 2, amplitude: vec![0.1], phase: 0.3 }], onset: 0.1 };
        let (t, th) = (0.37, 1.1);
        let v = g.value(t, th, 1)[0];
        let s: C64 = (-3..=3).map(|n| g.harmonic(n, t, 1)[0] * C64::new(0.0, n as f64 * th).exp()).sum();
        assert!((s.re - v).abs() < 1e-15 && s.im.abs() < 1e-15);
        assert_eq!(g.value(0.0, th, 1)[0], 0.0);
    }
}

#![allow(dead_code)]

use geoptics::forcing::{Forcing, ForcingTerm};
use geoptics::modes::{compute_modes, ModeTable};
use geoptics::profile::{ProfileContext, ProfileGrid};
use geoptics::resonance::{resonances_of, ResonanceSet};
use geoptics::system::SystemSpec;

pub const HYPERBOLIC: [f64; 2] = [2.0, 1.0];
pub const ELLIPTIC: [f64; 2] = [0.0, 1.0];

/// 2D isentropic Euler at `(rho, u1, u2) = (1, 0.5, -0.4)` with `c = 1`.
pub fn euler2d() -> SystemSpec {
    SystemSpec::euler(2, 1.0, 1.0, vec![1.0, 0.5, -0.4]).unwrap()
}

pub struct Fixture {
    pub sys: SystemSpec,
    pub mt: ModeTable,
    pub rs: ResonanceSet,
    pub grid: ProfileGrid,
}

impl Fixture {
    pub fn new(beta: [f64; 2]) -> Self {
        Self::with_grid(beta, ProfileGrid::new(1.0, 0.02, 1.5, 0.02, 1, 1.0, 6, 4.0).unwrap())
    }

    pub fn with_grid(beta: [f64; 2], grid: ProfileGrid) -> Self {
        let sys = euler2d();
        let mt = compute_modes(&sys, &beta).unwrap();
        let rs = resonances_of(&mt, 12);
        Self { sys, mt, rs, grid }
    }

    pub fn context(&self) -> ProfileContext {
        ProfileContext::new(&self.sys, &self.mt, &self.rs, &self.grid).unwrap()
    }
}

pub fn pulse(amplitude: f64) -> Forcing {
    Forcing { terms: vec![ForcingTerm { center: 0.45, width: 0.12, harmonic: 1, amplitude: vec![amplitude], phase: 0.0 }], onset: 0.2 }
}

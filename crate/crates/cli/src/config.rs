//! Experiment configuration: one JSON document.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parametrix_core::parametrix::MAX_J;
use parametrix_core::symbol::ZeroSymbol;
use parametrix_core::{
    build_cutoff_b, AssumptionParams, CutoffFamily, Grid, HKind, HyperbolicA, IVPProblem, MultiplierB, RhoFn, Symbol,
    SymbolKind,
};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BFamily {
    Cutoff,
    Multiplier,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AFamily {
    Hyperbolic,
    Zero,
}

fn default_b_family() -> BFamily {
    BFamily::Cutoff
}

fn default_a_family() -> AFamily {
    AFamily::Hyperbolic
}

fn default_beta() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub gamma: f64,
    #[serde(rename = "L")]
    pub l: u32,
    pub c0: f64,
    pub eps_a: f64,
    pub r0: f64,
    pub x_c: f64,
    pub s: f64,
    /// Multiplier coefficient, and the constant weight w0 of the cutoff family.
    pub beta0: f64,
    pub h_kind: String,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_b_family")]
    pub b_family: BFamily,
    #[serde(default = "default_a_family")]
    pub a_family: AFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub dz: f64,
    pub quad_dz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub z0: f64,
    #[serde(rename = "Z")]
    pub z_max: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub k_max: usize,
    #[serde(rename = "band_K_list")]
    pub band_k_list: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub grid: GridConfig,
    pub run: RunConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn shipped() -> Self {
        ExperimentConfig {
            family: FamilyConfig {
                gamma: 1.0,
                l: 4,
                c0: 0.5,
                eps_a: 0.1,
                r0: 0.5,
                x_c: PI,
                s: 0.0,
                beta0: 1.0,
                h_kind: "exp_inv".into(),
                beta: 0.5,
                b_family: BFamily::Cutoff,
                a_family: AFamily::Hyperbolic,
            },
            grid: GridConfig { n: 256, dz: 1e-3, quad_dz: 0.02 },
            run: RunConfig {
                z0: 0.0,
                z_max: 1.0,
                j: 2,
                k_max: 1,
                band_k_list: vec![8, 16, 32, 64],
                seed: 7,
            },
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| RunError::Config(format!("invalid JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        let f = &self.family;
        let n = self.grid.n;
        if n < 8 || !n.is_power_of_two() {
            return bad(format!("grid.N = {n} must be a power of two >= 8"));
        }
        if !(f.gamma > 0.0) || f.l < 2 || !(2.0 * f.gamma < f.l as f64) {
            return bad(format!("need gamma > 0, L >= 2 and 2*gamma < L (gamma = {}, L = {})", f.gamma, f.l));
        }
        if f.h_kind != "exp_inv" {
            return bad(format!("h_kind = {:?} unsupported; only \"exp_inv\" is configurable", f.h_kind));
        }
        if f.b_family != BFamily::Zero && !(f.beta0 > 0.0) {
            return bad(format!("beta0 = {} must be positive", f.beta0));
        }
        if !(f.beta > 0.0) {
            return bad(format!("beta = {} must be positive", f.beta));
        }
        if !(self.run.z0 < self.run.z_max) {
            return bad(format!("need z0 < Z, got {} >= {}", self.run.z0, self.run.z_max));
        }
        if !(self.grid.dz > 0.0) || !(self.grid.quad_dz > 0.0) {
            return bad("dz and quad_dz must be positive".into());
        }
        let ks = &self.run.band_k_list;
        if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("band_K_list must be nonempty, positive and strictly increasing".into());
        }
        if *ks.last().unwrap() > n / 3 {
            return bad(format!("max band_K = {} exceeds N/3 = {}", ks.last().unwrap(), n / 3));
        }
        if self.run.j > MAX_J {
            return bad(format!("J = {} above {MAX_J}", self.run.j));
        }
        if 2 * (self.run.k_max + 1) > 10 {
            return bad(format!("k_max = {} needs jets beyond order 10", self.run.k_max));
        }
        self.problem()?;
        Ok(())
    }

    pub fn params(&self) -> Result<AssumptionParams, RunError> {
        AssumptionParams::new(self.family.gamma, self.family.l, self.run.z0, self.run.z_max).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn rho(&self) -> Option<RhoFn> {
        (self.family.b_family == BFamily::Cutoff).then(|| RhoFn::Cosine {
            r0: self.family.r0,
            x_c: self.family.x_c,
            s: self.family.s,
            z0: self.run.z0,
        })
    }

    pub fn cutoff_family(&self) -> Option<CutoffFamily> {
        self.rho().map(|rho| CutoffFamily {
            gamma: self.family.gamma,
            w0: self.family.beta0,
            rho,
            h_kind: HKind::ExpInv,
            beta: self.family.beta,
            l: self.family.l,
        })
    }

    pub fn a_symbol(&self) -> Option<Symbol> {
        match self.family.a_family {
            AFamily::Hyperbolic => Some(Arc::new(HyperbolicA { c0: self.family.c0, eps_a: self.family.eps_a })),
            AFamily::Zero => None,
        }
    }

    pub fn b_symbol(&self) -> Result<Symbol, RunError> {
        Ok(match self.family.b_family {
            BFamily::Cutoff => Arc::new(build_cutoff_b(self.cutoff_family().unwrap()).map_err(|e| RunError::Config(e.to_string()))?),
            BFamily::Multiplier => Arc::new(MultiplierB { beta0: self.family.beta0, gamma: self.family.gamma }),
            BFamily::Zero => Arc::new(ZeroSymbol(SymbolKind::DissipativeB)),
        })
    }

    fn build(&self, a: Option<Symbol>) -> Result<IVPProblem, RunError> {
        let grid = Grid::new(self.grid.n).map_err(|e| RunError::Config(e.to_string()))?;
        IVPProblem::new(a, self.b_symbol()?, None, self.params()?, grid, self.grid.dz).map_err(|e| RunError::Config(e.to_string()))
    }

    /// The configured problem.
    pub fn problem(&self) -> Result<IVPProblem, RunError> {
        self.build(self.a_symbol())
    }

    /// The same b with A = 0.
    pub fn problem_without_a(&self) -> Result<IVPProblem, RunError> {
        self.build(None)
    }

    /// Smallest point of {ρ = 0} at z0 in [0, 2π), or π without a boundary.
    pub fn boundary_center(&self) -> f64 {
        self.rho()
            .and_then(|r| r.boundary(self.run.z0).into_iter().min_by(f64::total_cmp))
            .unwrap_or(PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_round_trips() {
        let c = ExperimentConfig::shipped();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert!(text.contains("\"band_K_list\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert!((c.boundary_center() - (-0.5f64).acos()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = serde_json::to_value(ExperimentConfig::shipped()).unwrap();
        let cases: Vec<(&str, serde_json::Value)> = vec![
            ("/grid/N", 100.into()),
            ("/family/L", 2.into()),
            ("/run/band_K_list", serde_json::json!([8, 8, 16])),
            ("/run/band_K_list", serde_json::json!([8, 128])),
            ("/family/h_kind", "tanh".into()),
            ("/grid/dz", 0.5.into()),
        ];
        for (ptr, v) in cases {
            let mut c = base.clone();
            *c.pointer_mut(ptr).unwrap() = v;
            let r = ExperimentConfig::from_json(&c.to_string());
            assert!(matches!(r, Err(RunError::Config(_))), "{ptr} accepted");
        }
        let mut c = base.clone();
        c["grid"]["extra"] = 1.into();
        assert!(ExperimentConfig::from_json(&c.to_string()).is_err());
    }
}

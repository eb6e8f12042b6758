//! Quantization setups from flags or from a JSON document.
//!
//! Both routes resolve to a [`SetupDoc`], which is also what the report
//! echoes, so any report's `setup.quantization` can be fed back through
//! `--setup`.

use std::path::Path;

use clap::{Args, ValueEnum};
use kq_core::{BaseGeometry, DomainKind, Error, QuantizationSetup, RadialProfile};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Logball,
    Linear,
    Logaffine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    Ball,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    /// Space form with the constant the matching branch needs
    Auto,
    /// CP¹ with the Fubini–Study metric of degree --base-k
    Cp1,
    /// CP^d with the Fubini–Study metric
    Cpd,
    Flat,
    /// Space form of curvature --base-c
    SpaceForm,
}

/// Setup flags shared by the series and curvature subcommands.
#[derive(Debug, Clone, Args)]
pub struct SetupArgs {
    /// Profile family
    #[arg(long, value_enum, default_value = "logball")]
    pub family: FamilyArg,
    /// Quadratic coefficient A (logball, logaffine)
    #[arg(long = "A", allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Scale c (linear, logaffine)
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Twist λ
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Base dimension
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Fibre dimension
    #[arg(long, default_value_t = 1)]
    pub d0: usize,
    /// Fibre domain (default: ball for logball, full otherwise)
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    /// Base geometry
    #[arg(long, value_enum, default_value = "auto")]
    pub base: BaseArg,
    /// Degree of the CP¹ base
    #[arg(long, default_value_t = 1)]
    pub base_k: u32,
    /// Curvature constant of the space-form base
    #[arg(long, allow_negative_numbers = true)]
    pub base_c: Option<f64>,
    /// Quantization level α
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub family: FamilyArg,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseDoc {
    SpaceForm { d: usize, c: f64 },
    Cp1 { k: u32 },
    Cpd { d: usize },
    Flat { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupDoc {
    pub d0: usize,
    pub domain: DomainArg,
    pub alpha: f64,
    pub profile: ProfileDoc,
    pub base: BaseDoc,
}

#[derive(Debug)]
pub enum SetupError {
    Invalid(String),
    Core(Error),
}

impl From<Error> for SetupError {
    fn from(e: Error) -> Self {
        SetupError::Core(e)
    }
}

fn invalid(msg: impl Into<String>) -> SetupError {
    SetupError::Invalid(msg.into())
}

impl SetupArgs {
    pub fn resolve(&self) -> Result<SetupDoc, SetupError> {
        let a = match self.family {
            FamilyArg::Linear => None,
            _ => Some(self.a.ok_or_else(|| invalid("--A is required for this family"))?),
        };
        let c = match self.family {
            FamilyArg::Logball => None,
            _ => Some(self.c),
        };
        let domain = self.domain.unwrap_or(match self.family {
            FamilyArg::Logball => DomainArg::Ball,
            _ => DomainArg::Full,
        });
        let base = match self.base {
            BaseArg::Auto => BaseDoc::SpaceForm {
                d: self.d,
                c: auto_base_c(self.d, self.d0, self.lambda, a),
            },
            BaseArg::SpaceForm => BaseDoc::SpaceForm {
                d: self.d,
                c: self.base_c.ok_or_else(|| invalid("--base space-form needs --base-c"))?,
            },
            BaseArg::Cp1 if self.d != 1 => return Err(invalid("--base cp1 needs --d 1")),
            BaseArg::Cp1 => BaseDoc::Cp1 { k: self.base_k },
            BaseArg::Cpd => BaseDoc::Cpd { d: self.d },
            BaseArg::Flat => BaseDoc::Flat { d: self.d },
        };
        Ok(SetupDoc {
            d0: self.d0,
            domain,
            alpha: self.alpha,
            profile: ProfileDoc {
                family: self.family,
                a,
                c,
                lambda: self.lambda,
            },
            base,
        })
    }
}

/// The space-form constant that puts a `ϕ = x + Ax²` setup on its
/// constant-coefficient branch: `d0λ − nA` for one-dimensional bases, `−λ`
/// above.
pub fn auto_base_c(d: usize, d0: usize, lambda: f64, a: Option<f64>) -> f64 {
    if d == 1 {
        d0 as f64 * lambda - (1 + d0) as f64 * a.unwrap_or(0.0)
    } else {
        -lambda
    }
}

impl SetupDoc {
    pub fn load(path: &Path) -> Result<Self, SetupError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn profile(&self) -> Result<RadialProfile, SetupError> {
        let p = &self.profile;
        let need_a = || p.a.ok_or_else(|| invalid("profile.A is required for this family"));
        let profile = match p.family {
            FamilyArg::Logball => RadialProfile::log_ball(need_a()?, p.lambda),
            FamilyArg::Linear => RadialProfile::linear(p.c.unwrap_or(1.0), p.lambda),
            FamilyArg::Logaffine => RadialProfile::log_affine(need_a()?, p.c.unwrap_or(1.0), p.lambda),
        };
        profile.map_err(|e| SetupError::Core(e.into()))
    }

    pub fn base(&self) -> Result<BaseGeometry, SetupError> {
        let d = match self.base {
            BaseDoc::SpaceForm { d, .. } | BaseDoc::Cpd { d } | BaseDoc::Flat { d } => d,
            BaseDoc::Cp1 { .. } => 1,
        };
        if d == 0 {
            return Err(invalid("base dimension must be positive"));
        }
        Ok(match self.base {
            BaseDoc::SpaceForm { d, c } => BaseGeometry::space_form(d, c),
            BaseDoc::Cp1 { k } if k == 0 => return Err(invalid("cp1 degree must be positive")),
            BaseDoc::Cp1 { k } => BaseGeometry::fubini_study_cp1(k),
            BaseDoc::Cpd { d } => BaseGeometry::fubini_study_cpd(d),
            BaseDoc::Flat { d } => BaseGeometry::flat(d),
        })
    }

    pub fn domain(&self) -> DomainKind {
        match self.domain {
            DomainArg::Ball => DomainKind::Ball,
            DomainArg::Full => DomainKind::FullSpace,
        }
    }

    pub fn build(&self) -> Result<QuantizationSetup, SetupError> {
        if self.d0 == 0 {
            return Err(invalid("d0 must be positive"));
        }
        Ok(QuantizationSetup::new(
            self.d0,
            self.domain(),
            self.profile()?,
            self.base()?,
            self.alpha,
        ))
    }

    /// The x-grid default: `[0.01, 4]`, pulled inside `1 + Ax > 0` and
    /// `1 + λx > 0` when either coefficient is negative.
    pub fn default_x_top(&self) -> f64 {
        let mut top: f64 = 4.0;
        for coef in [self.profile.a.unwrap_or(0.0), self.profile.lambda] {
            if coef < 0.0 {
                top = top.min(-0.9 / coef);
            }
        }
        top
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_base_matches_branch_constants() {
        assert_eq!(auto_base_c(1, 2, 1.0, Some(0.5)), 0.5);
        assert_eq!(auto_base_c(1, 1, 1.0, None), 1.0);
        assert_eq!(auto_base_c(2, 1, 2.0, Some(2.0)), -2.0);
        assert_eq!(auto_base_c(1, 1, -1.0, Some(-1.0)), 1.0);
    }

    #[test]
    fn documents_round_trip() {
        let doc = SetupDoc {
            d0: 2,
            domain: DomainArg::Ball,
            alpha: 4.0,
            profile: ProfileDoc {
                family: FamilyArg::Logball,
                a: Some(0.5),
                c: None,
                lambda: 1.0,
            },
            base: BaseDoc::SpaceForm { d: 1, c: 0.5 },
        };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"kind\":\"space-form\""));
        assert_eq!(serde_json::from_str::<SetupDoc>(&text).unwrap(), doc);
        assert!(doc.build().is_ok());
    }
}

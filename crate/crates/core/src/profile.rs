//! Energy profiles `F(e)` of the steady states.

use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileFamily {
    /// `amplitude * exp(-1 / (e_star - e))`.
    BumpCompact,
    /// `amplitude * (Ψ(e) + epsilon * exp(-1 / (e_star - e)))` with a smooth
    /// step `Ψ` that falls from 1 to 0 on `[e_sharp - scale, e_sharp]`.
    PsiPlusBump,
}

/// Parameters of the smooth step `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    pub e_sharp: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub family: ProfileFamily,
    pub e_star: f64,
    pub amplitude: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_params: Option<PsiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Profile {
    pub fn bump_compact(e_star: f64, amplitude: f64) -> Self {
        Self {
            family: ProfileFamily::BumpCompact,
            e_star,
            amplitude,
            alpha: 2.0,
            psi_params: None,
            epsilon: None,
        }
    }

    pub fn psi_plus_bump(
        e_sharp: f64,
        scale: f64,
        e_star: f64,
        epsilon: f64,
        amplitude: f64,
    ) -> Self {
        Self {
            family: ProfileFamily::PsiPlusBump,
            e_star,
            amplitude,
            alpha: 2.0,
            psi_params: Some(PsiParams { e_sharp, scale }),
            epsilon: Some(epsilon),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HmfError::InvalidArgument(msg));
        if !self.e_star.is_finite() {
            return bad(format!("e_star must be finite, got {}", self.e_star));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return bad(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return bad(format!("alpha must be at least 1, got {}", self.alpha));
        }
        match self.family {
            ProfileFamily::BumpCompact => {
                if self.psi_params.is_some() || self.epsilon.is_some() {
                    return bad("bump-compact takes no psi_params or epsilon".into());
                }
            }
            ProfileFamily::PsiPlusBump => {
                let Some(psi) = self.psi_params else {
                    return bad("psi-plus-bump requires psi_params".into());
                };
                let Some(eps) = self.epsilon else {
                    return bad("psi-plus-bump requires epsilon".into());
                };
                if !(psi.scale.is_finite() && psi.scale > 0.0) {
                    return bad(format!("psi scale must be positive, got {}", psi.scale));
                }
                if !(psi.e_sharp.is_finite() && psi.e_sharp <= self.e_star) {
                    return bad(format!(
                        "e_sharp = {} must not exceed e_star = {}",
                        psi.e_sharp, self.e_star
                    ));
                }
                if !(eps.is_finite() && eps > 0.0) {
                    return bad(format!("epsilon must be positive, got {eps}"));
                }
            }
        }
        Ok(())
    }

    /// Same shape, different amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    /// `F(e)`.
    pub fn value(&self, e: f64) -> f64 {
        if e >= self.e_star {
            return 0.0;
        }
        let bump = bump(self.e_star - e);
        let shape = match (self.family, self.psi_params, self.epsilon) {
            (ProfileFamily::PsiPlusBump, Some(psi), Some(eps)) => {
                smooth_step((psi.e_sharp - e) / psi.scale) + eps * bump
            }
            _ => bump,
        };
        self.amplitude * shape
    }

    /// `F'(e)`.
    pub fn derivative(&self, e: f64) -> f64 {
        if e >= self.e_star {
            return 0.0;
        }
        let d = self.e_star - e;
        let bump_slope = -bump(d) / (d * d);
        let slope = match (self.family, self.psi_params, self.epsilon) {
            (ProfileFamily::PsiPlusBump, Some(psi), Some(eps)) => {
                -smooth_step_slope((psi.e_sharp - e) / psi.scale) / psi.scale + eps * bump_slope
            }
            _ => bump_slope,
        };
        self.amplitude * slope
    }

    /// Energies where `F` changes character; quadratures split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![self.e_star];
        if let Some(psi) = self.psi_params {
            out.push(psi.e_sharp - psi.scale);
            out.push(psi.e_sharp);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Lower end of the energy band where `F'` is not negligible.
    pub fn slope_support_start(&self) -> Option<f64> {
        self.psi_params.map(|p| p.e_sharp - p.scale)
    }
}

fn bump(d: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

/// Smooth step: 0 for `u <= 0`, 1 for `u >= 1`, `C^∞` and increasing between.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let z = 1.0 / u - 1.0 / (1.0 - u);
    if z > 0.0 {
        let ez = (-z).exp();
        ez / (1.0 + ez)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_slope(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let z = 1.0 / u - 1.0 / (1.0 - u);
    let ez = (-z.abs()).exp();
    // s (1 - s) = e^{-|z|} / (1 + e^{-|z|})², symmetric in z.
    let s1s = ez / ((1.0 + ez) * (1.0 + ez));
    s1s * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u)))
}

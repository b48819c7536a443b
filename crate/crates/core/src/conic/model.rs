//! Linear SINR structure shared by every multi-user scheme.
//!
//! Each user sees one desired amplitude and a list of interference
//! amplitudes, all linear in some owner's variable vector; SINR is
//! `|desired|^2 / (sum |interference|^2 + noise)`. The DAM per-path beams,
//! the strongest-path beams and the per-path amplitude parameterization all
//! reduce to this form.

use crate::channel::ChannelSet;
use crate::dam::{effective_channel_bank, SinrReport};
use crate::error::{DamError, Result};
use crate::{CMatrix, CVector, C64};

/// `sum_i c_i x_i` over one owner's variable vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, C64)>,
}

impl LinearForm {
    pub fn eval(&self, x: &CVector) -> C64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum()
    }

    /// Coefficients of the form after substituting `x = t w`.
    pub fn compose(&self, t: &CMatrix) -> LinearForm {
        let mut out = vec![C64::new(0.0, 0.0); t.ncols()];
        for &(i, c) in &self.terms {
            for (j, o) in out.iter_mut().enumerate() {
                *o += c * t[(i, j)];
            }
        }
        LinearForm { terms: out.into_iter().enumerate().filter(|(_, c)| *c != C64::new(0.0, 0.0)).collect() }
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_sqr()).sum::<f64>().sqrt()
    }

    fn conj_block(offset: usize, h: &CVector) -> impl Iterator<Item = (usize, C64)> + '_ {
        h.iter().enumerate().map(move |(m, v)| (offset + m, v.conj()))
    }
}

/// Everything user `k` receives.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTerms {
    /// Form over user `k`'s own variables.
    pub desired: LinearForm,
    /// `(owner, form)`; owner `k` means ISI, any other owner IUI.
    pub interference: Vec<(usize, LinearForm)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceModel {
    dims: Vec<usize>,
    users: Vec<UserTerms>,
    noise_power: f64,
}

impl InterferenceModel {
    pub fn new(dims: Vec<usize>, users: Vec<UserTerms>, noise_power: f64) -> Result<Self> {
        if dims.len() != users.len() {
            return Err(DamError::DimensionMismatch("one variable block per user".into()));
        }
        if !(noise_power > 0.0) {
            return Err(DamError::InvalidConfig("noise power must be positive".into()));
        }
        for (k, u) in users.iter().enumerate() {
            let bad_desired = u.desired.terms.iter().any(|t| t.0 >= dims[k]);
            let bad_interf = u
                .interference
                .iter()
                .any(|(o, f)| *o >= dims.len() || f.terms.iter().any(|t| t.0 >= dims[*o]));
            if bad_desired || bad_interf {
                return Err(DamError::DimensionMismatch(format!("user {k} references a missing variable")));
            }
        }
        Ok(Self { dims, users, noise_power })
    }

    /// DAM with one beam per path: variables are the stacks `f_k`, the
    /// desired form is `h_k^H f_k`, and every other delay difference of the
    /// effective-channel bank contributes one interference form.
    pub fn dam(ch: &ChannelSet) -> Self {
        let mt = ch.num_antennas();
        let bank = effective_channel_bank(ch);
        let users = (0..ch.num_users())
            .map(|k| {
                let mut desired = LinearForm::default();
                let mut interference = Vec::new();
                for other in 0..ch.num_users() {
                    let pair = bank.pair(k, other);
                    for c in 0..pair.num_columns() {
                        if pair.matches[c].is_empty() {
                            continue;
                        }
                        let form = LinearForm {
                            terms: pair.matches[c]
                                .iter()
                                .flat_map(|&(lp, l)| LinearForm::conj_block(lp * mt, &ch.path(k, l).gain))
                                .collect(),
                        };
                        if pair.is_desired_column(c) {
                            desired = form;
                        } else {
                            interference.push((other, form));
                        }
                    }
                }
                UserTerms { desired, interference }
            })
            .collect();
        let dims = (0..ch.num_users()).map(|k| mt * ch.num_paths(k)).collect();
        Self { dims, users, noise_power: ch.noise_power() }
    }

    /// Strongest-path transmission: one beam `f_k` per user, detected on
    /// path 0; every other path of every user is a separate interference tap.
    pub fn strongest_path(ch: &ChannelSet) -> Self {
        let kk = ch.num_users();
        let users = (0..kk)
            .map(|k| {
                let form = |l: usize| LinearForm { terms: LinearForm::conj_block(0, &ch.path(k, l).gain).collect() };
                let mut interference = Vec::new();
                for l in 1..ch.num_paths(k) {
                    interference.push((k, form(l)));
                }
                for other in (0..kk).filter(|&o| o != k) {
                    for l in 0..ch.num_paths(k) {
                        interference.push((other, form(l)));
                    }
                }
                UserTerms { desired: form(0), interference }
            })
            .collect();
        Self { dims: vec![ch.num_antennas(); kk], users, noise_power: ch.noise_power() }
    }

    /// Re-expresses the model in new variables `w_k` with `x_k = maps[k] w_k`.
    pub fn compose(&self, maps: &[CMatrix]) -> Result<Self> {
        if maps.len() != self.dims.len() || maps.iter().zip(&self.dims).any(|(m, &d)| m.nrows() != d) {
            return Err(DamError::DimensionMismatch("substitution maps do not fit the model".into()));
        }
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| UserTerms {
                desired: u.desired.compose(&maps[k]),
                interference: u.interference.iter().map(|(o, f)| (*o, f.compose(&maps[*o]))).collect(),
            })
            .collect();
        Ok(Self { dims: maps.iter().map(|m| m.ncols()).collect(), users, noise_power: self.noise_power })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn user(&self, k: usize) -> &UserTerms {
        &self.users[k]
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    fn check_point(&self, x: &[CVector]) -> Result<()> {
        if x.len() != self.dims.len() || x.iter().zip(&self.dims).any(|(v, &d)| v.len() != d) {
            return Err(DamError::ContractViolation("point does not match model dimensions".into()));
        }
        Ok(())
    }

    pub fn report(&self, x: &[CVector], k: usize) -> SinrReport {
        let u = &self.users[k];
        let desired = u.desired.eval(&x[k]).norm_sqr();
        let mut isi = 0.0;
        let mut iui = 0.0;
        for (o, f) in &u.interference {
            let p = f.eval(&x[*o]).norm_sqr();
            if *o == k {
                isi += p;
            } else {
                iui += p;
            }
        }
        SinrReport::new(desired, isi, iui, self.noise_power)
    }

    pub fn reports(&self, x: &[CVector]) -> Result<Vec<SinrReport>> {
        self.check_point(x)?;
        Ok((0..self.num_users()).map(|k| self.report(x, k)).collect())
    }

    /// `sum_k log2(1 + SINR_k)`.
    pub fn sum_rate(&self, x: &[CVector]) -> Result<f64> {
        Ok(self.reports(x)?.iter().map(SinrReport::rate).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_channel, GeometryConfig};
    use crate::dam::{dam_sinr, PathBeamformerSet};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dam_model_matches_bank_sinr() {
        let ch = synthesize_channel(&GeometryConfig::uniform(4, 3, 2, 6, 21), 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let beams: Vec<CVector> = (0..3)
            .map(|k| CVector::from_fn(4 * ch.num_paths(k), |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
            .collect();
        let set = PathBeamformerSet::new(&ch, beams.clone()).unwrap();
        let a = dam_sinr(&ch, &set).unwrap();
        let b = InterferenceModel::dam(&ch).reports(&beams).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.sinr - y.sinr).abs() <= 1e-12 * x.sinr);
            assert!((x.isi_power - y.isi_power).abs() <= 1e-12 * x.desired_power);
            assert!((x.iui_power - y.iui_power).abs() <= 1e-12 * x.desired_power);
        }
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let ch = synthesize_channel(&GeometryConfig::uniform(3, 2, 2, 4, 2), 1.0).unwrap();
        let m = InterferenceModel::strongest_path(&ch);
        let id: Vec<CMatrix> = (0..2).map(|_| CMatrix::identity(3, 3)).collect();
        let c = m.compose(&id).unwrap();
        let x: Vec<CVector> = (0..2).map(|k| CVector::from_element(3, C64::new(1.0 + k as f64, -0.5))).collect();
        let (ra, rb) = (m.reports(&x).unwrap(), c.reports(&x).unwrap());
        for (a, b) in ra.iter().zip(&rb) {
            assert!((a.sinr - b.sinr).abs() < 1e-12 * a.sinr);
        }
    }

    #[test]
    fn wrong_point_shape_rejected() {
        let ch = synthesize_channel(&GeometryConfig::uniform(3, 2, 2, 4, 2), 1.0).unwrap();
        let m = InterferenceModel::dam(&ch);
        assert!(m.reports(&[CVector::zeros(6)]).is_err());
    }
}

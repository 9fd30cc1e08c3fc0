//! Density-band uncertainty sets around a nominal density.
//!
//! A band is the set of densities lying pointwise between a lower envelope
//! `p′` and an upper envelope `p″`. The outlier (ε-contamination) model is
//! the special case `p′ = (1 − ε)p` with no upper envelope.

use std::fmt;

use log::warn;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{quadrature, DensityGrid};

/// Pointwise slack used by [`contains`].
pub const MEMBERSHIP_SLACK: f64 = 1e-9;
/// Smallest accepted mass for a truncated nominal density.
pub const MIN_NOMINAL_MASS: f64 = 0.95;
/// Mass tolerance of the feasibility checks on envelope integrals.
pub const MASS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    Band,
    Outlier,
}

/// Upper envelope factor; `Unbounded` is exact, not a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperFactor {
    Bounded(f64),
    Unbounded,
}

impl Serialize for UpperFactor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            UpperFactor::Bounded(v) => s.serialize_f64(*v),
            UpperFactor::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for UpperFactor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = UpperFactor;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"unbounded\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<UpperFactor, E> {
                Ok(UpperFactor::Bounded(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<UpperFactor, E> {
                Ok(UpperFactor::Bounded(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<UpperFactor, E> {
                Ok(UpperFactor::Bounded(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<UpperFactor, E> {
                if v.eq_ignore_ascii_case("unbounded") {
                    Ok(UpperFactor::Unbounded)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Envelope factors applied to a nominal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBandSpec")]
pub struct BandSpec {
    pub kind: BandKind,
    pub lower_factor: f64,
    pub upper_factor: UpperFactor,
}

#[derive(Deserialize)]
struct RawBandSpec {
    kind: BandKind,
    lower_factor: f64,
    upper_factor: UpperFactor,
}

impl TryFrom<RawBandSpec> for BandSpec {
    type Error = Error;
    fn try_from(r: RawBandSpec) -> Result<Self> {
        let spec = BandSpec {
            kind: r.kind,
            lower_factor: r.lower_factor,
            upper_factor: r.upper_factor,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Default for BandSpec {
    fn default() -> Self {
        Self::band(0.8, 2.5).expect("default factors are valid")
    }
}

impl BandSpec {
    pub fn band(lower_factor: f64, upper_factor: f64) -> Result<Self> {
        let spec = Self {
            kind: BandKind::Band,
            lower_factor,
            upper_factor: UpperFactor::Bounded(upper_factor),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// ε-contamination model: lower factor `1 − ε`, no upper envelope.
    pub fn outlier(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Input(format!(
                "contamination ratio must lie in [0, 1), got {epsilon}"
            )));
        }
        let spec = Self {
            kind: BandKind::Outlier,
            lower_factor: 1.0 - epsilon,
            upper_factor: UpperFactor::Unbounded,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.kind {
            BandKind::Outlier => Some(1.0 - self.lower_factor),
            BandKind::Band => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower_factor > 0.0 && self.lower_factor <= 1.0) {
            return Err(Error::Input(format!(
                "lower factor must lie in (0, 1], got {}",
                self.lower_factor
            )));
        }
        match (self.kind, self.upper_factor) {
            (BandKind::Outlier, UpperFactor::Unbounded) => Ok(()),
            (BandKind::Outlier, UpperFactor::Bounded(_)) => Err(Error::Input(
                "outlier bands have an unbounded upper envelope".into(),
            )),
            (BandKind::Band, UpperFactor::Bounded(u))
                if u.is_finite() && u >= 1.0 && u >= self.lower_factor =>
            {
                Ok(())
            }
            (BandKind::Band, UpperFactor::Bounded(u)) => Err(Error::Input(format!(
                "upper factor must be finite and at least 1, got {u}"
            ))),
            // an unbounded band is an outlier model in disguise; accept it
            (BandKind::Band, UpperFactor::Unbounded) => Ok(()),
        }
    }
}

/// Upper envelope of a band.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Bounded(DensityGrid),
    Unbounded,
}

impl Envelope {
    /// Value at sample `k`; `+∞` when unbounded.
    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Envelope::Bounded(d) => d.values()[k],
            Envelope::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Envelope::Bounded(_))
    }
}

/// Feasible set `{q : lower ≤ q ≤ upper}` for one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBand {
    lower: DensityGrid,
    upper: Envelope,
    hypothesis: Hypothesis,
}

impl DensityBand {
    /// Checks envelope ordering and `∫lower ≤ 1 ≤ ∫upper`.
    pub fn new(lower: DensityGrid, upper: Envelope, hypothesis: Hypothesis) -> Result<Self> {
        let lower_mass = quadrature(&lower)?;
        if lower_mass > 1.0 + MASS_SLACK {
            return Err(Error::InfeasibleBand(format!(
                "{hypothesis:?}: lower envelope has mass {lower_mass:.6} > 1"
            )));
        }
        if let Envelope::Bounded(u) = &upper {
            lower.same_grid(u)?;
            if let Some(k) = lower
                .values()
                .iter()
                .zip(u.values())
                .position(|(l, u)| l > u)
            {
                return Err(Error::InfeasibleBand(format!(
                    "{hypothesis:?}: lower envelope exceeds upper at sample {k}"
                )));
            }
            let upper_mass = quadrature(u)?;
            if upper_mass < 1.0 - MASS_SLACK {
                return Err(Error::InfeasibleBand(format!(
                    "{hypothesis:?}: upper envelope has mass {upper_mass:.6} < 1"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            hypothesis,
        })
    }

    pub fn lower(&self) -> &DensityGrid {
        &self.lower
    }

    pub fn upper(&self) -> &Envelope {
        &self.upper
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    pub fn grid(&self) -> &crate::numerics::IntensityGrid {
        self.lower.grid()
    }

    /// `min{upper, max{v, lower}}` at sample `k`.
    #[inline]
    pub fn clamp_at(&self, k: usize, v: f64) -> f64 {
        let l = self.lower.values()[k];
        let u = self.upper.at(k);
        v.max(l).min(u)
    }
}

/// Builds the band `[lower_factor·p, upper_factor·p]` around a gridded nominal density.
pub fn build_band(
    nominal: &DensityGrid,
    spec: &BandSpec,
    hypothesis: Hypothesis,
) -> Result<DensityBand> {
    spec.validate()?;
    let mass = quadrature(nominal)?;
    if !(MIN_NOMINAL_MASS..=1.0 + 1e-6).contains(&mass) {
        return Err(Error::Input(format!(
            "{hypothesis:?}: nominal density has mass {mass:.6}, expected within [{MIN_NOMINAL_MASS}, 1]"
        )));
    }
    if mass < 1.0 - 1e-6 {
        warn!("{hypothesis:?}: nominal density is truncated (mass {mass:.6}); using it without renormalization");
    }
    if spec.lower_factor * mass > 1.0 + MASS_SLACK {
        return Err(Error::InfeasibleBand(format!(
            "{hypothesis:?}: lower envelope mass {:.6} exceeds 1",
            spec.lower_factor * mass
        )));
    }
    let lower = nominal.scaled(spec.lower_factor)?;
    let upper = match spec.upper_factor {
        UpperFactor::Bounded(f) => {
            if f * mass < 1.0 - MASS_SLACK {
                return Err(Error::InfeasibleBand(format!(
                    "{hypothesis:?}: upper envelope mass {:.6} is below 1",
                    f * mass
                )));
            }
            Envelope::Bounded(nominal.scaled(f)?)
        }
        UpperFactor::Unbounded => Envelope::Unbounded,
    };
    DensityBand::new(lower, upper, hypothesis)
}

/// Pointwise membership test with slack [`MEMBERSHIP_SLACK`].
pub fn contains(band: &DensityBand, q: &DensityGrid) -> Result<bool> {
    band.lower.same_grid(q)?;
    Ok(q.values().iter().enumerate().all(|(k, &v)| {
        v >= band.lower.values()[k] - MEMBERSHIP_SLACK && v <= band.upper.at(k) + MEMBERSHIP_SLACK
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{to_grid, NominalModel};
    use crate::numerics::IntensityGrid;
    use proptest::prelude::*;

    fn nominal() -> DensityGrid {
        let grid = IntensityGrid::unit(1024).unwrap();
        to_grid(&NominalModel::reference().h0, grid)
            .unwrap()
            .density
            .normalized()
            .unwrap()
    }

    #[test]
    fn band_masses() {
        let p = nominal();
        let b = build_band(&p, &BandSpec::band(0.8, 2.5).unwrap(), Hypothesis::H0).unwrap();
        assert!((quadrature(b.lower()).unwrap() - 0.8).abs() < 1e-9);
        match b.upper() {
            Envelope::Bounded(u) => assert!((quadrature(u).unwrap() - 2.5).abs() < 1e-9),
            Envelope::Unbounded => panic!("expected bounded"),
        }
    }

    #[test]
    fn degenerate_band_is_the_nominal() {
        let p = nominal();
        let b = build_band(&p, &BandSpec::band(1.0, 1.0).unwrap(), Hypothesis::H1).unwrap();
        assert_eq!(b.lower(), &p);
        assert_eq!(b.upper(), &Envelope::Bounded(p.clone()));
        assert!(contains(&b, &p).unwrap());
    }

    #[test]
    fn outlier_band() {
        let p = nominal();
        let spec = BandSpec::outlier(0.4).unwrap();
        assert!((spec.lower_factor - 0.6).abs() < 1e-15);
        let b = build_band(&p, &spec, Hypothesis::H0).unwrap();
        assert_eq!(b.upper(), &Envelope::Unbounded);
        // any non-negative spike keeps the mixture inside the band
        let spike: Vec<f64> = (0..p.len())
            .map(|k| if k == 700 { 1e4 } else { 0.0 })
            .collect();
        let q = DensityGrid::new(
            *p.grid(),
            p.values()
                .iter()
                .zip(&spike)
                .map(|(v, s)| 0.6 * v + 0.4 * s)
                .collect(),
        )
        .unwrap();
        assert!(contains(&b, &q).unwrap());
    }

    #[test]
    fn membership() {
        let p = nominal();
        let b = build_band(&p, &BandSpec::default(), Hypothesis::H0).unwrap();
        assert!(contains(&b, &p).unwrap());
        assert!(!contains(&b, &p.scaled(0.5).unwrap()).unwrap());
        let other = DensityGrid::constant(IntensityGrid::unit(10).unwrap(), 1.0).unwrap();
        assert!(matches!(contains(&b, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn infeasible_bands() {
        let p = nominal();
        // lower·mass > 1 cannot happen with lower ≤ 1 on a normalized density; use a heavy nominal
        let heavy = p.scaled(1.0 + 5e-10).unwrap();
        assert!(build_band(&heavy, &BandSpec::band(1.0, 1.0).unwrap(), Hypothesis::H0).is_ok());
        let heavier = p.scaled(1.0 + 5e-7).unwrap();
        assert!(matches!(
            build_band(&heavier, &BandSpec::band(1.0, 1.0).unwrap(), Hypothesis::H0),
            Err(Error::InfeasibleBand(_))
        ));
        let light = p.scaled(0.96).unwrap();
        assert!(matches!(
            build_band(&light, &BandSpec::band(0.8, 1.02).unwrap(), Hypothesis::H0),
            Err(Error::InfeasibleBand(_))
        ));
        assert!(build_band(
            &p.scaled(0.5).unwrap(),
            &BandSpec::default(),
            Hypothesis::H0
        )
        .is_err());
        assert!(BandSpec::band(1.2, 2.0).is_err());
        assert!(BandSpec::outlier(1.0).is_err());
    }

    #[test]
    fn band_spec_json() {
        let b: BandSpec =
            serde_json::from_str(r#"{"kind":"band","lower_factor":0.8,"upper_factor":2.5}"#)
                .unwrap();
        assert_eq!(b, BandSpec::band(0.8, 2.5).unwrap());
        let o: BandSpec = serde_json::from_str(
            r#"{"kind":"outlier","lower_factor":0.6,"upper_factor":"unbounded"}"#,
        )
        .unwrap();
        assert_eq!(o.upper_factor, UpperFactor::Unbounded);
        assert_eq!(
            serde_json::to_string(&o).unwrap(),
            r#"{"kind":"outlier","lower_factor":0.6,"upper_factor":"unbounded"}"#
        );
        assert!(serde_json::from_str::<BandSpec>(
            r#"{"kind":"outlier","lower_factor":0.6,"upper_factor":3}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn envelope_ratio_is_exact(l in 0.05f64..1.0, u in 1.0f64..5.0) {
            let p = nominal();
            let b = build_band(&p, &BandSpec::band(l, u).unwrap(), Hypothesis::H0).unwrap();
            let Envelope::Bounded(up) = b.upper() else { unreachable!() };
            for (k, v) in p.values().iter().enumerate() {
                if *v > 0.0 {
                    let ratio = up.values()[k] / b.lower().values()[k];
                    prop_assert!((ratio - u / l).abs() <= 1e-12 * (u / l));
                }
            }
        }

        #[test]
        fn membership_is_convex_in_order(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let p = nominal();
            let b = build_band(&p, &BandSpec::band(0.8, 2.5).unwrap(), Hypothesis::H0).unwrap();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let q1 = p.scaled(0.8 + 1.7 * lo).unwrap();
            let q3 = p.scaled(0.8 + 1.7 * hi).unwrap();
            let q2 = p.scaled(0.8 + 1.7 * 0.5 * (lo + hi)).unwrap();
            prop_assert!(contains(&b, &q1).unwrap() && contains(&b, &q3).unwrap());
            prop_assert!(contains(&b, &q2).unwrap());
        }
    }
}

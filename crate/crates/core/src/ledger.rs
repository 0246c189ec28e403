//! Integer bookkeeping for null-torsion holomorphic curves of genus g whose
//! binormal map has degree d (area 4 pi d): Chern numbers of the line bundles
//! L_T, L_N, L_B, Riemann-Roch section counts, the genus-degree gate and the
//! predicted low Jacobi spectrum.

use crate::Error;
use serde::Serialize;

pub const GEODESIC_NOTICE: &str =
    "d = 1 is the totally geodesic sphere by convention; the frame formulas for L_N and L_B do not apply";

pub const ATTAINMENT_QUESTION: &str = "open question: whether the lower bound m1 = A/pi + (n - 3) chi \
(here 4d) is attained by every compact superminimal surface in S^2n; known for genus 0 and for \
holomorphic curves in S^6 with g < (d + 2)/2, open otherwise";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TopologyRecord {
    pub g: u32,
    pub chi: i64,
    pub d: u32,
}

impl TopologyRecord {
    pub fn new(g: u32, d: u32) -> Result<Self, Error> {
        if d == 0 || (2..6).contains(&d) {
            return Err(Error::InvalidArgument(format!("degree must be 1 or at least 6, got {d}")));
        }
        let chi = 2 - 2 * g as i64;
        assert!(chi % 2 == 0, "Euler characteristic of a closed orientable surface is even");
        Ok(TopologyRecord { g, chi, d })
    }

    pub fn is_geodesic(&self) -> bool {
        self.d == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChernNumbers {
    pub c1_lt: i64,
    pub c1_ln: i64,
    pub c1_lb: i64,
    /// Zeros of the holomorphic section relating L_T and L_B.
    pub phi2_zeros: i64,
}

pub fn chern_ledger(g: u32, d: u32) -> Result<ChernNumbers, Error> {
    let t = TopologyRecord::new(g, d)?;
    if t.is_geodesic() {
        return Err(Error::InvalidArgument(GEODESIC_NOTICE.into()));
    }
    let d = d as i64;
    let out = ChernNumbers { c1_lt: t.chi, c1_ln: d - t.chi, c1_lb: -d, phi2_zeros: d - 3 * t.chi };
    assert_eq!(out.c1_lt + out.c1_ln + out.c1_lb, 0);
    if out.phi2_zeros < 0 {
        return Err(Error::Inconsistent(format!(
            "no such curve: the section vanishing at d - 3 chi = {} points would have negative degree",
            out.phi2_zeros
        )));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SectionCounts {
    pub h0_ln: i64,
    /// Exact when `valid`, otherwise a lower bound missing h0(L_B x K).
    pub h0_lbdual: i64,
    /// d > 2g - 2, which forces h0(L_B x K) = 0.
    pub valid: bool,
    pub unknown_h0_lb_k: bool,
}

pub fn riemann_roch_counts(g: u32, d: u32) -> Result<SectionCounts, Error> {
    let t = TopologyRecord::new(g, d)?;
    if t.is_geodesic() {
        return Err(Error::InvalidArgument(GEODESIC_NOTICE.into()));
    }
    let d = d as i64;
    let half = t.chi / 2;
    let valid = d > 2 * g as i64 - 2;
    // without the vanishing, d + chi/2 only bounds h0(L_B*) from below, and so does 0
    let lbdual = if valid { d + half } else { (d + half).max(0) };
    Ok(SectionCounts { h0_ln: d - half, h0_lbdual: lbdual, valid, unknown_h0_lb_k: !valid })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Count {
    Exact(i64),
    AtLeast(i64),
}

impl Count {
    pub fn value(&self) -> i64 {
        match self {
            Count::Exact(v) | Count::AtLeast(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Count::Exact(_))
    }
}

impl std::fmt::Display for Count {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Count::Exact(v) => write!(f, "{v}"),
            Count::AtLeast(v) => write!(f, ">= {v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralPrediction {
    /// Multiplicity of the lowest eigenvalue.
    pub m1: Count,
    pub nullity_lower: i64,
    pub lambda1: f64,
}

/// m1 = 4d exactly when 2g < d + 2, otherwise only the lower bound.
pub fn spectral_predictions(g: u32, d: u32) -> SpectralPrediction {
    let (g, d) = (g as i64, d as i64);
    let m = 4 * d;
    let m1 = if 2 * g < d + 2 { Count::Exact(m) } else { Count::AtLeast(m) };
    SpectralPrediction { m1, nullity_lower: 2 * d + 2 - 2 * g, lambda1: -2.0 }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum GateVerdict {
    Admissible,
    Inadmissible(String),
    Unknown,
}

/// Necessary conditions on (g, d): d >= 6 off the geodesic sphere, d = 6 forces g = 0,
/// 7 <= d <= 11 forces g <= d - 6, and g <= 6 forces d > 2g - 2.
pub fn genus_degree_gate(g: u32, d: u32) -> GateVerdict {
    let (gi, di) = (g as i64, d as i64);
    if d == 1 {
        return if g == 0 {
            GateVerdict::Admissible
        } else {
            GateVerdict::Inadmissible("d = 1 is reserved for the totally geodesic sphere (g = 0)".into())
        };
    }
    if d < 6 {
        return GateVerdict::Inadmissible(format!("d = {d} < 6 is impossible for a curve that is not totally geodesic"));
    }
    if d == 6 {
        return if g == 0 {
            GateVerdict::Admissible
        } else {
            GateVerdict::Inadmissible("d = 6 forces the rational normal curve, genus 0".into())
        };
    }
    if d <= 11 {
        return if gi <= di - 6 {
            GateVerdict::Admissible
        } else {
            GateVerdict::Inadmissible(format!("7 <= d <= 11 forces g <= d - 6 = {}", di - 6))
        };
    }
    if g <= 6 {
        // d >= 12 > 2g - 2 here, so the section counts are determined
        GateVerdict::Admissible
    } else {
        GateVerdict::Unknown
    }
}

/// Genus-0 index bound 2(k-1)(2d - [sqrt(8d+1)]_odd + 2) for S^2k, k = 3.
/// Display only: it bounds linearly full minimal spheres, not a prediction checked here.
pub fn index_bound_display(d: u32) -> i64 {
    let d = d as i64;
    let s = (8 * d + 1) as f64;
    let mut r = s.sqrt().floor() as i64;
    while r * r > 8 * d + 1 {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= 8 * d + 1 {
        r += 1;
    }
    let odd = if r % 2 == 1 { r } else { r - 1 };
    2 * 2 * (2 * d - odd + 2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BundleLedger {
    pub topology: TopologyRecord,
    pub chern: Option<ChernNumbers>,
    pub sections: Option<SectionCounts>,
    pub spectral: SpectralPrediction,
    pub gate: GateVerdict,
    /// Only meaningful for g = 0.
    pub index_bound_display: Option<i64>,
    pub notes: Vec<String>,
}

impl BundleLedger {
    pub fn admissible(&self) -> bool {
        self.gate == GateVerdict::Admissible
    }
}

pub fn bundle_ledger(g: u32, d: u32) -> Result<BundleLedger, Error> {
    let topology = TopologyRecord::new(g, d).or_else(|e| {
        // keep the record for gate reporting even when the degree is impossible
        if d >= 1 {
            Ok(TopologyRecord { g, chi: 2 - 2 * g as i64, d })
        } else {
            Err(e)
        }
    })?;
    let mut notes = Vec::new();
    let (chern, sections) = if d == 1 {
        notes.push(GEODESIC_NOTICE.to_string());
        (None, None)
    } else if d < 6 {
        (None, None)
    } else {
        let chern = match chern_ledger(g, d) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let s = riemann_roch_counts(g, d)?;
        if !s.valid {
            notes.push("d <= 2g - 2: h0(L_B x K) unknown, h0(L_B*) is a lower bound".into());
        }
        (chern, Some(s))
    };
    let spectral = spectral_predictions(g, d);
    if !spectral.m1.is_exact() {
        notes.push(ATTAINMENT_QUESTION.to_string());
    }
    Ok(BundleLedger {
        topology,
        chern,
        sections,
        spectral,
        gate: genus_degree_gate(g, d),
        index_bound_display: (g == 0).then(|| index_bound_display(d)),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_normal_curve() {
        assert_eq!(chern_ledger(0, 6).unwrap(), ChernNumbers { c1_lt: 2, c1_ln: 4, c1_lb: -6, phi2_zeros: 0 });
        let s = riemann_roch_counts(0, 6).unwrap();
        assert_eq!((s.h0_ln, s.h0_lbdual, s.valid), (5, 7, true));
        let p = spectral_predictions(0, 6);
        assert_eq!((p.m1, p.nullity_lower, p.lambda1), (Count::Exact(24), 14, -2.0));
    }

    #[test]
    fn torus_degree_seven() {
        assert_eq!(chern_ledger(1, 7).unwrap(), ChernNumbers { c1_lt: 0, c1_ln: 7, c1_lb: -7, phi2_zeros: 7 });
    }

    #[test]
    fn geodesic_convention() {
        assert!(matches!(riemann_roch_counts(0, 1), Err(Error::InvalidArgument(m)) if m.contains("totally geodesic")));
        let p = spectral_predictions(0, 1);
        assert_eq!((p.m1, p.nullity_lower), (Count::Exact(4), 4));
        assert_eq!(genus_degree_gate(0, 1), GateVerdict::Admissible);
    }

    #[test]
    fn high_genus_gives_bounds() {
        assert_eq!(spectral_predictions(10, 12).m1, Count::AtLeast(48));
        let s = riemann_roch_counts(7, 13).unwrap();
        assert!(s.valid);
        assert_eq!(s.h0_ln, 19);
        assert_eq!(spectral_predictions(7, 13).m1, Count::Exact(52));
        let s = riemann_roch_counts(10, 12).unwrap();
        assert!(!s.valid && s.unknown_h0_lb_k);
        assert!(bundle_ledger(10, 12).unwrap().notes.iter().any(|n| n.starts_with("open question")));
    }

    #[test]
    fn gate_examples() {
        assert!(matches!(genus_degree_gate(1, 6), GateVerdict::Inadmissible(_)));
        assert!(matches!(genus_degree_gate(5, 8), GateVerdict::Inadmissible(_)));
        assert_eq!(genus_degree_gate(0, 6), GateVerdict::Admissible);
        assert_eq!(genus_degree_gate(2, 8), GateVerdict::Admissible);
        assert!(matches!(genus_degree_gate(0, 3), GateVerdict::Inadmissible(_)));
        assert_eq!(genus_degree_gate(9, 30), GateVerdict::Unknown);
    }

    #[test]
    fn index_bound_for_degree_six() {
        // sqrt(49) = 7: 4 * (12 - 7 + 2)
        assert_eq!(index_bound_display(6), 28);
        // sqrt(9) = 3: 4 * (2 - 3 + 2)
        assert_eq!(index_bound_display(1), 4);
    }
}

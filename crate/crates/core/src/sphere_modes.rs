//! Spectral index set of the truncated spherical-harmonic basis.
//!
//! Modes are ordered by degree, then by order: `(0,0), (1,-1), (1,0), (1,1), ...`.
//! The position of a mode in that order is its *rank*, `ell^2 + ell + m`, and
//! every coefficient vector in the crate is indexed by rank.

use crate::error::{Error, Result};

/// A spherical-harmonic index `(ell, m)` with `|m| <= ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    ell: u32,
    m: i32,
}

impl ModeIndex {
    pub fn new(ell: u32, m: i32) -> Result<Self> {
        if i64::from(m).unsigned_abs() > u64::from(ell) {
            return Err(Error::InvalidMode {
                ell,
                m: i64::from(m),
            });
        }
        Ok(Self { ell, m })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    /// Position of this mode in the canonical enumeration.
    pub fn rank(&self) -> usize {
        let ell = self.ell as usize;
        (ell * ell + ell).wrapping_add_signed(self.m as isize)
    }

    pub fn from_rank(rank: usize) -> Self {
        let ell = (rank as f64).sqrt() as usize;
        // correct possible rounding of the square root
        let ell = if (ell + 1) * (ell + 1) <= rank {
            ell + 1
        } else if ell * ell > rank {
            ell - 1
        } else {
            ell
        };
        let m = rank as isize - (ell * ell + ell) as isize;
        Self {
            ell: ell as u32,
            m: m as i32,
        }
    }

    pub fn eigenvalue(&self) -> f64 {
        eigenvalue(self.ell)
    }
}

/// Truncation of the basis at degree `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLattice {
    kappa: u32,
}

impl ModeLattice {
    pub fn new(kappa: u32) -> Self {
        Self { kappa }
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Number of modes, `(kappa + 1)^2`.
    pub fn len(&self) -> usize {
        let k = self.kappa as usize + 1;
        k * k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = ModeIndex> + Clone {
        (0..=self.kappa).flat_map(|ell| {
            let l = ell as i32;
            (-l..=l).map(move |m| ModeIndex { ell, m })
        })
    }

    /// Degree of every mode, indexed by rank.
    pub fn degrees(&self) -> Vec<u32> {
        self.iter().map(|mode| mode.ell).collect()
    }

    /// Laplace-Beltrami eigenvalue of every mode, indexed by rank.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.iter().map(|mode| mode.eigenvalue()).collect()
    }
}

pub fn enumerate_modes(lattice: ModeLattice) -> Vec<ModeIndex> {
    lattice.iter().collect()
}

/// `ell (ell + 1)`, formed in integer arithmetic.
pub fn eigenvalue(ell: u32) -> f64 {
    let ell = u64::from(ell);
    (ell * (ell + 1)) as f64
}

/// `ell^(-exponent)` with the convention `0^(-x) = 1`.
pub fn degree_power(ell: u32, exponent: f64) -> f64 {
    if ell == 0 {
        1.0
    } else {
        f64::from(ell).powf(-exponent)
    }
}

/// Per-degree amplitudes `a_ell` of the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    a: Vec<f64>,
}

impl AngularSpectrum {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidSpectrum("no amplitudes".into()));
        }
        if let Some((ell, v)) = a
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidSpectrum(format!(
                "amplitude a_{ell} = {v} is not a finite nonnegative number"
            )));
        }
        Ok(Self { a })
    }

    /// `a_0 = a0`, `a_ell = scale * ell^(-exponent)` for `ell >= 1`.
    pub fn power_law(kappa: u32, a0: f64, exponent: f64, scale: f64) -> Result<Self> {
        let a = (0..=kappa)
            .map(|ell| {
                if ell == 0 {
                    a0 * scale
                } else {
                    scale * degree_power(ell, exponent)
                }
            })
            .collect();
        Self::new(a)
    }

    /// `a_0 = 1`, `a_ell = ell^-4`.
    pub fn reference(kappa: u32) -> Self {
        Self::power_law(kappa, 1.0, 4.0, 1.0).expect("reference spectrum is valid")
    }

    pub fn zero(kappa: u32) -> Self {
        Self {
            a: vec![0.0; kappa as usize + 1],
        }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn amplitude(&self, ell: u32) -> Result<f64> {
        self.a
            .get(ell as usize)
            .copied()
            .ok_or(Error::SpectrumTooShort {
                len: self.a.len(),
                ell,
            })
    }

    /// Per-unit-time variance `v_{ell,m} = a_ell^2`.
    pub fn variance_rate(&self, ell: u32) -> Result<f64> {
        self.amplitude(ell).map(|a| a * a)
    }

    pub fn covers(&self, lattice: ModeLattice) -> Result<()> {
        if self.a.len() <= lattice.kappa() as usize {
            return Err(Error::SpectrumTooShort {
                len: self.a.len(),
                ell: lattice.kappa(),
            });
        }
        Ok(())
    }
}

/// `Tr(Q^kappa) = sum_{ell <= kappa} (2 ell + 1) a_ell^2`.
pub fn trace_q(spectrum: &AngularSpectrum, lattice: ModeLattice) -> Result<f64> {
    spectrum.covers(lattice)?;
    Ok((0..=lattice.kappa())
        .map(|ell| f64::from(2 * ell + 1) * spectrum.a[ell as usize].powi(2))
        .sum())
}

/// `Tr(Q^{1/2} (-Laplacian) Q^{1/2})` on the truncated space.
pub fn weighted_trace_laplacian(spectrum: &AngularSpectrum, lattice: ModeLattice) -> Result<f64> {
    spectrum.covers(lattice)?;
    Ok((0..=lattice.kappa())
        .map(|ell| f64::from(2 * ell + 1) * spectrum.a[ell as usize].powi(2) * eigenvalue(ell))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eigenvalues_follow_degree_formula() {
        assert_eq!(eigenvalue(0), 0.0);
        assert_eq!(eigenvalue(1), 2.0);
        assert_eq!(eigenvalue(2), 6.0);
        assert_eq!(eigenvalue(1 << 25), ((1u64 << 25) * ((1u64 << 25) + 1)) as f64);
    }

    #[test]
    fn small_lattices_enumerate_in_order() {
        let m = |ell, m| ModeIndex::new(ell, m).unwrap();
        assert_eq!(enumerate_modes(ModeLattice::new(0)), vec![m(0, 0)]);
        assert_eq!(
            enumerate_modes(ModeLattice::new(1)),
            vec![m(0, 0), m(1, -1), m(1, 0), m(1, 1)]
        );
        let mut count = 0;
        for ell in 0..=2u32 {
            for _ in -(ell as i32)..=ell as i32 {
                count += 1;
            }
        }
        assert_eq!(enumerate_modes(ModeLattice::new(2)).len(), count);
        assert_eq!(count, 9);
    }

    #[test]
    fn rejects_order_beyond_degree() {
        assert!(ModeIndex::new(1, 2).is_err());
        assert!(ModeIndex::new(0, -1).is_err());
        assert!(ModeIndex::new(3, -3).is_ok());
    }

    #[test]
    fn trace_examples() {
        let one = AngularSpectrum::new(vec![1.0]).unwrap();
        assert_eq!(trace_q(&one, ModeLattice::new(0)).unwrap(), 1.0);
        assert_eq!(weighted_trace_laplacian(&one, ModeLattice::new(0)).unwrap(), 0.0);

        let ones = AngularSpectrum::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(trace_q(&ones, ModeLattice::new(1)).unwrap(), 4.0);
        assert_eq!(weighted_trace_laplacian(&ones, ModeLattice::new(1)).unwrap(), 6.0);

        let mid = AngularSpectrum::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(weighted_trace_laplacian(&mid, ModeLattice::new(2)).unwrap(), 6.0);
    }

    #[test]
    fn reference_spectrum_trace_matches_mode_by_mode_sum() {
        // oracle: walk every (ell, m) and add a_ell^2 directly
        let kappa = 64;
        let lattice = ModeLattice::new(kappa);
        let mut oracle = 0.0;
        let mut weighted = 0.0;
        for ell in 0..=kappa {
            let a = if ell == 0 { 1.0 } else { (ell as f64).powi(-4) };
            for _m in -(ell as i64)..=ell as i64 {
                oracle += a * a;
                weighted += a * a * (ell * (ell + 1)) as f64;
            }
        }
        let spec = AngularSpectrum::reference(kappa);
        let got = trace_q(&spec, lattice).unwrap();
        assert!((got - oracle).abs() <= 1e-13 * oracle);
        let got_w = weighted_trace_laplacian(&spec, lattice).unwrap();
        assert!((got_w - weighted).abs() <= 1e-13 * weighted);
    }

    #[test]
    fn short_spectrum_is_rejected() {
        let spec = AngularSpectrum::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            trace_q(&spec, ModeLattice::new(2)),
            Err(Error::SpectrumTooShort { .. })
        ));
    }

    #[test]
    fn zero_degree_power_is_one() {
        assert_eq!(degree_power(0, 3.0), 1.0);
        assert_eq!(degree_power(0, -2.0), 1.0);
        assert_eq!(degree_power(2, 4.0), 1.0 / 16.0);
    }

    #[test]
    fn negative_amplitudes_rejected() {
        assert!(AngularSpectrum::new(vec![1.0, -0.1]).is_err());
        assert!(AngularSpectrum::new(vec![f64::NAN]).is_err());
        assert!(AngularSpectrum::new(vec![]).is_err());
    }

    #[test]
    fn lattice_sizes_up_to_128() {
        for kappa in 0..=128u32 {
            let lattice = ModeLattice::new(kappa);
            let modes = enumerate_modes(lattice);
            assert_eq!(modes.len(), ((kappa + 1) * (kappa + 1)) as usize);
            assert!(modes.iter().enumerate().all(|(i, m)| m.rank() == i));
        }
    }

    proptest! {
        #[test]
        fn rank_round_trips(rank in 0usize..200_000) {
            let mode = ModeIndex::from_rank(rank);
            prop_assert!(mode.m().unsigned_abs() <= mode.ell());
            prop_assert_eq!(mode.rank(), rank);
        }

        #[test]
        fn trace_monotone_and_bounded(
            amps in proptest::collection::vec(0.0f64..3.0, 1..40),
        ) {
            let spec = AngularSpectrum::new(amps.clone()).unwrap();
            let mut prev = 0.0;
            for kappa in 0..amps.len() as u32 {
                let lattice = ModeLattice::new(kappa);
                let tr = trace_q(&spec, lattice).unwrap();
                prop_assert!(tr >= prev);
                prev = tr;
                let w = weighted_trace_laplacian(&spec, lattice).unwrap();
                prop_assert!(w <= eigenvalue(kappa) * tr * (1.0 + 1e-12));
            }
        }
    }
}

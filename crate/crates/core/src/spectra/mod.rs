//! Quantum spectra of quadratic Hamiltonians with constant commutators.
//!
//! The normal modes come from the eigenvalues of `K = J·M`: a pair `±iω`
//! is an oscillator of frequency `ω`, a zero eigenvalue with a complete
//! eigenspace is a degeneracy pair (infinite degeneracy, e.g. the Landau
//! guiding centre), a defective zero is a shear mode and anything with a
//! real part is a runaway. Discrete spectra are `Σ ω_k (n_k + ½)`.

pub mod catalog;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_matrix, fmt17};
use crate::error::{Error, Result};
use crate::lagrangian::HamiltonianStructure;
use crate::linalg::{self, SINGULAR_CUTOFF};

pub use catalog::{catalog, catalog_entries, catalog_entry, CatalogEntry, H2Realization, LandauParams, NcParams, ParamSet, ParamSpec};

/// Relative magnitude below which an eigenvalue of `K` counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
/// Levels closer than this (relative to `max(1, |E|)`) are merged.
pub const LEVEL_MERGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Oscillator,
    DegeneracyPair,
    Shear,
    Runaway,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    pub kind: ModeKind,
    /// Frequency of an oscillator, or the imaginary part of a runaway eigenvalue.
    pub omega: f64,
    /// Real part of a runaway eigenvalue; zero otherwise.
    #[serde(default)]
    pub growth: f64,
    pub multiplicity: usize,
}

impl NormalMode {
    pub fn oscillator(omega: f64, multiplicity: usize) -> Self {
        Self { kind: ModeKind::Oscillator, omega, growth: 0.0, multiplicity }
    }

    pub fn degeneracy_pair(multiplicity: usize) -> Self {
        Self { kind: ModeKind::DegeneracyPair, omega: 0.0, growth: 0.0, multiplicity }
    }
}

fn kind_rank(kind: ModeKind) -> u8 {
    match kind {
        ModeKind::Oscillator => 0,
        ModeKind::DegeneracyPair => 1,
        ModeKind::Shear => 2,
        ModeKind::Runaway => 3,
    }
}

/// Algebraic multiplicity of the zero eigenvalue: the stable nullity of `K^j`.
fn zero_algebraic_multiplicity(k: &linalg::Mat, tol: f64) -> usize {
    let dim = k.nrows();
    let mut power = k.clone();
    let mut last = linalg::nullity(&power, tol);
    for _ in 1..dim {
        if last == dim {
            break;
        }
        power = &power * k;
        let next = linalg::nullity(&power, tol);
        if next == last {
            break;
        }
        last = next;
    }
    last
}

/// Classifies the eigenstructure of `J·M` into normal modes.
pub fn normal_modes(structure: &HamiltonianStructure, zero_tol: f64) -> Result<Vec<NormalMode>> {
    let ratio = linalg::singular_ratio(structure.j());
    if ratio < SINGULAR_CUTOFF {
        return Err(Error::SingularPoissonMatrix { ratio });
    }
    let k = flow_matrix(structure);
    let dim = k.nrows();
    let mut eig: Vec<num_complex::Complex64> = k.clone().complex_eigenvalues().iter().copied().collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigenvalues of J·M".into()));
    }
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let alg = if scale == 0.0 { dim } else { zero_algebraic_multiplicity(&k, zero_tol) };
    let geo = if scale == 0.0 { linalg::nullity(&k, zero_tol) } else { linalg::nullity(&k, zero_tol).min(alg) };
    eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let nonzero = &eig[alg.min(dim)..];

    let cutoff = zero_tol * scale;
    let mut imag: Vec<f64> = nonzero.iter().filter(|z| z.re.abs() <= cutoff).map(|z| z.im).collect();
    let mut real: Vec<num_complex::Complex64> = nonzero.iter().filter(|z| z.re.abs() > cutoff).copied().collect();
    imag.sort_by(f64::total_cmp);
    real.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let mut modes: Vec<NormalMode> = Vec::new();
    for omega in imag.iter().skip(imag.len() / 2).map(|w| w.abs()) {
        match modes.last_mut() {
            Some(last) if (omega - last.omega).abs() <= cutoff.max(f64::EPSILON * scale) * 10.0 => last.multiplicity += 1,
            _ => modes.push(NormalMode::oscillator(omega, 1)),
        }
    }
    for z in real.iter().skip(real.len() / 2) {
        modes.push(NormalMode { kind: ModeKind::Runaway, omega: z.im.abs(), growth: z.re.abs(), multiplicity: 1 });
    }
    let shear = alg.saturating_sub(geo);
    let pairs = alg.saturating_sub(2 * shear) / 2;
    if pairs > 0 {
        modes.push(NormalMode::degeneracy_pair(pairs));
    }
    if shear > 0 {
        modes.push(NormalMode { kind: ModeKind::Shear, omega: 0.0, growth: 0.0, multiplicity: shear });
    }
    modes.sort_by(|a, b| kind_rank(a.kind).cmp(&kind_rank(b.kind)).then(a.omega.total_cmp(&b.omega)));
    Ok(modes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    #[serde(rename = "E")]
    pub energy: f64,
    pub degeneracy: usize,
    /// Occupation numbers of the oscillator modes that land on this level.
    pub quanta: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub modes: Vec<NormalMode>,
    pub ground_energy: f64,
    pub levels: Vec<Level>,
    /// Every level carries an infinite degeneracy from zero modes.
    pub infinite_degeneracy: bool,
    /// Levels strictly below this energy are complete for the enumeration cap.
    pub complete_below: f64,
}

impl ModeSpectrum {
    /// Adds a constant energy to every level.
    pub fn shifted(mut self, offset: f64) -> Self {
        self.ground_energy += offset;
        self.complete_below += offset;
        for l in &mut self.levels {
            l.energy += offset;
        }
        self
    }

    /// Energies repeated by degeneracy, ascending.
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|l| std::iter::repeat_n(l.energy, l.degeneracy)).collect()
    }

    pub fn contains(&self, energy: f64, tol: f64) -> bool {
        self.levels.iter().any(|l| (l.energy - energy).abs() <= tol * energy.abs().max(1.0))
    }

    /// CSV with columns `E,degeneracy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "E,degeneracy")?;
        for l in &self.levels {
            writeln!(w, "{},{}", fmt17(l.energy), l.degeneracy)?;
        }
        Ok(())
    }
}

fn enumerate_quanta(count: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == count {
        out.push(prefix.clone());
        return;
    }
    for n in 0..=budget {
        prefix.push(n);
        enumerate_quanta(count, budget - n, prefix, out);
        prefix.pop();
    }
}

/// Enumerates `Σ ω_k (n_k + ½)` for all occupations with `Σ n_k ≤ max_quanta`.
pub fn closed_form_levels(modes: &[NormalMode], max_quanta: u32) -> Result<ModeSpectrum> {
    if let Some(bad) = modes.iter().find(|m| matches!(m.kind, ModeKind::Runaway | ModeKind::Shear)) {
        return Err(Error::UnstableSpectrum(format!(
            "{:?} mode present (omega {}, growth {})",
            bad.kind, bad.omega, bad.growth
        )));
    }
    let freqs: Vec<f64> = modes
        .iter()
        .filter(|m| m.kind == ModeKind::Oscillator)
        .flat_map(|m| std::iter::repeat_n(m.omega, m.multiplicity))
        .collect();
    let ground: f64 = 0.5 * freqs.iter().sum::<f64>();
    let mut occupations = Vec::new();
    enumerate_quanta(freqs.len(), max_quanta, &mut Vec::new(), &mut occupations);
    let mut states: Vec<(f64, Vec<u32>)> = occupations
        .into_iter()
        .map(|n| (ground + n.iter().zip(&freqs).map(|(&k, w)| k as f64 * w).sum::<f64>(), n))
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut levels: Vec<Level> = Vec::new();
    for (e, n) in states {
        match levels.last_mut() {
            Some(l) if (e - l.energy).abs() <= LEVEL_MERGE_TOL * e.abs().max(1.0) => {
                l.degeneracy += 1;
                l.quanta.push(n);
            }
            _ => levels.push(Level { energy: e, degeneracy: 1, quanta: vec![n] }),
        }
    }
    let omega_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ModeSpectrum {
        modes: modes.to_vec(),
        ground_energy: ground,
        levels,
        infinite_degeneracy: modes.iter().any(|m| m.kind == ModeKind::DegeneracyPair),
        complete_below: ground + (max_quanta as f64 + 1.0) * omega_min,
    })
}

/// Normal modes plus closed-form levels, including the structure's energy offset.
///
/// An indefinite `M` is rejected: some mode then carries negative energy and
/// the quantum spectrum is unbounded below even when the flow is oscillatory.
pub fn structure_spectrum(structure: &HamiltonianStructure, max_quanta: u32) -> Result<ModeSpectrum> {
    let eig = nalgebra::SymmetricEigen::new(structure.m.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x.abs())));
    if hi > 0.0 && lo < -SINGULAR_CUTOFF * hi {
        return Err(Error::NotPositiveDefinite { ratio: lo / hi });
    }
    let modes = normal_modes(structure, DEFAULT_ZERO_TOL)?;
    Ok(closed_form_levels(&modes, max_quanta)?.shifted(structure.offset))
}

/// `E_ℓ = p₃²/2m + ω₀(ℓ + ½)` with `ω₀ = |eB|/m`, each level infinitely degenerate.
pub fn landau_levels(params: &LandauParams, l_max: u32) -> Result<ModeSpectrum> {
    if !(params.m > 0.0) {
        return Err(Error::InvalidParameter(format!("mass {} must be positive", params.m)));
    }
    if params.e * params.b == 0.0 {
        return Err(Error::InvalidParameter("Landau levels need eB ≠ 0".into()));
    }
    let omega0 = (params.e * params.b).abs() / params.m;
    let offset = params.p3 * params.p3 / (2.0 * params.m);
    let levels = (0..=l_max)
        .map(|l| Level { energy: offset + omega0 * (l as f64 + 0.5), degeneracy: 1, quanta: vec![vec![l]] })
        .collect();
    Ok(ModeSpectrum {
        modes: vec![NormalMode::oscillator(omega0, 1), NormalMode::degeneracy_pair(1)],
        ground_energy: offset + 0.5 * omega0,
        levels,
        infinite_degeneracy: true,
        complete_below: offset + omega0 * (l_max as f64 + 1.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H1Entry {
    pub n: u32,
    pub l: u32,
    #[serde(rename = "E")]
    pub energy: f64,
}

/// Level table `E_{n,ℓ} = Ω(n + ℓ + 1) − ℓλ/2` of the commuting-coordinate structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Levels {
    /// `Ω = sqrt(ω² + ¼(B − θω²)²)`.
    pub big_omega: f64,
    /// `λ = B + θω²`.
    pub lambda: f64,
    pub entries: Vec<H1Entry>,
}

impl H1Levels {
    /// The two positive mode frequencies `Ω ∓ λ/2`, ascending.
    pub fn mode_frequencies(&self) -> [f64; 2] {
        let a = self.big_omega - self.lambda / 2.0;
        let b = self.big_omega + self.lambda / 2.0;
        if a <= b {
            [a, b]
        } else {
            [b, a]
        }
    }

    pub fn energy(&self, n: u32, l: u32) -> f64 {
        self.big_omega * (n + l + 1) as f64 - l as f64 * self.lambda / 2.0
    }

    /// The table as a level list; coinciding entries merge into one level.
    pub fn to_spectrum(&self) -> ModeSpectrum {
        let mut entries = self.entries.clone();
        entries.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        let mut levels: Vec<Level> = Vec::new();
        for e in entries {
            match levels.last_mut() {
                Some(l) if (e.energy - l.energy).abs() <= LEVEL_MERGE_TOL * e.energy.abs().max(1.0) => {
                    l.degeneracy += 1;
                    l.quanta.push(vec![e.n, e.l]);
                }
                _ => levels.push(Level { energy: e.energy, degeneracy: 1, quanta: vec![vec![e.n, e.l]] }),
            }
        }
        let [lo, hi] = self.mode_frequencies();
        let n_max = self.entries.iter().map(|e| e.n).max().unwrap_or(0);
        let l_max = self.entries.iter().map(|e| e.l).max().unwrap_or(0);
        ModeSpectrum {
            modes: vec![NormalMode::oscillator(lo, 1), NormalMode::oscillator(hi, 1)],
            ground_energy: self.big_omega,
            levels,
            infinite_degeneracy: false,
            complete_below: self.energy(n_max + 1, 0).min(self.energy(0, l_max + 1)),
        }
    }

    /// Sorted energies with multiplicity.
    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.entries.iter().map(|x| x.energy).collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn h1_levels(params: &NcParams, n_max: u32, l_max: u32) -> Result<H1Levels> {
    let w2 = params.omega * params.omega;
    let big_omega = (w2 + 0.25 * (params.b - params.theta * w2).powi(2)).sqrt();
    let lambda = params.b + params.theta * w2;
    let gap = big_omega - lambda.abs() / 2.0;
    if !(gap > 0.0) {
        return Err(Error::NegativeModeFrequency(gap));
    }
    let mut out = H1Levels { big_omega, lambda, entries: Vec::new() };
    for n in 0..=n_max {
        for l in 0..=l_max {
            let energy = out.energy(n, l);
            out.entries.push(H1Entry { n, l, energy });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub compared: usize,
    /// `max |E_a − E_b| / max(|E_a|, |E_b|)` over the aligned lowest levels.
    pub max_relative_deviation: f64,
    /// Same measure on the excitation gaps `E_i − E_0`.
    pub max_gap_deviation: f64,
    pub rel_tol: f64,
    pub equal: bool,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Aligns the lowest `k` levels (counted with degeneracy) of two spectra.
pub fn compare_spectra(a: &ModeSpectrum, b: &ModeSpectrum, k: usize, rel_tol: f64) -> ComparisonReport {
    compare_energies(&a.energies(), &b.energies(), k, rel_tol)
}

pub fn compare_energies(a: &[f64], b: &[f64], k: usize, rel_tol: f64) -> ComparisonReport {
    let compared = k.min(a.len()).min(b.len());
    let max_relative_deviation = (0..compared).map(|i| rel_diff(a[i], b[i])).fold(0.0, f64::max);
    let max_gap_deviation = (1..compared).map(|i| rel_diff(a[i] - a[0], b[i] - b[0])).fold(0.0, f64::max);
    ComparisonReport {
        compared,
        max_relative_deviation,
        max_gap_deviation,
        rel_tol,
        equal: compared == k && max_relative_deviation <= rel_tol,
    }
}

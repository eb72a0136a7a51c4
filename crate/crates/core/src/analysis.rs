//! Controllability and stabilizability verdicts for extended systems:
//! Kalman rank, eigenvalue-pencil rank tests, and the per-parameter
//! structural conditions that characterize when a stacked ensemble admits a
//! stabilizing feedback at all.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::Result;
use crate::matrix::{self, eigenvalues, rank_complex_decision, rank_real, SolverSettings};
use crate::models::{extend, ExtendedSystem, ParameterEnsemble, SystemFamily};

/// Which rank test to run: all eigenvalues, or only the unstable ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HautusMode {
    Controllability,
    Stabilizability,
}

/// Rank achieved by the pencil `[A - lambda I, B]` at one tested eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct HautusRecord {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub rank_achieved: usize,
    pub rank_required: usize,
    /// Set when the rank decision sits within a factor 10 of the tolerance.
    pub near_tolerance: bool,
}

/// Outcome of the eigenvalue-pencil rank test.
#[derive(Debug, Clone, Serialize)]
pub struct HautusReport {
    pub verdict: bool,
    pub mode: HautusMode,
    pub tested: Vec<HautusRecord>,
}

impl HautusReport {
    /// Eigenvalues at which the pencil lost rank.
    pub fn witnesses(&self) -> impl Iterator<Item = &HautusRecord> {
        self.tested
            .iter()
            .filter(|r| r.rank_achieved < r.rank_required)
    }
}

/// Kalman rank test on the stacked system: the verdict and the achieved rank
/// of `[B, AB, ..., A^{d-1}B]` with `d` the stacked dimension.
///
/// Every power block is rescaled to unit max-norm before it is appended;
/// column scaling cannot change the rank but keeps the powers representable
/// for system matrices with norms of order 1e3.
pub fn kalman_controllable(
    ext: &ExtendedSystem,
    settings: &SolverSettings,
) -> Result<(bool, usize)> {
    let d = ext.dim();
    let m = ext.m;
    let mut controllability = DMatrix::<f64>::zeros(d, d * m);
    let mut power = ext.b_big.clone();
    for k in 0..d {
        controllability
            .view_mut((0, k * m), (d, m))
            .copy_from(&power);
        if k + 1 < d {
            power = &ext.a_big * power;
            let scale = matrix::max_norm(&power);
            if scale > 0.0 {
                power /= scale;
            }
        }
    }
    let decision = rank_real(&controllability, settings.rank_tol)?;
    Ok((decision.rank == d, decision.rank))
}

/// Deduplicates a spectrum: eigenvalues closer than `tol` are kept once.
fn dedup_eigenvalues(eigs: &[Complex<f64>], tol: f64) -> Vec<Complex<f64>> {
    let mut kept: Vec<Complex<f64>> = Vec::new();
    for &l in eigs {
        if !kept.iter().any(|k| (k - l).norm() < tol) {
            kept.push(l);
        }
    }
    kept
}

/// Spectrum of the stacked matrix computed blockwise, which is exact for the
/// block-diagonal structure and much cheaper than one big decomposition.
fn blockwise_spectrum(
    ext: &ExtendedSystem,
    settings: &SolverSettings,
) -> Result<Vec<Complex<f64>>> {
    let n = ext.n;
    let mut eigs = Vec::with_capacity(ext.dim());
    for i in 0..ext.count {
        let block = ext.a_big.view((i * n, i * n), (n, n)).clone_owned();
        eigs.extend(eigenvalues(&block, settings)?);
    }
    Ok(eigs)
}

/// Eigenvalue-pencil rank test of the stacked system.
///
/// For stabilizability only the eigenvalues with real part above
/// `-stab_margin` are tested; the margin guards against genuinely critical
/// eigenvalues that rounding pushed just left of the axis.
pub fn hautus_test(
    ext: &ExtendedSystem,
    mode: HautusMode,
    settings: &SolverSettings,
) -> Result<HautusReport> {
    let d = ext.dim();
    let spectrum = blockwise_spectrum(ext, settings)?;
    let unique = dedup_eigenvalues(&spectrum, settings.eig_dedup_tol);
    let mut tested = Vec::new();
    let mut verdict = true;
    for lambda in unique {
        if mode == HautusMode::Stabilizability && lambda.re < -settings.stab_margin {
            continue;
        }
        let mut pencil_re = DMatrix::<f64>::zeros(d, d + ext.m);
        pencil_re
            .view_mut((0, 0), (d, d))
            .copy_from(&(&ext.a_big - DMatrix::<f64>::identity(d, d) * lambda.re));
        pencil_re
            .view_mut((0, d), (d, ext.m))
            .copy_from(&ext.b_big);
        let mut pencil_im = DMatrix::<f64>::zeros(d, d + ext.m);
        pencil_im
            .view_mut((0, 0), (d, d))
            .copy_from(&(DMatrix::<f64>::identity(d, d) * (-lambda.im)));
        let decision = rank_complex_decision(&pencil_re, &pencil_im, settings.rank_tol)?;
        let ok = decision.rank == d;
        verdict &= ok;
        tested.push(HautusRecord {
            eigenvalue_re: lambda.re,
            eigenvalue_im: lambda.im,
            rank_achieved: decision.rank,
            rank_required: d,
            near_tolerance: decision.near_tolerance(10.0),
        });
    }
    Ok(HautusReport {
        verdict,
        mode,
        tested,
    })
}

/// How the subset intersection condition was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubsetRegime {
    /// All subsets of the required cardinality were enumerated.
    Exhaustive,
    /// Too many subsets; a deterministic sample was checked instead.
    Sampled,
}

/// Structural per-parameter conditions for ensemble stabilizability.
///
/// The necessary side requires each plant stabilizable and every
/// `(m+1)`-fold intersection of unstable spectra empty; the sufficient side
/// additionally wants the unstable spectra pairwise disjoint.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaConditionReport {
    pub each_system_stabilizable: Vec<bool>,
    pub overlap_condition_holds: bool,
    pub pairwise_disjoint_unstable: bool,
    /// `Some(true)` when the sufficient conditions are met; `None` when they
    /// are inconclusive.
    pub sufficient_verdict: Option<bool>,
    /// Human-readable description of the first violated necessary condition.
    pub necessary_violation: Option<String>,
    pub subset_regime: SubsetRegime,
}

fn unstable_spectrum(
    family: &SystemFamily,
    sigma: f64,
    settings: &SolverSettings,
) -> Result<Vec<Complex<f64>>> {
    let a = family.system_matrix(sigma)?;
    Ok(eigenvalues(&a, settings)?
        .into_iter()
        .filter(|l| l.re >= -settings.stab_margin)
        .collect())
}

fn sets_intersect(sets: &[&Vec<Complex<f64>>], tol: f64) -> bool {
    let Some((first, rest)) = sets.split_first() else {
        return false;
    };
    first.iter().any(|l| {
        rest.iter()
            .all(|set| set.iter().any(|k| (k - l).norm() < tol))
    })
}

const SUBSET_ENUMERATION_CAP: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Evaluates the per-parameter stabilizability conditions for the ensemble.
pub fn lemma_conditions(
    family: &SystemFamily,
    ens: &ParameterEnsemble,
    settings: &SolverSettings,
) -> Result<LemmaConditionReport> {
    let m = family.input_dim();
    let n_sys = ens.len();
    let tol = settings.eig_dedup_tol;

    let mut each_system_stabilizable = Vec::with_capacity(n_sys);
    let mut unstable_sets = Vec::with_capacity(n_sys);
    for &sigma in ens.values() {
        let single = ParameterEnsemble::new(vec![sigma])?;
        let ext = extend(family, &single)?;
        let report = hautus_test(&ext, HautusMode::Stabilizability, settings)?;
        each_system_stabilizable.push(report.verdict);
        unstable_sets.push(unstable_spectrum(family, sigma, settings)?);
    }

    let mut pairwise_disjoint = true;
    for i in 0..n_sys {
        for j in (i + 1)..n_sys {
            if sets_intersect(&[&unstable_sets[i], &unstable_sets[j]], tol) {
                pairwise_disjoint = false;
            }
        }
    }

    // (m+1)-fold intersections over subsets of the ensemble.
    let k = m + 1;
    let mut overlap_holds = true;
    let mut overlap_witness: Option<Vec<usize>> = None;
    let regime;
    if k > n_sys {
        regime = SubsetRegime::Exhaustive;
    } else if binomial(n_sys, k) <= SUBSET_ENUMERATION_CAP {
        regime = SubsetRegime::Exhaustive;
        let mut subset: Vec<usize> = (0..k).collect();
        'enumerate: loop {
            let views: Vec<&Vec<Complex<f64>>> =
                subset.iter().map(|&i| &unstable_sets[i]).collect();
            if sets_intersect(&views, tol) {
                overlap_holds = false;
                overlap_witness = Some(subset.clone());
                break 'enumerate;
            }
            // Advance to the next k-combination in lexicographic order.
            let mut i = k;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if subset[i] != i + n_sys - k {
                    subset[i] += 1;
                    for j in (i + 1)..k {
                        subset[j] = subset[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break 'enumerate;
            }
        }
    } else {
        // Deterministic sampled fallback; misses are possible, which is why
        // the regime is recorded in the report.
        regime = SubsetRegime::Sampled;
        let mut state: u64 = 0x243F_6A88_85A3_08D3;
        'sampled: for _ in 0..100_000usize {
            let mut subset = Vec::with_capacity(k);
            while subset.len() < k {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let idx = (state >> 33) as usize % n_sys;
                if !subset.contains(&idx) {
                    subset.push(idx);
                }
            }
            let views: Vec<&Vec<Complex<f64>>> =
                subset.iter().map(|&i| &unstable_sets[i]).collect();
            if sets_intersect(&views, tol) {
                overlap_holds = false;
                overlap_witness = Some(subset);
                break 'sampled;
            }
        }
    }

    let all_stabilizable = each_system_stabilizable.iter().all(|&b| b);
    let sufficient_verdict = if all_stabilizable && pairwise_disjoint {
        Some(true)
    } else {
        None
    };
    let necessary_violation = if let Some(i) = each_system_stabilizable.iter().position(|&b| !b) {
        Some(format!(
            "plant for sigma_{i} = {} is not stabilizable",
            ens.values()[i]
        ))
    } else {
        overlap_witness.map(|subset| {
            format!(
                "unstable spectra of plants {subset:?} share an eigenvalue \
                 (control dimension {m})"
            )
        })
    };

    Ok(LemmaConditionReport {
        each_system_stabilizable,
        overlap_condition_holds: overlap_holds,
        pairwise_disjoint_unstable: pairwise_disjoint,
        sufficient_verdict,
        necessary_violation,
        subset_regime: regime,
    })
}

/// Sufficient test for the diagonal reaction-diffusion family: every input
/// entry nonzero and no pair of parameters at integer distance after scaling
/// by 4, which keeps the stacked spectrum simple.
pub fn spectral_heat_ensemble_check(
    modes: usize,
    ens: &ParameterEnsemble,
    omega1: f64,
    omega2: f64,
) -> Result<bool> {
    let family = crate::models::spectral_heat(modes, omega1, omega2)?;
    let b = family.input_matrix();
    let b_nonzero = (0..modes).all(|j| b[(j, 0)].abs() > 1e-12);
    let mut gaps_ok = true;
    let values = ens.values();
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            let scaled = 4.0 * (values[i] - values[j]);
            if (scaled - scaled.round()).abs() < 1e-9 {
                gaps_ok = false;
            }
        }
    }
    Ok(b_nonzero && gaps_ok)
}

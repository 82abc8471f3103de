//! Nonnegative matrix factorization by multiplicative updates.
//!
//! Two solvers share one initialization and update order:
//!
//! * [`nmf_factorize`] minimizes `‖X − WH‖²_F` on a fully observed matrix;
//! * [`mc_nmf`] minimizes the masked objective `‖P_Ω(X − WH)‖²_F`, which
//!   simultaneously completes and factorizes `X`.
//!
//! Each iterate updates `H` and then `W`:
//!
//! ```text
//! H ← H ∘ Wᵀ(M∘X) / max(Wᵀ(M∘WH), ε)
//! W ← W ∘ (M∘X)Hᵀ / max((M∘WH)Hᵀ, ε)
//! ```
//!
//! with `M` the 0/1 mask (all ones for the unmasked solver). Both updates
//! are non-increasing in the objective and keep every entry nonnegative.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::matrix::{gemm_nn, gemm_nt, gemm_tn, DataMatrix};
use crate::seed::SeedSpec;

/// Initial factor entries are drawn uniformly from this range.
pub const INIT_RANGE: (f64, f64) = (0.1, 1.1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Floor applied to every update denominator.
    pub epsilon_guard: f64,
    /// Stop once the relative objective decrease of an iterate falls below
    /// this value; 0 runs the full `max_iters` budget.
    pub objective_tol: f64,
    pub record_objective: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            epsilon_guard: 1e-12,
            objective_tol: 0.0,
            record_objective: false,
        }
    }
}

impl SolverSettings {
    pub fn with_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.epsilon_guard > 0.0) {
            return Err(Error::Parameter("epsilon_guard must be positive".into()));
        }
        if !(self.objective_tol >= 0.0) {
            return Err(Error::Parameter("objective_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Nonnegative factors `W` (m×r) and `H` (r×n).
///
/// Factors are only determined up to a positive diagonal rescaling
/// `(WD, D⁻¹H)`; compare products, not the factors themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub w: DataMatrix,
    pub h: DataMatrix,
    /// Objective before the first iterate followed by one value per iterate.
    /// Empty unless `record_objective` was set.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl Factorization {
    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn product(&self) -> DataMatrix {
        self.w.matmul(&self.h).expect("factor shapes agree")
    }

    /// Writes `iteration,objective` rows.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(["iteration", "objective"]).map_err(csv_err)?;
        for (i, v) in self.objective_trace.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])
                .map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// State handed to an observer after each iterate.
pub struct IterateView<'a> {
    /// 1-based iterate number.
    pub iteration: usize,
    pub w: &'a [f64],
    pub h: &'a [f64],
    /// Objective after this iterate (masked objective for [`mc_nmf`]).
    pub objective: f64,
}

fn check_rank(r: usize, rows: usize, cols: usize) -> Result<()> {
    if r == 0 || r > rows.min(cols) {
        return Err(Error::Parameter(format!(
            "rank {r} outside [1, {}] for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    Ok(())
}

fn check_nonnegative(x: &DataMatrix) -> Result<()> {
    if x.is_nonnegative() {
        return Ok(());
    }
    if let Some(idx) = x.as_slice().iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::Negative {
            row: idx / x.cols(),
            col: idx % x.cols(),
            value: x.as_slice()[idx],
        });
    }
    Ok(())
}

fn init_factors(m: usize, n: usize, r: usize, seed: SeedSpec) -> (Vec<f64>, Vec<f64>) {
    let mut rng = seed.rng();
    let (lo, hi) = INIT_RANGE;
    let w = (0..m * r).map(|_| rng.random_range(lo..hi)).collect();
    let h = (0..r * n).map(|_| rng.random_range(lo..hi)).collect();
    (w, h)
}

#[inline]
fn apply_update(factor: &mut [f64], numer: &[f64], denom: &[f64], eps: f64) {
    for ((f, &num), &den) in factor.iter_mut().zip(numer).zip(denom) {
        *f *= num / den.max(eps);
    }
}

fn relative_decrease(prev: f64, cur: f64) -> f64 {
    if prev <= 0.0 {
        0.0
    } else {
        (prev - cur) / prev
    }
}

/// Factorizes a fully observed nonnegative matrix `X ≈ WH` with `r` topics.
pub fn nmf_factorize(
    x: &DataMatrix,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
) -> Result<Factorization> {
    nmf_core(x, r, settings, seed, None)
}

/// [`nmf_factorize`] calling `observer` after every iterate.
///
/// The objective is evaluated every iterate when an observer is supplied.
pub fn nmf_factorize_observed<F>(
    x: &DataMatrix,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
    mut observer: F,
) -> Result<Factorization>
where
    F: FnMut(&IterateView<'_>),
{
    nmf_core(x, r, settings, seed, Some(&mut observer))
}

fn nmf_core(
    x: &DataMatrix,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
    mut observer: Option<&mut dyn FnMut(&IterateView<'_>)>,
) -> Result<Factorization> {
    settings.validate()?;
    let (m, n) = x.shape();
    check_rank(r, m, n)?;
    check_nonnegative(x)?;

    let xs = x.as_slice();
    let eps = settings.epsilon_guard;
    let (mut w, mut h) = init_factors(m, n, r, seed);

    let objective = |w: &[f64], h: &[f64]| -> f64 {
        let mut wh = vec![0.0; m * n];
        gemm_nn(w, h, &mut wh, m, r, n);
        wh.iter().zip(xs).map(|(a, b)| (b - a) * (b - a)).sum()
    };
    let track = settings.record_objective || settings.objective_tol > 0.0;
    let mut trace = Vec::new();
    let mut prev = objective(&w, &h);
    if settings.record_objective {
        trace.push(prev);
    }

    let mut wtx = vec![0.0; r * n];
    let mut wtw = vec![0.0; r * r];
    let mut wtwh = vec![0.0; r * n];
    let mut xht = vec![0.0; m * r];
    let mut hht = vec![0.0; r * r];
    let mut whht = vec![0.0; m * r];

    let mut iterations = 0;
    for iter in 1..=settings.max_iters {
        wtx.fill(0.0);
        gemm_tn(&w, xs, &mut wtx, m, r, n);
        wtw.fill(0.0);
        gemm_tn(&w, &w, &mut wtw, m, r, r);
        wtwh.fill(0.0);
        gemm_nn(&wtw, &h, &mut wtwh, r, r, n);
        apply_update(&mut h, &wtx, &wtwh, eps);

        xht.fill(0.0);
        gemm_nt(xs, &h, &mut xht, m, n, r);
        hht.fill(0.0);
        gemm_nt(&h, &h, &mut hht, r, n, r);
        whht.fill(0.0);
        gemm_nn(&w, &hht, &mut whht, m, r, r);
        apply_update(&mut w, &xht, &whht, eps);

        iterations = iter;
        if !track && observer.is_none() {
            continue;
        }
        let cur = objective(&w, &h);
        if let Some(obs) = observer.as_mut() {
            obs(&IterateView {
                iteration: iter,
                w: &w,
                h: &h,
                objective: cur,
            });
        }
        if track {
            if settings.record_objective {
                trace.push(cur);
            }
            if settings.objective_tol > 0.0 && relative_decrease(prev, cur) < settings.objective_tol {
                break;
            }
            prev = cur;
        }
    }

    Ok(Factorization {
        w: DataMatrix::from_parts(m, r, w, true),
        h: DataMatrix::from_parts(r, n, h, true),
        objective_trace: trace,
        iterations,
    })
}

/// Masked completion-and-factorization: fits `WH` to the entries of
/// `observed` on `mask` only. Entries outside the mask are never read.
pub fn mc_nmf(
    observed: &DataMatrix,
    mask: &Mask,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
) -> Result<Factorization> {
    mc_nmf_observed(observed, mask, r, settings, seed, |_| {})
}

/// [`mc_nmf`] calling `observer` after every iterate.
pub fn mc_nmf_observed<F>(
    observed: &DataMatrix,
    mask: &Mask,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
    mut observer: F,
) -> Result<Factorization>
where
    F: FnMut(&IterateView<'_>),
{
    settings.validate()?;
    let (m, n) = observed.shape();
    if mask.rows() != m || mask.cols() != n {
        return Err(Error::Dimension(format!(
            "mask is {}x{} but data is {m}x{n}",
            mask.rows(),
            mask.cols()
        )));
    }
    if mask.is_empty() {
        return Err(Error::Parameter("mask has no observed entries".into()));
    }
    check_rank(r, m, n)?;

    // Masked copy of the data; the only place `observed` is read.
    let mut mx = vec![0.0; m * n];
    for &(i, j) in mask.coords() {
        let v = observed.get(i, j);
        if !(v >= 0.0) {
            return Err(Error::Negative {
                row: i,
                col: j,
                value: v,
            });
        }
        mx[i * n + j] = v;
    }
    let member = mask.membership();
    let eps = settings.epsilon_guard;
    let (mut w, mut h) = init_factors(m, n, r, seed);

    // wh holds M∘(WH) for the current factors.
    let mut wh = vec![0.0; m * n];
    let refresh = |w: &[f64], h: &[f64], wh: &mut Vec<f64>| -> f64 {
        wh.fill(0.0);
        gemm_nn(w, h, wh, m, r, n);
        let mut obj = 0.0;
        for ((v, &keep), &target) in wh.iter_mut().zip(member).zip(&mx) {
            if keep {
                obj += (target - *v) * (target - *v);
            } else {
                *v = 0.0;
            }
        }
        obj
    };

    let mut prev = refresh(&w, &h, &mut wh);
    let mut trace = Vec::new();
    if settings.record_objective {
        trace.push(prev);
    }

    let mut numer_h = vec![0.0; r * n];
    let mut denom_h = vec![0.0; r * n];
    let mut numer_w = vec![0.0; m * r];
    let mut denom_w = vec![0.0; m * r];

    let mut iterations = 0;
    for iter in 1..=settings.max_iters {
        numer_h.fill(0.0);
        gemm_tn(&w, &mx, &mut numer_h, m, r, n);
        denom_h.fill(0.0);
        gemm_tn(&w, &wh, &mut denom_h, m, r, n);
        apply_update(&mut h, &numer_h, &denom_h, eps);
        refresh(&w, &h, &mut wh);

        numer_w.fill(0.0);
        gemm_nt(&mx, &h, &mut numer_w, m, n, r);
        denom_w.fill(0.0);
        gemm_nt(&wh, &h, &mut denom_w, m, n, r);
        apply_update(&mut w, &numer_w, &denom_w, eps);
        let cur = refresh(&w, &h, &mut wh);

        iterations = iter;
        observer(&IterateView {
            iteration: iter,
            w: &w,
            h: &h,
            objective: cur,
        });
        if settings.record_objective {
            trace.push(cur);
        }
        if settings.objective_tol > 0.0 && relative_decrease(prev, cur) < settings.objective_tol {
            break;
        }
        prev = cur;
    }

    Ok(Factorization {
        w: DataMatrix::from_parts(m, r, w, true),
        h: DataMatrix::from_parts(r, n, h, true),
        objective_trace: trace,
        iterations,
    })
}

/// Fixed-budget [`mc_nmf`] returning the completed matrix `WH`.
pub fn basic_completion(
    observed: &DataMatrix,
    mask: &Mask,
    r: usize,
    settings: &SolverSettings,
    seed: SeedSpec,
) -> Result<DataMatrix> {
    Ok(mc_nmf(observed, mask, r, settings, seed)?.product())
}

/// `‖P_Ω(estimate − observed)‖_F / ‖P_Ω observed‖_F`.
pub fn masked_relative_error(estimate: &DataMatrix, observed: &DataMatrix, mask: &Mask) -> Result<f64> {
    if estimate.shape() != observed.shape() || (mask.rows(), mask.cols()) != observed.shape() {
        return Err(Error::Dimension("masked error operands disagree in shape".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, j) in mask.coords() {
        let t = observed.get(i, j);
        let d = estimate.get(i, j) - t;
        num += d * d;
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("observed entries are all zero".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::bernoulli_mask;
    use crate::matrix::{relative_error, uniform_random_matrix};

    fn rank_one(m: usize, n: usize, seed: u64) -> DataMatrix {
        let w = uniform_random_matrix(m, 1, SeedSpec::new(seed, 1)).unwrap();
        let h = uniform_random_matrix(1, n, SeedSpec::new(seed, 2)).unwrap();
        w.matmul(&h).unwrap()
    }

    #[test]
    fn rank_one_outer_product_is_recovered() {
        let x = rank_one(10, 8, 3);
        let f = nmf_factorize(&x, 1, &SolverSettings::with_iters(500), SeedSpec::new(1, 0)).unwrap();
        let err = relative_error(&f.product(), &x).unwrap();
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn exact_rank_two_product() {
        let left = DataMatrix::new(6, 2, vec![1.0, 0.2, 0.5, 1.0, 2.0, 0.1, 0.3, 0.3, 1.0, 1.5, 0.7, 0.9]).unwrap();
        let right = DataMatrix::new(2, 5, vec![1.0, 0.5, 0.2, 2.0, 0.4, 0.3, 1.0, 1.2, 0.1, 0.8]).unwrap();
        let x = left.matmul(&right).unwrap().into_nonnegative().unwrap();
        let f = nmf_factorize(&x, 2, &SolverSettings::with_iters(20_000), SeedSpec::new(2, 0)).unwrap();
        let err = relative_error(&f.product(), &x).unwrap();
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn identity_is_factored_exactly() {
        let x = DataMatrix::identity(4).into_nonnegative().unwrap();
        let f = nmf_factorize(&x, 4, &SolverSettings::with_iters(5000), SeedSpec::new(0, 0)).unwrap();
        let err = relative_error(&f.product(), &x).unwrap();
        assert!(err <= 1e-8, "relative error {err}");
    }

    // With distinct diagonal values most starts lock some diagonal entries to zero and
    // stall. The residual is then exactly the norm of the lost entries.
    #[test]
    fn unequal_diagonal_converges_or_drops_whole_entries() {
        let d = [2.0, 1.0, 3.0, 0.5];
        let mut data = vec![0.0; 16];
        for (i, v) in d.iter().enumerate() {
            data[i * 4 + i] = *v;
        }
        let x = DataMatrix::new(4, 4, data).unwrap().into_nonnegative().unwrap();
        let total: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let plateaus: Vec<f64> = (0u32..16)
            .map(|bits| {
                let lost: f64 = (0..4).filter(|k| bits >> k & 1 == 1).map(|k| d[k] * d[k]).sum();
                lost.sqrt() / total
            })
            .collect();
        let mut exact = 0;
        for s in 0..40 {
            let f = nmf_factorize(&x, 4, &SolverSettings::with_iters(20_000), SeedSpec::new(s, 0)).unwrap();
            let err = relative_error(&f.product(), &x).unwrap();
            let gap = plateaus.iter().map(|p| (p - err).abs()).fold(f64::INFINITY, f64::min);
            assert!(gap <= 1e-6, "seed {s}: error {err} matches no plateau");
            if err <= 1e-8 {
                exact += 1;
            }
        }
        assert!(exact > 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DataMatrix::new(2, 2, vec![1.0, -1.0, 0.0, 1.0]).unwrap();
        let s = SolverSettings::default();
        assert!(matches!(
            nmf_factorize(&x, 1, &s, SeedSpec::new(0, 0)),
            Err(Error::Negative { row: 0, col: 1, .. })
        ));
        let x = DataMatrix::zeros(3, 2);
        assert!(matches!(nmf_factorize(&x, 3, &s, SeedSpec::new(0, 0)), Err(Error::Parameter(_))));
        assert!(matches!(nmf_factorize(&x, 0, &s, SeedSpec::new(0, 0)), Err(Error::Parameter(_))));
        let bad = SolverSettings {
            max_iters: 0,
            ..s
        };
        assert!(nmf_factorize(&x, 1, &bad, SeedSpec::new(0, 0)).is_err());
        assert!(matches!(
            mc_nmf(&x, &Mask::empty(3, 2), 1, &s, SeedSpec::new(0, 0)),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            mc_nmf(&x, &Mask::full(2, 2), 1, &s, SeedSpec::new(0, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn negative_value_outside_mask_is_ignored() {
        let mut x = rank_one(6, 5, 1);
        let mask = Mask::new(6, 5, (0..6).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|&(i, j)| (i, j) != (2, 3))).unwrap();
        x.set(2, 3, -100.0);
        assert!(mc_nmf(&x, &mask, 1, &SolverSettings::with_iters(10), SeedSpec::new(0, 0)).is_ok());
        x.set(1, 1, -1.0);
        assert!(matches!(
            mc_nmf(&x, &mask, 1, &SolverSettings::with_iters(10), SeedSpec::new(0, 0)),
            Err(Error::Negative { row: 1, col: 1, .. })
        ));
    }

    #[test]
    fn masked_rank_one_completion() {
        let x = rank_one(20, 20, 8);
        let mask = bernoulli_mask(20, 20, 0.8, SeedSpec::new(8, 3)).unwrap();
        let f = mc_nmf(&x, &mask, 1, &SolverSettings::with_iters(500), SeedSpec::new(8, 4)).unwrap();
        let err = relative_error(&f.product(), &x).unwrap();
        assert!(err <= 1e-2, "relative error {err}");
    }

    #[test]
    fn early_stop_and_trace() {
        let x = uniform_random_matrix(30, 20, SeedSpec::new(1, 1)).unwrap();
        let s = SolverSettings {
            max_iters: 5000,
            objective_tol: 1e-4,
            record_objective: true,
            ..SolverSettings::default()
        };
        let f = nmf_factorize(&x, 3, &s, SeedSpec::new(1, 2)).unwrap();
        assert!(f.iterations < 5000);
        assert_eq!(f.objective_trace.len(), f.iterations + 1);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        f.write_trace_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), f.iterations + 2);
        assert!(text.starts_with("iteration,objective\n0,"));
    }

    #[test]
    fn completion_improves_with_budget() {
        let truth = uniform_random_matrix(100, 5, SeedSpec::new(4, 1))
            .unwrap()
            .matmul(&uniform_random_matrix(5, 80, SeedSpec::new(4, 2)).unwrap())
            .unwrap();
        let mask = bernoulli_mask(100, 80, 0.5, SeedSpec::new(4, 3)).unwrap();
        let short = basic_completion(&truth, &mask, 5, &SolverSettings::with_iters(50), SeedSpec::new(4, 4)).unwrap();
        let long = basic_completion(&truth, &mask, 5, &SolverSettings::with_iters(500), SeedSpec::new(4, 4)).unwrap();
        assert_eq!(long.shape(), (100, 80));
        assert!(long.is_nonnegative() && long.min_entry().unwrap() >= 0.0);
        let e_short = masked_relative_error(&short, &truth, &mask).unwrap();
        let e_long = masked_relative_error(&long, &truth, &mask).unwrap();
        assert!(e_long < e_short, "{e_long} !< {e_short}");
    }

    #[test]
    fn basic_completion_is_product_of_mc_nmf() {
        let x = rank_one(12, 9, 2);
        let mask = bernoulli_mask(12, 9, 0.7, SeedSpec::new(2, 2)).unwrap();
        let s = SolverSettings::with_iters(40);
        let f = mc_nmf(&x, &mask, 2, &s, SeedSpec::new(2, 3)).unwrap();
        let c = basic_completion(&x, &mask, 2, &s, SeedSpec::new(2, 3)).unwrap();
        assert_eq!(c, f.product());
    }
}

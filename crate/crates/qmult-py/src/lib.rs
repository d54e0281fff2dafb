//! Python bindings for the core library: sequence construction from the
//! same spec strings the CLI accepts, plus the main diagnostics (box
//! norms, digit DP, sup-correlations, autocorrelations, progression
//! counts). Phases cross the boundary in turns; values come back as
//! Python complex numbers.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qmult_core::autocorr::{self, CorrelationMethod};
use qmult_core::expsum::{self, AlphaSearch};
use qmult_core::gowers::{self, BoxCondition, CarryVector};
use qmult_core::patterns::{self, PatternSpec};
use qmult_core::{AnySequence, Phase, SeqSpec, Sequence};

fn to_py_err(e: qmult_core::Error) -> PyErr {
    match e {
        qmult_core::Error::InvalidParameter(_) | qmult_core::Error::SpecParse(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A sequence of unit-modulus complex numbers built from a spec string,
/// e.g. "tm", "gtm:tau=0.3", "digitsum:q=3,alpha=0.414",
/// "strong:q=5,phases=0.2;0.4;0.6;0.8", "random:q=2,levels=32,seed=7",
/// "periodic:q=3,p=1" or "rudin-shapiro".
#[pyclass(frozen)]
struct Seq {
    inner: AnySequence,
}

impl Seq {
    fn qmult(&self) -> PyResult<&qmult_core::QMultSeq> {
        self.inner.as_qmult().map_err(to_py_err)
    }
}

#[pymethods]
impl Seq {
    #[new]
    fn new(spec: &str) -> PyResult<Seq> {
        let parsed: SeqSpec = spec.parse().map_err(to_py_err)?;
        Ok(Seq { inner: parsed.build().map_err(to_py_err)? })
    }

    /// The base the digit expansion runs in.
    #[getter]
    fn q(&self) -> u32 {
        self.inner.q()
    }

    /// Phase of the n-th term, in turns within [0, 1).
    fn phase(&self, n: u64) -> f64 {
        self.inner.phase(n).turns()
    }

    /// The n-th term as a complex number on the unit circle.
    fn eval(&self, n: u64) -> Complex64 {
        self.inner.value(n)
    }

    /// Drop the lowest `l` digit levels (multiplicative sequences only).
    fn shift(&self, l: u32) -> PyResult<Seq> {
        Ok(Seq { inner: AnySequence::QMult(self.qmult()?.shift(l)) })
    }

    fn __repr__(&self) -> String {
        format!("Seq(q={})", self.inner.q())
    }
}

/// Box uniformity norm of order s over [0, n): exact folded computation
/// for s in {2, 3}, full enumeration otherwise.
#[pyfunction]
#[pyo3(signature = (seq, s, n, budget = 1_000_000_000))]
fn gowers_norm(seq: &Seq, s: u32, n: u64, budget: u64) -> PyResult<f64> {
    let f = &seq.inner;
    if (2..=3).contains(&s) && n <= (1 << 21) {
        gowers::gowers_norm_folded(f, s, n).map_err(to_py_err)
    } else {
        gowers::gowers_norm_bruteforce(f, s, n, budget).map_err(to_py_err)
    }
}

/// Average of the order-s multiplicative derivative over shifted
/// parallelepipeds in [0, n); `shift` lists the 2^s per-vertex offsets.
#[pyfunction]
#[pyo3(signature = (seq, shift, n, budget = 1_000_000_000))]
fn parallelepiped_average(seq: &Seq, shift: Vec<u8>, n: u64, budget: u64) -> PyResult<Complex64> {
    let s = shift.len().trailing_zeros();
    let r = CarryVector::from_entries(s, shift).map_err(to_py_err)?;
    gowers::parallelepiped_average(&seq.inner, &r, n, budget).map_err(to_py_err)
}

/// Exact digit-DP box average over [0, q^levels)^(s+1). With
/// `restrict_sum` the mean is conditioned on the full vertex sum staying
/// below q^levels.
#[pyfunction]
#[pyo3(signature = (seq, shift, levels, restrict_sum = false))]
fn box_average(seq: &Seq, shift: Vec<u8>, levels: u32, restrict_sum: bool) -> PyResult<Complex64> {
    let s = shift.len().trailing_zeros();
    let r = CarryVector::from_entries(s, shift).map_err(to_py_err)?;
    let cond = if restrict_sum { BoxCondition::SumBelowQL } else { BoxCondition::None };
    gowers::box_average_exact(seq.qmult()?, &r, levels, cond).map_err(to_py_err)
}

/// Closed product form of |E_{m<2^levels} e(tau s_2(m) + alpha m)|.
#[pyfunction]
fn trig_product_gtm(tau: f64, alpha: f64, levels: u32) -> f64 {
    expsum::trig_product_gtm(Phase::new(tau), Phase::new(alpha), levels)
}

/// |E_{m<q^levels} f(m) e(alpha m)| via the per-level product
/// (strongly multiplicative sequences).
#[pyfunction]
fn linear_correlation_product(seq: &Seq, alpha: f64, levels: u32) -> PyResult<f64> {
    expsum::linear_correlation_product(seq.qmult()?, Phase::new(alpha), levels).map_err(to_py_err)
}

/// Search sup_alpha of the level-product correlation at q^levels points.
/// Returns (alpha in turns, value, exact_on_grid).
#[pyfunction]
#[pyo3(signature = (seq, levels, beam = 256))]
fn sup_linear_correlation(seq: &Seq, levels: u32, beam: u64) -> PyResult<(f64, f64, bool)> {
    let r = expsum::sup_linear_correlation(seq.qmult()?, levels, beam).map_err(to_py_err)?;
    Ok((r.alpha.turns(), r.value, r.exact_on_grid))
}

/// Fit the decay exponent of sup-correlations across scales q^lmin..q^lmax.
/// Returns (exponent, residual, [(n, value), ...]).
#[pyfunction]
#[pyo3(signature = (seq, lmin, lmax, beam = 256))]
fn fit_gelfond_exponent(
    seq: &Seq,
    lmin: u32,
    lmax: u32,
    beam: u64,
) -> PyResult<(f64, f64, Vec<(u64, f64)>)> {
    let report =
        expsum::fit_gelfond_exponent(seq.qmult()?, AlphaSearch::Beam { width: beam }, lmin, lmax)
            .map_err(to_py_err)?;
    Ok((report.fitted_exponent, report.fit_residual, report.scales))
}

/// Cesaro mean E_{n<q^levels} f(n).
#[pyfunction]
fn cesaro_mean(seq: &Seq, levels: u32) -> PyResult<Complex64> {
    Ok(expsum::cesaro_mean(seq.qmult()?, levels))
}

/// Finite-window autocorrelation E_{n<n_terms} f(n+r) conj(f(n)).
#[pyfunction]
fn gamma_finite(seq: &Seq, r: u64, n_terms: u64) -> Complex64 {
    autocorr::gamma_finite(&seq.inner, r, n_terms)
}

/// Autocorrelation at shift r from the digit-level series, with its
/// truncation tail bound: returns (value, tail).
#[pyfunction]
#[pyo3(signature = (seq, r, depth = 30))]
fn gamma_series(seq: &Seq, r: u64, depth: u32) -> PyResult<(Complex64, f64)> {
    autocorr::gamma_series(seq.qmult()?, r, depth).map_err(to_py_err)
}

/// Mean-square correlation density E_{r<count}|gamma_r|^2 with its
/// growth ladder. `method` is "series:<depth>" or "finite:<n>".
#[pyfunction]
fn bertrandias_density(seq: &Seq, count: u64, method: &str) -> PyResult<(f64, Vec<(u64, f64)>)> {
    let parsed = match method.split_once(':') {
        Some(("series", depth)) => CorrelationMethod::TruncatedSeries(
            depth.parse().map_err(|_| PyValueError::new_err("bad series depth"))?,
        ),
        Some(("finite", n)) => CorrelationMethod::FiniteN(
            n.parse().map_err(|_| PyValueError::new_err("bad finite window"))?,
        ),
        _ => return Err(PyValueError::new_err("method must be series:<depth> or finite:<n>")),
    };
    autocorr::bertrandias_density(&seq.inner, count, parsed).map_err(to_py_err)
}

/// Count pairs (n, m) whose progression n, n+m, ..., n+(k-1)m below
/// `n_max` has digit sums hitting the given residues mod `modulus` in
/// base q. Returns (count, density, [(n, count), ...]).
#[pyfunction]
#[pyo3(signature = (q, modulus, residues, n_max, budget = 1_000_000_000))]
fn count_mod_patterns(
    q: u32,
    modulus: u32,
    residues: Vec<u32>,
    n_max: u64,
    budget: u64,
) -> PyResult<(u64, f64, Vec<(u64, u64)>)> {
    let spec = PatternSpec::mod_residues(q, modulus, residues).map_err(to_py_err)?;
    let report = patterns::count_ap_patterns(&spec, n_max, budget).map_err(to_py_err)?;
    Ok((report.count, report.density, report.series))
}

/// Same count with digit sums tested against cells of the alpha-rotation:
/// term j must land in [lo_j, hi_j) mod 1.
#[pyfunction]
#[pyo3(signature = (q, alpha, intervals, n_max, budget = 1_000_000_000))]
fn count_cell_patterns(
    q: u32,
    alpha: f64,
    intervals: Vec<(f64, f64)>,
    n_max: u64,
    budget: u64,
) -> PyResult<(u64, f64, Vec<(u64, u64)>)> {
    let spec = PatternSpec::irrational_cells(q, alpha, intervals).map_err(to_py_err)?;
    let report = patterns::count_ap_cells(&spec, n_max, budget).map_err(to_py_err)?;
    Ok((report.count, report.density, report.series))
}

/// Running averages of f(m) e(theta p(m) + x0) along a dyadic ladder;
/// `poly` lists p's coefficients from the constant term up.
#[pyfunction]
#[pyo3(signature = (seq, poly, theta, x0 = 0.0, n = 65_536))]
fn weighted_birkhoff(
    seq: &Seq,
    poly: Vec<u64>,
    theta: f64,
    x0: f64,
    n: u64,
) -> PyResult<Vec<(u64, Complex64)>> {
    patterns::weighted_birkhoff_demo(&seq.inner, &poly, Phase::new(theta), Phase::new(x0), n)
        .map_err(to_py_err)
}

#[pymodule]
fn qmult(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Seq>()?;
    m.add_function(wrap_pyfunction!(gowers_norm, m)?)?;
    m.add_function(wrap_pyfunction!(parallelepiped_average, m)?)?;
    m.add_function(wrap_pyfunction!(box_average, m)?)?;
    m.add_function(wrap_pyfunction!(trig_product_gtm, m)?)?;
    m.add_function(wrap_pyfunction!(linear_correlation_product, m)?)?;
    m.add_function(wrap_pyfunction!(sup_linear_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gelfond_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(cesaro_mean, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_finite, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_series, m)?)?;
    m.add_function(wrap_pyfunction!(bertrandias_density, m)?)?;
    m.add_function(wrap_pyfunction!(count_mod_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(count_cell_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_birkhoff, m)?)?;
    Ok(())
}

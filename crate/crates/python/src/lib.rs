//! Python bindings. Structured results come back as plain dicts; exact
//! rationals as `fractions.Fraction`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use di_toolkit::boxes::{self, Alphabets, InputDistribution};
use di_toolkit::definetti::{self, TypeCounts};
use di_toolkit::eat::{self, BlockSpec, EatEpsilons};
use di_toolkit::keyrates::{self, Caps, Mode};
use di_toolkit::signalling::{self, SigTarget};
use di_toolkit::simulate::{self, HonestDevice, ProtocolConfig};
use di_toolkit::{entropy, io, nslp};

fn err(e: di_toolkit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn alphabets(sizes: (usize, usize, usize, usize)) -> PyResult<Alphabets> {
    Alphabets::new(sizes.0, sizes.1, sizes.2, sizes.3).map_err(err)
}

/// Conditional distribution `P(a,b|x,y)`.
#[pyclass(name = "SingleRoundBox", frozen)]
struct PyBox(boxes::SingleRoundBox);

#[pymethods]
impl PyBox {
    /// `sizes = (|A|, |B|, |X|, |Y|)`, `p` nested `[x][y][a][b]`.
    #[new]
    fn new(sizes: (usize, usize, usize, usize), p: Vec<Vec<Vec<Vec<f64>>>>) -> PyResult<Self> {
        Ok(Self(boxes::SingleRoundBox::from_nested(alphabets(sizes)?, &p).map_err(err)?))
    }

    #[staticmethod]
    fn pr_box() -> Self {
        Self(boxes::SingleRoundBox::pr_box())
    }

    #[staticmethod]
    fn deterministic(sizes: (usize, usize, usize, usize), fa: Vec<usize>, fb: Vec<usize>) -> PyResult<Self> {
        Ok(Self(boxes::SingleRoundBox::deterministic(alphabets(sizes)?, &fa, &fb).map_err(err)?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let f: io::BoxFile = io::from_json_str(text).map_err(err)?;
        Ok(Self(f.to_box(false).map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&io::BoxFile::from_box(&self.0)).map_err(err)
    }

    fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.0.get(a, b, x, y)
    }

    fn table(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        self.0.to_nested()
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn is_nonsignalling(&self, tol: f64) -> bool {
        boxes::is_nonsignalling(&self.0, tol)
    }
}

/// Two-player game.
#[pyclass(name = "Game", frozen)]
struct PyGame(boxes::Game);

#[pymethods]
impl PyGame {
    /// `q` nested `[x][y]`, `win` nested `[a][b][x][y]` with 0/1 entries.
    #[new]
    fn new(sizes: (usize, usize, usize, usize), q: Vec<Vec<f64>>, win: Vec<Vec<Vec<Vec<u8>>>>) -> PyResult<Self> {
        let f = io::GameFile { a_size: sizes.0, b_size: sizes.1, x_size: sizes.2, y_size: sizes.3, q, win };
        Ok(Self(f.to_game().map_err(err)?))
    }

    #[staticmethod]
    fn chsh() -> Self {
        Self(boxes::chsh_game())
    }

    #[staticmethod]
    fn extended_chsh() -> Self {
        Self(boxes::extended_chsh_game())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let f: io::GameFile = io::from_json_str(text).map_err(err)?;
        Ok(Self(f.to_game().map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&io::GameFile::from_game(&self.0)).map_err(err)
    }

    fn win(&self, a: usize, b: usize, x: usize, y: usize) -> bool {
        self.0.win(a, b, x, y)
    }

    fn winning_probability(&self, bx: &PyBox) -> PyResult<f64> {
        boxes::winning_probability(&bx.0, &self.0).map_err(err)
    }

    fn classical_value(&self) -> PyResult<f64> {
        boxes::classical_value(&self.0).map_err(err)
    }

    /// `(value, dual, kappa)` of the non-signalling program.
    fn ns_value(&self) -> PyResult<(f64, Vec<f64>, f64)> {
        let v = nslp::ns_value(&self.0).map_err(err)?;
        Ok((v.value, v.dual, v.kappa))
    }

    fn perturbed_value(&self, slack: f64) -> PyResult<f64> {
        nslp::perturbed_value(&self.0, slack).map_err(err)
    }

    fn threshold_bound(&self, n: u64, beta: f64) -> PyResult<f64> {
        signalling::threshold_bound(&self.0, n, beta).map_err(err)
    }
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    entropy::binary_entropy(p).map_err(err)
}

#[pyfunction]
fn secrecy_bound(omega: f64) -> PyResult<f64> {
    entropy::secrecy_bound(omega).map_err(err)
}

#[pyfunction]
fn bell_diag_bound(omega: f64) -> PyResult<f64> {
    entropy::bell_diag_bound(omega).map_err(err)
}

/// Entropy rate optimised over the cut; a dict with value, best_cut, f_min,
/// slope and penalty.
#[pyfunction]
fn mu_opt(py: Python<'_>, omega_exp: f64, delta_est: f64, gamma: f64, n: f64, eps_s: f64, eps_e: f64) -> PyResult<Py<PyAny>> {
    let eps = EatEpsilons::new(eps_s, eps_e).map_err(err)?;
    to_py(py, &eat::mu_opt(omega_exp, delta_est, gamma, n, &eps).map_err(err)?)
}

#[pyfunction]
fn mu_block_opt(py: Python<'_>, omega_exp: f64, delta_est: f64, gamma: f64, s_max: u32, m_blocks: f64, eps_s: f64, eps_e: f64) -> PyResult<Py<PyAny>> {
    let eps = EatEpsilons::new(eps_s, eps_e).map_err(err)?;
    let block = BlockSpec::new(gamma, s_max).map_err(err)?;
    to_py(py, &eat::mu_block_opt(omega_exp, delta_est, &block, m_blocks, &eps).map_err(err)?)
}

/// Optimised key rate for the honest Werner device; `mode` is `"block"` or
/// `"per-round"`.
#[pyfunction]
#[pyo3(signature = (n, qber, mode = "block", eps_ec = 1e-10, soundness = 1e-5, completeness = 1e-2))]
fn optimize_rate(py: Python<'_>, n: f64, qber: f64, mode: &str, eps_ec: f64, soundness: f64, completeness: f64) -> PyResult<Py<PyAny>> {
    let mode = match mode {
        "block" => Mode::Block,
        "per-round" => Mode::PerRound,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let caps = Caps { soundness, completeness, eps_ec };
    to_py(py, &keyrates::optimize_rate(n, qber, &caps, mode).map_err(err)?)
}

/// Signalling measure; `direction` is `"AtoB"` or `"BtoA"`.
#[pyfunction]
fn sig_measure(bx: &PyBox, q: Vec<Vec<f64>>, direction: &str, x: usize, y: usize, outcome: usize) -> PyResult<f64> {
    let q = InputDistribution::from_nested(&q).map_err(err)?;
    let t = match direction {
        "AtoB" => SigTarget::a_to_b(x, y, outcome),
        "BtoA" => SigTarget::b_to_a(x, y, outcome),
        other => return Err(PyValueError::new_err(format!("unknown direction {other:?}"))),
    };
    signalling::sig_measure(&bx.0, &q, t).map_err(err)
}

#[pyfunction]
fn sanov_delta(n: u64, eps: f64, cells: usize) -> f64 {
    signalling::sanov_delta(n, eps, cells)
}

/// Exact τ entry for a count table `counts[j][k]`.
#[pyfunction]
fn tau_entry_exact(py: Python<'_>, counts: Vec<Vec<u64>>) -> PyResult<Py<PyAny>> {
    let c = TypeCounts::from_nested(&counts).map_err(err)?;
    let t = definetti::tau_entry_exact(&c);
    let frac = py.import("fractions")?.getattr("Fraction")?;
    Ok(frac.call1((format!("{}/{}", t.numer(), t.denom()),))?.unbind())
}

#[pyfunction]
fn reduction_factor(py: Python<'_>, n: u64, l: usize, m: usize) -> PyResult<Py<PyAny>> {
    let digits = definetti::reduction_factor(n, l, m).to_string();
    Ok(py.import("builtins")?.getattr("int")?.call1((digits,))?.unbind())
}

/// Abort frequency of the honest per-round protocol; a dict with
/// trials, hits, freq, ci and hoeffding_bound.
#[pyfunction]
#[pyo3(signature = (n, gamma, omega_exp, delta_est, trials, seed, qber = 0.0))]
fn estimate_abort_probability(py: Python<'_>, n: u64, gamma: f64, omega_exp: f64, delta_est: f64, trials: u64, seed: u64, qber: f64) -> PyResult<Py<PyAny>> {
    let dev = HonestDevice::new(omega_exp, qber).map_err(err)?;
    let cfg = ProtocolConfig::honest(n, gamma, delta_est, dev).map_err(err)?;
    to_py(py, &simulate::estimate_abort_probability(&cfg, trials, seed).map_err(err)?)
}

#[pymodule]
fn di_toolkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBox>()?;
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(secrecy_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bell_diag_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mu_opt, m)?)?;
    m.add_function(wrap_pyfunction!(mu_block_opt, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sig_measure, m)?)?;
    m.add_function(wrap_pyfunction!(sanov_delta, m)?)?;
    m.add_function(wrap_pyfunction!(tau_entry_exact, m)?)?;
    m.add_function(wrap_pyfunction!(reduction_factor, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_abort_probability, m)?)?;
    Ok(())
}

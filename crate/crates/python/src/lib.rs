//! Python bindings: prompts and the oracle, reward formulas, policy
//! checkpoints, episodes, evaluation and the two training stages.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use reflectgen::eval::{consistency_ratio, eval_edit, eval_t2i, gen_labeled_pairs, AhaMode, EvalSuite};
use reflectgen::introspect::{run_episode, EpisodeConfig, EpisodeMode, Verdict};
use reflectgen::policy::{load_checkpoint, save_checkpoint, FeatureConfig, PolicyParams};
use reflectgen::sft::GeneratorMix;
use reflectgen::trainer::{train_rl, train_sft, RlConfig, SftConfig};
use reflectgen::world::{self, Category, GridImage, PromptSpec};

fn err(e: reflectgen::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn category(name: &str) -> PyResult<Category> {
    Category::ALL
        .into_iter()
        .find(|c| c.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| PyValueError::new_err(format!("unknown category {name:?}")))
}

fn image(cells: Vec<u8>) -> PyResult<GridImage> {
    GridImage::from_ids(&cells).map_err(err)
}

fn config<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        None => Ok(T::default()),
        Some(t) => toml::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

#[pyclass(name = "Prompt", frozen)]
struct Prompt {
    inner: PromptSpec,
}

#[pymethods]
impl Prompt {
    #[getter]
    fn id(&self) -> u64 {
        self.inner.id
    }

    #[getter]
    fn category(&self) -> &'static str {
        self.inner.category.name()
    }

    #[getter]
    fn surface(&self) -> String {
        self.inner.surface.clone()
    }

    #[getter]
    fn tuples(&self) -> Vec<String> {
        self.inner.tuples.iter().map(ToString::to_string).collect()
    }

    fn __repr__(&self) -> String {
        format!("Prompt({}, {:?})", self.inner.category.name(), self.inner.surface)
    }
}

#[pyclass(name = "Policy", frozen)]
struct Policy {
    params: PolicyParams,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn zeros() -> Self {
        Self { params: PolicyParams::zeros(FeatureConfig::default()) }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { params: load_checkpoint(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.params).map_err(err)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.params.len()
    }

    /// One inference episode; rounds are dicts with cells, verdict, reason and qa.
    #[pyo3(signature = (prompt, seed, rounds = 3))]
    fn run_episode<'py>(&self, py: Python<'py>, prompt: &Prompt, seed: u64, rounds: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        if rounds == 0 {
            return Err(PyValueError::new_err("rounds must be at least 1"));
        }
        let config = EpisodeConfig { rounds, ..EpisodeConfig::default() };
        let t = py.detach(|| run_episode(&self.params, &prompt.inner, &config, seed, EpisodeMode::Rollout));
        t.rounds
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("cells", r.image.ids().to_vec())?;
                d.set_item("verdict", if r.verdict == Verdict::Yes { "yes" } else { "no" })?;
                d.set_item("reason", r.reason.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>())?;
                d.set_item("qa", r.qa)?;
                Ok(d)
            })
            .collect()
    }

    /// Held-out text-to-image scores: `overall`, `mean_rounds` and per-category means per mode.
    #[pyo3(signature = (per_category = 100, seed = 0))]
    fn evaluate<'py>(&self, py: Python<'py>, per_category: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let suite = EvalSuite::generate(per_category, 0, 0);
        let f = py.detach(|| eval_t2i(&self.params, &suite, AhaMode::Both, &EpisodeConfig::default(), seed));
        let out = PyDict::new(py);
        for (name, scores) in [("with_aha", f.with_aha), ("without_aha", f.without_aha)] {
            let s = scores.expect("both modes are evaluated");
            let d = PyDict::new(py);
            d.set_item("overall", s.overall)?;
            d.set_item("mean_rounds", s.mean_rounds)?;
            d.set_item("per_category", s.per_category)?;
            out.set_item(name, d)?;
        }
        Ok(out)
    }

    /// Mean `(flw, psv)` of greedy edits on `tasks` held-out editing tasks.
    #[pyo3(signature = (tasks = 300, cfg_scale = 4.0))]
    fn evaluate_edits(&self, py: Python<'_>, tasks: usize, cfg_scale: f64) -> PyResult<(f64, f64)> {
        let suite = EvalSuite::generate(0, tasks, 0);
        let s = py.detach(|| eval_edit(&self.params, &suite, cfg_scale)).map_err(err)?;
        Ok((s.mean_flw, s.mean_psv))
    }

    #[pyo3(signature = (pairs = 1000, seed = 0))]
    fn consistency(&self, py: Python<'_>, pairs: usize, seed: u64) -> f64 {
        py.detach(|| consistency_ratio(&self.params, &gen_labeled_pairs(pairs, &GeneratorMix::default(), seed), 1.0))
    }
}

#[pyfunction]
fn gen_prompt(category_name: &str, seed: u64) -> PyResult<Prompt> {
    Ok(Prompt { inner: world::gen_prompt(category(category_name)?, seed) })
}

#[pyfunction]
fn categories() -> Vec<&'static str> {
    Category::ALL.iter().map(|c| c.name()).collect()
}

#[pyfunction]
fn qa_score(prompt: &Prompt, cells: Vec<u8>) -> PyResult<f64> {
    Ok(world::qa_score(&prompt.inner, &image(cells)?))
}

#[pyfunction]
fn reason_codes(prompt: &Prompt, cells: Vec<u8>) -> PyResult<Vec<String>> {
    let codes = world::render_reason(&prompt.inner, &image(cells)?).codes();
    Ok(codes.iter().map(|c| format!("{c:?}")).collect())
}

#[pyfunction]
fn gen_reward(per_round_qa: Vec<f64>, rounds: usize) -> PyResult<f64> {
    reflectgen::grpo::gen_reward(&per_round_qa, rounds).map_err(err)
}

#[pyfunction]
fn comp_reward(per_round_qa: Vec<f64>, se_flags: Vec<bool>, rounds: usize) -> PyResult<f64> {
    reflectgen::grpo::comp_reward(&per_round_qa, &se_flags, rounds).map_err(err)
}

#[pyfunction]
fn edit_reward(flw: f64, psv: f64) -> f64 {
    reflectgen::grpo::edit_reward(flw, psv)
}

#[pyfunction]
#[pyo3(signature = (totals, std_floor = 1e-8))]
fn group_advantages(totals: Vec<f64>, std_floor: f64) -> Vec<f64> {
    reflectgen::grpo::group_advantages(&totals, std_floor)
}

#[pyfunction]
fn kl_token(logp_new: Vec<f64>, logp_ref: Vec<f64>) -> PyResult<Vec<f64>> {
    if logp_new.len() != logp_ref.len() {
        return Err(PyValueError::new_err("log-prob sequences differ in length"));
    }
    Ok(reflectgen::grpo::kl_token(&logp_new, &logp_ref))
}

/// Mixed-task SFT from zeros; `config` is TOML text with any subset of keys.
#[pyfunction]
#[pyo3(signature = (config = None, seed = None))]
fn sft(py: Python<'_>, config: Option<&str>, seed: Option<u64>) -> PyResult<Policy> {
    let mut cfg: SftConfig = self::config(config)?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    let out = py.detach(|| train_sft(&cfg, None, None)).map_err(err)?;
    Ok(Policy { params: out.params })
}

/// GRPO over introspective episodes starting from `init`.
#[pyfunction]
#[pyo3(signature = (init, config = None, seed = None))]
fn rl(py: Python<'_>, init: &Policy, config: Option<&str>, seed: Option<u64>) -> PyResult<Policy> {
    let mut cfg: RlConfig = self::config(config)?;
    cfg.seed = seed.unwrap_or(cfg.seed);
    let out = py.detach(|| train_rl(&cfg, &init.params, None)).map_err(err)?;
    Ok(Policy { params: out.params })
}

#[pymodule]
fn pyreflectgen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Prompt>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(gen_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(categories, m)?)?;
    m.add_function(wrap_pyfunction!(qa_score, m)?)?;
    m.add_function(wrap_pyfunction!(reason_codes, m)?)?;
    m.add_function(wrap_pyfunction!(gen_reward, m)?)?;
    m.add_function(wrap_pyfunction!(comp_reward, m)?)?;
    m.add_function(wrap_pyfunction!(edit_reward, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(kl_token, m)?)?;
    m.add_function(wrap_pyfunction!(sft, m)?)?;
    m.add_function(wrap_pyfunction!(rl, m)?)?;
    Ok(())
}

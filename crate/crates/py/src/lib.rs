//! Python bindings for the fedbench core: datasets, partitioning, models,
//! and the three training paradigms. Parameter vectors cross the boundary as
//! plain lists of floats.

use fedbench::data;
use fedbench::models;
use fedbench::trainers;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn to_py_err(err: fedbench::Error) -> PyErr {
    match err {
        fedbench::Error::Io { .. } | fedbench::Error::Format { .. } => {
            PyIOError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

trait IntoPyResult<T> {
    fn into_py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for fedbench::Result<T> {
    fn into_py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

/// Model description (logreg, mlp, or cnn-small).
#[pyclass(name = "ModelConfig", module = "fedbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelConfig {
    inner: models::ModelConfig,
}

#[pymethods]
impl PyModelConfig {
    #[staticmethod]
    fn logreg(input_dim: usize, num_classes: usize) -> PyResult<Self> {
        Ok(Self {
            inner: models::ModelConfig::logreg(input_dim, num_classes).into_py()?,
        })
    }

    #[staticmethod]
    fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> PyResult<Self> {
        Ok(Self {
            inner: models::ModelConfig::mlp(input_dim, hidden_dim, num_classes).into_py()?,
        })
    }

    #[staticmethod]
    fn cnn_small(input_dim: usize, conv_channels: usize, num_classes: usize) -> PyResult<Self> {
        Ok(Self {
            inner: models::ModelConfig::cnn_small(input_dim, conv_channels, num_classes)
                .into_py()?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelConfig(kind='{}', input_dim={}, num_classes={}, params={})",
            self.inner.kind().name(),
            self.inner.input_dim(),
            self.inner.num_classes(),
            self.inner.param_count()
        )
    }
}

/// Immutable labeled dataset.
#[pyclass(name = "Dataset", module = "fedbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build a dataset from row-major features and labels.
    #[staticmethod]
    fn from_rows(
        features: Vec<f64>,
        labels: Vec<usize>,
        num_features: usize,
        num_classes: usize,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: data::Dataset::new(features, labels, num_features, num_classes).into_py()?,
        })
    }

    /// Seeded Gaussian-cluster dataset with balanced labels.
    #[staticmethod]
    fn synthetic(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: data::generate_synthetic(n, d, k, separation, seed).into_py()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn label(&self, i: usize) -> PyResult<usize> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.label(i))
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    /// Copy of the selected rows, in order.
    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: data::subset(&self.inner, &indices).into_py()?,
        })
    }

    /// Export as CSV with header `label,f0,...`.
    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).into_py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, features={}, classes={})",
            self.inner.len(),
            self.inner.num_features(),
            self.inner.num_classes()
        )
    }
}

/// Assignment of training rows to participants.
#[pyclass(name = "PartitionPlan", module = "fedbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPartitionPlan {
    inner: data::PartitionPlan,
}

#[pymethods]
impl PyPartitionPlan {
    #[getter]
    fn participants(&self) -> usize {
        self.inner.participants()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme().name()
    }

    fn assignments(&self) -> Vec<Vec<usize>> {
        self.inner.assignments().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "PartitionPlan(scheme='{}', participants={})",
            self.inner.scheme().name(),
            self.inner.participants()
        )
    }
}

/// Run parameters for the three paradigms.
#[pyclass(name = "TrainerConfig", module = "fedbench_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainerConfig {
    inner: trainers::TrainerConfig,
}

#[pymethods]
impl PyTrainerConfig {
    #[new]
    #[pyo3(signature = (
        paradigm,
        participants,
        rounds,
        participation_ratio = 0.2,
        local_epochs = 5,
        batch_size = 32,
        lr = 0.05,
        seed = 42,
        upload_budget_bytes = 0,
        parallel_clients = false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        paradigm: &str,
        participants: usize,
        rounds: usize,
        participation_ratio: f64,
        local_epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
        upload_budget_bytes: u64,
        parallel_clients: bool,
    ) -> PyResult<Self> {
        let config = trainers::TrainerConfig {
            paradigm: paradigm.parse().into_py()?,
            participants,
            participation_ratio,
            rounds,
            local_epochs,
            batch_size,
            lr,
            seed,
            upload_budget_bytes,
            parallel_clients,
        };
        config.validate().into_py()?;
        Ok(Self { inner: config })
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "TrainerConfig(paradigm='{}', p={}, C={}, R={}, E={}, batch={}, lr={}, seed={})",
            c.paradigm.name(),
            c.participants,
            c.participation_ratio,
            c.rounds,
            c.local_epochs,
            c.batch_size,
            c.lr,
            c.seed
        )
    }
}

/// One completed communication round.
#[pyclass(name = "RoundResult", module = "fedbench_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRoundResult {
    #[pyo3(get)]
    round: usize,
    #[pyo3(get)]
    train_loss: f64,
    #[pyo3(get)]
    test_accuracy: f64,
    #[pyo3(get)]
    bytes_up: u64,
    #[pyo3(get)]
    bytes_down: u64,
    #[pyo3(get)]
    active_clients: Vec<usize>,
}

impl From<&trainers::RoundResult> for PyRoundResult {
    fn from(r: &trainers::RoundResult) -> Self {
        PyRoundResult {
            round: r.round,
            train_loss: r.train_loss,
            test_accuracy: r.test_accuracy,
            bytes_up: r.bytes_up,
            bytes_down: r.bytes_down,
            active_clients: r.active_clients.clone(),
        }
    }
}

#[pymethods]
impl PyRoundResult {
    fn __repr__(&self) -> String {
        format!(
            "RoundResult(round={}, test_accuracy={:.4}, train_loss={:.4})",
            self.round, self.test_accuracy, self.train_loss
        )
    }
}

/// A finished run: per-round records plus the final global model.
#[pyclass(name = "RunResult", module = "fedbench_py", frozen)]
struct PyRunResult {
    #[pyo3(get)]
    records: Vec<PyRoundResult>,
    #[pyo3(get)]
    final_params: Vec<f64>,
}

impl PyRunResult {
    fn from_rounds(rounds: Vec<trainers::RoundResult>) -> Self {
        let records: Vec<PyRoundResult> = rounds.iter().map(PyRoundResult::from).collect();
        let final_params = rounds
            .last()
            .map(|r| r.global_params.values().to_vec())
            .unwrap_or_default();
        PyRunResult {
            records,
            final_params,
        }
    }
}

#[pymethods]
impl PyRunResult {
    /// Total `(bytes_up, bytes_down)` over all rounds.
    fn cumulative_bytes(&self) -> (u64, u64) {
        self.records
            .iter()
            .fold((0, 0), |(u, d), r| (u + r.bytes_up, d + r.bytes_down))
    }

    /// Earliest round attaining the best test accuracy.
    fn best_accuracy(&self) -> (usize, f64) {
        let mut best = (0usize, f64::MIN);
        for r in &self.records {
            if r.test_accuracy > best.1 {
                best = (r.round, r.test_accuracy);
            }
        }
        best
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

// ------------------------------------------------------------ data loaders

/// Load the four MNIST IDX files from a directory.
#[pyfunction]
fn load_mnist(dir: PathBuf) -> PyResult<(PyDataset, PyDataset)> {
    let (train, test) = data::load_mnist(&dir).into_py()?;
    Ok((PyDataset { inner: train }, PyDataset { inner: test }))
}

/// Load the CIFAR-10 binary batches from a directory.
#[pyfunction]
fn load_cifar10(dir: PathBuf) -> PyResult<(PyDataset, PyDataset)> {
    let (train, test) = data::load_cifar10(&dir).into_py()?;
    Ok((PyDataset { inner: train }, PyDataset { inner: test }))
}

/// IID partition: seeded permutation split into near-equal chunks.
#[pyfunction]
fn partition_iid(dataset: &PyDataset, participants: usize, seed: u64) -> PyResult<PyPartitionPlan> {
    Ok(PyPartitionPlan {
        inner: data::partition_iid(&dataset.inner, participants, seed).into_py()?,
    })
}

/// Label-sorted shard partition (non-IID).
#[pyfunction]
fn partition_shards(
    dataset: &PyDataset,
    participants: usize,
    shards_per_client: usize,
    seed: u64,
) -> PyResult<PyPartitionPlan> {
    Ok(PyPartitionPlan {
        inner: data::partition_shards(&dataset.inner, participants, shards_per_client, seed)
            .into_py()?,
    })
}

// ------------------------------------------------------------- model ops

/// Deterministic scaled-uniform initialization, biases zero.
#[pyfunction]
fn init_params(model: &PyModelConfig, seed: u64) -> Vec<f64> {
    models::init_params(&model.inner, seed).values().to_vec()
}

/// Class logits for a row-major feature matrix.
#[pyfunction]
fn predict_logits(params: Vec<f64>, model: &PyModelConfig, features: Vec<f64>) -> PyResult<Vec<f64>> {
    let params = models::ParameterVector::from_values(params);
    models::predict_logits(&params, &model.inner, &features).into_py()
}

/// Mean softmax cross-entropy of a batch.
#[pyfunction]
fn loss(
    params: Vec<f64>,
    model: &PyModelConfig,
    features: Vec<f64>,
    labels: Vec<usize>,
) -> PyResult<f64> {
    let params = models::ParameterVector::from_values(params);
    let batch = models::Batch::new(features, labels, model.inner.input_dim()).into_py()?;
    models::loss(&params, &model.inner, &batch).into_py()
}

/// Gradient of the mean batch loss, same layout as the parameters.
#[pyfunction]
fn gradient(
    params: Vec<f64>,
    model: &PyModelConfig,
    features: Vec<f64>,
    labels: Vec<usize>,
) -> PyResult<Vec<f64>> {
    let params = models::ParameterVector::from_values(params);
    let batch = models::Batch::new(features, labels, model.inner.input_dim()).into_py()?;
    Ok(models::gradient(&params, &model.inner, &batch)
        .into_py()?
        .values()
        .to_vec())
}

/// One plain SGD step: `params - lr * grad`.
#[pyfunction]
fn sgd_step(params: Vec<f64>, grad: Vec<f64>, lr: f64) -> PyResult<Vec<f64>> {
    if params.len() != grad.len() {
        return Err(PyValueError::new_err(
            "params and grad must have the same length",
        ));
    }
    let params = models::ParameterVector::from_values(params);
    let grad = models::ParameterVector::from_values(grad);
    Ok(models::sgd_step(&params, &grad, lr).values().to_vec())
}

/// Mini-batch SGD over a dataset with per-epoch seeded reshuffling.
#[pyfunction]
fn train_local(
    params: Vec<f64>,
    model: &PyModelConfig,
    dataset: &PyDataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let params = models::ParameterVector::from_values(params);
    Ok(
        models::train_local(&params, &model.inner, &dataset.inner, epochs, batch_size, lr, seed)
            .into_py()?
            .values()
            .to_vec(),
    )
}

/// `(accuracy, mean_loss)` over a dataset.
#[pyfunction]
fn evaluate(params: Vec<f64>, model: &PyModelConfig, dataset: &PyDataset) -> PyResult<(f64, f64)> {
    let params = models::ParameterVector::from_values(params);
    let eval = models::evaluate(&params, &model.inner, &dataset.inner).into_py()?;
    Ok((eval.accuracy, eval.mean_loss))
}

// ------------------------------------------------------------ trainer ops

/// The `ceil(C * p)` clients active in a round, sorted ascending.
#[pyfunction]
fn sample_clients(participants: usize, ratio: f64, seed: u64, round: usize) -> Vec<usize> {
    trainers::sample_clients(participants, ratio, seed, round)
}

/// Example-count-weighted mean of parameter vectors.
#[pyfunction]
fn weighted_average(updates: Vec<(Vec<f64>, u64)>) -> PyResult<Vec<f64>> {
    let updates: Vec<(models::ParameterVector, u64)> = updates
        .into_iter()
        .map(|(v, n)| (models::ParameterVector::from_values(v), n))
        .collect();
    Ok(trainers::weighted_average(&updates)
        .into_py()?
        .values()
        .to_vec())
}

fn run_paradigm(
    runner: impl Fn(
        &trainers::TrainerConfig,
        &models::ModelConfig,
        &data::PartitionPlan,
        &data::Dataset,
        &data::Dataset,
    ) -> fedbench::Result<Vec<trainers::RoundResult>>,
    config: &PyTrainerConfig,
    model: &PyModelConfig,
    plan: &PyPartitionPlan,
    train: &PyDataset,
    test: &PyDataset,
) -> PyResult<PyRunResult> {
    let rounds = runner(
        &config.inner,
        &model.inner,
        &plan.inner,
        &train.inner,
        &test.inner,
    )
    .into_py()?;
    Ok(PyRunResult::from_rounds(rounds))
}

/// Federated averaging over sampled clients.
#[pyfunction]
fn run_federated(
    config: &PyTrainerConfig,
    model: &PyModelConfig,
    plan: &PyPartitionPlan,
    train: &PyDataset,
    test: &PyDataset,
) -> PyResult<PyRunResult> {
    run_paradigm(trainers::run_federated, config, model, plan, train, test)
}

/// Synchronous distributed training (all participants every round).
#[pyfunction]
fn run_distributed(
    config: &PyTrainerConfig,
    model: &PyModelConfig,
    plan: &PyPartitionPlan,
    train: &PyDataset,
    test: &PyDataset,
) -> PyResult<PyRunResult> {
    run_paradigm(trainers::run_distributed, config, model, plan, train, test)
}

/// Centralized training under a per-participant upload budget.
#[pyfunction]
fn run_centralized(
    config: &PyTrainerConfig,
    model: &PyModelConfig,
    plan: &PyPartitionPlan,
    train: &PyDataset,
    test: &PyDataset,
) -> PyResult<PyRunResult> {
    run_paradigm(trainers::run_centralized, config, model, plan, train, test)
}

#[pymodule]
fn fedbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPartitionPlan>()?;
    m.add_class::<PyTrainerConfig>()?;
    m.add_class::<PyRoundResult>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(load_mnist, m)?)?;
    m.add_function(wrap_pyfunction!(load_cifar10, m)?)?;
    m.add_function(wrap_pyfunction!(partition_iid, m)?)?;
    m.add_function(wrap_pyfunction!(partition_shards, m)?)?;
    m.add_function(wrap_pyfunction!(init_params, m)?)?;
    m.add_function(wrap_pyfunction!(predict_logits, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_step, m)?)?;
    m.add_function(wrap_pyfunction!(train_local, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_clients, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_average, m)?)?;
    m.add_function(wrap_pyfunction!(run_federated, m)?)?;
    m.add_function(wrap_pyfunction!(run_distributed, m)?)?;
    m.add_function(wrap_pyfunction!(run_centralized, m)?)?;
    Ok(())
}

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use symcomplete::completion::{complete, CompletionSettings, StructureHint};
use symcomplete::decomposition::{
    learn_mixture_exact, learn_mixture_sampled, match_and_score, match_centers, LearnSettings, SampledSettings,
};
use symcomplete::linalg::index::is_multilinear;
use symcomplete::linalg::io::{read_mask_csv, read_matrix_csv, read_symtensor, write_matrix_csv, write_symtensor};
use symcomplete::mixture::{empirical_multilinear_moments, exact_augmented_moments, sample, separation, ProductMixture, SampleSet};
use symcomplete::rng::{derive_seed, seeded};
use symcomplete::tensor_completion::{complete_symmetric, TensorCompletionSettings};

use crate::{CliError, ExperimentConfig, Mode};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// What a run produced. Files named in the config are already written;
/// `data` holds the primary output when no `out` path was given.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: String,
    pub data: Option<String>,
    pub timings: Vec<StageTiming>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    config_hash: String,
    config: &'a ExperimentConfig,
    result: Value,
}

struct Clock {
    last: Instant,
    stages: Vec<StageTiming>,
}

impl Clock {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

fn reader(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_error(path: &Path) -> impl FnOnce(symcomplete::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

fn read_mixture(path: &Path) -> Result<ProductMixture, CliError> {
    ProductMixture::from_json(&read_text(path)?).map_err(input_error(path))
}

fn read_samples(path: &Path) -> Result<SampleSet, CliError> {
    SampleSet::read(reader(path)?).map_err(input_error(path))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn matrix_settings(config: &ExperimentConfig) -> CompletionSettings {
    let mut s = CompletionSettings::default();
    if let Some(tol) = config.tol {
        s.tolerance = tol;
    }
    if let Some(it) = config.max_iterations {
        s.max_iterations = it;
    }
    if let Some(radius) = config.noise_radius {
        s.noise_radius = radius;
    }
    s
}

fn tensor_settings(config: &ExperimentConfig) -> TensorCompletionSettings {
    TensorCompletionSettings {
        matrix: matrix_settings(config),
        rank: config.r,
        mu: config.mu,
        input_noise: config.epsilon.unwrap_or(0.0),
        ..Default::default()
    }
}

fn learn_settings(config: &ExperimentConfig, seed: u64) -> LearnSettings {
    let defaults = LearnSettings::default();
    LearnSettings {
        completion: TensorCompletionSettings {
            matrix: matrix_settings(config),
            ..Default::default()
        },
        restarts: config.restarts,
        iterations: config.iterations.unwrap_or(defaults.iterations),
        seed,
    }
}

/// Primary output of a mode plus its report body.
struct ModeOutput {
    data: Option<String>,
    result: Value,
}

fn utf8(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("writers emit UTF-8")
}

fn run_mode(config: &ExperimentConfig, clock: &mut Clock) -> Result<ModeOutput, CliError> {
    // validate() guarantees the fields each branch unwraps
    let path = |p: &Option<PathBuf>| p.clone().expect("validated");
    match config.mode {
        Mode::GenMixture => {
            let seed = derive_seed(config.seed.expect("validated"), "mixture");
            let (n, k) = (config.n.expect("validated"), config.k.expect("validated"));
            let mut rng = seeded(seed);
            let mix = match config.mu {
                Some(mu) => ProductMixture::incoherent(n, k, mu, &mut rng)?,
                None => ProductMixture::random(n, k, &mut rng)?,
            };
            clock.lap("generate");
            Ok(ModeOutput {
                data: Some(mix.to_json() + "\n"),
                result: json!({
                    "n": n,
                    "k": k,
                    "weights": mix.weights(),
                    "separation": separation(&mix).ok(),
                    "seeds": { "mixture": seed },
                }),
            })
        }
        Mode::Sample => {
            let mix = read_mixture(&path(&config.mixture))?;
            clock.lap("read");
            let seed = derive_seed(config.seed.expect("validated"), "samples");
            let count = config.count.expect("validated");
            let set = sample(&mix, count, seed);
            clock.lap("sample");
            let mut buf = Vec::new();
            set.write(&mut buf)?;
            Ok(ModeOutput {
                data: Some(utf8(buf)),
                result: json!({ "n": mix.n(), "samples": count, "seeds": { "samples": seed } }),
            })
        }
        Mode::Moments => {
            let set = read_samples(&path(&config.samples))?;
            clock.lap("read");
            let order = config.m.expect("validated");
            let t = empirical_multilinear_moments(&set, order)?;
            clock.lap("moments");
            let mut buf = Vec::new();
            write_symtensor(&t, &mut buf)?;
            Ok(ModeOutput {
                data: Some(utf8(buf)),
                result: json!({
                    "order": order,
                    "dim": set.n(),
                    "samples": set.len(),
                    "present": t.present_count(),
                    "canonical": t.canonical_len(),
                }),
            })
        }
        Mode::CompleteMatrix => {
            let input = path(&config.input);
            let mask_path = path(&config.mask);
            let observed = read_matrix_csv(reader(&input)?).map_err(input_error(&input))?;
            let mask = read_mask_csv(reader(&mask_path)?).map_err(input_error(&mask_path))?;
            clock.lap("read");
            let mut settings = matrix_settings(config);
            if let (Some(rank), Some(mu)) = (config.r, config.mu) {
                settings.structure = Some(StructureHint {
                    rank,
                    mu_u: mu,
                    mu_v: mu,
                    lambda: config.lambda,
                });
            }
            let report = complete(&observed, &mask, &settings)?;
            clock.lap("complete");
            let mut buf = Vec::new();
            write_matrix_csv(&report.matrix, &mut buf)?;
            Ok(ModeOutput {
                data: Some(utf8(buf)),
                result: to_value(&report),
            })
        }
        Mode::CompleteTensor => {
            let input = path(&config.input);
            let t = read_symtensor(reader(&input)?).map_err(input_error(&input))?;
            clock.lap("read");
            let report = complete_symmetric(&t, &tensor_settings(config))?;
            clock.lap("complete");
            let mut buf = Vec::new();
            write_symtensor(&report.tensor, &mut buf)?;
            Ok(ModeOutput {
                data: Some(utf8(buf)),
                result: to_value(&report),
            })
        }
        Mode::Learn => {
            let set = read_samples(&path(&config.samples))?;
            let truth = config.mixture.as_deref().map(read_mixture).transpose()?;
            clock.lap("read");
            let settings = SampledSettings {
                learn: learn_settings(config, config.seed.expect("validated")),
                delta: config.delta.unwrap_or(SampledSettings::default().delta),
                target_epsilon: config.epsilon,
            };
            let mut report = learn_mixture_sampled(&set, config.k.expect("validated"), config.eta, &settings)?;
            if let Some(truth) = &truth {
                report.score = Some(match_and_score(truth, &report)?);
            }
            clock.lap("learn");
            Ok(ModeOutput {
                data: None,
                result: to_value(&report),
            })
        }
        Mode::LearnExact => {
            let mix = read_mixture(&path(&config.mixture))?;
            clock.lap("read");
            let m = config.m.expect("validated");
            let mut t2 = exact_augmented_moments(&mix, 2 * m)?;
            let mut t3 = exact_augmented_moments(&mix, 3 * m)?;
            if config.multilinear.unwrap_or(false) {
                t2.retain(is_multilinear);
                t3.retain(is_multilinear);
            }
            clock.lap("moments");
            let settings = learn_settings(config, config.seed.expect("validated"));
            let mut report = learn_mixture_exact(&t2, &t3, mix.k(), m, &settings)?;
            report.score = Some(match_and_score(&mix, &report)?);
            clock.lap("learn");
            Ok(ModeOutput {
                data: None,
                result: to_value(&report),
            })
        }
        Mode::Eval => {
            let mix = read_mixture(&path(&config.mixture))?;
            let input = path(&config.input);
            let text = read_text(&input)?;
            let value: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
                path: input.clone(),
                source,
            })?;
            // accept a full report or just its result
            let body = value.get("result").unwrap_or(&value);
            let centers: Vec<Vec<f64>> = field(body, "centers", &input)?;
            let weights: Vec<f64> = field(body, "weights", &input)?;
            clock.lap("read");
            let score = match_centers(&mix, &centers, &weights)?;
            clock.lap("score");
            Ok(ModeOutput {
                data: None,
                result: to_value(&score),
            })
        }
    }
}

fn field<T: serde::de::DeserializeOwned>(body: &Value, name: &str, path: &Path) -> Result<T, CliError> {
    let v = body
        .get(name)
        .ok_or_else(|| CliError::Config(format!("{}: no `{name}` field", path.display())))?;
    serde_json::from_value(v.clone()).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Sidecar path for a report: `<report>.timings.json`.
pub fn timings_path(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".timings.json");
    PathBuf::from(s)
}

/// Runs one experiment. Reports are deterministic given the config; wall
/// clock timings go to a sidecar file next to the report.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let mut clock = Clock::new();
    let output = run_mode(config, &mut clock)?;

    let envelope = Envelope {
        tool: "symcomplete",
        version: symcomplete::VERSION,
        mode: config.mode.name(),
        config_hash: config.hash(),
        config,
        result: output.result,
    };
    let report = serde_json::to_string_pretty(&envelope).expect("reports serialize") + "\n";

    let mut data = output.data;
    if let (Some(path), Some(bytes)) = (&config.out, &data) {
        write_file(path, bytes.as_bytes())?;
        data = None;
    }
    clock.lap("write");
    if let Some(path) = &config.report {
        write_file(path, report.as_bytes())?;
        let total: f64 = clock.stages.iter().map(|s| s.seconds).sum();
        let sidecar = json!({ "stages": clock.stages, "total_seconds": total });
        let text = serde_json::to_string_pretty(&sidecar).expect("timings serialize") + "\n";
        write_file(&timings_path(path), text.as_bytes())?;
    }
    Ok(RunOutput {
        report,
        data,
        timings: clock.stages,
    })
}

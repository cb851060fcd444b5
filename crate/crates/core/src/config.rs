//! Engine configuration.
//!
//! The file is plain `key = value` lines; `#` starts a comment line.
//! Relative paths resolve against the file's directory. Any key can be
//! overridden through the environment as `TOOLGRAPH_<KEY>` with dots and
//! dashes turned into underscores (`backend.planner` becomes
//! `TOOLGRAPH_BACKEND_PLANNER`). Remote tokens are only ever read from the
//! environment variable named by `remote.token_env`.
//!
//! Backend specs are `scripted:<path>` or `remote:<url>`. The role keys are
//! `backend.default`, `backend.planner`, `backend.fault`, and one per tool
//! (`backend.code`, ...); unset roles fall back to `backend.default`,
//! except the fault role which falls back to the planner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use thiserror::Error;

use crate::ingest::{
    CaptionImageEmbedder, Embedder, FixtureExtractor, FixtureImageEmbedder, HashingEmbedder,
    ImageEmbedder, IngestOptions, ModelExtractor, RemoteEmbedder, TripleExtractor,
};
use crate::kgstore::{GraphError, PropertyGraph, SharedGraph, DEFAULT_DIM};
use crate::orchestrator::{Backends, Engine, Limits, PromptTemplates};
use crate::remote::ProviderError;
use crate::tools::{
    BackendError, CodeTool, ComputeClient, FixtureSearch, KgQueryTool, MathTool, ModelBackend,
    RemoteBackend, RemoteSearch, Sandbox, SandboxConfig, ScriptedBackend, SearchProvider,
    SearchTool, Toolbox,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("`{key}` refers to missing file {path}")]
    MissingFile { key: String, path: PathBuf },
    #[error("graph has dimension {graph}, config says {config}")]
    DimensionMismatch { graph: usize, config: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Orchestrator backends, if any role is configured, plus the extractor
/// backend.
pub type BuiltBackends = (Option<Backends>, Option<Arc<dyn ModelBackend>>);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BackendSpec {
    Scripted(PathBuf),
    Remote(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchSpec {
    None,
    Fixture(PathBuf),
    Remote(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum EmbedderSpec {
    Hashing,
    Remote(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExtractorSpec {
    /// Replay fixture of triple lines.
    Fixture(PathBuf),
    /// Ask the `extractor` backend role.
    Model,
    /// No extraction; chunks only.
    Off,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub graph_path: Option<PathBuf>,
    pub embed_dim: usize,
    pub embedder: EmbedderSpec,
    pub image_vectors: Option<PathBuf>,
    pub backends: BTreeMap<String, BackendSpec>,
    pub remote_model: String,
    pub remote_token_env: String,
    pub remote_timeout: Duration,
    pub templates: PromptTemplates,
    pub limits: Limits,
    pub sandbox: SandboxConfig,
    pub search: SearchSpec,
    pub compute_url: Option<String>,
    pub retrieval_k: usize,
    pub retrieval_budget: usize,
    pub ingest: IngestOptions,
    pub extractor: ExtractorSpec,
    pub dedup_cos: f64,
    pub dedup_lev: usize,
    pub audit_log: Option<PathBuf>,
    pub eval_k: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            graph_path: None,
            embed_dim: DEFAULT_DIM,
            embedder: EmbedderSpec::Hashing,
            image_vectors: None,
            backends: BTreeMap::new(),
            remote_model: "gpt-4o".into(),
            remote_token_env: "TOOLGRAPH_API_TOKEN".into(),
            remote_timeout: Duration::from_secs(60),
            templates: PromptTemplates::default(),
            limits: Limits::default(),
            sandbox: SandboxConfig::default(),
            search: SearchSpec::None,
            compute_url: None,
            retrieval_k: 5,
            retrieval_budget: 256,
            ingest: IngestOptions::default(),
            extractor: ExtractorSpec::Off,
            dedup_cos: 0.9,
            dedup_lev: 2,
            audit_log: None,
            eval_k: 3,
        }
    }
}

const TOOL_ROLES: &[&str] = &["code", "math", "search", "kgquery"];

const KEYS: &[&str] = &[
    "graph",
    "embed_dim",
    "embedder",
    "image_vectors",
    "backend.default",
    "backend.planner",
    "backend.fault",
    "backend.code",
    "backend.math",
    "backend.search",
    "backend.kgquery",
    "backend.extractor",
    "remote.model",
    "remote.token_env",
    "remote.timeout_secs",
    "template.plan",
    "template.expert",
    "template.expert.code",
    "template.expert.math",
    "template.expert.search",
    "template.expert.kgquery",
    "template.fault",
    "template.revise",
    "limits.max_steps",
    "limits.max_repairs",
    "sandbox.interpreter",
    "sandbox.file_name",
    "sandbox.timeout_secs",
    "sandbox.max_concurrent",
    "search.fixture",
    "search.url",
    "compute.url",
    "retrieval.k",
    "retrieval.budget",
    "ingest.window",
    "ingest.stride",
    "ingest.k_similar",
    "extractor",
    "dedup.cos",
    "dedup.lev",
    "audit.log",
    "eval.k",
];

fn env_name(key: &str) -> String {
    format!("TOOLGRAPH_{}", key.to_uppercase().replace(['.', '-'], "_"))
}

fn unescape(v: &str) -> String {
    let mut out = String::new();
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Parses raw `key = value` lines into a map, rejecting unknown keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((k, v)) = t.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "expected `key = value`".into(),
            });
        };
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey(k));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_pairs(parse_pairs(&text)?, dir, &|k| std::env::var(k).ok())
    }

    /// Configuration from the environment layer alone.
    pub fn from_env(dir: &Path) -> Result<Self, ConfigError> {
        Self::from_pairs(BTreeMap::new(), dir, &|k| std::env::var(k).ok())
    }

    pub fn from_pairs(
        mut pairs: BTreeMap<String, String>,
        dir: &Path,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        for key in KEYS {
            if let Some(v) = env(&env_name(key)) {
                pairs.insert(key.to_string(), v);
            }
        }
        let mut c = EngineConfig::default();
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                dir.join(p)
            }
        };
        let existing = |key: &str, v: &str| -> Result<PathBuf, ConfigError> {
            let p = path(v);
            if !p.exists() {
                return Err(ConfigError::MissingFile {
                    key: key.to_string(),
                    path: p,
                });
            }
            Ok(p)
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                message: e.to_string(),
            })
        }
        let bad = |key: &str, message: &str| ConfigError::BadValue {
            key: key.to_string(),
            message: message.to_string(),
        };

        for (key, v) in &pairs {
            let key = key.as_str();
            match key {
                "graph" => c.graph_path = Some(path(v)),
                "embed_dim" => c.embed_dim = num(key, v)?,
                "embedder" => {
                    c.embedder = match v.split_once(':') {
                        _ if v == "hashing" => EmbedderSpec::Hashing,
                        Some(("remote", url)) => EmbedderSpec::Remote(url.trim().to_string()),
                        _ => return Err(bad(key, "expected `hashing` or `remote:<url>`")),
                    }
                }
                "image_vectors" => c.image_vectors = Some(existing(key, v)?),
                k if k.starts_with("backend.") => {
                    let role = &k["backend.".len()..];
                    let spec = match v.split_once(':') {
                        Some(("scripted", p)) => BackendSpec::Scripted(existing(key, p.trim())?),
                        Some(("remote", url)) => BackendSpec::Remote(url.trim().to_string()),
                        _ => return Err(bad(key, "expected `scripted:<path>` or `remote:<url>`")),
                    };
                    c.backends.insert(role.to_string(), spec);
                }
                "remote.model" => c.remote_model = v.clone(),
                "remote.token_env" => c.remote_token_env = v.clone(),
                "remote.timeout_secs" => c.remote_timeout = Duration::from_secs(num(key, v)?),
                "template.plan" => c.templates.plan = unescape(v),
                "template.expert" => c.templates.expert = unescape(v),
                "template.fault" => c.templates.fault = unescape(v),
                "template.revise" => c.templates.revise = unescape(v),
                k if k.starts_with("template.expert.") => {
                    let tool = &k["template.expert.".len()..];
                    c.templates.expert_overrides.insert(tool.to_string(), unescape(v));
                }
                "limits.max_steps" => c.limits.max_steps = num(key, v)?,
                "limits.max_repairs" => c.limits.max_repairs_per_step = num(key, v)?,
                "sandbox.interpreter" => {
                    c.sandbox.interpreter = v.split_whitespace().map(str::to_string).collect();
                    if c.sandbox.interpreter.is_empty() {
                        return Err(bad(key, "empty interpreter command"));
                    }
                }
                "sandbox.file_name" => c.sandbox.file_name = v.clone(),
                "sandbox.timeout_secs" => {
                    let secs: f64 = num(key, v)?;
                    if secs.is_nan() || secs <= 0.0 {
                        return Err(bad(key, "timeout must be positive"));
                    }
                    c.sandbox.timeout = Duration::from_secs_f64(secs);
                }
                "sandbox.max_concurrent" => c.sandbox.max_concurrent = num(key, v)?,
                "search.fixture" => c.search = SearchSpec::Fixture(existing(key, v)?),
                "search.url" => c.search = SearchSpec::Remote(v.clone()),
                "compute.url" => c.compute_url = Some(v.clone()),
                "retrieval.k" => c.retrieval_k = num(key, v)?,
                "retrieval.budget" => c.retrieval_budget = num(key, v)?,
                "ingest.window" => c.ingest.window = num(key, v)?,
                "ingest.stride" => c.ingest.stride = num(key, v)?,
                "ingest.k_similar" => c.ingest.k_similar = num(key, v)?,
                "extractor" => {
                    c.extractor = match v.split_once(':') {
                        _ if v == "model" => ExtractorSpec::Model,
                        _ if v == "off" => ExtractorSpec::Off,
                        Some(("fixture", p)) => ExtractorSpec::Fixture(existing(key, p.trim())?),
                        _ => return Err(bad(key, "expected `fixture:<path>`, `model` or `off`")),
                    }
                }
                "dedup.cos" => c.dedup_cos = num(key, v)?,
                "dedup.lev" => c.dedup_lev = num(key, v)?,
                "audit.log" => c.audit_log = Some(path(v)),
                "eval.k" => c.eval_k = num(key, v)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if c.limits.max_steps == 0 || c.limits.max_repairs_per_step == 0 {
            return Err(bad("limits", "limits must be at least 1"));
        }
        if c.embed_dim == 0 {
            return Err(bad("embed_dim", "must be positive"));
        }
        if c.retrieval_k == 0 || c.eval_k == 0 {
            return Err(bad("retrieval.k", "k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&c.dedup_cos) {
            return Err(bad("dedup.cos", "must lie in [0, 1]"));
        }
        c.templates
            .validate()
            .map_err(|e| bad("template", &e.to_string()))?;
        Ok(c)
    }

    fn token(&self) -> Option<String> {
        std::env::var(&self.remote_token_env).ok().filter(|t| !t.is_empty())
    }

    fn spec_for(&self, role: &str) -> Option<&BackendSpec> {
        self.backends.get(role).or_else(|| match role {
            "fault" => self.backends.get("planner").or(self.backends.get("default")),
            _ => self.backends.get("default"),
        })
    }

    /// Builds backends for every configured role, sharing one instance per
    /// distinct spec.
    pub fn build_backends(&self) -> Result<BuiltBackends, ConfigError> {
        let mut cache: BTreeMap<BackendSpec, Arc<dyn ModelBackend>> = BTreeMap::new();
        let mut get = |spec: &BackendSpec| -> Result<Arc<dyn ModelBackend>, ConfigError> {
            if let Some(b) = cache.get(spec) {
                return Ok(b.clone());
            }
            let b: Arc<dyn ModelBackend> = match spec {
                BackendSpec::Scripted(p) => Arc::new(ScriptedBackend::load(p)?),
                BackendSpec::Remote(url) => Arc::new(RemoteBackend {
                    endpoint: url.clone(),
                    model: self.remote_model.clone(),
                    token: self.token(),
                    timeout: self.remote_timeout,
                }),
            };
            cache.insert(spec.clone(), b.clone());
            Ok(b)
        };
        let extractor = self.spec_for("extractor").map(&mut get).transpose()?;
        let Some(planner_spec) = self.spec_for("planner") else {
            return Ok((None, extractor));
        };
        let planner = get(planner_spec)?;
        let reflector = self.spec_for("fault").map(&mut get).transpose()?;
        let mut experts = BTreeMap::new();
        for tool in TOOL_ROLES {
            if let Some(spec) = self.spec_for(tool) {
                experts.insert(tool.to_string(), get(spec)?);
            }
        }
        Ok((
            Some(Backends {
                planner,
                reflector,
                experts,
            }),
            extractor,
        ))
    }

    pub fn build_embedder(&self) -> Arc<dyn Embedder> {
        match &self.embedder {
            EmbedderSpec::Hashing => Arc::new(HashingEmbedder::new(self.embed_dim)),
            EmbedderSpec::Remote(url) => Arc::new(RemoteEmbedder {
                endpoint: url.clone(),
                model: self.remote_model.clone(),
                token: self.token(),
                dim: self.embed_dim,
                timeout: self.remote_timeout,
            }),
        }
    }

    pub fn build_image_embedder(&self, text: Arc<dyn Embedder>) -> Result<Arc<dyn ImageEmbedder>, ConfigError> {
        Ok(match &self.image_vectors {
            Some(p) => Arc::new(FixtureImageEmbedder::load(p, self.embed_dim)?),
            None => Arc::new(CaptionImageEmbedder::new(text)),
        })
    }

    pub fn build_extractor(&self) -> Result<Arc<dyn TripleExtractor>, ConfigError> {
        Ok(match &self.extractor {
            ExtractorSpec::Fixture(p) => Arc::new(FixtureExtractor::load(p)?),
            ExtractorSpec::Off => Arc::new(FixtureExtractor::default()),
            ExtractorSpec::Model => {
                let (_, backend) = self.build_backends()?;
                let backend = backend.ok_or_else(|| ConfigError::BadValue {
                    key: "extractor".into(),
                    message: "`model` needs backend.extractor or backend.default".into(),
                })?;
                Arc::new(ModelExtractor::new(backend))
            }
        })
    }

    pub fn build_search(&self) -> Result<Arc<dyn SearchProvider>, ConfigError> {
        Ok(match &self.search {
            SearchSpec::None => Arc::new(FixtureSearch::default()),
            SearchSpec::Fixture(p) => Arc::new(FixtureSearch::load(p)?),
            SearchSpec::Remote(url) => Arc::new(RemoteSearch {
                url: url.clone(),
                timeout: self.remote_timeout,
            }),
        })
    }

    pub fn build_toolbox(&self, graph: SharedGraph) -> Result<Toolbox, ConfigError> {
        let compute = self.compute_url.as_ref().map(|url| ComputeClient {
            url: url.clone(),
            app_id: std::env::var("TOOLGRAPH_COMPUTE_APPID").ok(),
            timeout: self.remote_timeout,
        });
        let tools: Vec<Arc<dyn crate::tools::ExpertTool>> = vec![
            Arc::new(CodeTool::new(Sandbox::new(self.sandbox.clone()))),
            Arc::new(MathTool::new(compute)),
            Arc::new(SearchTool::new(self.build_search()?)),
            Arc::new(KgQueryTool::new(
                graph,
                self.build_embedder(),
                self.retrieval_k,
                self.retrieval_budget,
            )),
        ];
        let mut toolbox = Toolbox::new();
        for t in tools {
            toolbox
                .register(t)
                .map_err(|e| ConfigError::BadValue { key: "tools".into(), message: e.to_string() })?;
        }
        Ok(toolbox)
    }

    pub fn build_engine(&self, graph: SharedGraph) -> Result<Engine, ConfigError> {
        let (backends, _) = self.build_backends()?;
        let backends = backends.ok_or_else(|| ConfigError::BadValue {
            key: "backend.planner".into(),
            message: "no planner backend configured".into(),
        })?;
        let mut engine = Engine::new(self.build_toolbox(graph)?, backends);
        engine.templates = self.templates.clone();
        engine.audit_path = self.audit_log.clone();
        Ok(engine)
    }

    /// Opens the graph file if present, else an empty graph of the
    /// configured dimension.
    pub fn open_graph(&self, path: Option<&Path>) -> Result<PropertyGraph, ConfigError> {
        let Some(path) = path.or(self.graph_path.as_deref()) else {
            return Ok(PropertyGraph::new(self.embed_dim));
        };
        if !path.exists() {
            return Ok(PropertyGraph::new(self.embed_dim));
        }
        let f = std::fs::File::open(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let g = PropertyGraph::import(std::io::BufReader::new(f))?;
        if g.dim() != self.embed_dim {
            return Err(ConfigError::DimensionMismatch {
                graph: g.dim(),
                config: self.embed_dim,
            });
        }
        Ok(g)
    }
}

pub fn shared(graph: PropertyGraph) -> SharedGraph {
    Arc::new(RwLock::new(graph))
}

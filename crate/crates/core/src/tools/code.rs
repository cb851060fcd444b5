//! Code execution in a child process with a wall-clock limit.
//!
//! Each run gets a fresh temporary directory, a cleared environment with a
//! fixed `PATH`, a null stdin, and its own process group so the whole tree
//! can be killed on timeout. There is no OS-level jail.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::backend::{Instruction, ModelBackend};
use super::{code_protocol, invoke_expert, result_line, ExpertTool, ToolCall, ToolOutcome, ToolProtocol};

const SAFE_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Clone, Debug, PartialEq)]
pub struct SandboxConfig {
    /// Interpreter command and leading arguments; the snippet file is
    /// appended.
    pub interpreter: Vec<String>,
    pub file_name: String,
    pub timeout: Duration,
    pub max_concurrent: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            interpreter: vec!["python3".into()],
            file_name: "snippet.py".into(),
            timeout: Duration::from_secs(10),
            max_concurrent: 4,
        }
    }
}

#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    ready: Condvar,
}

/// Runs snippets; clones share the concurrency limit.
#[derive(Clone, Debug)]
pub struct Sandbox {
    config: SandboxConfig,
    slots: Arc<Slots>,
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|p| p.into_inner());
        *free += 1;
        self.0.ready.notify_one();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Exited(i32),
    Signaled,
    TimedOut,
    SpawnFailed(String),
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: RunStatus,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

fn drain<R: Read + Send + 'static>(mut pipe: R) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Self {
        let slots = Arc::new(Slots {
            free: Mutex::new(config.max_concurrent.max(1)),
            ready: Condvar::new(),
        });
        Sandbox { config, slots }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.slots.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.slots.ready.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        SlotGuard(&self.slots)
    }

    pub fn run(&self, snippet: &str, timeout: Option<Duration>) -> RunResult {
        let timeout = timeout.unwrap_or(self.config.timeout);
        let _slot = self.acquire();
        let start = Instant::now();
        let spawn_failed = |msg: String| RunResult {
            status: RunStatus::SpawnFailed(msg),
            stdout: String::new(),
            stderr: String::new(),
            elapsed: start.elapsed(),
        };
        let Some((program, args)) = self.config.interpreter.split_first() else {
            return spawn_failed("no interpreter configured".into());
        };
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return spawn_failed(e.to_string()),
        };
        let file = dir.path().join(&self.config.file_name);
        if let Err(e) = std::fs::write(&file, snippet) {
            return spawn_failed(e.to_string());
        }
        let mut child = match Command::new(program)
            .args(args)
            .arg(&file)
            .current_dir(dir.path())
            .env_clear()
            .env("PATH", SAFE_PATH)
            .env("HOME", dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0)
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return spawn_failed(format!("{program}: {e}")),
        };
        let out = drain(child.stdout.take().expect("stdout piped"));
        let err = drain(child.stderr.take().expect("stderr piped"));

        let status = match child.wait_timeout(timeout) {
            Ok(Some(s)) => match s.code() {
                Some(code) => RunStatus::Exited(code),
                None => RunStatus::Signaled,
            },
            Ok(None) => {
                kill_group(child.id());
                let _ = child.kill();
                let _ = child.wait();
                RunStatus::TimedOut
            }
            Err(e) => {
                kill_group(child.id());
                let _ = child.wait();
                RunStatus::SpawnFailed(e.to_string())
            }
        };
        // The group may still hold the pipes open if a grandchild detached
        // from it; kill it before joining the readers.
        kill_group(child.id());
        RunResult {
            status,
            stdout: out.join().unwrap_or_default(),
            stderr: err.join().unwrap_or_default(),
            elapsed: start.elapsed(),
        }
    }

    /// Runs a snippet and shapes the result as a tool outcome.
    pub fn execute(&self, snippet: &str, timeout: Option<Duration>) -> ToolOutcome {
        let timeout = timeout.unwrap_or(self.config.timeout);
        let r = self.run(snippet, Some(timeout));
        let stdout = r.stdout.trim_end().to_string();
        let combined = if r.stderr.trim().is_empty() {
            stdout.clone()
        } else if stdout.is_empty() {
            r.stderr.trim_end().to_string()
        } else {
            format!("{stdout}\n{}", r.stderr.trim_end())
        };
        let last_err = r
            .stderr
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
            .trim()
            .to_string();
        match r.status {
            RunStatus::Exited(0) => {
                let last = stdout.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
                ToolOutcome::ok(snippet, stdout.clone(), result_line(last))
            }
            RunStatus::Exited(code) => {
                ToolOutcome::failed(snippet, combined, format!("exit status {code}: {last_err}"))
            }
            RunStatus::Signaled => {
                ToolOutcome::failed(snippet, combined, format!("killed by signal: {last_err}"))
            }
            RunStatus::TimedOut => ToolOutcome::failed(
                snippet,
                combined,
                format!("timed out after {:.1}s", timeout.as_secs_f64()),
            ),
            RunStatus::SpawnFailed(msg) => {
                ToolOutcome::failed(snippet, "", format!("could not start interpreter: {msg}"))
            }
        }
    }
}

fn kill_group(pid: u32) {
    // SAFETY: killpg only sends a signal; the group id is the child's pid
    // because it was spawned with process_group(0).
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

pub struct CodeTool {
    sandbox: Sandbox,
}

impl CodeTool {
    pub fn new(sandbox: Sandbox) -> Self {
        CodeTool { sandbox }
    }
}

impl ExpertTool for CodeTool {
    fn protocol(&self) -> ToolProtocol {
        code_protocol()
    }

    fn run(&self, call: &ToolCall) -> ToolOutcome {
        let Some(snippet) = call.str_param("snippet") else {
            return ToolOutcome::failed("", "", "missing `snippet`");
        };
        let timeout = call
            .int_param("timeout_secs")
            .filter(|t| *t > 0)
            .map(|t| Duration::from_secs(t as u64));
        self.sandbox.execute(snippet, timeout)
    }
}

/// Asks the backend for a snippet implementing `step` and runs it.
pub fn code_tool(
    backend: &dyn ModelBackend,
    step_description: &str,
    history_digest: &str,
    sandbox: &Sandbox,
) -> ToolOutcome {
    let instruction = Instruction::new(
        "expert.code",
        format!("Write a program that performs the step and prints its result.\n{history_digest}"),
    );
    let tool = CodeTool::new(sandbox.clone());
    invoke_expert(&tool, Some(backend), &instruction, step_description, step_description).1
}

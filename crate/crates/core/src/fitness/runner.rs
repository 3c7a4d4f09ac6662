//! Child-process execution with a wall-clock limit and peak-RSS accounting.

use std::io::Read;
use std::path::Path;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Success,
    Failure(i32),
    Signal(i32),
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit: ExitKind,
    pub stdout: String,
    pub stderr: String,
    pub wall_ms: f64,
    pub peak_rss_bytes: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("cannot find toolchain program `{program}`")]
    ToolchainMissing { program: String },
    #[error("failed to spawn `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no child-resource accounting on this platform")]
    UnsupportedPlatform,
}

/// Runs one command to completion or until `timeout` elapses.
pub trait ProcessRunner: Send + Sync {
    fn run(&self, argv: &[String], workdir: &Path, timeout: Duration) -> Result<RunOutcome, RunnerError>;

    /// How time and memory are obtained, recorded in every report.
    fn method(&self) -> String;
}

/// Spawns real processes; reaps them with `wait4` to read `ru_maxrss`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemRunner;

#[cfg(unix)]
impl ProcessRunner for SystemRunner {
    fn run(&self, argv: &[String], workdir: &Path, timeout: Duration) -> Result<RunOutcome, RunnerError> {
        use std::os::unix::process::CommandExt;
        use std::process::{Command, Stdio};
        use std::sync::mpsc;
        use std::time::Instant;

        let (program, args) = argv.split_first().ok_or_else(|| RunnerError::ToolchainMissing {
            program: String::new(),
        })?;

        let started = Instant::now();
        let mut child = Command::new(program)
            .args(args)
            .current_dir(workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0)
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => RunnerError::ToolchainMissing {
                    program: program.clone(),
                },
                _ => RunnerError::Spawn {
                    program: program.clone(),
                    source: e,
                },
            })?;
        let pid = child.id() as libc::pid_t;

        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut status: libc::c_int = 0;
            // SAFETY: rusage is plain old data and fully written by wait4 on success.
            let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
            let rc = loop {
                // SAFETY: pid is our unreaped child; pointers are valid for the call.
                let rc = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
                if rc == -1 && std::io::Error::last_os_error().kind() == std::io::ErrorKind::Interrupted {
                    continue;
                }
                break rc;
            };
            let _ = tx.send((rc, status, usage, Instant::now()));
        });

        let mut timed_out = false;
        let (rc, status, usage, finished) = match rx.recv_timeout(timeout) {
            Ok(result) => result,
            Err(_) => {
                timed_out = true;
                // SAFETY: the waiter has not reaped the child yet, so the
                // group led by pid is still ours.
                unsafe { libc::kill(-pid, libc::SIGKILL) };
                rx.recv().expect("waiter thread reports")
            }
        };
        drop(child);

        let wall_ms = finished.duration_since(started).as_secs_f64() * 1000.0;
        let exit = if timed_out {
            ExitKind::Timeout
        } else if rc == -1 {
            ExitKind::Failure(-1)
        } else if libc::WIFEXITED(status) {
            match libc::WEXITSTATUS(status) {
                0 => ExitKind::Success,
                code => ExitKind::Failure(code),
            }
        } else if libc::WIFSIGNALED(status) {
            ExitKind::Signal(libc::WTERMSIG(status))
        } else {
            ExitKind::Failure(-1)
        };

        Ok(RunOutcome {
            exit,
            stdout: stdout.join().unwrap_or_default(),
            stderr: stderr.join().unwrap_or_default(),
            wall_ms,
            peak_rss_bytes: (rc != -1).then(|| maxrss_bytes(usage.ru_maxrss)),
        })
    }

    fn method(&self) -> String {
        "wall-clock median; peak RSS via wait4 ru_maxrss".into()
    }
}

#[cfg(not(unix))]
impl ProcessRunner for SystemRunner {
    fn run(&self, _: &[String], _: &Path, _: Duration) -> Result<RunOutcome, RunnerError> {
        Err(RunnerError::UnsupportedPlatform)
    }

    fn method(&self) -> String {
        "unsupported".into()
    }
}

#[cfg(all(unix, target_os = "macos"))]
fn maxrss_bytes(raw: libc::c_long) -> u64 {
    raw.max(0) as u64
}

#[cfg(all(unix, not(target_os = "macos")))]
fn maxrss_bytes(raw: libc::c_long) -> u64 {
    raw.max(0) as u64 * 1024
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

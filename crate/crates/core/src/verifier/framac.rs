use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

use super::{parse_goal_summary, wp_verdict, EnvironmentError, Verifier, VerifierReport, VerifyPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FramaCConfig {
    pub binary: PathBuf,
    pub prover: String,
    /// Per-goal prover timeout (`-wp-timeout`).
    pub wp_timeout_secs: u64,
    /// Wall-clock cap on a single invocation.
    pub wall_timeout_secs: u64,
    pub extra_args: Vec<String>,
    /// Keep the per-invocation work directories for inspection.
    pub keep_temp: bool,
    pub work_dir: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for FramaCConfig {
    fn default() -> Self {
        Self {
            binary: PathBuf::from("frama-c"),
            prover: "alt-ergo".into(),
            wp_timeout_secs: 10,
            wall_timeout_secs: 300,
            extra_args: Vec::new(),
            keep_temp: false,
            work_dir: None,
            parallelism: 1,
        }
    }
}

/// Runs the real `frama-c` binary.
///
/// Each invocation gets a private directory holding `candidate_<hash>.c`, and
/// the tool runs with that directory as cwd so diagnostics only mention the
/// relative, content-derived file name.
pub struct FramaCVerifier {
    config: FramaCConfig,
    version: String,
    permits: Semaphore,
}

impl FramaCVerifier {
    /// Probes `frama-c -version`; fails if the binary cannot be launched.
    pub fn new(config: FramaCConfig) -> Result<Self, EnvironmentError> {
        let output = Command::new(&config.binary)
            .arg("-version")
            .output()
            .map_err(|e| spawn_error(&config.binary, e))?;
        let version = String::from_utf8_lossy(&output.stdout).trim().to_string();
        let permits = Semaphore::new(config.parallelism.max(1));
        Ok(Self {
            config,
            version,
            permits,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn base_args(&self) -> Vec<String> {
        self.config.extra_args.clone()
    }

    pub fn wp_args(&self) -> Vec<String> {
        let mut args = vec![
            "-wp".to_string(),
            "-wp-prover".to_string(),
            self.config.prover.clone(),
            "-wp-timeout".to_string(),
            self.config.wp_timeout_secs.to_string(),
        ];
        args.extend(self.config.extra_args.iter().cloned());
        args
    }

    fn run(&self, phase: VerifyPhase, code: &str) -> Result<VerifierReport, EnvironmentError> {
        if code.trim().is_empty() {
            return Ok(VerifierReport::synthetic_failure(phase, "empty source file"));
        }
        let _permit = self.permits.acquire();

        let mut builder = tempfile::Builder::new();
        builder.prefix("evoverif-");
        let dir = match &self.config.work_dir {
            Some(root) => {
                std::fs::create_dir_all(root)?;
                builder.tempdir_in(root)?
            }
            None => builder.tempdir()?,
        };
        let file_name = format!("candidate_{}.c", &hex::encode(Sha256::digest(code.as_bytes()))[..16]);
        std::fs::write(dir.path().join(&file_name), code)?;

        let mut args = match phase {
            VerifyPhase::Base => self.base_args(),
            VerifyPhase::Wp => self.wp_args(),
        };
        args.push(file_name);

        let started = Instant::now();
        let (exit_status, mut raw, timed_out) = run_with_timeout(
            &self.config.binary,
            &args,
            dir.path(),
            Duration::from_secs(self.config.wall_timeout_secs),
        )?;
        let duration_ms = started.elapsed().as_millis() as u64;
        if timed_out {
            raw.push_str(&format!(
                "\n[evoverif] verifier timed out after {}s\n",
                self.config.wall_timeout_secs
            ));
        }

        let report = match phase {
            VerifyPhase::Base => VerifierReport {
                pass: !timed_out && exit_status == 0 && !has_error_diagnostics(&raw),
                phase,
                goals_proved: None,
                goals_total: None,
                raw_output: raw,
                exit_status,
                duration_ms,
                verifier_version: self.version.clone(),
            },
            VerifyPhase::Wp => {
                let (proved, total) = parse_goal_summary(&raw);
                VerifierReport {
                    pass: !timed_out && exit_status == 0 && wp_verdict(proved, total),
                    phase,
                    goals_proved: Some(proved),
                    goals_total: Some(total),
                    raw_output: raw,
                    exit_status,
                    duration_ms,
                    verifier_version: self.version.clone(),
                }
            }
        };

        if self.config.keep_temp {
            let kept = dir.keep();
            log::info!("kept verifier work dir {}", kept.display());
        }
        Ok(report)
    }
}

impl Verifier for FramaCVerifier {
    fn check_syntax(&self, code: &str) -> Result<VerifierReport, EnvironmentError> {
        self.run(VerifyPhase::Base, code)
    }

    fn check_semantics(&self, code: &str) -> Result<VerifierReport, EnvironmentError> {
        self.run(VerifyPhase::Wp, code)
    }

    fn fingerprint(&self) -> String {
        format!(
            "frama-c {} | base {:?} | wp {:?} | wall {}s",
            self.version,
            self.base_args(),
            self.wp_args(),
            self.config.wall_timeout_secs
        )
    }
}

/// Error-class diagnostics in Frama-C output. A zero exit status alone is not
/// trusted for the base check.
pub(crate) fn has_error_diagnostics(raw: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?im)(user error|fatal error|syntax error|annot-error|^\[[a-z:-]+\] error|frama-c aborted)")
            .unwrap()
    });
    re.is_match(raw)
}

fn spawn_error(binary: &Path, e: std::io::Error) -> EnvironmentError {
    if e.kind() == std::io::ErrorKind::NotFound {
        EnvironmentError::MissingBinary(binary.display().to_string())
    } else {
        EnvironmentError::Io(e)
    }
}

/// Runs a command, capturing stdout then stderr. Returns
/// `(exit_status, output, timed_out)`; the exit status is -1 when the process
/// was killed or terminated by a signal.
pub(crate) fn run_with_timeout(
    binary: &Path,
    args: &[String],
    cwd: &Path,
    timeout: Duration,
) -> Result<(i32, String, bool), EnvironmentError> {
    let mut child = Command::new(binary)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| spawn_error(binary, e))?;

    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let (status, timed_out) = match child.wait_timeout(timeout)? {
        Some(status) => (status.code().unwrap_or(-1), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (-1, true)
        }
    };
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    let mut raw = String::from_utf8_lossy(&out).into_owned();
    raw.push_str(&String::from_utf8_lossy(&err));
    Ok((status, raw, timed_out))
}

/// Counting semaphore bounding concurrent tool invocations.
struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_diagnostics() {
        assert!(has_error_diagnostics(
            "[kernel:annot-error] a.c:3: Warning: unexpected token '-'\n[kernel] User Error: warning annot-error treated as fatal error."
        ));
        assert!(has_error_diagnostics("[kernel] user error: stopping on file \"a.c\" that has errors."));
        assert!(!has_error_diagnostics("[kernel] Parsing a.c (with preprocessing)\n"));
    }

    #[test]
    fn missing_binary_is_environment_error() {
        let err = FramaCVerifier::new(FramaCConfig {
            binary: PathBuf::from("/nonexistent/frama-c-binary"),
            ..Default::default()
        })
        .err()
        .unwrap();
        assert!(matches!(err, EnvironmentError::MissingBinary(_)));
    }

    #[cfg(unix)]
    #[test]
    fn timeout_kills_process() {
        let dir = tempfile::tempdir().unwrap();
        let (status, _, timed_out) = run_with_timeout(
            Path::new("sleep"),
            &["5".to_string()],
            dir.path(),
            Duration::from_millis(100),
        )
        .unwrap();
        assert!(timed_out);
        assert_eq!(status, -1);
    }

    #[cfg(unix)]
    #[test]
    fn fake_frama_c_round_trip() {
        use std::os::unix::fs::PermissionsExt;
        // Shell stand-in that mimics the CLI surface closely enough to
        // exercise argument plumbing, output capture and verdict parsing.
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("frama-c");
        std::fs::write(
            &script,
            "#!/bin/sh\n\
             if [ \"$1\" = \"-version\" ]; then echo '31.0 (Gallium)'; exit 0; fi\n\
             for last; do :; done\n\
             if grep -q -- '--->' \"$last\"; then echo \"[kernel:annot-error] $last:2: Warning: unexpected token\"; echo '[kernel] User Error: warning annot-error treated as fatal error.'; exit 1; fi\n\
             if [ \"$1\" = \"-wp\" ]; then\n\
               if grep -q 'loop invariant' \"$last\"; then echo '[wp] Proved goals:   12 / 12'; else echo '[wp] Proved goals:    9 / 12'; fi\n\
             fi\n\
             echo \"[kernel] Parsing $last (with preprocessing)\"\n\
             exit 0\n",
        )
        .unwrap();
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

        let v = FramaCVerifier::new(FramaCConfig {
            binary: script,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(v.version(), "31.0 (Gallium)");

        let good = "/*@ loop invariant 0 <= i; */ int f(void){return 0;}";
        let base = v.check_syntax(good).unwrap();
        assert!(base.pass);
        let wp = v.check_semantics(good).unwrap();
        assert!(wp.pass);
        assert_eq!((wp.goals_proved, wp.goals_total), (Some(12), Some(12)));

        let weak = "/*@ ensures \\result == 0; */ int f(void){return 0;}";
        let wp = v.check_semantics(weak).unwrap();
        assert!(!wp.pass);
        assert_eq!(wp.goals_proved, Some(9));

        let broken = "/*@ ensures a ---> b; */ int f(void){return 0;}";
        let base = v.check_syntax(broken).unwrap();
        assert!(!base.pass);
        assert_eq!(base.exit_status, 1);
        assert!(base.raw_output.contains("candidate_"));
        assert!(base.verifier_version.starts_with("31.0"));
        assert!(v.fingerprint().contains("-wp-timeout"));
    }
}

//! Bridge to regressors run as subprocesses.
//!
//! The dataset is written to a temporary CSV file (`x1,...,xd,y`). The
//! command line gets the file path substituted for `{input}`, or appended if
//! there is no placeholder, and runs through `sh -c`. The first non-empty
//! line of standard output is parsed as the model expression.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::Duration;

use symreduce_core::expr::{parse, ExprDag};
use symreduce_core::regress::{RegressError, Regressor};
use symreduce_core::Dataset;
use wait_timeout::ChildExt;

use crate::io::write_dataset;

#[derive(Clone, Debug)]
pub struct ExternalRegressor {
    pub command: String,
    pub timeout: Duration,
}

impl ExternalRegressor {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        ExternalRegressor { command: command.into(), timeout }
    }

    fn command_line(&self, path: &str) -> String {
        let quoted = format!("'{}'", path.replace('\'', r"'\''"));
        if self.command.contains("{input}") {
            self.command.replace("{input}", &quoted)
        } else {
            format!("{} {quoted}", self.command)
        }
    }
}

fn failure(msg: impl Into<String>) -> RegressError {
    RegressError::ExternalFailure(msg.into())
}

/// Runs the command on `ds` and parses its answer.
pub fn fit_external(ds: &Dataset, reg: &ExternalRegressor) -> Result<ExprDag, RegressError> {
    let mut file = tempfile::Builder::new()
        .prefix("symreduce-")
        .suffix(".csv")
        .tempfile()
        .map_err(|e| failure(format!("temporary file: {e}")))?;
    write_dataset(ds, file.as_file_mut()).map_err(|e| failure(e.to_string()))?;
    let path = file.path().to_string_lossy().into_owned();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(reg.command_line(&path))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| failure(format!("spawn: {e}")))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let status = match child.wait_timeout(reg.timeout).map_err(|e| failure(e.to_string()))? {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(failure(format!("timed out after {:?}", reg.timeout)));
        }
    };
    let out = reader
        .join()
        .map_err(|_| failure("stdout reader panicked"))?
        .map_err(|e| failure(format!("reading stdout: {e}")))?;
    if !status.success() {
        return Err(failure(format!("exit status {status}")));
    }
    let line = out.lines().map(str::trim).find(|l| !l.is_empty()).ok_or_else(|| failure("no output"))?;
    let expr = parse(line).map_err(|e| failure(format!("unparsable output {line:?}: {e}")))?;
    if expr.arity() > ds.n_vars() {
        return Err(failure(format!("output uses x{} but the dataset has {} columns", expr.arity(), ds.n_vars())));
    }
    Ok(expr)
}

impl Regressor for ExternalRegressor {
    fn name(&self) -> String {
        format!("external:{}", self.command)
    }

    fn fit(&self, ds: &Dataset) -> Result<ExprDag, RegressError> {
        fit_external(ds, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use symreduce_core::Matrix;

    fn ds() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0 + i as f64]).collect();
        let y = rows.iter().map(|r| r[0] + r[1]).collect();
        Dataset::new(Matrix::from_rows(&rows), y).unwrap()
    }

    fn run(cmd: &str) -> Result<ExprDag, RegressError> {
        fit_external(&ds(), &ExternalRegressor::new(cmd, Duration::from_secs(10)))
    }

    #[test]
    fn echo_stub_is_parsed() {
        assert_eq!(run("echo 'x1+x2' #").unwrap(), parse("x1+x2").unwrap());
        assert_eq!(run("printf '\\n\\nx1*x2\\nignored\\n' #").unwrap(), parse("x1*x2").unwrap());
    }

    #[test]
    fn stub_sees_the_csv() {
        let e = run("head -n 1 {input} | grep -q '^x1,x2,y$' && echo x2").unwrap();
        assert_eq!(e, parse("x2").unwrap());
    }

    #[test]
    fn failures_are_reported() {
        assert!(matches!(run("exit 3"), Err(RegressError::ExternalFailure(_))));
        assert!(matches!(run("echo '((' #"), Err(RegressError::ExternalFailure(_))));
        assert!(matches!(run("echo x7 #"), Err(RegressError::ExternalFailure(_))));
        assert!(matches!(run("true"), Err(RegressError::ExternalFailure(_))));
        let slow = ExternalRegressor::new("sleep 5; echo x1 #", Duration::from_millis(200));
        assert!(matches!(fit_external(&ds(), &slow), Err(RegressError::ExternalFailure(_))));
    }
}

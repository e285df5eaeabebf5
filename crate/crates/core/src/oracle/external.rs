//! Adapter for classifiers living in a separate process.
//!
//! Wire protocol, one line each way:
//!
//! 1. Handshake. The client sends `HARDLABEL ORACLE 1`; the server replies
//!    `HARDLABEL ORACLE 1 <dim> <classes>`, declaring its input dimension and
//!    class count.
//! 2. Queries. The client sends `dim` space-separated decimals on one line;
//!    the server replies with one integer label per line.
//!
//! The server side is implemented by [`serve_stdio`], so any model file can
//! be bridged over the protocol; real deployments substitute their own
//! process. Purity (same input, same label) is the server's responsibility.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use super::{Label, Model, OracleError};

const PROTOCOL_NAME: &str = "HARDLABEL ORACLE";
const PROTOCOL_VERSION: u32 = 1;

struct ExternalProcess {
    child: Mutex<Child>,
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
    dim: usize,
    classes: usize,
    command: String,
}

impl Drop for ExternalProcess {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl std::fmt::Debug for ExternalProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalProcess")
            .field("command", &self.command)
            .field("dim", &self.dim)
            .field("classes", &self.classes)
            .finish()
    }
}

/// Handle to an external classification process.
///
/// Cloning shares the underlying child; queries from concurrent handles are
/// serialized through one pipe pair.
#[derive(Clone, Debug)]
pub struct ExternalOracle {
    inner: Arc<ExternalProcess>,
}

impl ExternalOracle {
    /// Spawns `cmd args…` and performs the protocol handshake.
    pub fn spawn(cmd: &str, args: &[String]) -> Result<Self, OracleError> {
        let mut child = Command::new(cmd)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut reader = BufReader::new(stdout);

        writeln!(stdin, "{PROTOCOL_NAME} {PROTOCOL_VERSION}")?;
        stdin.flush()?;
        let mut greeting = String::new();
        reader.read_line(&mut greeting)?;
        let (dim, classes) = parse_greeting(greeting.trim())?;

        Ok(ExternalOracle {
            inner: Arc::new(ExternalProcess {
                child: Mutex::new(child),
                io: Mutex::new((stdin, reader)),
                dim,
                classes,
                command: cmd.to_string(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn num_classes(&self) -> usize {
        self.inner.classes
    }

    pub fn query(&self, x: &[f64]) -> Result<Label, OracleError> {
        let mut io = self
            .inner
            .io
            .lock()
            .map_err(|_| OracleError::Protocol("oracle pipe poisoned".into()))?;
        let (stdin, reader) = &mut *io;
        let mut line = String::with_capacity(x.len() * 20);
        for (i, v) in x.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            // Shortest round-trip formatting keeps full f64 precision.
            line.push_str(&format!("{v}"));
        }
        line.push('\n');
        stdin.write_all(line.as_bytes())?;
        stdin.flush()?;

        let mut reply = String::new();
        let n = reader.read_line(&mut reply)?;
        if n == 0 {
            return Err(OracleError::Protocol(
                "oracle process closed its output".into(),
            ));
        }
        let label: usize = reply.trim().parse().map_err(|_| {
            OracleError::Protocol(format!("expected integer label, got {:?}", reply.trim()))
        })?;
        if label >= self.inner.classes {
            return Err(OracleError::Protocol(format!(
                "label {label} out of range (k = {})",
                self.inner.classes
            )));
        }
        Ok(Label(label))
    }
}

fn parse_greeting(line: &str) -> Result<(usize, usize), OracleError> {
    let rest = line
        .strip_prefix(PROTOCOL_NAME)
        .ok_or_else(|| OracleError::Protocol(format!("unexpected greeting {line:?}")))?;
    let mut fields = rest.split_whitespace();
    let version: u32 = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| OracleError::Protocol(format!("missing protocol version in {line:?}")))?;
    if version != PROTOCOL_VERSION {
        return Err(OracleError::Protocol(format!(
            "protocol version mismatch: speaking {PROTOCOL_VERSION}, server says {version}"
        )));
    }
    let dim: usize = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| OracleError::Protocol(format!("missing dimension in {line:?}")))?;
    let classes: usize = fields
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| OracleError::Protocol(format!("missing class count in {line:?}")))?;
    if dim == 0 || classes < 2 {
        return Err(OracleError::Protocol(format!(
            "implausible greeting: dim={dim}, classes={classes}"
        )));
    }
    Ok((dim, classes))
}

/// Serves `model` over the wire protocol on stdin/stdout until EOF.
pub fn serve_stdio(model: &Model) -> Result<(), OracleError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve(model, stdin.lock(), stdout.lock())
}

fn serve<R: BufRead, W: Write>(
    model: &Model,
    mut input: R,
    mut output: W,
) -> Result<(), OracleError> {
    let mut hello = String::new();
    if input.read_line(&mut hello)? == 0 {
        return Ok(());
    }
    let expected = format!("{PROTOCOL_NAME} {PROTOCOL_VERSION}");
    if hello.trim() != expected {
        return Err(OracleError::Protocol(format!(
            "client sent {:?}, expected {expected:?}",
            hello.trim()
        )));
    }
    writeln!(
        output,
        "{PROTOCOL_NAME} {PROTOCOL_VERSION} {} {}",
        model.dim(),
        model.num_classes()
    )?;
    output.flush()?;

    let dim = model.dim();
    let mut line = String::new();
    let mut x = vec![0.0; dim];
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (i, tok) in line.split_whitespace().enumerate() {
            if i >= dim {
                return Err(OracleError::Protocol(format!(
                    "query has more than {dim} fields"
                )));
            }
            x[i] = tok
                .parse()
                .map_err(|_| OracleError::Protocol(format!("bad decimal {tok:?}")))?;
            count = i + 1;
        }
        if count != dim {
            return Err(OracleError::Protocol(format!(
                "query has {count} fields, expected {dim}"
            )));
        }
        let label = model.predict_for_serve(&x)?;
        writeln!(output, "{label}")?;
        output.flush()?;
    }
}

impl Model {
    /// Prediction entry point for the protocol server; identical to the
    /// oracle path but without a counter to bump.
    fn predict_for_serve(&self, x: &[f64]) -> Result<Label, OracleError> {
        match self {
            Model::Radial(m) => Ok(Label(usize::from(crate::vecmath::norm_sq(x) >= m.r_sq))),
            Model::Linear(m) => Ok(Label(usize::from(crate::vecmath::dot(&m.w, x) >= m.b))),
            Model::Mlp(m) => Ok(m.predict(x)),
            Model::Gbdt(m) => Ok(m.predict(x)),
            Model::External(m) => m.query(x),
        }
    }
}

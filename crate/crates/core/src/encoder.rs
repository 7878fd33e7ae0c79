//! Fixed-length sentence vectors.
//!
//! The built-in encoder is signed feature hashing of idf-weighted word
//! unigrams and bigrams, L2-normalized. External encoders plug in through
//! [`ExternalEncoder`], spoken to over a line protocol:
//!
//! ```text
//! request:  EMBED<TAB>escaped text
//! response: D<TAB>v1,v2,...,vD
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::{mpsc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::text::{escape_field, words};

pub const DEFAULT_DIMENSION: usize = 512;
pub const MIN_DIMENSION: usize = 16;
pub const DEFAULT_HASH_SEED: u64 = 0x6865_6172_6b65_6e31;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("cannot fit an encoder on an empty corpus")]
    EmptyCorpus,
    #[error("encoder dimension {0} is below the minimum of {MIN_DIMENSION}")]
    InvalidDimension(usize),
    #[error("external encoder unreachable: {0}")]
    AdapterUnreachable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("malformed adapter response: {0}")]
    MalformedResponse(String),
    #[error("encoder file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Baseline,
    External,
}

/// A dense sentence vector tagged with the fingerprint of the encoder that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub fingerprint: String,
}

impl Embedding {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        cosine(&self.values, &other.values)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

fn normalize(values: &mut [f64]) {
    let n = l2_norm(values);
    if n > 0.0 {
        values.iter_mut().for_each(|x| *x /= n);
    }
}

/// Anything that maps text to an [`Embedding`].
pub trait TextEncoder: Send + Sync {
    fn fingerprint(&self) -> &str;
    fn dimension(&self) -> usize;
    fn encode_text(&self, text: &str) -> Result<Embedding, EncoderError>;
}

/// Word unigrams followed by adjacent-word bigrams.
pub fn features(text: &str) -> Vec<String> {
    let unigrams = words(text);
    let bigrams: Vec<String> = unigrams.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
    let mut out = unigrams;
    out.extend(bigrams);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub dimension: usize,
    pub doc_count: usize,
    pub idf: BTreeMap<String, f64>,
    pub hash_seed: u64,
    pub kind: EncoderKind,
    pub fingerprint: String,
}

impl EncoderModel {
    pub fn fit<S: AsRef<str>>(corpus: &[S], dimension: usize) -> Result<Self, EncoderError> {
        Self::fit_with_seed(corpus, dimension, DEFAULT_HASH_SEED)
    }

    /// Smoothed idf, `ln((1 + N) / (1 + df)) + 1`, over unigrams and bigrams.
    pub fn fit_with_seed<S: AsRef<str>>(corpus: &[S], dimension: usize, hash_seed: u64) -> Result<Self, EncoderError> {
        if corpus.is_empty() {
            return Err(EncoderError::EmptyCorpus);
        }
        if dimension < MIN_DIMENSION {
            return Err(EncoderError::InvalidDimension(dimension));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let unique: HashSet<String> = features(doc.as_ref()).into_iter().collect();
            for token in unique {
                *df.entry(token).or_default() += 1;
            }
        }
        let n = corpus.len();
        let idf = df.into_iter().map(|(t, d)| (t, smoothed_idf(n, d))).collect();
        let mut model = Self {
            dimension,
            doc_count: n,
            idf,
            hash_seed,
            kind: EncoderKind::Baseline,
            fingerprint: String::new(),
        };
        model.fingerprint = model.compute_fingerprint();
        Ok(model)
    }

    pub fn idf_of(&self, token: &str) -> f64 {
        self.idf.get(token).copied().unwrap_or_else(|| smoothed_idf(self.doc_count, 0))
    }

    pub fn encode(&self, text: &str) -> Embedding {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for f in features(text) {
            *counts.entry(f).or_default() += 1;
        }
        let mut values = vec![0.0; self.dimension];
        for (token, count) in &counts {
            let bytes = token.as_bytes();
            let index = (xxh3_64_with_seed(bytes, self.hash_seed) % self.dimension as u64) as usize;
            let sign = if xxh3_64_with_seed(bytes, self.hash_seed ^ SIGN_SALT) & 1 == 0 { 1.0 } else { -1.0 };
            values[index] += sign * *count as f64 * self.idf_of(token);
        }
        normalize(&mut values);
        Embedding { values, fingerprint: self.fingerprint.clone() }
    }

    pub fn compute_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}|{}|{}|{}|", self.kind, self.dimension, self.hash_seed, self.doc_count));
        for (token, idf) in &self.idf {
            h.update(token.as_bytes());
            h.update([0u8]);
            h.update(idf.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("encoder serializes")
    }

    /// Loads a model and checks that its stored fingerprint matches its content.
    pub fn from_json(text: &str) -> Result<Self, EncoderError> {
        let model: Self = serde_json::from_str(text).map_err(|e| EncoderError::File(e.to_string()))?;
        if model.dimension < MIN_DIMENSION {
            return Err(EncoderError::InvalidDimension(model.dimension));
        }
        if model.compute_fingerprint() != model.fingerprint {
            return Err(EncoderError::File("fingerprint does not match model content".into()));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = std::fs::read_to_string(path).map_err(|e| EncoderError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl TextEncoder for EncoderModel {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode_text(&self, text: &str) -> Result<Embedding, EncoderError> {
        Ok(self.encode(text))
    }
}

fn smoothed_idf(n: usize, df: usize) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// A pretrained encoder living outside this process.
pub trait ExternalEncoder: Send {
    /// Stable name, folded into the fingerprint of the vectors it produces.
    fn name(&self) -> &str;
    /// Embeds one text, returning the dimension the adapter declared and the vector.
    fn embed(&mut self, text: &str) -> Result<(usize, Vec<f64>), EncoderError>;
}

pub fn external_fingerprint(name: &str, dimension: usize) -> String {
    let digest = Sha256::digest(format!("External|{name}|{dimension}"));
    hex::encode(&digest[..16])
}

/// Embeds every text through `adapter`, all or nothing.
///
/// Vectors are L2-normalized here if the adapter did not already do so.
pub fn encode_external(
    adapter: &mut dyn ExternalEncoder,
    texts: &[&str],
    expected_dimension: usize,
) -> Result<Vec<Embedding>, EncoderError> {
    let fingerprint = external_fingerprint(adapter.name(), expected_dimension);
    let mut out = Vec::with_capacity(texts.len());
    for text in texts {
        let (declared, mut values) = adapter.embed(text)?;
        if declared != expected_dimension {
            return Err(EncoderError::DimensionMismatch { expected: expected_dimension, actual: declared });
        }
        if values.len() != declared {
            return Err(EncoderError::DimensionMismatch { expected: declared, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::MalformedResponse("non-finite component".into()));
        }
        let norm = l2_norm(&values);
        if norm > 0.0 && (norm - 1.0).abs() > 1e-9 {
            normalize(&mut values);
        }
        out.push(Embedding { values, fingerprint: fingerprint.clone() });
    }
    Ok(out)
}

pub fn format_request(text: &str) -> String {
    format!("EMBED\t{}", escape_field(text))
}

pub fn parse_response(line: &str) -> Result<(usize, Vec<f64>), EncoderError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let (dim, rest) = line
        .split_once('\t')
        .ok_or_else(|| EncoderError::MalformedResponse(format!("missing tab in {line:?}")))?;
    let dim: usize = dim.trim().parse().map_err(|_| EncoderError::MalformedResponse(format!("bad dimension {dim:?}")))?;
    let values = if rest.trim().is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| EncoderError::MalformedResponse(format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok((dim, values))
}

/// Talks to a child process over stdin/stdout, one request line per text.
pub struct PipeAdapter {
    name: String,
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl PipeAdapter {
    pub fn spawn(program: &str, args: &[&str], timeout: Duration) -> Result<Self, EncoderError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| EncoderError::AdapterUnreachable(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { name: program.to_string(), child, stdin, lines: rx, timeout })
    }
}

impl ExternalEncoder for PipeAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&mut self, text: &str) -> Result<(usize, Vec<f64>), EncoderError> {
        writeln!(self.stdin, "{}", format_request(text))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EncoderError::AdapterUnreachable(e.to_string()))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => parse_response(&line),
            Ok(Err(e)) => Err(EncoderError::AdapterUnreachable(e.to_string())),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(EncoderError::AdapterUnreachable("timed out".into())),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(EncoderError::AdapterUnreachable("adapter exited".into())),
        }
    }
}

impl Drop for PipeAdapter {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs the request line to `{base_url}/embed` and reads the response line.
pub struct HttpAdapter {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpAdapter {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, EncoderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EncoderError::AdapterUnreachable(e.to_string()))?;
        Ok(Self { base_url: base_url.trim_end_matches('/').to_string(), client })
    }
}

impl ExternalEncoder for HttpAdapter {
    fn name(&self) -> &str {
        &self.base_url
    }

    fn embed(&mut self, text: &str) -> Result<(usize, Vec<f64>), EncoderError> {
        let response = self
            .client
            .post(format!("{}/embed", self.base_url))
            .header("content-type", "text/plain; charset=utf-8")
            .body(format_request(text))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EncoderError::AdapterUnreachable(e.to_string()))?;
        let body = response.text().map_err(|e| EncoderError::AdapterUnreachable(e.to_string()))?;
        parse_response(body.lines().next().unwrap_or(""))
    }
}

/// An external adapter usable wherever a [`TextEncoder`] is expected.
pub struct ExternalTextEncoder {
    adapter: Mutex<Box<dyn ExternalEncoder>>,
    dimension: usize,
    fingerprint: String,
}

impl ExternalTextEncoder {
    pub fn new(adapter: Box<dyn ExternalEncoder>, dimension: usize) -> Self {
        let fingerprint = external_fingerprint(adapter.name(), dimension);
        Self { adapter: Mutex::new(adapter), dimension, fingerprint }
    }
}

impl TextEncoder for ExternalTextEncoder {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode_text(&self, text: &str) -> Result<Embedding, EncoderError> {
        let mut adapter = self.adapter.lock().unwrap_or_else(|p| p.into_inner());
        let mut out = encode_external(adapter.as_mut(), &[text], self.dimension)?;
        Ok(out.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> EncoderModel {
        EncoderModel::fit(&["i like football", "reading books is fun", "i like reading"], 64).unwrap()
    }

    #[test]
    fn smoothed_idf_matches_hand_computation() {
        let m = EncoderModel::fit(&["alpha beta", "alpha gamma"], 16).unwrap();
        // ln(3/3) + 1
        assert!((m.idf_of("alpha") - 1.0).abs() < 1e-15);
        // ln(3/2) + 1
        assert!((m.idf_of("beta") - (1.5f64.ln() + 1.0)).abs() < 1e-15);
        // unseen: ln(1 + N) + 1
        assert!((m.idf_of("zeta") - (3.0f64.ln() + 1.0)).abs() < 1e-15);
        assert!(m.idf.contains_key("alpha beta"));
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(EncoderModel::fit::<&str>(&[], 64), Err(EncoderError::EmptyCorpus)));
        assert!(matches!(EncoderModel::fit(&["x"], 8), Err(EncoderError::InvalidDimension(8))));
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = model();
        assert_eq!(a.fingerprint, model().fingerprint);
        let wider = EncoderModel::fit(&["i like football", "reading books is fun", "i like reading"], 128).unwrap();
        assert_ne!(a.fingerprint, wider.fingerprint);
        let reseeded =
            EncoderModel::fit_with_seed(&["i like football", "reading books is fun", "i like reading"], 64, 1).unwrap();
        assert_ne!(a.fingerprint, reseeded.fingerprint);
        let mut tweaked = a.clone();
        tweaked.idf.insert("football".into(), 2.0);
        assert_ne!(a.fingerprint, tweaked.compute_fingerprint());
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = model().encode("");
        assert_eq!(e.values, vec![0.0; 64]);
        assert_eq!(model().encode("?!").norm(), 0.0);
    }

    #[test]
    fn json_round_trip_checks_fingerprint() {
        let m = model();
        assert_eq!(EncoderModel::from_json(&m.to_json()).unwrap(), m);
        let mut tampered = m.clone();
        tampered.hash_seed += 1;
        assert!(EncoderModel::from_json(&tampered.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn encodings_are_unit_length(s in "[a-z]{1,8}( [a-z]{1,8}){0,12}") {
            let m = model();
            let e = m.encode(&s);
            prop_assert!((e.norm() - 1.0).abs() < 1e-9);
            prop_assert!((e.cosine(&m.encode(&s)) - 1.0).abs() < 1e-9);
            prop_assert_eq!(e, m.encode(&s));
        }
    }

    struct BasisStub {
        dim: usize,
        next: usize,
    }

    impl ExternalEncoder for BasisStub {
        fn name(&self) -> &str {
            "basis"
        }
        fn embed(&mut self, _text: &str) -> Result<(usize, Vec<f64>), EncoderError> {
            let mut v = vec![0.0; self.dim];
            v[self.next % self.dim] = 1.0;
            self.next += 1;
            Ok((self.dim, v))
        }
    }

    #[test]
    fn basis_stub_passes_through() {
        let mut stub = BasisStub { dim: 4, next: 0 };
        let out = encode_external(&mut stub, &["a", "b"], 4).unwrap();
        assert_eq!(out[0].values, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(out[1].values, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn wrong_declared_dimension_is_rejected() {
        let mut stub = BasisStub { dim: 768, next: 0 };
        assert!(matches!(
            encode_external(&mut stub, &["a"], 512),
            Err(EncoderError::DimensionMismatch { expected: 512, actual: 768 })
        ));
    }

    #[test]
    fn unnormalized_adapter_output_is_normalized() {
        struct Scaled;
        impl ExternalEncoder for Scaled {
            fn name(&self) -> &str {
                "scaled"
            }
            fn embed(&mut self, _: &str) -> Result<(usize, Vec<f64>), EncoderError> {
                Ok((2, vec![3.0, 4.0]))
            }
        }
        let out = encode_external(&mut Scaled, &["x"], 2).unwrap();
        assert!((out[0].values[0] - 0.6).abs() < 1e-12 && (out[0].values[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn response_parsing() {
        assert_eq!(parse_response("3\t1,0,0.5\n").unwrap(), (3, vec![1.0, 0.0, 0.5]));
        assert!(parse_response("3 1,2,3").is_err());
        assert!(parse_response("x\t1").is_err());
        assert_eq!(format_request("a\tb"), "EMBED\ta\\tb");
    }

    #[cfg(unix)]
    #[test]
    fn pipe_adapter_round_trip() {
        let script = r#"while read -r line; do printf '4\t0,0,1,0\n'; done"#;
        let mut adapter = PipeAdapter::spawn("sh", &["-c", script], Duration::from_secs(5)).unwrap();
        let out = encode_external(&mut adapter, &["hello", "world"], 4).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].values, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[cfg(unix)]
    #[test]
    fn pipe_adapter_timeout_emits_nothing() {
        let mut adapter = PipeAdapter::spawn("sh", &["-c", "sleep 5"], Duration::from_millis(200)).unwrap();
        assert!(matches!(encode_external(&mut adapter, &["a", "b"], 4), Err(EncoderError::AdapterUnreachable(_))));
    }

    #[test]
    fn missing_program_is_unreachable() {
        assert!(matches!(
            PipeAdapter::spawn("/nonexistent/encoder", &[], Duration::from_millis(100)),
            Err(EncoderError::AdapterUnreachable(_))
        ));
    }
}

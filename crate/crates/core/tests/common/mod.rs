//! Oracles and fixture loaders shared by the integration suites.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fincot_core::extraction::ExtractionMethod;
use fincot_core::inference::{ChatClient, GenerationParams, InferenceError, ModelResponse};
use fincot_core::AnswerLetter;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn sample_dataset() -> PathBuf {
    fixtures().join("datasets/cfa_sample.jsonl")
}

/// Exact distribution of the resampled mean: every multiset of `n` draws
/// from `d`, weighted by its multinomial probability. Returns sorted
/// `(mean, probability)` atoms.
pub fn exact_distribution(d: &[f64]) -> Vec<(f64, f64)> {
    let n = d.len();
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let total = (n as f64).powi(n as i32);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut counts = vec![0usize; n];

    fn recurse(i: usize, left: usize, counts: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if i == counts.len() - 1 {
            counts[i] = left;
            visit(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            recurse(i + 1, left - c, counts, visit);
        }
    }

    recurse(0, n, &mut counts, &mut |c| {
        let weight = fact(n) / c.iter().map(|&k| fact(k)).product::<f64>() / total;
        // Integer numerator keeps equal means exactly equal.
        let num: f64 = c.iter().zip(d).map(|(&k, &x)| k as f64 * x).sum();
        let mean = num / n as f64;
        match atoms.iter_mut().find(|(m, _)| *m == mean) {
            Some(a) => a.1 += weight,
            None => atoms.push((mean, weight)),
        }
    });
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

pub struct Exact {
    pub p_value: f64,
    pub ci: (f64, f64),
    /// Distance from each CI quantile to the nearest CDF jump.
    pub margins: (f64, f64),
}

pub fn exact_summary(d: &[f64]) -> Exact {
    let atoms = exact_distribution(d);
    let below: f64 = atoms.iter().filter(|a| a.0 <= 0.0).map(|a| a.1).sum();
    let above: f64 = atoms.iter().filter(|a| a.0 >= 0.0).map(|a| a.1).sum();
    let quantile = |q: f64| {
        let mut cdf = 0.0;
        for &(m, p) in &atoms {
            let prev = cdf;
            cdf += p;
            if cdf >= q - 1e-12 {
                return (m, (q - prev).min(cdf - q).abs());
            }
        }
        (atoms.last().unwrap().0, 1.0)
    };
    let (lo, m_lo) = quantile(0.025);
    let (hi, m_hi) = quantile(0.975);
    Exact {
        p_value: 2.0 * below.min(above),
        ci: (100.0 * lo, 100.0 * hi),
        margins: (m_lo, m_hi),
    }
}

pub fn diffs(a: &[bool], b: &[bool]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(u8::from(x)) - f64::from(u8::from(y)))
        .collect()
}

pub struct Case {
    pub name: String,
    pub content: String,
    pub letter: Option<AnswerLetter>,
    pub method: ExtractionMethod,
}

fn corpus_dir() -> PathBuf {
    fixtures().join("extraction")
}

fn parse_expected(text: &str) -> (Option<AnswerLetter>, ExtractionMethod) {
    let mut letter = None;
    let mut method = None;
    for line in text.lines() {
        let (key, value) = line.split_once(':').expect("key: value");
        match (key.trim(), value.trim()) {
            ("letter", "none") => letter = Some(None),
            ("letter", v) => {
                letter = Some(Some(
                    AnswerLetter::from_char(v.chars().next().unwrap()).expect("letter"),
                ))
            }
            ("method", "tagged") => method = Some(ExtractionMethod::Tagged),
            ("method", "fallback_pattern") => method = Some(ExtractionMethod::FallbackPattern),
            ("method", "none") => method = Some(ExtractionMethod::None),
            other => panic!("unexpected annotation {other:?}"),
        }
    }
    (
        letter.expect("letter annotation"),
        method.expect("method annotation"),
    )
}

pub fn load_corpus() -> Vec<Case> {
    let mut paths: Vec<PathBuf> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let (letter, method) =
                parse_expected(&fs::read_to_string(p.with_extension("expected")).unwrap());
            Case {
                name: p.file_stem().unwrap().to_string_lossy().into_owned(),
                content: fs::read_to_string(&p).unwrap(),
                letter,
                method,
            }
        })
        .collect()
}

// Independent transcriptions of the two published system prompts. Trailing
// spaces are significant.
pub const ST_COT: &str = concat!(
    "You are a CFA (chartered financial analyst) taking a test to evaluate your knowledge of finance. You think step-by-step approach \n",
    "to answer queries.  \n",
    "\n",
    "Follow these steps:\n",
    "1. Think through the problem step by step within the <thinking> tags.\n",
    "2. Provide your final, concise answer within the <output> tags.\n",
    "\n",
    "The <thinking> sections are for your internal reasoning process only. \n",
    "Do not include any part of the final answer in these sections.\n",
    "The actual response to the query must be entirely contained within the <output> tags.\n",
    "\n",
    "### Response Format:\n",
    "<thinking>\n",
    "[Reasoning through options A, B, and C to understand and solve the problem.]\n",
    "</thinking>\n",
    "<output>\n",
    "\"answer\": [Final your answer (A , B , or C )]\n",
    "</output>",
);

pub const FINCOT_BEFORE_HINT: &str = concat!(
    "You are taking a test for the Chartered Financial Analyst (CFA) program designed to evaluate your knowledge of different topics in \n",
    "finance. You think step-by-step approach with reflection to answer queries. \n",
    "\n",
    "Follow these steps:\n",
    "1. Think through the problem step by step reflect and verify while reasoning within the <thinking> tags.\n",
    "2. Please and put the answer your final, concise answer within the <output> tags.\n",
    "\n",
    "The <thinking> sections are for your internal reasoning process only. \n",
    "Do not include any part of the final answer in these sections.\n",
    "The actual response to the query must be entirely contained within the <output> tags.\n",
    "\n",
    "Hint:",
);

pub const FINCOT_AFTER_HINT: &str = concat!(
    " \n",
    "\n",
    "### Response Format:\n",
    "<thinking>\n",
    "[Think step by step and respond with your thinking and the correct answer (A, B, or C ), considering the specific sector.]\n",
    "</thinking>\n",
    "\n",
    "<output>\n",
    "\"sector\": [The sector being addressed],\n",
    "\"question\": [The financial question],\n",
    "\"answer\": [Reflect and verify the final answer (A, B, or C)]\n",
    "</output>",
);

// Hand-transcribed from the Economics flowchart.
pub const ECONOMICS_EDGES: [(&str, &str); 20] = [
    ("A", "A1"),
    ("A1", "A2"),
    ("A1", "A3"),
    ("A1", "A4"),
    ("A2", "B1"),
    ("A3", "B2"),
    ("A4", "B3"),
    ("B1", "C"),
    ("B2", "C"),
    ("B3", "C"),
    ("C", "D1"),
    ("C", "D2"),
    ("D1", "E"),
    ("D2", "E"),
    ("E", "E1"),
    ("E", "E2"),
    ("E1", "F"),
    ("E2", "F"),
    ("F", "F1"),
    ("F1", "F2"),
];

/// Wraps a client, counting requests and failing every call after `limit`.
pub struct Interrupting<C> {
    pub inner: C,
    pub calls: AtomicUsize,
    pub limit: usize,
    pub seen: Mutex<Vec<String>>,
}

impl<C: ChatClient> ChatClient for Interrupting<C> {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.limit {
            return Err(InferenceError::Timeout);
        }
        self.seen
            .lock()
            .unwrap()
            .push(format!("{}|{user}", system.len()));
        self.inner.complete(system, user, params)
    }
}

impl<C> Interrupting<C> {
    pub fn new(inner: C, limit: usize) -> Self {
        Interrupting {
            inner,
            calls: AtomicUsize::new(0),
            limit,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vulnclass::corpus::{LabeledDataset, LabeledExample, RecordText, Taxonomy};
use vulnclass::cpe::{AttrValue, CpeName, Part};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// The device samples of the taxonomy table: 22 devices, notes as summaries.
pub fn table1_dataset() -> LabeledDataset {
    let text = std::fs::read_to_string(fixture("table1.csv")).expect("table1 fixture");
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let examples = reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.expect("table1 row");
            LabeledExample {
                cve_id: format!("CVE-2018-{:04}", 9000 + i),
                year: 2018,
                label: row[0].to_string(),
                text: RecordText {
                    vendors: vec![row[1].to_string()],
                    products: row[2].split(' ').map(str::to_string).collect(),
                    versions: vec![],
                    summary: row[3].to_string(),
                    cwe_id: None,
                },
            }
        })
        .collect();
    LabeledDataset {
        examples,
        taxonomy: Taxonomy::iot_default(),
        year_range: Some((2018, 2018)),
    }
}

/// A dense two-class problem: rows of `points`, labels ±1, box `[0, c]`.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub c: f64,
}

impl DenseProblem {
    fn augmented(&self, i: usize) -> Vec<f64> {
        let mut x = self.points[i].clone();
        x.push(1.0);
        x
    }

    /// `½‖w‖² + C Σ max(0, 1 − y w·x̂)` with `w` including the bias slot.
    pub fn primal(&self, w: &[f64]) -> f64 {
        let reg: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = (0..self.points.len())
            .map(|i| {
                let x = self.augmented(i);
                let m: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
                (1.0 - self.labels[i] * m).max(0.0)
            })
            .sum();
        reg + self.c * loss
    }

    fn gram(&self) -> DMatrix<f64> {
        let n = self.points.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (self.augmented(i), self.augmented(j));
            self.labels[i] * self.labels[j] * a.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>()
        })
    }

    fn dual(q: &DMatrix<f64>, alpha: &DVector<f64>) -> f64 {
        alpha.sum() - 0.5 * (alpha.transpose() * q * alpha)[(0, 0)]
    }
}

/// Exact dual optimum by active-set enumeration: every coordinate is fixed at
/// 0, fixed at C, or free; the free block solves its stationarity equations.
/// The best feasible candidate is the optimum of the concave dual, which
/// equals the primal optimum.
pub fn oracle_optimum(problem: &DenseProblem) -> f64 {
    let n = problem.points.len();
    assert!(n <= 10, "enumeration is 3^n");
    let q = problem.gram();
    let c = problem.c;
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = Vec::with_capacity(n);
        let mut rest = code;
        for _ in 0..n {
            state.push(rest % 3);
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        if !free.is_empty() {
            let k = free.len();
            let q_ff = DMatrix::from_fn(k, k, |a, b| q[(free[a], free[b])]);
            let rhs = DVector::from_fn(k, |a, _| {
                1.0 - (0..n)
                    .filter(|j| state[*j] != 2)
                    .map(|j| q[(free[a], j)] * alpha[j])
                    .sum::<f64>()
            });
            let Ok(pinv) = q_ff.clone().pseudo_inverse(1e-12) else {
                continue;
            };
            let sol = &pinv * &rhs;
            if (&q_ff * &sol - &rhs).amax() > 1e-9 {
                continue;
            }
            if sol.iter().any(|v| *v < -1e-12 || *v > c + 1e-12) {
                continue;
            }
            for (a, &i) in free.iter().enumerate() {
                alpha[i] = sol[a].clamp(0.0, c);
            }
        }
        best = best.max(DenseProblem::dual(&q, &alpha));
    }
    best
}

/// Seeded random problem with 2–8 points in 1–4 dimensions, both labels
/// present, C from {0.1, 1, 10}.
pub fn random_problem(seed: u64) -> DenseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let d = rng.gen_range(1..=4);
    let points = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut labels: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    let c = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
    DenseProblem { points, labels, c }
}

/// Exact fraction with i128 parts, always reduced, positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Ratio {
        assert!(den != 0);
        let g = gcd(num, den).max(1) * den.signum();
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Hand-checkable 3×3 matrices over classes E, H, S (rows = truth).
pub fn metric_fixtures() -> Vec<[[u64; 3]; 3]> {
    vec![
        [[5, 2, 1], [3, 7, 0], [0, 4, 6]],
        // S is never predicted: precision undefined, F1 zero.
        [[4, 1, 0], [2, 9, 0], [1, 3, 0]],
        [[10, 0, 0], [0, 1, 0], [0, 0, 7]],
    ]
}

/// Precision, recall and F1 of class `k` as exact fractions
/// (`None` for a zero denominator), F1 via `2TP / (2TP + FP + FN)`.
pub fn exact_metrics(m: &[[u64; 3]; 3], k: usize) -> (Option<Ratio>, Option<Ratio>, Ratio) {
    let tp = m[k][k] as i128;
    let row: i128 = m[k].iter().map(|&v| v as i128).sum();
    let col: i128 = m.iter().map(|r| r[k] as i128).sum();
    let (fp, fn_) = (col - tp, row - tp);
    let p = (col > 0).then(|| Ratio::new(tp, col));
    let r = (row > 0).then(|| Ratio::new(tp, row));
    let f1 = if tp == 0 {
        Ratio::new(0, 1)
    } else {
        Ratio::new(2 * tp, 2 * tp + fp + fn_)
    };
    (p, r, f1)
}

/// Expand a count matrix into (truth, predicted) label sequences.
pub fn expand(m: &[[u64; 3]; 3], classes: [&str; 3]) -> (Vec<String>, Vec<String>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            for _ in 0..count {
                truth.push(classes[i].to_string());
                pred.push(classes[j].to_string());
            }
        }
    }
    (truth, pred)
}

fn attr() -> impl Strategy<Value = AttrValue> {
    prop_oneof![
        1 => Just(AttrValue::Any),
        1 => Just(AttrValue::Na),
        4 => "[a-z0-9._\\-~!*?:/%@ ]{1,12}".prop_map(AttrValue::Literal),
    ]
}

/// Arbitrary well-formed names; literals draw on characters that need
/// escaping in both bindings.
pub fn cpe_name() -> impl Strategy<Value = CpeName> {
    (
        prop_oneof![
            Just(Part::Application),
            Just(Part::Hardware),
            Just(Part::OperatingSystem)
        ],
        proptest::collection::vec(attr(), 10),
    )
        .prop_map(|(part, attrs)| {
            let mut name = CpeName::new(part);
            for (slot, value) in name.attributes_mut().into_iter().zip(attrs) {
                *slot = value;
            }
            name
        })
}

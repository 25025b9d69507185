//! Quenched sign disorder.
//!
//! The sign of term `i` in sample `s` is drawn from the uniform
//! `u = unit_f64(key(master_seed, s, i))` (see [`crate::seed`]) and is `-1`
//! iff `u < p` for qubit terms or `u < q` for measurement terms. Any sign can
//! therefore be recomputed without touching the others.
//!
//! # File format
//!
//! A disorder file is one line of JSON followed by a bit-packed payload:
//!
//! ```text
//! {"format":"ftgauge-disorder","version":1,"family":"toric","L":6,"M":6,...}\n
//! <ceil(num_terms / 8) bytes>
//! ```
//!
//! Bit `i % 8` (least significant first) of byte `i / 8` is set iff term `i`
//! has sign `-1`. Unused high bits of the last byte are zero.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Family, GaugeModel, TermKind};
use crate::seed;

pub const FORMAT_NAME: &str = "ftgauge-disorder";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelId {
    pub family: Family,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

impl ModelId {
    pub fn of(model: &GaugeModel) -> Self {
        Self {
            family: model.family(),
            l: model.layer_size(),
            m: model.layers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub model: ModelId,
    pub p: f64,
    pub q: f64,
    pub master_seed: u64,
    pub sample_index: u64,
    /// One sign per term, aligned with `GaugeModel::terms`.
    pub tau: Vec<i8>,
}

pub fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..0.5).contains(&value) {
        return Err(Error::ProbabilityOutOfRange { name, value });
    }
    Ok(())
}

/// Sign of a single term, independent of every other term.
pub fn term_sign(rate: f64, master_seed: u64, sample_index: u64, term_index: usize) -> i8 {
    let u = seed::unit_f64(seed::key(&[master_seed, sample_index, term_index as u64]));
    if u < rate {
        -1
    } else {
        1
    }
}

pub fn generate(
    model: &GaugeModel,
    p: f64,
    q: f64,
    master_seed: u64,
    sample_index: u64,
) -> Result<DisorderSample> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    let tau = model
        .terms()
        .iter()
        .enumerate()
        .map(|(i, term)| {
            let rate = match term.kind {
                TermKind::Qubit => p,
                TermKind::Measurement => q,
            };
            term_sign(rate, master_seed, sample_index, i)
        })
        .collect();
    Ok(DisorderSample {
        model: ModelId::of(model),
        p,
        q,
        master_seed,
        sample_index,
        tau,
    })
}

impl DisorderSample {
    /// All-plus signs for the given model.
    pub fn clean(model: &GaugeModel) -> Self {
        Self {
            model: ModelId::of(model),
            p: 0.0,
            q: 0.0,
            master_seed: 0,
            sample_index: 0,
            tau: vec![1; model.num_terms()],
        }
    }

    pub fn check_model(&self, model: &GaugeModel) -> Result<()> {
        let id = ModelId::of(model);
        if id != self.model {
            return Err(Error::ModelMismatch {
                expected: id.family,
                expected_l: id.l,
                expected_m: id.m,
                found: self.model.family,
                found_l: self.model.l,
                found_m: self.model.m,
            });
        }
        if self.tau.len() != model.num_terms() {
            return Err(Error::ShapeMismatch {
                what: "tau",
                expected: model.num_terms(),
                found: self.tau.len(),
            });
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header::of(self);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        out.write_all(&pack(&self.tau))?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end_matches('\n'))?;
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(Error::Format {
                what: "disorder file",
                reason: format!("unsupported format {} v{}", header.format, header.version),
            });
        }
        let mut payload = Vec::new();
        input.read_to_end(&mut payload)?;
        let tau = unpack(&payload, header.num_terms)?;
        let negatives = tau.iter().filter(|&&s| s < 0).count();
        if negatives != header.negative_count {
            return Err(Error::Format {
                what: "disorder file",
                reason: format!(
                    "header lists {} negative signs, payload has {}",
                    header.negative_count, negatives
                ),
            });
        }
        Ok(Self {
            model: header.model,
            p: header.p,
            q: header.q,
            master_seed: header.master_seed,
            sample_index: header.sample_index,
            tau,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read(bytes)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ModelId,
    p: f64,
    q: f64,
    master_seed: u64,
    sample_index: u64,
    num_terms: usize,
    negative_count: usize,
    packing: String,
}

impl Header {
    fn of(sample: &DisorderSample) -> Self {
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            model: sample.model,
            p: sample.p,
            q: sample.q,
            master_seed: sample.master_seed,
            sample_index: sample.sample_index,
            num_terms: sample.tau.len(),
            negative_count: sample.tau.iter().filter(|&&s| s < 0).count(),
            packing: "bit-lsb-first".to_string(),
        }
    }
}

fn pack(tau: &[i8]) -> Vec<u8> {
    let mut bytes = vec![0u8; tau.len().div_ceil(8)];
    for (i, &s) in tau.iter().enumerate() {
        if s < 0 {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    bytes
}

fn unpack(bytes: &[u8], n: usize) -> Result<Vec<i8>> {
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::Format {
            what: "disorder file",
            reason: format!("payload has {} bytes for {} terms", bytes.len(), n),
        });
    }
    if !n.is_multiple_of(8) && bytes[n / 8] >> (n % 8) != 0 {
        return Err(Error::Format {
            what: "disorder file",
            reason: "padding bits set".to_string(),
        });
    }
    Ok((0..n)
        .map(|i| if bytes[i / 8] >> (i % 8) & 1 == 1 { -1 } else { 1 })
        .collect())
}

/// Fractions of negative signs among qubit and measurement terms.
pub fn empirical_rates(model: &GaugeModel, sample: &DisorderSample) -> (f64, f64) {
    let mut counts = [0usize; 2];
    let mut negatives = [0usize; 2];
    for (term, &s) in model.terms().iter().zip(&sample.tau) {
        let k = match term.kind {
            TermKind::Qubit => 0,
            TermKind::Measurement => 1,
        };
        counts[k] += 1;
        if s < 0 {
            negatives[k] += 1;
        }
    }
    let frac = |k: usize| {
        if counts[k] == 0 {
            0.0
        } else {
            negatives[k] as f64 / counts[k] as f64
        }
    };
    (frac(0), frac(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_color, build_toric};
    use proptest::prelude::*;

    #[test]
    fn zero_rates_give_all_plus() {
        let model = build_toric(4, 4).unwrap();
        let sample = generate(&model, 0.0, 0.0, 99, 3).unwrap();
        assert!(sample.tau.iter().all(|&s| s == 1));
        assert_eq!(empirical_rates(&model, &sample), (0.0, 0.0));
    }

    #[test]
    fn rejects_rates_outside_range() {
        let model = build_toric(2, 2).unwrap();
        assert!(generate(&model, 0.5, 0.1, 0, 0).is_err());
        assert!(generate(&model, 0.1, -0.01, 0, 0).is_err());
        assert!(generate(&model, f64::NAN, 0.1, 0, 0).is_err());
    }

    #[test]
    fn counted_rates() {
        let model = build_toric(2, 2).unwrap();
        let mut sample = DisorderSample::clean(&model);
        let qubits: Vec<usize> = model
            .terms()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TermKind::Qubit)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(qubits.len(), 16);
        for &i in &qubits[..3] {
            sample.tau[i] = -1;
        }
        assert_eq!(empirical_rates(&model, &sample), (0.1875, 0.0));
    }

    #[test]
    fn near_half_rate_concentrates() {
        // 2 * 12^2 * 12 * 30 = 103680 qubit terms over 30 samples
        let model = build_toric(12, 12).unwrap();
        let p = 0.5 - 1e-9;
        let mut neg = 0usize;
        let mut total = 0usize;
        for s in 0..30 {
            let sample = generate(&model, p, 0.1, 7, s).unwrap();
            let (p_hat, _) = empirical_rates(&model, &sample);
            neg += (p_hat * model.num_qubit_terms() as f64).round() as usize;
            total += model.num_qubit_terms();
        }
        let mean = total as f64 * p;
        let sd = (total as f64 * p * (1.0 - p)).sqrt();
        assert!((neg as f64 - mean).abs() < 4.0 * sd, "{neg} vs {mean} ± {sd}");
    }

    #[test]
    fn rates_match_within_binomial_bounds() {
        let model = build_color(12, 12).unwrap();
        let (p, q) = (0.1, 0.2);
        let sample = generate(&model, p, q, 2024, 0).unwrap();
        let (p_hat, q_hat) = empirical_rates(&model, &sample);
        let nq = model.num_qubit_terms() as f64;
        let nm = model.num_measurement_terms() as f64;
        assert!((p_hat - p).abs() < 4.0 * (p * (1.0 - p) / nq).sqrt());
        assert!((q_hat - q).abs() < 4.0 * (q * (1.0 - q) / nm).sqrt());
    }

    #[test]
    fn chi_square_over_samples() {
        // Per-sample negative counts over many samples follow Binomial(N_Q, p).
        let model = build_toric(4, 4).unwrap();
        let n = model.num_qubit_terms();
        let p = 0.15;
        let samples = 400;
        let counts: Vec<usize> = (0..samples)
            .map(|s| {
                let sample = generate(&model, p, 0.0, 11, s).unwrap();
                (empirical_rates(&model, &sample).0 * n as f64).round() as usize
            })
            .collect();
        assert!(samples as usize * n >= 10_000);
        // Pool the binomial pmf into cells with expected count >= 5.
        let mut pmf = vec![0.0f64; n + 1];
        pmf[0] = (1.0 - p).powi(n as i32);
        for k in 1..=n {
            pmf[k] = pmf[k - 1] * (n - k + 1) as f64 / k as f64 * p / (1.0 - p);
        }
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        let mut start = 0;
        let mut acc = 0.0;
        for k in 0..=n {
            acc += pmf[k];
            if acc * samples as f64 >= 5.0 && pmf[k + 1..].iter().sum::<f64>() * samples as f64 >= 5.0 {
                cells.push((start, k, acc));
                start = k + 1;
                acc = 0.0;
            }
        }
        cells.push((start, n, acc));
        let chi2: f64 = cells
            .iter()
            .map(|&(lo, hi, prob)| {
                let observed = counts.iter().filter(|&&c| c >= lo && c <= hi).count() as f64;
                let expected = prob * samples as f64;
                (observed - expected).powi(2) / expected
            })
            .sum();
        let dof = cells.len() - 1;
        // Upper 0.001 quantile of chi-square via Wilson-Hilferty.
        let z = 3.090_232;
        let k = dof as f64;
        let critical = k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical} with {dof} dof");
    }

    #[test]
    fn single_term_recomputation() {
        let model = build_toric(3, 3).unwrap();
        let sample = generate(&model, 0.3, 0.2, 5, 8).unwrap();
        for (i, term) in model.terms().iter().enumerate() {
            let rate = if term.kind == TermKind::Qubit { 0.3 } else { 0.2 };
            assert_eq!(sample.tau[i], term_sign(rate, 5, 8, i));
        }
    }

    #[test]
    fn file_rejects_corruption() {
        let model = build_toric(3, 2).unwrap();
        let sample = generate(&model, 0.2, 0.2, 1, 1).unwrap();
        let mut bytes = sample.to_bytes();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        assert!(DisorderSample::from_bytes(&bytes).is_err());
        let bytes = sample.to_bytes();
        assert!(DisorderSample::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn deterministic_and_round_trips(
            seed in any::<u64>(),
            index in 0u64..1000,
            p in 0.0f64..0.5,
            q in 0.0f64..0.5,
            color in any::<bool>(),
        ) {
            let model = if color { build_color(3, 2).unwrap() } else { build_toric(3, 3).unwrap() };
            let a = generate(&model, p, q, seed, index).unwrap();
            let b = generate(&model, p, q, seed, index).unwrap();
            prop_assert_eq!(&a, &b);
            let bytes = a.to_bytes();
            let back = DisorderSample::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &a);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Report;
use crate::{Error, Result};

/// Train, validation and test reports, disjoint by patient.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<Report>,
    pub validation: Vec<Report>,
    pub test: Vec<Report>,
}

impl Split {
    /// Wraps pre-made parts after checking that no patient appears in
    /// two of them.
    pub fn from_parts(train: Vec<Report>, validation: Vec<Report>, test: Vec<Report>) -> Result<Self> {
        check_disjoint(&[&train, &validation, &test])?;
        Ok(Self { train, validation, test })
    }

    pub fn check(&self) -> Result<()> {
        check_disjoint(&[&self.train, &self.validation, &self.test])
    }
}

/// Shuffles patients with `seed` and assigns whole patients to train,
/// validation and test by the given fractions. Reports keep their corpus
/// order inside each part.
pub fn split_by_patient(reports: &[Report], seed: u64, train_fraction: f64, validation_fraction: f64) -> Result<Split> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut patients: Vec<&str> = reports
        .iter()
        .map(Report::patient_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    patients.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = patients.len();
    let n_train = ((n as f64 * train_fraction).round() as usize).min(n);
    let n_val = ((n as f64 * validation_fraction).round() as usize).min(n - n_train);
    let part: BTreeMap<&str, u8> = patients
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, if i < n_train { 0 } else if i < n_train + n_val { 1 } else { 2 }))
        .collect();
    let mut split = Split { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for r in reports {
        match part[r.patient_id()] {
            0 => split.train.push(r.clone()),
            1 => split.validation.push(r.clone()),
            _ => split.test.push(r.clone()),
        }
    }
    Ok(split)
}

/// Fails with [`Error::PatientOverlap`] naming the first patient found in
/// more than one part.
pub fn check_disjoint(parts: &[&[Report]]) -> Result<()> {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, part) in parts.iter().enumerate() {
        for r in part.iter() {
            let p = r.patient_id();
            match owner.get(p) {
                Some(&j) if j != i => return Err(Error::PatientOverlap(p.to_string())),
                _ => {
                    owner.insert(p, i);
                }
            }
        }
    }
    Ok(())
}

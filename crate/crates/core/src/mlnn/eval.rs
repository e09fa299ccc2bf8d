use std::fmt;

use crate::error::{Error, Result};

use super::network::MlnnModel;
use super::train::LabeledRegion;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub categories: Vec<String>,
    /// `None` for categories the model never predicted.
    pub precision: Vec<Option<f64>>,
    /// Macro average over categories with a defined precision.
    pub average_precision: f64,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, zero-based.
    pub confusion: Vec<Vec<usize>>,
}

/// Per-category precision on raw (unnormalized) labeled features.
pub fn evaluate(model: &MlnnModel, test: &[LabeledRegion]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let n = model.mlaf.n;
    let mut confusion = vec![vec![0usize; n]; n];
    for s in test {
        if !(1..=n).contains(&s.category) {
            return Err(Error::invalid("category", format!("{} outside 1..={n}", s.category)));
        }
        let (pred, _) = model.classify(&s.features)?;
        confusion[s.category - 1][pred - 1] += 1;
    }
    let precision: Vec<Option<f64>> = (0..n)
        .map(|p| {
            let predicted: usize = (0..n).map(|t| confusion[t][p]).sum();
            (predicted > 0).then(|| confusion[p][p] as f64 / predicted as f64)
        })
        .collect();
    let defined: Vec<f64> = precision.iter().flatten().copied().collect();
    let average_precision = defined.iter().sum::<f64>() / defined.len() as f64;
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        categories: model.categories.clone(),
        precision,
        average_precision,
        accuracy: correct as f64 / test.len() as f64,
        confusion,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} Precision", "Category")?;
        for (name, p) in self.categories.iter().zip(&self.precision) {
            match p {
                Some(p) => writeln!(f, "{name:<12} {:.1}%", 100.0 * p)?,
                None => writeln!(f, "{name:<12} n/a")?,
            }
        }
        writeln!(f, "{:<12} {:.1}%", "Average", 100.0 * self.average_precision)?;
        writeln!(f, "accuracy {:.1}%", 100.0 * self.accuracy)?;
        writeln!(f, "confusion (rows = truth, columns = predicted):")?;
        for (name, row) in self.categories.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
            writeln!(f, "{name:<12}{}", cells.join(""))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::mlnn::network::tests::blank;
    use crate::mlnn::MlafParams;

    fn samples(per_class: usize, n: usize) -> Vec<LabeledRegion> {
        (0..per_class * n)
            .map(|i| LabeledRegion {
                features: FeatureVector::new(vec![(i % n) as f64]),
                category: 1 + i % n,
            })
            .collect()
    }

    #[test]
    fn constant_predictor_precision_is_base_rate() {
        let p = MlafParams::default();
        let mut m = blank(1, 2, p);
        m.b_out = p.c * 2.5; // always level 3
        let r = evaluate(&m, &samples(10, 5)).unwrap();
        assert_eq!(r.precision[2], Some(0.2));
        assert!(r.precision.iter().enumerate().all(|(i, p)| i == 2 || p.is_none()));
        assert_eq!(r.average_precision, 0.2);
        assert_eq!(r.accuracy, 0.2);
        assert!(r.to_string().contains("Sand/Rock    20.0%"));
    }

    #[test]
    fn perfect_predictor() {
        let p = MlafParams::default();
        let mut m = blank(1, 0, p);
        // no hidden units: the output depends on the bias alone
        for level in 1..=5 {
            m.b_out = p.c * (level as f64 - 0.5);
            let test = vec![LabeledRegion {
                features: FeatureVector::new(vec![0.0]),
                category: level,
            }];
            let r = evaluate(&m, &test).unwrap();
            assert_eq!(r.precision[level - 1], Some(1.0));
            assert_eq!(r.average_precision, 1.0);
        }
    }

    #[test]
    fn empty_test_set() {
        let m = blank(1, 1, MlafParams::default());
        assert!(matches!(evaluate(&m, &[]), Err(Error::EmptyTestSet)));
    }
}

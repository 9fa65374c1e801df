use std::fmt;

use serde::{Serialize, Serializer};

use super::TrainingError;

/// Pearson correlation, or `Undefined` when either vector has zero variance
/// or fewer than two entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pearson {
    Value(f64),
    Undefined,
}

impl Pearson {
    pub fn value(self) -> Option<f64> {
        match self {
            Pearson::Value(v) => Some(v),
            Pearson::Undefined => None,
        }
    }
}

impl fmt::Display for Pearson {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pearson::Value(v) => write!(f, "{v}"),
            Pearson::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Pearson {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Pearson::Value(v) => s.serialize_f64(*v),
            Pearson::Undefined => s.serialize_str("undefined"),
        }
    }
}

fn check(preds: &[f64], labels: &[f64]) -> Result<(), TrainingError> {
    if preds.len() != labels.len() {
        return Err(TrainingError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(TrainingError::Empty("predictions"));
    }
    Ok(())
}

/// Mean squared error.
pub fn finetune_loss(preds: &[f64], labels: &[f64]) -> Result<f64, TrainingError> {
    check(preds, labels)?;
    Ok(preds.iter().zip(labels).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / preds.len() as f64)
}

pub fn metric_rmse(preds: &[f64], labels: &[f64]) -> Result<f64, TrainingError> {
    Ok(finetune_loss(preds, labels)?.sqrt())
}

pub fn metric_pearson(preds: &[f64], labels: &[f64]) -> Result<Pearson, TrainingError> {
    check(preds, labels)?;
    if preds.len() < 2 {
        return Ok(Pearson::Undefined);
    }
    let n = preds.len() as f64;
    let mx = preds.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in preds.iter().zip(labels) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Pearson::Undefined);
    }
    Ok(Pearson::Value((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert_eq!(finetune_loss(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(finetune_loss(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        let p = [1.0, 2.0, 3.0];
        let l = [2.0, 4.0, 6.0];
        assert!((metric_pearson(&p, &l).unwrap().value().unwrap() - 1.0).abs() < 1e-12);
        assert!((metric_rmse(&p, &l).unwrap() - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z = [-1.5, 0.5, 1.0];
        let nz = z.map(|v: f64| -v);
        assert!((metric_pearson(&z, &nz).unwrap().value().unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(metric_rmse(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn undefined_cases() {
        assert_eq!(metric_pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), Pearson::Undefined);
        assert_eq!(metric_pearson(&[4.0], &[2.0]).unwrap(), Pearson::Undefined);
        assert_eq!(Pearson::Undefined.to_string(), "undefined");
        assert_eq!(serde_json::to_string(&Pearson::Undefined).unwrap(), "\"undefined\"");
        assert!(finetune_loss(&[], &[]).is_err());
        assert!(metric_rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let preds: Vec<f64> = (0..100).map(|k| ((k * 37 % 101) as f64 * 0.173).sin() * 5.0).collect();
        let labels: Vec<f64> = (0..100).map(|k| ((k * 53 % 97) as f64 * 0.311).cos() * 4.0).collect();
        let mut acc = 0.0;
        for k in 0..100 {
            let d = preds[k] - labels[k];
            acc += d * d;
        }
        assert!((finetune_loss(&preds, &labels).unwrap() - acc / 100.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pearson_is_affine_invariant(
            xs in prop::collection::vec(-10.0f64..10.0, 3..30),
            a in 0.1f64..5.0, b in -5.0f64..5.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| x * x - k as f64).collect();
            if let (Pearson::Value(r0), Pearson::Value(r1)) = (
                metric_pearson(&xs, &ys).unwrap(),
                metric_pearson(&xs.iter().map(|x| a * x + b).collect::<Vec<_>>(), &ys).unwrap(),
            ) {
                prop_assert!((r0 - r1).abs() < 1e-12);
            }
        }

        #[test]
        fn rmse_scales_jointly(
            xs in prop::collection::vec(-10.0f64..10.0, 1..30),
            s in 0.1f64..5.0,
        ) {
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + 1.0).collect();
            let r = metric_rmse(&xs, &ys).unwrap();
            let sx: Vec<f64> = xs.iter().map(|x| s * x).collect();
            let sy: Vec<f64> = ys.iter().map(|y| s * y).collect();
            prop_assert!((metric_rmse(&sx, &sy).unwrap() - s * r).abs() <= 1e-12 * (1.0 + s * r));
        }
    }
}

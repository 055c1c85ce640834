//! Gesture-aware proposal scoring, 3D box IoU, and accuracy reports
//! bucketed by proxemic distance.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geom::{BoundingBox3D, Vec3};
use crate::scalar::Real;

pub const DEFAULT_IOU_THRESHOLDS: [f64; 2] = [0.25, 0.5];
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Cosine between the shoulder→fingertip ray and the shoulder→center ray.
pub fn pointing_bias<T: Real>(shoulder: Vec3<T>, fingertip: Vec3<T>, center: Vec3<T>) -> Result<T> {
    let a = fingertip - shoulder;
    let b = center - shoulder;
    let (na, nb) = (a.norm(), b.norm());
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(Error::DegenerateRay);
    }
    Ok((a.dot(b) / (na * nb)).max(-T::one()).min(T::one()))
}

fn check_pair<T: Real>(a: T, b: T, what: &str) -> Result<()> {
    let ok = a >= T::zero() && b >= T::zero() && ((a + b).to_f64_lossless() - 1.0).abs() <= WEIGHT_SUM_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} weights must be non-negative and sum to 1")))
    }
}

/// Mixing weights for the left- and right-hand bias scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandednessWeights<T> {
    pub w_left: T,
    pub w_right: T,
}

impl<T: Real> HandednessWeights<T> {
    pub fn new(w_left: T, w_right: T) -> Result<Self> {
        check_pair(w_left, w_right, "handedness")?;
        Ok(HandednessWeights { w_left, w_right })
    }
}

/// Mixing weights for the language confidence and the gesture bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights<T> {
    pub w_conf: T,
    pub w_bias: T,
}

impl<T: Real> FusionWeights<T> {
    pub fn new(w_conf: T, w_bias: T) -> Result<Self> {
        check_pair(w_conf, w_bias, "fusion")?;
        Ok(FusionWeights { w_conf, w_bias })
    }

    /// A point drawn uniformly from the 1-simplex.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let w: f64 = rng.random();
        FusionWeights { w_conf: T::lit(w), w_bias: T::one() - T::lit(w) }
    }
}

/// Shoulder and fingertip of both hands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct HandRays<T> {
    pub left_shoulder: Vec3<T>,
    pub left_fingertip: Vec3<T>,
    pub right_shoulder: Vec3<T>,
    pub right_fingertip: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalScores<T> {
    pub bias_left: Vec<T>,
    pub bias_right: Vec<T>,
    pub bias: Vec<T>,
    pub s_final: Vec<T>,
    pub argmax: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd>(v: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|b| *x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Fuses language confidences with the pointing bias toward each
/// proposal's box center.
pub fn score_proposals<T: Real>(
    rays: &HandRays<T>,
    proposals: &[BoundingBox3D<T>],
    s_conf: &[T],
    w_lr: &HandednessWeights<T>,
    w_score: &FusionWeights<T>,
) -> Result<ProposalScores<T>> {
    if s_conf.len() != proposals.len() {
        return Err(Error::LengthMismatch { expected: proposals.len(), actual: s_conf.len() });
    }
    if proposals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bias_of = |sh, tip| -> Result<Vec<T>> {
        proposals.iter().map(|b| pointing_bias(sh, tip, b.center())).collect()
    };
    let bias_left = bias_of(rays.left_shoulder, rays.left_fingertip)?;
    let bias_right = bias_of(rays.right_shoulder, rays.right_fingertip)?;
    let bias: Vec<T> =
        bias_left.iter().zip(&bias_right).map(|(&l, &r)| w_lr.w_left * l + w_lr.w_right * r).collect();
    let s_final: Vec<T> = s_conf.iter().zip(&bias).map(|(&c, &b)| w_score.w_conf * c + w_score.w_bias * b).collect();
    let argmax = argmax(&s_final).expect("nonempty");
    Ok(ProposalScores { bias_left, bias_right, bias, s_final, argmax })
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou3d<T: Real>(a: &BoundingBox3D<T>, b: &BoundingBox3D<T>) -> T {
    let inter = a.intersection(b).map_or(T::zero(), |i| i.volume());
    let union = a.volume() + b.volume() - inter;
    if union > T::zero() {
        (inter / union).max(T::zero()).min(T::one())
    } else if a == b {
        T::one()
    } else {
        T::zero()
    }
}

/// Interpersonal distance classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HallBucket {
    Intimate,
    Personal,
    Social,
    Public,
}

impl HallBucket {
    pub const ALL: [HallBucket; 4] = [HallBucket::Intimate, HallBucket::Personal, HallBucket::Social, HallBucket::Public];

    /// Lower bounds are inclusive.
    pub fn of<T: Real>(distance_m: T) -> Self {
        let d = distance_m.to_f64_lossless();
        if d < 0.46 {
            HallBucket::Intimate
        } else if d < 1.22 {
            HallBucket::Personal
        } else if d < 3.70 {
            HallBucket::Social
        } else {
            HallBucket::Public
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HallBucket::Intimate => "Intimate",
            HallBucket::Personal => "Personal",
            HallBucket::Social => "Social",
            HallBucket::Public => "Public",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSample<T> {
    pub pred: BoundingBox3D<T>,
    pub gt: BoundingBox3D<T>,
    pub distance_m: T,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub sample_id: String,
    pub pred: [f64; 6],
    pub gt: [f64; 6],
    pub distance_m: f64,
}

impl PredictionEntry {
    pub fn to_sample<T: Real>(&self) -> Result<EvalSample<T>> {
        let bx = |a: [f64; 6], which: &str| {
            BoundingBox3D::from_array(a.map(T::lit))
                .ok_or_else(|| Error::format(format!("sample {}: {which} box has min > max", self.sample_id)))
        };
        Ok(EvalSample { pred: bx(self.pred, "pred")?, gt: bx(self.gt, "gt")?, distance_m: T::lit(self.distance_m) })
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStats {
    pub n: usize,
    /// Accuracy per threshold; `NaN` for an empty bucket.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub n: usize,
    pub overall: Vec<f64>,
    /// All four buckets in distance order.
    pub buckets: IndexMap<HallBucket, BucketStats>,
}

fn iou_key(t: f64) -> String {
    format!("iou@{t}")
}

impl EvalReport {
    /// Report JSON; empty buckets are omitted.
    pub fn to_json(&self) -> Value {
        let accs = |a: &[f64]| -> Map<String, Value> {
            self.thresholds.iter().zip(a).map(|(&t, &v)| (iou_key(t), json!(v))).collect()
        };
        let mut buckets = Map::new();
        for (b, s) in self.buckets.iter().filter(|(_, s)| s.n > 0) {
            let mut m = Map::new();
            m.insert("n".into(), json!(s.n));
            m.extend(accs(&s.accuracy));
            buckets.insert(b.as_str().into(), Value::Object(m));
        }
        json!({ "overall": Value::Object(accs(&self.overall)), "buckets": buckets })
    }

    pub fn to_table(&self) -> String {
        let mut header = vec!["bucket".to_string(), "n".to_string()];
        header.extend(self.thresholds.iter().map(|&t| iou_key(t)));
        let fmt = |v: f64| if v.is_nan() { "-".to_string() } else { format!("{v:.4}") };
        let mut rows = vec![header];
        for (b, s) in &self.buckets {
            let mut r = vec![b.as_str().to_string(), s.n.to_string()];
            r.extend(s.accuracy.iter().map(|&v| fmt(v)));
            rows.push(r);
        }
        let mut r = vec!["overall".to_string(), self.n.to_string()];
        r.extend(self.overall.iter().map(|&v| fmt(v)));
        rows.push(r);

        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (n, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, &w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if n == 0 || n == rows.len() - 2 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        out
    }
}

/// IoU@τ accuracy overall and per distance bucket.
pub fn evaluate<T: Real>(samples: &[EvalSample<T>], thresholds: &[f64]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ious: Vec<f64> = samples.iter().map(|s| iou3d(&s.pred, &s.gt).to_f64_lossless()).collect();
    let acc = |idx: &[usize]| -> Vec<f64> {
        thresholds
            .iter()
            .map(|&t| {
                if idx.is_empty() {
                    f64::NAN
                } else {
                    idx.iter().filter(|&&i| ious[i] >= t).count() as f64 / idx.len() as f64
                }
            })
            .collect()
    };
    let all: Vec<usize> = (0..samples.len()).collect();
    let buckets = HallBucket::ALL
        .iter()
        .map(|&b| {
            let idx: Vec<usize> = all.iter().copied().filter(|&i| HallBucket::of(samples[i].distance_m) == b).collect();
            (b, BucketStats { n: idx.len(), accuracy: acc(&idx) })
        })
        .collect();
    Ok(EvalReport { thresholds: thresholds.to_vec(), n: samples.len(), overall: acc(&all), buckets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn bx(a: [f64; 6]) -> BoundingBox3D<f64> {
        BoundingBox3D::from_array(a).unwrap()
    }

    #[test]
    fn bias_cases() {
        let o = Vec3::zero();
        assert_eq!(pointing_bias(o, v(1., 0., 0.), v(2., 0., 0.)).unwrap(), 1.0);
        assert_eq!(pointing_bias(o, v(1., 0., 0.), v(0., 1., 0.)).unwrap(), 0.0);
        assert_eq!(pointing_bias(o, v(1., 0., 0.), v(-1., 0., 0.)).unwrap(), -1.0);
        assert!(matches!(pointing_bias(o, o, v(1., 0., 0.)), Err(Error::DegenerateRay)));
        assert!(matches!(pointing_bias(o, v(1., 0., 0.), o), Err(Error::DegenerateRay)));
    }

    #[test]
    fn weights_validated() {
        assert!(HandednessWeights::new(0.3, 0.7).is_ok());
        assert!(HandednessWeights::new(0.3, 0.8).is_err());
        assert!(FusionWeights::new(-0.1, 1.1).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w: FusionWeights<f64> = FusionWeights::random(&mut rng);
            assert!(FusionWeights::new(w.w_conf, w.w_bias).is_ok());
        }
    }

    fn rays() -> HandRays<f64> {
        HandRays {
            left_shoulder: v(0., 0.2, 1.4),
            left_fingertip: v(0., 0.8, 1.4),
            right_shoulder: v(0., -0.2, 1.4),
            right_fingertip: v(0.6, -0.2, 1.4),
        }
    }

    fn cube_at(c: Vec3<f64>) -> BoundingBox3D<f64> {
        BoundingBox3D::new(c - Vec3::splat(0.1), c + Vec3::splat(0.1)).unwrap()
    }

    #[test]
    fn full_gesture_weight_picks_the_pointed_box() {
        let props: Vec<_> = [v(1., 2., 0.), v(-2., 0., 1.), v(3., -0.2, 1.4), v(0., -3., 0.), v(2., 2., 2.)]
            .into_iter()
            .map(cube_at)
            .collect();
        let conf = [0.9, 0.8, 0.1, 0.7, 0.6];
        let out = score_proposals(
            &rays(),
            &props,
            &conf,
            &HandednessWeights::new(0.0, 1.0).unwrap(),
            &FusionWeights::new(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(out.argmax, 2);
        assert!((out.s_final[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn language_only_and_one_hot() {
        let props: Vec<_> = [v(1., 2., 0.), v(-2., 0., 1.)].into_iter().map(cube_at).collect();
        let conf = [0.3, 0.7];
        let out = score_proposals(
            &rays(),
            &props,
            &conf,
            &HandednessWeights::new(1.0, 0.0).unwrap(),
            &FusionWeights::new(1.0, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(out.s_final, conf);
        assert_eq!(out.bias, out.bias_left);
        assert!(matches!(
            score_proposals(&rays(), &props, &[0.1], &HandednessWeights::new(1.0, 0.0).unwrap(), &FusionWeights::new(1.0, 0.0).unwrap()),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax::<f64>(&[]), None);
    }

    #[test]
    fn iou_cases() {
        let a = bx([0., 0., 0., 1., 1., 1.]);
        let b = bx([0.5, 0., 0., 1.5, 1., 1.]);
        assert_eq!(iou3d(&a, &b), 1.0 / 3.0);
        assert_eq!(iou3d(&a, &a), 1.0);
        assert_eq!(iou3d(&a, &bx([2., 2., 2., 3., 3., 3.])), 0.0);
        let flat = bx([0., 0., 0., 1., 1., 0.]);
        assert_eq!(iou3d(&flat, &flat), 1.0);
        assert_eq!(iou3d(&flat, &bx([0., 0., 0., 1., 0., 1.])), 0.0);
    }

    #[test]
    fn hall_boundaries() {
        assert_eq!(HallBucket::of(0.4599), HallBucket::Intimate);
        assert_eq!(HallBucket::of(0.46), HallBucket::Personal);
        assert_eq!(HallBucket::of(1.22), HallBucket::Social);
        assert_eq!(HallBucket::of(3.70), HallBucket::Public);
        assert_eq!(HallBucket::of(3.6999f32), HallBucket::Social);
    }

    #[test]
    fn evaluate_counts() {
        let gt = bx([0., 0., 0., 1., 1., 1.]);
        // IoU 0.6 and 0.3 via shifted unit boxes
        let shift = |iou: f64| {
            let d = (1.0 - iou) / (1.0 + iou);
            bx([d, 0., 0., 1. + d, 1., 1.])
        };
        let s = [
            EvalSample { pred: shift(0.6), gt, distance_m: 0.46 },
            EvalSample { pred: shift(0.3), gt, distance_m: 3.70 },
        ];
        let r = evaluate(&s, &DEFAULT_IOU_THRESHOLDS).unwrap();
        assert_eq!(r.overall, vec![1.0, 0.5]);
        assert_eq!(r.buckets[&HallBucket::Personal].n, 1);
        assert_eq!(r.buckets[&HallBucket::Public].accuracy, vec![1.0, 0.0]);
        let j = r.to_json();
        assert_eq!(j["overall"]["iou@0.25"], 1.0);
        assert_eq!(j["buckets"]["Personal"]["n"], 1);
        assert!(j["buckets"].get("Social").is_none());
        let keys: Vec<&String> = j["buckets"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["Personal", "Public"]);
        let t = r.to_table();
        assert!(t.contains("Social") && t.contains("overall"));
        assert!(matches!(evaluate::<f64>(&[], &DEFAULT_IOU_THRESHOLDS), Err(Error::EmptyInput)));
    }

    #[test]
    fn prediction_file_roundtrip() {
        let text = r#"[{"sample_id":"a","pred":[0,0,0,1,1,1],"gt":[0,0,0,1,1,1],"distance_m":2.0}]"#;
        let p: Vec<PredictionEntry> = serde_json::from_str(text).unwrap();
        let s: EvalSample<f64> = p[0].to_sample().unwrap();
        assert_eq!(iou3d(&s.pred, &s.gt), 1.0);
        let bad = PredictionEntry { pred: [1., 0., 0., 0., 1., 1.], ..p[0].clone() };
        assert!(bad.to_sample::<f64>().is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox3D<f64>> {
        (prop::array::uniform3(-2.0..2.0f64), prop::array::uniform3(0.01..2.0f64))
            .prop_map(|(c, e)| BoundingBox3D::new(Vec3::from(c), Vec3::from(c) + Vec3::from(e)).unwrap())
    }

    fn arb_v() -> impl Strategy<Value = Vec3<f64>> {
        prop::array::uniform3(-5.0..5.0f64).prop_map(Vec3::from)
    }

    proptest! {
        #[test]
        fn iou_symmetric_bounded(a in arb_box(), b in arb_box()) {
            let x = iou3d(&a, &b);
            prop_assert_eq!(x, iou3d(&b, &a));
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn bias_invariances(a in arb_v(), b in arb_v(), c in arb_v(), t in arb_v(), k1 in 0.1..10.0f64, k2 in 0.1..10.0f64, yaw in -3.0..3.0f64) {
            prop_assume!((b - a).norm() > 1e-3 && (c - a).norm() > 1e-3);
            let s = pointing_bias(a, b, c).unwrap();
            prop_assert!((pointing_bias(a + t, b + t, c + t).unwrap() - s).abs() < 1e-9);
            prop_assert!((pointing_bias(a, a + (b - a) * k1, a + (c - a) * k2).unwrap() - s).abs() < 1e-9);
            let r = crate::geom::YawTransform::about_vertical(Vec3::zero(), yaw);
            prop_assert!((pointing_bias(r.apply(a), r.apply(b), r.apply(c)).unwrap() - s).abs() < 1e-9);
        }

        #[test]
        fn fusion_is_convex(conf in prop::collection::vec(-1.0..1.0f64, 3), wc in 0.0..1.0f64, wl in 0.0..1.0f64) {
            let props: Vec<_> = [Vec3::new(1., 2., 0.), Vec3::new(-2., 0., 1.), Vec3::new(3., 0., 1.)].into_iter().map(cube_at).collect();
            let out = score_proposals(&rays(), &props, &conf, &HandednessWeights { w_left: wl, w_right: 1.0 - wl }, &FusionWeights { w_conf: wc, w_bias: 1.0 - wc }).unwrap();
            for m in 0..3 {
                let (lo, hi) = (conf[m].min(out.bias[m]), conf[m].max(out.bias[m]));
                prop_assert!(out.s_final[m] >= lo - 1e-12 && out.s_final[m] <= hi + 1e-12);
            }
        }
    }
}

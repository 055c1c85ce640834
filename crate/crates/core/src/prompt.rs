//! Prompt text for generating referring expressions that accompany an
//! imputed pointing gesture. Nothing here calls a model; the strings are
//! written out for an external service.

use crate::error::{Error, Result};
use crate::placement::ImputationRecord;
use crate::scalar::Real;

pub const DEFAULT_PROMPT_VARIANTS: usize = 3;

const STYLES: [&str; 5] = [
    "Write one short referring expression that uniquely identifies the {label}.",
    "Describe the {label} in a single sentence so a listener watching the gesture can tell it apart from similar objects.",
    "Give a brief spoken instruction, as the person would say it, that refers to the {label}; the gesture carries the direction, so focus on distinguishing attributes.",
    "Produce a concise description of the {label} that mentions its relation to one nearby object.",
    "Phrase a natural request that involves the {label} without naming its exact position.",
];

fn pointing_context<T: Real>(r: &ImputationRecord<T>, label: &str) -> String {
    format!(
        "A person in scene {} is pointing at the {} (object {}) with their {} hand from {:.1} m away, arm raised {:.0} degrees above horizontal.",
        r.scene_id,
        label,
        r.target_object_id,
        r.handedness.as_str(),
        r.distance_to_target_m.to_f64_lossless(),
        r.pointing_elevation_deg.to_f64_lossless(),
    )
}

/// `n_variants` distinct prompts, each naming the target and the pointing
/// context.
pub fn render_prompt<T: Real>(record: &ImputationRecord<T>, target_label: &str, n_variants: usize) -> Result<Vec<String>> {
    let label = target_label.trim();
    if label.is_empty() {
        return Err(Error::InvalidInput("target label must be nonempty".into()));
    }
    let context = pointing_context(record, label);
    Ok((0..n_variants)
        .map(|v| {
            let style = STYLES[v % STYLES.len()].replace("{label}", label);
            let round = v / STYLES.len();
            if round == 0 {
                format!("{context} {style}")
            } else {
                format!("{context} {style} (variant {})", v + 1)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::scene::Hand;

    fn record() -> ImputationRecord<f64> {
        ImputationRecord {
            scene_id: "scene0001_00".into(),
            target_object_id: 7,
            avatar_id: "m_r_30".into(),
            handedness: Hand::Right,
            foot_position_world: Vec3::zero(),
            yaw_deg: 0.0,
            jitter_deg: 0.0,
            pointing_elevation_deg: -12.0,
            shoulder_world: Vec3::zero(),
            fingertip_world: Vec3::zero(),
            distance_to_target_m: 2.34,
            rng_seed: 0,
        }
    }

    #[test]
    fn three_distinct() {
        let p = render_prompt(&record(), "chair", 3).unwrap();
        assert_eq!(p.len(), 3);
        for s in &p {
            assert!(s.contains("chair"));
            assert!(s.contains("is pointing at the chair"));
            assert!(s.contains("scene0001_00") && s.contains("object 7"));
        }
        let set: std::collections::BTreeSet<_> = p.iter().collect();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn many_stay_distinct() {
        let p = render_prompt(&record(), "lamp", 12).unwrap();
        let set: std::collections::BTreeSet<_> = p.iter().collect();
        assert_eq!(set.len(), 12);
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(render_prompt(&record(), "table", 1).unwrap().len(), 1);
        assert!(matches!(render_prompt(&record(), "  ", 3), Err(Error::InvalidInput(_))));
    }
}

//! The one-out-of-k validation rule.

/// A violated constraint: one hand touching several objects at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// "left" or "right".
    pub hand: &'static str,
    /// Names of every object that hand claims to touch.
    pub objects: Vec<String>,
}

/// Each hand may contact at most one of the k candidates. Returns all
/// violations (empty means the labels are consistent).
pub fn validate(candidates: &[String], labels: &[[u8; 2]]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (hand_idx, hand) in ["left", "right"].iter().enumerate() {
        let touching: Vec<String> = candidates
            .iter()
            .zip(labels)
            .filter(|(_, l)| l[hand_idx] == 1)
            .map(|(n, _)| n.clone())
            .collect();
        if touching.len() > 1 {
            out.push(Violation {
                hand,
                objects: touching,
            });
        }
    }
    out
}

//! Ground-truth contact by proximity.

use nalgebra::Vector3;

use worldgrip_core::{ContactTrack, HandTrack, ObjectTemplate, ObjectTrack};
use worldgrip_geometry::mesh::{MeshQuery, TriMesh};
use worldgrip_geometry::SE3;

/// Default proximity threshold, meters.
pub const ORACLE_THRESHOLD: f64 = 0.005;

/// A hand contacts the object when its closest joint is within `threshold`
/// of the posed surface. Monotone in the threshold by construction.
pub fn oracle_contacts(
    hands: &HandTrack,
    object: &ObjectTrack,
    template: &ObjectTemplate,
    threshold: f64,
) -> ContactTrack {
    let mesh = TriMesh::from_template(template).expect("template mesh");
    let query = MeshQuery::new(mesh);
    let n = hands.len().min(object.len());
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let pose = SE3::from_rot9_trans(&object.poses[t].rot9, &object.poses[t].translation);
        let inv = pose.inverse();
        let mut contact = [0.0; 2];
        for s in 0..2 {
            let min_d = hands.joints[t][s]
                .iter()
                .map(|j| query.distance(&inv.apply(&Vector3::new(j[0], j[1], j[2]))))
                .fold(f64::INFINITY, f64::min);
            contact[s] = if min_d < threshold { 1.0 } else { 0.0 };
        }
        frames.push(contact);
    }
    ContactTrack::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use worldgrip_core::{HandState, ObjectPose, Side, JOINT_COUNT};

    fn unit_box_template() -> ObjectTemplate {
        let mesh = worldgrip_geometry::mesh::box_mesh(1.0, 1.0, 1.0);
        ObjectTemplate {
            vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: mesh.faces.clone(),
            bps: vec![],
            bps_basis_seed: 0,
        }
    }

    fn track_with_joint_at(p: [f64; 3]) -> (HandTrack, ObjectTrack) {
        let mut joints = [[[10.0; 3]; JOINT_COUNT]; 2];
        joints[1][0] = p;
        let hands = HandTrack::with_derived_velocities(
            vec![[HandState::rest(Side::Left), HandState::rest(Side::Right)]],
            vec![joints],
            30.0,
        );
        let object = ObjectTrack {
            poses: vec![ObjectPose::identity()],
        };
        (hands, object)
    }

    #[test]
    fn joint_on_surface_is_contact() {
        let (hands, object) = track_with_joint_at([0.5, 0.0, 0.0]);
        let c = oracle_contacts(&hands, &object, &unit_box_template(), ORACLE_THRESHOLD);
        assert_eq!(c.frames[0], [0.0, 1.0]);
    }

    #[test]
    fn six_millimeters_is_not_contact() {
        let (hands, object) = track_with_joint_at([0.506, 0.0, 0.0]);
        let c = oracle_contacts(&hands, &object, &unit_box_template(), 0.005);
        assert_eq!(c.frames[0], [0.0, 0.0]);
    }

    #[test]
    fn threshold_is_monotone() {
        let (hands, object) = track_with_joint_at([0.52, 0.0, 0.0]);
        let template = unit_box_template();
        let narrow = oracle_contacts(&hands, &object, &template, 0.005);
        let wide = oracle_contacts(&hands, &object, &template, 0.05);
        for (a, b) in narrow.frames.iter().zip(wide.frames.iter()) {
            for s in 0..2 {
                assert!(b[s] >= a[s], "larger threshold removed a contact");
            }
        }
        assert_eq!(wide.frames[0], [0.0, 1.0]);
    }

    #[test]
    fn scripted_scene_matches_its_contact_script() {
        use worldgrip_synthdata::{generate_sequence, Scenario, SynthConfig};
        let config = SynthConfig {
            render_observations: false,
            ..SynthConfig::default()
        };
        let seq = generate_sequence(Scenario::PickPlace, 9, &config);
        let oracle = oracle_contacts(
            &seq.bundle.hands,
            &seq.bundle.object,
            &seq.template,
            ORACLE_THRESHOLD,
        );
        assert_eq!(oracle.frames, seq.bundle.contact.frames);
    }
}

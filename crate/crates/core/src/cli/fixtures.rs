//! Worked examples shipped with the binary and run by `demo`.

/// `(name, scenario text)` for every example expected to pass.
pub const FIXTURES: &[(&str, &str)] = &[
    (
        "extend_identity",
        include_str!("../../fixtures/extend_identity.json"),
    ),
    (
        "extend_rotation",
        include_str!("../../fixtures/extend_rotation.json"),
    ),
    (
        "extend_poly",
        include_str!("../../fixtures/extend_poly.json"),
    ),
    (
        "linearize_twist",
        include_str!("../../fixtures/linearize_twist.json"),
    ),
    (
        "glue_translation",
        include_str!("../../fixtures/glue_translation.json"),
    ),
    (
        "glue_rotations",
        include_str!("../../fixtures/glue_rotations.json"),
    ),
    (
        "glue_rotations_3d",
        include_str!("../../fixtures/glue_rotations_3d.json"),
    ),
    (
        "insert_rotation",
        include_str!("../../fixtures/insert_rotation.json"),
    ),
    (
        "verify_poly",
        include_str!("../../fixtures/verify_poly.json"),
    ),
];

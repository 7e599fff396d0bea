//! Reference programs used as in-context examples and as test goldens.

/// Reads the camera motion between views straight from the reconstruction.
pub const CAMERA_MOTION: &str = r#"def program(input_scene: Scene):
    reconstruction3D = pySpatial.reconstruct(input_scene)
    camera_motion = pySpatial.describe_camera_motion(
                    reconstruction3D)
    return camera_motion
"#;

/// Renders the view after turning right, then after also moving forward.
pub const TURN_AND_ADVANCE: &str = r#"def program(input_scene: Scene):

    reconstructed_scene = pySpatial.reconstruct(input_scene)
    base_viewpoint = reconstructed_scene.extrinsics[0]
    # the image 1 indicates the 0th index in the array

    viewpoint_turn_right = pySpatial.rotate_right(
                           base_viewpoint)
    viewpoint_move_forward = pySpatial.move_forward(
                            viewpoint_turn_right)

    image_right = pySpatial.synthesize_novel_view(
                  reconstructed_scene, viewpoint_turn_right)
    image_forward = pySpatial.synthesize_novel_view(
                   reconstructed_scene, viewpoint_move_forward)

    # we should compare these two images, check if the object
    # exists and if the distance is closer.
    visual_clue = [image_right, image_forward]
    return visual_clue
"#;

/// Looks around from the first view in eight 45 degree steps.
pub const LOOK_AROUND: &str = r#"def program(input_scene: Scene):
    recon = pySpatial.reconstruct(input_scene)
    pose = recon.extrinsics[0]
    views = []
    for i in range(8):
        views.append(pySpatial.synthesize_novel_view(recon, pose))
        pose = pySpatial.rotate_right(pose, 45)
    return views
"#;

/// Checks what lies behind the first view.
pub const LOOK_BEHIND: &str = r#"def program(input_scene: Scene):
    recon = pySpatial.reconstruct(input_scene)
    # turning around shows what is behind the first camera
    behind = pySpatial.turn_around(recon.extrinsics[0])
    return pySpatial.synthesize_novel_view(recon, behind)
"#;

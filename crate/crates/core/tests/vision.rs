use nalgebra::Matrix3;
use posekernel::geometry::{vec3, Vec3};
use posekernel::vision::{encode_visual, gaussian_heatmap, visual_feature, Camera, Heatmap2D, Pixel};
use posekernel::voxel::VoxelGrid;
use proptest::prelude::*;

fn camera() -> Camera {
    Camera::look_at(vec3([0.5, -2.0, 1.0]), vec3([0.5, 1.0, 0.8]), vec3([0.0, 0.0, 1.0]), 120.0, 160, 120).unwrap()
}

fn grid() -> VoxelGrid {
    VoxelGrid::new(vec3([-0.5, 0.0, 0.0]), 0.1, [20, 20, 16]).unwrap()
}

#[test]
fn hand_computed_projection() {
    let cam = Camera::new(500.0, 500.0, 320.0, 240.0, Matrix3::identity(), Vec3::zeros(), 640, 480).unwrap();
    let p = cam.project(&vec3([0.5, -0.25, 2.0])).unwrap();
    assert!((p.x - 445.0).abs() < 1e-12);
    assert!((p.y - 177.5).abs() < 1e-12);
}

#[test]
fn single_landmark_lights_a_cone() {
    let cam = camera();
    let sigma = 8.0;
    let landmark = Pixel::new(70.0, 55.0);
    let hm = gaussian_heatmap(&[landmark], sigma, cam.width, cam.height).unwrap();
    let g = grid();
    let field = encode_visual(&hm, &cam, &g).unwrap();
    let mut lit = 0;
    for (lin, x) in g.centers().enumerate() {
        if field.values()[lin] > 0.5 {
            lit += 1;
            let p = cam.project(&x).unwrap();
            assert!((p - landmark).norm() <= 1.18 * sigma);
        }
    }
    assert!(lit > 0);
}

#[test]
fn depth_cannot_be_recovered_along_a_ray() {
    let cam = camera();
    let hm = gaussian_heatmap(&[Pixel::new(81.3, 47.9)], 6.0, cam.width, cam.height).unwrap();
    for pixel in [Pixel::new(81.3, 47.9), Pixel::new(90.2, 40.7), Pixel::new(60.0, 70.5)] {
        let reference = visual_feature(&hm, &cam, 0, &cam.back_project(&pixel, 1.0));
        assert!(reference > 0.0);
        for depth in [0.5, 1.7, 2.9, 4.4, 10.0] {
            let v = visual_feature(&hm, &cam, 0, &cam.back_project(&pixel, depth));
            assert!((v - reference).abs() < 1e-6, "depth {depth}: {v} vs {reference}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn project_then_back_project_round_trips(p in prop::array::uniform3(-2.0f64..3.0)) {
        let cam = camera();
        let x = vec3(p);
        let depth = cam.to_camera(&x).z;
        prop_assume!(depth > 0.05);
        let back = cam.back_project(&cam.project(&x).unwrap(), depth);
        prop_assert!((back - x).norm() < 1e-9);
    }

    #[test]
    fn raising_a_pixel_never_lowers_a_voxel(
        values in prop::collection::vec(0.0f64..1.0, 16 * 12),
        px in 0usize..16,
        py in 0usize..12,
        bump in 0.0f64..1.0,
    ) {
        let cam = Camera::look_at(vec3([0.5, -2.0, 1.0]), vec3([0.5, 1.0, 0.8]), vec3([0.0, 0.0, 1.0]), 12.0, 16, 12).unwrap();
        let g = VoxelGrid::new(vec3([-0.5, 0.0, 0.0]), 0.2, [10, 10, 8]).unwrap();
        let base = Heatmap2D::new(16, 12, 1, values).unwrap();
        let mut raised = base.clone();
        raised.set(0, px, py, (base.get(0, px, py) + bump).min(1.0)).unwrap();
        let a = encode_visual(&base, &cam, &g).unwrap();
        let b = encode_visual(&raised, &cam, &g).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(y >= x);
        }
    }
}

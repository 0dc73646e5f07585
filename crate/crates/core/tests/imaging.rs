mod common;

use common::*;
use msimg::imaging::{evaluate_field, evaluate_field_sequential, mask_strip, mask_theta, FieldMeta};
use msimg::spectral::SpectrumMode;
use msimg::trajectory::{Direction, Knot, ThetaDomain, TimeInterval, Trajectory};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

#[test]
fn argmax_stays_in_strip_across_sweep() {
    let traj = line_case1();
    let g = grid([(-2.0, 2.0), (0.0, 4.0)], 201);
    let cell = g.spacing()[0];
    for i in 0..13 {
        let dir = Direction::from_angle(i as f64 * PI / 12.0);
        let strip = traj.strip(&dir);
        if strip.empty {
            continue;
        }
        let field = indicator_field(&traj, dir, &g, SpectrumMode::Rigorous);
        let p = dir.dot(&g.point(field.argmax()));
        let gap = (strip.lo - p).max(p - strip.hi).max(0.0);
        assert!(
            gap <= cell * (1.0 + 1e-9),
            "θ = {i}π/12: x̂·argmax {p} outside [{}, {}]",
            strip.lo,
            strip.hi
        );
    }
}

#[test]
fn arc_half_max_band_matches_strip() {
    let traj = Trajectory::arc(
        [0.0, 0.0],
        2.0 * SQRT_2,
        true,
        TimeInterval::new(FRAC_PI_4, 3.0 * FRAC_PI_4).unwrap(),
    )
    .unwrap();
    let dir = Direction::from_angle(0.0);
    let g = grid([(-3.0, 3.0), (-3.0, 3.0)], 201);
    let field = indicator_field(&traj, dir, &g, SpectrumMode::Rigorous);
    let (lo, hi) = field.half_max_extent(&dir);
    let expected = 2.0 * (2.0 - FRAC_PI_2);
    let cell = g.spacing()[0];
    assert!(
        (hi - lo - expected).abs() <= 2.0 * cell,
        "half-max width {} vs strip width {expected} (2 cells = {})",
        hi - lo,
        2.0 * cell
    );
}

#[test]
fn parallel_field_equals_sequential() {
    let traj = line_case2();
    let p = probe(
        &traj,
        Direction::from_angle(9.0 * PI / 8.0),
        SpectrumMode::Rigorous,
        None,
    );
    let g = grid([(-2.0, 5.0), (-2.0, 5.0)], 61);
    let par = evaluate_field(|y| p.sum(y), &g, FieldMeta::default());
    let seq = evaluate_field_sequential(|y| p.sum(y), &g, FieldMeta::default());
    assert!(par
        .values
        .iter()
        .zip(&seq.values)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn theta_mask_is_intersection_of_strip_masks() {
    let traj = Trajectory::piecewise_linear(
        2,
        vec![
            Knot::planar(0.0, 3.0, 3.0),
            Knot::planar(1.0, 2.0, 2.0),
            Knot::planar(2.0, 3.0, 1.0),
        ],
    )
    .unwrap();
    let dirs: Vec<Direction> = [1.1 * PI, 1.25 * PI, 1.5 * PI, 5.0 * PI / 3.0, FRAC_PI_2]
        .iter()
        .map(|&t| Direction::from_angle(t))
        .collect();
    let g = grid([(0.0, 5.0), (-0.5, 4.5)], 101);
    let theta = mask_theta(&g, &ThetaDomain::new(&traj, &dirs).unwrap());
    let strips: Vec<Vec<bool>> = dirs
        .iter()
        .map(|d| traj.strip(d))
        .filter(|s| !s.empty)
        .map(|s| mask_strip(&g, &s))
        .collect();
    assert_eq!(strips.len(), 4);
    for (i, &t) in theta.iter().enumerate() {
        assert_eq!(t, strips.iter().all(|m| m[i]));
    }
    assert!(theta.iter().any(|&t| t));
}

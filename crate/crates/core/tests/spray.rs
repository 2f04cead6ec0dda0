use proptest::prelude::*;
use spraysim::spray::{
    adhesion_rate, deposit, plume_reach, sweep_timeline, PaperPlacement, PlumeModel, SprayBounds,
    WaterSensitivePaper,
};

fn at(distance: f64) -> PaperPlacement {
    PaperPlacement {
        zone: 0,
        along: 0.0,
        height: 0.0,
        distance,
    }
}

fn brute_force(rows: usize, cols: usize, stained: &[bool]) -> usize {
    let mut n = 0;
    for i in 0..rows {
        for j in 0..cols {
            if stained[i * cols + j] {
                n += 1;
            }
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adhesion_rate_is_the_stained_pixel_share(
        (rows, cols, stained) in (1usize..=32, 1usize..=32).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), prop::collection::vec(any::<bool>(), r * c))
        })
    ) {
        let paper = WaterSensitivePaper::from_raster(at(1.0), rows, cols, stained.clone()).unwrap();
        let count = brute_force(rows, cols, &stained);
        prop_assert_eq!(paper.stained_count(), count);
        let expect = 100.0 * count as f64 / (rows * cols) as f64;
        prop_assert!((adhesion_rate(&paper).unwrap() - expect).abs() <= 1e-12);
    }
}

#[test]
fn adhesion_rate_edge_cases() {
    let blank = WaterSensitivePaper::from_raster(at(1.0), 4, 5, vec![false; 20]).unwrap();
    assert_eq!(adhesion_rate(&blank).unwrap(), 0.0);
    let full = WaterSensitivePaper::from_raster(at(1.0), 4, 5, vec![true; 20]).unwrap();
    assert_eq!(adhesion_rate(&full).unwrap(), 100.0);
    let mut one = WaterSensitivePaper::from_raster(at(1.0), 4, 5, vec![false; 20]).unwrap();
    one.stain_pixel(3, 4);
    assert_eq!(adhesion_rate(&one).unwrap(), 5.0);
    let empty = WaterSensitivePaper::with_size(at(1.0), 0, 5);
    assert!(adhesion_rate(&empty).is_err());
}

#[test]
fn reach_anchors() {
    let m = PlumeModel::default();
    assert!((plume_reach(100.0, &m).unwrap() - 1.6).abs() < 1e-12);
    assert!((plume_reach(75.0, &m).unwrap() - 0.9).abs() < 1e-12);
    assert!(plume_reach(50.0, &m).is_err());
}

fn pass(distance: f64, duty: f64, seed: u64) -> spraysim::spray::DepositionField {
    let cap = 0.147;
    let timeline = sweep_timeline(0.0, -1.5, 1.5, 0.5, 0.01, duty, cap * duty / 100.0);
    deposit(
        &timeline,
        vec![WaterSensitivePaper::new(at(distance))],
        &PlumeModel::default(),
        cap,
        &SprayBounds::unbounded(),
        0.01,
        seed,
    )
    .unwrap()
}

#[test]
fn close_paper_is_covered_even_at_the_lowest_duty() {
    let f = pass(0.8, 75.0, 3);
    assert!(f.adhesion_rates()[0] > 80.0);
}

#[test]
fn far_paper_stays_dry_at_the_lowest_duty() {
    assert_eq!(pass(1.6, 75.0, 3).adhesion_rates()[0], 0.0);
}

#[test]
fn same_seed_same_stains() {
    let a = pass(1.0, 85.0, 11);
    let b = pass(1.0, 85.0, 11);
    assert_eq!(a, b);
    assert!(a.deposited <= a.emitted);
}

#[test]
fn higher_duty_stains_a_superset() {
    let low = pass(1.2, 85.0, 5);
    let high = pass(1.2, 100.0, 5);
    for (l, h) in low.papers[0].stained().iter().zip(high.papers[0].stained()) {
        assert!(!l || *h);
    }
}

#[test]
fn papers_outside_the_bounds_are_rejected() {
    let bounds = SprayBounds {
        max_distance: 1.0,
        ..SprayBounds::unbounded()
    };
    let r = deposit(
        &[],
        vec![WaterSensitivePaper::new(at(1.5))],
        &PlumeModel::default(),
        0.147,
        &bounds,
        0.01,
        1,
    );
    assert!(r.is_err());
}

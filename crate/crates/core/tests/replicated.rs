//! Seeded replicate studies: selection behaviour on designs whose true
//! segmentation is known, and the additive comparator on additive data.

use lexisseg::grid::Grid;
use lexisseg::lexis::{tabulate, GridSpec};
use lexisseg::select::{default_kappa_grid, fit_path, select, Criterion, Penalty, SelectConfig, SelectInput};
use lexisseg::simulate::{
    default_estimation_grid, fit_age_cohort, replicate_rng, sample_dataset, truth_grid, Censoring, Constraint, Design, PiecewiseHazard,
    SmoothDesign,
};
use lexisseg::IndividualRecord;

const REPLICATES: usize = 50;

fn two_block() -> (PiecewiseHazard, GridSpec) {
    let hazard = PiecewiseHazard::new(vec![0.0, 3.0, 6.0], vec![0.0, 6.0], Grid::from_vec(2, 1, vec![0.02, 0.2]).unwrap()).unwrap();
    (hazard, GridSpec::uniform((0.0, 6.0), 6, (0.0, 6.0), 6).unwrap())
}

fn two_block_records(n: usize, seed: u64, r: usize) -> Vec<IndividualRecord> {
    let (hazard, _) = two_block();
    sample_dataset(&hazard, n, Some(Censoring { low: 3.0, high: 6.0 }), (0.0, 6.0), &mut replicate_rng(seed, r))
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

#[test]
fn constant_hazard_gives_one_area_under_ebic() {
    let hazard = PiecewiseHazard::new(vec![0.0, 5.0], vec![0.0, 5.0], Grid::filled(1, 1, 0.1)).unwrap();
    let grid = GridSpec::uniform((0.0, 5.0), 5, (0.0, 5.0), 5).unwrap();
    let cfg = SelectConfig::default();
    let mut hits = 0;
    for r in 0..REPLICATES {
        let recs = sample_dataset(&hazard, 2000, Some(Censoring { low: 2.5, high: 5.0 }), (0.0, 5.0), &mut replicate_rng(11, r));
        let stats = tabulate(&recs, &grid).unwrap();
        let sel = select(SelectInput::records(&recs, &stats), &default_kappa_grid(), Penalty::L0, Criterion::Ebic, &cfg).unwrap();
        let seg = sel.fit().segmentation().unwrap();
        if seg.q == 1 {
            hits += 1;
            let lambda = seg.areas[0].hazard.unwrap();
            assert!((lambda - 0.1).abs() <= 0.02, "replicate {r}: pooled hazard {lambda}");
        }
    }
    assert!(hits * 10 >= REPLICATES * 9, "q = 1 in {hits}/{REPLICATES}");
}

#[test]
fn two_blocks_are_recovered_and_aic_is_less_sparse() {
    let (_, grid) = two_block();
    let cfg = SelectConfig::default();
    let mut aligned = 0;
    let mut ordered = 0;
    for r in 0..REPLICATES {
        let recs = two_block_records(4000, 5, r);
        let stats = tabulate(&recs, &grid).unwrap();
        let path = fit_path(SelectInput::records(&recs, &stats), &default_kappa_grid(), Penalty::L0, false, &cfg).unwrap();
        let ebic = path.choose(Criterion::Ebic).unwrap();
        let aic = path.choose(Criterion::Aic).unwrap();
        let seg = path.fits[ebic].segmentation().unwrap();
        let top = seg.labels[(0, 0)];
        let bottom = seg.labels[(5, 5)];
        let block_aligned = seg.q == 2 && seg.labels.indexed_iter().all(|((j, _), &l)| l == if j < 3 { top } else { bottom });
        aligned += usize::from(block_aligned);
        ordered += usize::from(path.scores[aic].q >= path.scores[ebic].q);
    }
    assert!(aligned * 10 >= REPLICATES * 9, "block-aligned q = 2 in {aligned}/{REPLICATES}");
    assert!(ordered * 10 >= REPLICATES * 8, "AIC q >= EBIC q in {ordered}/{REPLICATES}");
}

#[test]
fn median_area_count_does_not_grow_with_kappa() {
    let (_, grid) = two_block();
    let cfg = SelectConfig::default();
    let kappas: Vec<f64> = (-2..=3).map(|e| 10f64.powi(e)).collect();
    let mut qs = vec![Vec::new(); kappas.len()];
    for r in 0..20 {
        let recs = two_block_records(1000, 8, r);
        let stats = tabulate(&recs, &grid).unwrap();
        let path = fit_path(SelectInput::register(&stats), &kappas, Penalty::L0, false, &cfg).unwrap();
        for (i, s) in path.scores.iter().enumerate() {
            qs[i].push(s.q.unwrap());
        }
    }
    let medians: Vec<f64> = qs.into_iter().map(median).collect();
    for w in medians.windows(2) {
        assert!(w[1] <= w[0], "medians {medians:?}");
    }
}

#[test]
fn ebic_finds_the_four_piecewise_areas() {
    let hazard = Design::from_name_or_path("piecewise").unwrap().build().unwrap();
    let grid = default_estimation_grid();
    let cfg = SelectConfig::default();
    let mut inside = 0;
    for r in 0..REPLICATES {
        let recs = sample_dataset(&hazard, 4000, Some(Censoring::default()), (1900.0, 2000.0), &mut replicate_rng(21, r));
        let stats = tabulate(&recs, &grid).unwrap();
        let sel = select(SelectInput::records(&recs, &stats), &default_kappa_grid(), Penalty::L0, Criterion::Ebic, &cfg).unwrap();
        let q = sel.scores().q.unwrap();
        inside += usize::from((3..=5).contains(&q));
    }
    assert!(inside * 10 >= REPLICATES * 6, "q in [3, 5] for {inside}/{REPLICATES}");
}

#[test]
fn cv_score_has_interior_minimum_on_smooth_design() {
    let hazard = Design::Smooth(SmoothDesign::default()).build().unwrap();
    let grid = default_estimation_grid();
    let cfg = SelectConfig::default();
    let kappas = default_kappa_grid();
    let mut interior = 0;
    let reps = 20;
    for r in 0..reps {
        let recs = sample_dataset(&hazard, 1000, Some(Censoring::default()), (1900.0, 2000.0), &mut replicate_rng(31, r));
        let stats = tabulate(&recs, &grid).unwrap();
        let path = fit_path(SelectInput::records(&recs, &stats), &kappas, Penalty::L2, true, &cfg).unwrap();
        assert!(path.scores.iter().all(|s| s.cv.unwrap().is_finite()));
        let i = path.choose(Criterion::Cv).unwrap();
        interior += usize::from(i > 0 && i + 1 < kappas.len());
    }
    assert!(interior * 10 >= reps * 7, "interior CV minimum in {interior}/{reps}");
}

#[test]
fn age_cohort_recovers_additive_truth() {
    let mut design = SmoothDesign::default();
    design.bump.amplitude = 0.0;
    let hazard = Design::Smooth(design).build().unwrap();
    // Ten-year cells coincide with the cells on which the truth is additive.
    let grid = GridSpec::uniform((1900.0, 2000.0), 10, (0.0, 100.0), 10).unwrap();
    let recs = sample_dataset(&hazard, 500_000, Some(Censoring::default()), (1900.0, 2000.0), &mut replicate_rng(41, 0));
    let stats = tabulate(&recs, &grid).unwrap();
    let fit = fit_age_cohort(&stats, Constraint::First).unwrap();
    assert!(fit.converged);
    let truth = truth_grid(&hazard, &grid);
    // Populated: enough events that sampling noise sits well inside 5%.
    let mut checked = 0;
    for ((j, k), &est) in fit.hazard().indexed_iter() {
        if stats.events()[(j, k)] >= 100.0 {
            checked += 1;
            let t = truth[(j, k)];
            assert!((est - t).abs() <= 0.05 * t, "cell ({j}, {k}): {est} vs {t}");
        }
    }
    assert!(checked >= 80, "only {checked} populated cells");
}

#[test]
fn age_cohort_underfits_the_bump() {
    let hazard = Design::Smooth(SmoothDesign::default()).build().unwrap();
    let grid = default_estimation_grid();
    let recs = sample_dataset(&hazard, 20_000, Some(Censoring::default()), (1900.0, 2000.0), &mut replicate_rng(51, 0));
    let stats = tabulate(&recs, &grid).unwrap();
    let fit = fit_age_cohort(&stats, Constraint::First).unwrap();
    let truth = truth_grid(&hazard, &grid);
    // Cell [1945, 1950) × [45, 50) touches the bump centre.
    let (j, k) = (9, 9);
    assert!(truth[(j, k)] - fit.hazard()[(j, k)] > 0.0);
}

use noma_irsa::analytics::plr_error_floor;
use noma_irsa::harness::{
    format_sig, run_census, run_fit, run_sweep, write_census_csv, write_sweep_csv, Grid,
    SweepSpec, CENSUS_HEADER, SWEEP_HEADER,
};
use noma_irsa::{Error, StoppingRule};

fn spec(grid: Grid, min_losses: u64) -> SweepSpec {
    SweepSpec {
        grid,
        stop: StoppingRule {
            max_frames: 2_000_000,
            min_loss_events: min_losses,
        },
        ..SweepSpec::default()
    }
}

fn csv_text(spec: &SweepSpec) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(&run_sweep(spec).unwrap(), &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn header_and_columns() {
    let mut s = spec(Grid::Loads(vec![1.0]), 50);
    s.s1_baseline = true;
    let text = csv_text(&s);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "G,m,n,L,gamma_db,dist,plr_sim,ci_low,ci_high,plr_analytic,plr_s1only,frames,losses,seed"
    );
    assert_eq!(SWEEP_HEADER.join(","), text.lines().next().unwrap());

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(row.len(), 14);
    assert_eq!(&row[0], "1");
    assert_eq!(&row[1], "200");
    assert_eq!(&row[5], "2:0.5,3:0.5");
    let analytic = plr_error_floor(200, 200, 3, &s.distribution().unwrap()).unwrap();
    assert_eq!(&row[9], format_sig(analytic, 9));
    assert!(!row[10].is_empty());
    let (lo, p, hi): (f64, f64, f64) = (row[7].parse().unwrap(), row[6].parse().unwrap(), row[8].parse().unwrap());
    assert!(lo <= p && p <= hi);
    assert!(row[12].parse::<u64>().unwrap() >= 50);
}

#[test]
fn baseline_column_empty_unless_requested() {
    let text = csv_text(&spec(Grid::Loads(vec![1.0]), 20));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(&reader.records().next().unwrap().unwrap()[10], "");
}

#[test]
fn loss_rate_rises_with_load() {
    let rows = run_sweep(&spec(
        Grid::Loads(vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4]),
        400,
    ))
    .unwrap();
    assert_eq!(rows.len(), 7);
    for pair in rows.windows(2) {
        assert!(
            pair[1].estimate.plr >= pair[0].estimate.plr,
            "G={} plr={} then G={} plr={}",
            pair[0].load,
            pair[0].estimate.plr,
            pair[1].load,
            pair[1].estimate.plr
        );
        assert!(pair[1].analytic >= pair[0].analytic);
    }
}

#[test]
fn longer_frames_lose_less() {
    let rows = run_sweep(&spec(
        Grid::Slots {
            slots: vec![100, 200, 400],
            load: 0.8,
        },
        400,
    ))
    .unwrap();
    assert_eq!(rows.iter().map(|r| r.users).collect::<Vec<_>>(), vec![80, 160, 320]);
    for pair in rows.windows(2) {
        assert!(pair[1].estimate.plr < pair[0].estimate.plr);
        assert!(pair[1].analytic < pair[0].analytic);
    }
}

#[test]
fn output_independent_of_worker_count() {
    let mut s = spec(Grid::Loads(vec![0.4, 1.2]), 100);
    s.s1_baseline = true;
    s.workers = 1;
    let one = csv_text(&s);
    s.workers = 3;
    assert_eq!(one, csv_text(&s));
}

#[test]
fn census_csv_has_one_line_per_set() {
    let mut s = spec(Grid::Loads(vec![0.4, 0.8]), 1);
    s.stop.max_frames = 500;
    let mut buf = Vec::new();
    write_census_csv(&run_census(&s).unwrap(), &s.dist, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CENSUS_HEADER.join(","));
    assert_eq!(lines.count(), 6);
}

#[test]
fn rejects_bad_grids() {
    let empty = spec(Grid::Loads(vec![]), 10);
    assert!(matches!(run_sweep(&empty), Err(Error::InvalidSweep(_))));
    let negative = spec(Grid::Loads(vec![0.4, -1.0]), 10);
    assert!(matches!(run_sweep(&negative), Err(Error::InvalidSweep(_))));
    let mut bad_dist = spec(Grid::Loads(vec![0.4]), 10);
    bad_dist.dist = "2:0.5,3:0.4".into();
    assert!(matches!(run_sweep(&bad_dist), Err(Error::NotNormalized(_))));
    let mut too_wide = spec(Grid::Slots { slots: vec![2, 100], load: 0.5 }, 10);
    too_wide.dist = "3:1".into();
    assert!(matches!(run_sweep(&too_wide), Err(Error::DegreeExceedsSlots { .. })));
}

#[test]
fn fit_needs_three_frame_lengths() {
    let mut s = spec(Grid::Slots { slots: vec![100], load: 0.4 }, 10);
    s.dist = "2:1".into();
    assert!(matches!(run_fit(&s), Err(Error::DegenerateFit(1))));
    s.grid = Grid::Loads(vec![0.4]);
    assert!(run_fit(&s).is_err());
}

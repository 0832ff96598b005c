use chrono::NaiveDate;
use gmidas::data::{read_daily_series, read_monthly_series, write_daily_csv, write_monthly_csv};
use gmidas::model::synthetic_regressor;
use gmidas::*;
use proptest::prelude::*;

fn ym(y: i32, m: u32) -> YearMonth {
    YearMonth::new(y, m).unwrap()
}

fn daily_from(returns_per_month: &[Vec<f64>], start: YearMonth) -> DailySeries<f64> {
    let mut obs = Vec::new();
    for (i, month) in returns_per_month.iter().enumerate() {
        let id = start.offset(i as i64);
        for (d, &r) in month.iter().enumerate() {
            obs.push((NaiveDate::from_ymd_opt(id.year(), id.month(), d as u32 + 1).unwrap(), r));
        }
    }
    DailySeries::new(obs, SeriesKind::LogReturn).unwrap()
}

#[test]
fn lags_match_brute_force_lookup() {
    let reg = synthetic_regressor(ym(2001, 3), 82, 1.0, 0.9, 0.4, 9, "X").unwrap();
    let months: Vec<Vec<f64>> = (0..60).map(|t| vec![0.01 * t as f64; 3 + t % 5]).collect();
    let daily = daily_from(&months, ym(2003, 1));
    for k in [1, 5, 22] {
        let panel = align_panel(&daily, &reg, k).unwrap();
        for (p, lags) in panel.periods().iter().zip(panel.lags()) {
            for (j, &v) in lags.iter().enumerate() {
                let want = reg.observations().iter().find(|(m, _)| *m == p.id.offset(-(j as i64) - 1)).unwrap().1;
                assert_eq!(v, want, "month {} lag {}", p.id, j + 1);
            }
        }
    }
}

#[test]
fn simulated_files_round_trip_to_the_same_panel() {
    let reg = synthetic_regressor(ym(2000, 1), 40, 1.0, 0.95, 0.3, 1, "X").unwrap();
    let (daily, panel) = simulate(&ParameterSet::reference_rv(), &reg, 12, 21, 1).unwrap();
    let (mut dbuf, mut mbuf) = (Vec::new(), Vec::new());
    write_daily_csv(&daily, &mut dbuf).unwrap();
    write_monthly_csv(&reg, &mut mbuf).unwrap();
    let daily2 = read_daily_series::<f64, _>(dbuf.as_slice(), &ColumnSchema::default(), SeriesKind::LogReturn).unwrap();
    let reg2 = read_monthly_series::<f64, _>(mbuf.as_slice(), "X").unwrap();
    assert_eq!(align_panel(&daily2, &reg2, 12).unwrap(), panel);
}

proptest! {
    #[test]
    fn realized_volatility_is_permutation_invariant_and_quadratic(
        months in prop::collection::vec(prop::collection::vec(-0.1f64..0.1, 1..25), 1..12),
        c in 0.01f64..20.0,
        rot in 0usize..30,
    ) {
        let base = realized_volatility_of(&daily_from(&months, ym(2010, 1))).unwrap().values();
        let rotated: Vec<Vec<f64>> = months.iter().map(|m| {
            let mut m = m.clone();
            let k = rot % m.len();
            m.rotate_left(k);
            m
        }).collect();
        let rv_rot = realized_volatility_of(&daily_from(&rotated, ym(2010, 1))).unwrap().values();
        let scaled: Vec<Vec<f64>> = months.iter().map(|m| m.iter().map(|r| c * r).collect()).collect();
        let rv_scaled = realized_volatility_of(&daily_from(&scaled, ym(2010, 1))).unwrap().values();
        for i in 0..base.len() {
            prop_assert!((rv_rot[i] - base[i]).abs() <= 1e-15 * (1.0 + base[i]));
            prop_assert!((rv_scaled[i] - c * c * base[i]).abs() <= 1e-12 * c * c * base[i].max(1e-300));
        }
    }

    #[test]
    fn log_returns_invert_exp_cumsum(returns in prop::collection::vec(-0.2f64..0.2, 1..300), p0 in 1.0f64..500.0) {
        let start = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap();
        let mut level = p0.ln();
        let mut obs = vec![(start, p0)];
        for (i, r) in returns.iter().enumerate() {
            level += r;
            obs.push((start + chrono::Days::new(i as u64 + 1), level.exp()));
        }
        let prices = DailySeries::new(obs, SeriesKind::Price).unwrap();
        let back = compute_log_returns(&prices).unwrap().values();
        prop_assert_eq!(back.len(), returns.len());
        for (a, b) in back.iter().zip(&returns) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

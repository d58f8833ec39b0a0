use std::collections::BTreeMap;
use std::sync::OnceLock;

use fuma::combiner::Mode;
use fuma::generator::{generate_reference_set, Counts, GeneratorConfig, LengthSampler, MarParams};
use fuma::methods::{forecast, MethodId};
use fuma::metrics::msis;
use fuma::pipeline::io::ForecastTable;
use fuma::pipeline::{evaluate, train, Candidate, TrainConfig, TrainedEnsemble};
use fuma::{Frequency, IntervalForecast, TimeSeries};

fn series(seed: u64, n: usize) -> Vec<TimeSeries> {
    generate_reference_set(&GeneratorConfig {
        seed,
        counts: Counts {
            yearly: n,
            quarterly: n,
            monthly: n,
        },
        params: MarParams::default(),
        lengths: LengthSampler::default(),
    })
    .unwrap()
}

fn config() -> TrainConfig {
    let mut c = TrainConfig::default();
    c.gam.min_rows = 40;
    c
}

fn trained() -> &'static (TrainedEnsemble, String) {
    static CELL: OnceLock<(TrainedEnsemble, String)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (ensemble, _) = train(&series(77, 50), &config()).unwrap();
        let json = ensemble.to_json().unwrap();
        (ensemble, json)
    })
}

#[test]
fn counting_contract_and_determinism() {
    let (ensemble, json) = trained();
    assert_eq!(ensemble.models.len(), MethodId::POOL.len() * 2);
    assert_eq!(ensemble.thresholds.len(), 2);
    for t in &ensemble.thresholds {
        for mode in Mode::SEARCHED {
            let cells = Frequency::ALL.iter().filter(|f| t.threshold(**f, mode).is_some()).count();
            assert_eq!(cells, 3);
        }
    }
    let (again, _) = train(&series(77, 50), &config()).unwrap();
    assert_eq!(&again.to_json().unwrap(), json);
    assert_eq!(&TrainedEnsemble::from_json(json).unwrap().to_json().unwrap(), json);
}

#[test]
fn threshold_one_returns_the_selected_method() {
    let (ensemble, _) = trained();
    let mut ensemble = ensemble.clone();
    for t in &mut ensemble.thresholds {
        for o in &mut t.optimal {
            o.tr = 1.0;
        }
    }
    for s in series(78, 2) {
        let out = ensemble.forecast_series(&s, Mode::Weighted).unwrap();
        for (p, f) in out.provenance.iter().zip(&out.forecasts) {
            assert_eq!(p.selected.len(), 1);
            let direct = forecast(p.selected[0], &s, s.horizon(), &ensemble.levels).unwrap();
            let li = ensemble.levels.iter().position(|l| *l == p.level).unwrap();
            assert_eq!(f, &direct[li]);
        }
    }
}

#[test]
fn uniform_scores_make_modes_agree() {
    let (ensemble, _) = trained();
    let mut ensemble = ensemble.clone();
    let first = ensemble.models[0].model.clone();
    for m in &mut ensemble.models {
        let label = m.model.label.clone();
        m.model = first.clone();
        m.model.label = label;
    }
    for s in series(79, 2) {
        let w = ensemble.forecast_series(&s, Mode::Weighted).unwrap();
        let m = ensemble.forecast_series(&s, Mode::Mean).unwrap();
        assert_eq!(w.forecasts, m.forecasts);
    }
}

#[test]
fn provenance_weights_sum_to_one() {
    let (ensemble, _) = trained();
    for mode in [Mode::Weighted, Mode::Mean, Mode::AllWeighted] {
        for s in series(80, 3) {
            let out = ensemble.forecast_series(&s, mode).unwrap();
            for p in &out.provenance {
                assert!((p.combination_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(p.combination_weights.len(), p.selected.len());
                if mode == Mode::AllWeighted {
                    assert_eq!(p.selected, p.methods);
                }
            }
        }
    }
}

fn table(rows: Vec<(String, Vec<IntervalForecast>)>) -> ForecastTable {
    rows.into_iter().collect::<BTreeMap<_, _>>()
}

#[test]
fn perfect_forecasts_score_zero() {
    let all = series(81, 2);
    let perfect = table(
        all.iter()
            .map(|s| {
                let test = s.split().unwrap().test;
                (s.id().to_string(), vec![IntervalForecast::new(0.95, test.clone(), test.clone(), test).unwrap()])
            })
            .collect(),
    );
    let report = evaluate(&[Candidate { name: "perfect".into(), forecasts: &perfect }], &all, &[]).unwrap();
    for r in &report.rows {
        assert_eq!(r.mean_msis, 0.0);
        assert_eq!(r.mean_mase, 0.0);
        assert_eq!(r.coverage, 1.0);
    }
}

#[test]
fn totals_match_independent_recomputation() {
    let all = series(82, 4);
    let (ensemble, _) = trained();
    let mut rows = Vec::new();
    let mut by_hand: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in &all {
        let split = s.split().unwrap();
        let out = ensemble.forecast_series(&split.train, Mode::Weighted).unwrap();
        let f = out.forecasts.last().unwrap();
        let v = msis(&split.test, &f.lower, &f.upper, split.train.values(), s.period(), 0.05).unwrap();
        by_hand.entry(s.frequency().as_str()).or_default().push(v);
        by_hand.entry("all").or_default().push(v);
        rows.push((s.id().to_string(), out.forecasts));
    }
    let t = table(rows);
    let report = evaluate(&[Candidate { name: "fuma".into(), forecasts: &t }], &all, &[]).unwrap();
    for (group, values) in by_hand {
        let row = report.row("fuma", group, 0.95).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((row.mean_msis - mean).abs() < 1e-12 * mean.max(1.0), "{group}");
        assert_eq!(row.series, values.len());
    }

    let single = &all[..1];
    let report = evaluate(&[Candidate { name: "fuma".into(), forecasts: &t }], single, &[]);
    assert!(report.is_err(), "unmatched ids are reported");
    let one = table(vec![(single[0].id().to_string(), t[single[0].id()].clone())]);
    let report = evaluate(&[Candidate { name: "fuma".into(), forecasts: &one }], single, &[]).unwrap();
    let freq = single[0].frequency().as_str();
    for level in &report.levels {
        let a = report.row("fuma", freq, *level).unwrap();
        let b = report.row("fuma", "all", *level).unwrap();
        assert_eq!((a.mean_msis, a.mean_mase, a.coverage, a.acd), (b.mean_msis, b.mean_mase, b.coverage, b.acd));
    }
}

use plasmo::attribution::{
    explanations_csv, global_importance, shapley_exact, subsample_background, summary_csv,
    FeatureGroups, FnModel, ScalarModel, SurrogateOutput,
};
use plasmo::dataset::SampleRecord;
use plasmo::materials::Metal;
use plasmo::surrogate::{train_mlp, MlpArchitecture, TrainConfig};
use plasmo::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

/// Rows of (thickness, wavelength, one-hot) style features with a valid
/// one-hot pair.
fn rows(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .flat_map(|_| {
            let au = rng.gen::<bool>();
            [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                au as u8 as f64,
                (!au) as u8 as f64,
            ]
        })
        .collect()
}

fn linear(w: [f64; 4], c: f64) -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
    FnModel {
        width: 4,
        f: move |x: &[f64]| c + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
    }
}

fn nonlinear() -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
    FnModel {
        width: 4,
        f: |x: &[f64]| (x[0] * x[1]).sin() + x[1] * x[1] * x[2] - 0.3 * x[3] * x[0],
    }
}

fn assert_close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= TOL, "{what}: {a} vs {b}");
}

/// Shapley values from the permutation definition: the marginal
/// contribution of each group averaged over all orderings of the groups.
fn permutation_shapley(
    model: &dyn ScalarModel,
    x: &[f64],
    bg: &[f64],
    groups: &FeatureGroups,
) -> Vec<f64> {
    let value = |present: &[bool]| {
        let mut sum = 0.0;
        let rows = bg.len() / 4;
        for row in bg.chunks(4) {
            let mut z = row.to_vec();
            for (g, idx) in groups.indices.iter().enumerate() {
                if present[g] {
                    for &i in idx {
                        z[i] = x[i];
                    }
                }
            }
            sum += model.eval(&z).unwrap()[0];
        }
        sum / rows as f64
    };
    let orders = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut phi = vec![0.0; 3];
    for order in orders {
        let mut present = [false; 3];
        for g in order {
            let before = value(&present);
            present[g] = true;
            phi[g] += (value(&present) - before) / 6.0;
        }
    }
    phi
}

#[test]
fn constant_model_gets_zero_attribution() {
    let model = FnModel {
        width: 4,
        f: |_: &[f64]| 3.25,
    };
    let e = shapley_exact(&model, &rows(1, 1), &rows(30, 2), &FeatureGroups::design()).unwrap();
    assert_eq!(e.base_value, 3.25);
    assert!(e.phi.iter().all(|p| *p == 0.0), "{:?}", e.phi);
}

#[test]
fn linear_model_matches_closed_form() {
    let w = [0.7, -1.3, 2.0, -0.4];
    let model = linear(w, 0.5);
    let bg = rows(40, 3);
    let mean: Vec<f64> = (0..4)
        .map(|j| bg.iter().skip(j).step_by(4).sum::<f64>() / 40.0)
        .collect();
    let groups = FeatureGroups::design();
    for x in rows(20, 4).chunks(4) {
        let e = shapley_exact(&model, x, &bg, &groups).unwrap();
        for (g, idx) in groups.indices.iter().enumerate() {
            let expect: f64 = idx.iter().map(|&j| w[j] * (x[j] - mean[j])).sum();
            assert_close(e.phi[g], expect, "linear phi");
        }
    }
}

#[test]
fn coalition_enumeration_matches_permutation_definition() {
    let model = nonlinear();
    let bg = rows(25, 5);
    let groups = FeatureGroups::design();
    for x in rows(10, 6).chunks(4) {
        let e = shapley_exact(&model, x, &bg, &groups).unwrap();
        for (a, b) in e
            .phi
            .iter()
            .zip(permutation_shapley(&model, x, &bg, &groups))
        {
            assert_close(*a, b, "enumeration vs permutations");
        }
    }
}

#[test]
fn efficiency_holds_for_nonlinear_model() {
    let model = nonlinear();
    let bg = rows(50, 7);
    for x in rows(100, 8).chunks(4) {
        let e = shapley_exact(&model, x, &bg, &FeatureGroups::design()).unwrap();
        assert_close(
            e.base_value + e.phi.iter().sum::<f64>(),
            e.prediction,
            "efficiency",
        );
        assert_close(e.prediction, (model.f)(x), "prediction");
    }
}

#[test]
fn dummy_group_gets_zero() {
    let model = FnModel {
        width: 4,
        f: |x: &[f64]| x[0].exp() * x[2] + x[3],
    };
    let bg = rows(30, 9);
    let inst = rows(12, 10);
    let groups = FeatureGroups::design();
    for x in inst.chunks(4) {
        let e = shapley_exact(&model, x, &bg, &groups).unwrap();
        assert!(e.phi[1].abs() < TOL, "{:?}", e.phi);
    }
    let g = global_importance(&model, &inst, &bg, &groups).unwrap();
    assert_eq!(*g.ranking.last().unwrap(), 1);
    assert!(g.mean_abs_phi[1] < TOL);
}

#[test]
fn symmetric_groups_get_equal_attribution() {
    // thickness and wavelength play interchangeable roles; the instance and
    // background are symmetric under swapping them
    let model = FnModel {
        width: 4,
        f: |x: &[f64]| x[0] * x[1] + (x[0] + x[1]).powi(2) + x[2],
    };
    let mut bg = rows(20, 11);
    let swapped: Vec<f64> = bg
        .chunks(4)
        .flat_map(|r| [r[1], r[0], r[2], r[3]])
        .collect();
    bg.extend(swapped);
    let e = shapley_exact(&model, &[0.8, 0.8, 1.0, 0.0], &bg, &FeatureGroups::design()).unwrap();
    assert_close(e.phi[0], e.phi[1], "symmetry");
}

#[test]
fn attribution_is_linear_in_the_model() {
    let f = linear([0.3, 1.1, -0.5, 0.9], 0.2);
    let g = linear([-1.4, 0.6, 0.8, 0.1], -0.7);
    let sum = FnModel {
        width: 4,
        f: |x: &[f64]| (f.f)(x) + (g.f)(x),
    };
    let bg = rows(35, 12);
    let groups = FeatureGroups::design();
    for x in rows(10, 13).chunks(4) {
        let (ef, eg, es) = (
            shapley_exact(&f, x, &bg, &groups).unwrap(),
            shapley_exact(&g, x, &bg, &groups).unwrap(),
            shapley_exact(&sum, x, &bg, &groups).unwrap(),
        );
        for k in 0..3 {
            assert_close(es.phi[k], ef.phi[k] + eg.phi[k], "linearity");
        }
        assert_close(
            es.base_value,
            ef.base_value + eg.base_value,
            "base linearity",
        );
    }
}

#[test]
fn global_ranking_is_permutation_invariant() {
    let model = nonlinear();
    let bg = rows(30, 14);
    let inst = rows(15, 15);
    let groups = FeatureGroups::design();
    let a = global_importance(&model, &inst, &bg, &groups).unwrap();
    let mut doubled: Vec<f64> = inst.chunks(4).rev().flatten().copied().collect();
    doubled.extend_from_slice(&inst);
    let b = global_importance(&model, &doubled, &bg, &groups).unwrap();
    assert_eq!(a.ranking, b.ranking);
    for (x, y) in a.mean_abs_phi.iter().zip(&b.mean_abs_phi) {
        assert_close(*x, *y, "mean |phi|");
    }
}

#[test]
fn argument_errors() {
    let model = nonlinear();
    let groups = FeatureGroups::design();
    assert!(matches!(
        global_importance(&model, &rows(9, 1), &rows(5, 2), &groups),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        shapley_exact(&model, &rows(1, 1), &[], &groups),
        Err(Error::Shape { .. })
    ));
    let three =
        FeatureGroups::new(vec!["a".into(), "b".into()], vec![vec![0], vec![1, 2]], 3).unwrap();
    assert!(matches!(
        shapley_exact(&model, &rows(1, 1), &rows(5, 2), &three),
        Err(Error::Grouping(_))
    ));
}

#[test]
fn csv_exports_have_fixed_headers() {
    let model = nonlinear();
    let groups = FeatureGroups::design();
    let g = global_importance(&model, &rows(10, 16), &rows(10, 17), &groups).unwrap();
    let csv = explanations_csv(&g.explanations, &groups);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_id,base_value,phi_thickness,phi_wavelength,phi_material,prediction"
    );
    assert_eq!(lines.count(), 10);
    let summary = summary_csv(&g);
    assert_eq!(summary.lines().next().unwrap(), "rank,group,mean_abs_phi");
    assert!(summary.lines().nth(1).unwrap().starts_with("1,"));
}

#[test]
fn trained_mlp_satisfies_efficiency() {
    let records: Vec<SampleRecord> = [Metal::Au, Metal::Ag]
        .into_iter()
        .flat_map(|m| {
            (1..=5).flat_map(move |t| {
                (0..12).map(move |k| {
                    let (t, w) = (10.0 * t as f64, 300.0 + 100.0 * k as f64);
                    SampleRecord {
                        material: m,
                        thickness_nm: t,
                        wavelength_nm: w,
                        absorbed_power: (t / 60.0) * (-(w - 500.0).powi(2) / 1e5).exp(),
                        absorbed_flux: t / 100.0,
                        map_path: None,
                        valid: true,
                        imputed: false,
                    }
                })
            })
        })
        .collect();
    let cfg = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::mlp()
    };
    let (model, _) = train_mlp(&records, MlpArchitecture::default(), &cfg).unwrap();
    let inputs: Vec<_> = records
        .iter()
        .map(plasmo::surrogate::RawInput::from)
        .collect();
    let features = model.features(&inputs).unwrap();
    let bg = subsample_background(&features, 4, 256, 0);
    let out = SurrogateOutput {
        model: &model,
        output: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances: Vec<f64> = (0..100)
        .flat_map(|_| {
            let r = rng.gen_range(0..records.len());
            features[4 * r..4 * r + 4].to_vec()
        })
        .collect();
    let g = global_importance(&out, &instances, &bg, &FeatureGroups::design()).unwrap();
    for e in &g.explanations {
        assert_close(
            e.base_value + e.phi.iter().sum::<f64>(),
            e.prediction,
            "trained efficiency",
        );
        assert_eq!(
            e.prediction,
            model.predict_features(&e.instance).unwrap()[0]
        );
    }
}

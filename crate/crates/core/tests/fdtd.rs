use plasmo::fdtd::{build_simulation, geometry, linspace, FluxBox, Profile, SimConfig};
use plasmo::materials::{DrudeLorentzModel, Layer, MaterialModel, Metal, StackSpec};
use plasmo::Error;

fn desk(wavelengths: Vec<f64>) -> SimConfig {
    Profile::Desk.config(wavelengths)
}

#[test]
fn full_grid_is_600_by_413() {
    let sim = build_simulation(
        &StackSpec::plasmonic(Metal::Au, 20.0).unwrap(),
        &Profile::Full.config(vec![600.0]),
    )
    .unwrap();
    assert_eq!((sim.layout().nx, sim.layout().ny), (600, 413));
}

#[test]
fn empty_stack_is_vacuum_without_polarization_grids() {
    let sim = build_simulation(&StackSpec::empty(), &desk(vec![600.0])).unwrap();
    assert_eq!(sim.pole_count(), 0);
    assert!(sim.absorber_box().is_none());
    for seg in sim.fill_fractions() {
        assert_eq!(seg.len(), sim.layout().nx);
    }
}

/// Overlaps in exact integer arithmetic: at 150 cells/μm one cell is 20
/// units of 1/3 nm, so every interface lands on an integer.
#[test]
fn ten_nm_layer_fractions_match_interval_oracle() {
    let cfg = Profile::Full.config(vec![600.0]);
    let stack = StackSpec::plasmonic(Metal::Au, 10.0).unwrap();
    let sim = build_simulation(&stack, &cfg).unwrap();
    let layout = sim.layout();
    let front_units = (layout.pml_cells as i64) * 20 + 3 * 400;
    let bounds = [0i64, 600, 30, 1500].iter().scan(front_units, |x, d| {
        *x += d;
        Some(*x)
    });
    let edges: Vec<i64> = bounds.collect();
    // segments: ambient, ito, au, sio2, substrate
    let starts = [i64::MIN / 4, edges[0], edges[1], edges[2], edges[3]];
    let ends = [edges[0], edges[1], edges[2], edges[3], i64::MAX / 4];
    let fractions = sim.fill_fractions();
    assert_eq!(fractions.len(), 5);
    for s in 0..5 {
        for i in 0..layout.nx {
            let lo = 20 * i as i64 - 10;
            let hi = 20 * i as i64 + 10;
            let overlap = (hi.min(ends[s]) - lo.max(starts[s])).max(0) as f64 / 20.0;
            assert!(
                (fractions[s][i] - overlap).abs() < 1e-9,
                "segment {s} node {i}: {} vs {overlap}",
                fractions[s][i]
            );
        }
    }
    let au_total: f64 = fractions[2].iter().sum::<f64>() * cfg.dx_um() * 1000.0;
    assert!((au_total - 10.0).abs() < 1e-9);
}

#[test]
fn thin_metal_records_warning() {
    let sim = build_simulation(
        &StackSpec::plasmonic(Metal::Au, 10.0).unwrap(),
        &desk(vec![600.0]),
    )
    .unwrap();
    assert!(
        sim.warnings()
            .iter()
            .any(|w| w.contains("thinner than one cell")),
        "{:?}",
        sim.warnings()
    );
}

#[test]
fn overlap_fraction_helper_clips() {
    assert!((geometry::overlap_fraction(10, 0.1, 0.0, 10.0) - 1.0).abs() < 1e-12);
    assert!((geometry::overlap_fraction(10, 0.1, 1.0, 2.0) - 0.5).abs() < 1e-12);
    assert_eq!(geometry::overlap_fraction(10, 0.1, 2.0, 3.0), 0.0);
}

#[test]
fn zero_fields_without_source_stay_zero() {
    let mut sim = build_simulation(
        &StackSpec::plasmonic(Metal::Ag, 30.0).unwrap(),
        &desk(vec![]),
    )
    .unwrap();
    sim.set_source_enabled(false);
    for _ in 0..300 {
        sim.step().unwrap();
    }
    let f = sim.fields();
    assert!(f.ez.iter().chain(&f.hx).chain(&f.hy).all(|v| *v == 0.0));
}

/// Energy-weighted centroid of Ez² over columns from `from` onwards.
fn centroid(ez: &[f64], ny: usize, from: usize, dx: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, col) in ez.chunks(ny).enumerate().skip(from) {
        let w: f64 = col.iter().map(|v| v * v).sum();
        num += w * i as f64 * dx;
        den += w;
    }
    num / den
}

#[test]
fn vacuum_pulse_travels_at_c() {
    let mut cfg = desk(vec![]);
    cfg.cell_size_um = [16.0, 2.75];
    let mut sim = build_simulation(&StackSpec::empty(), &cfg).unwrap();
    let (ny, dx, dt) = (sim.layout().ny, cfg.dx_um(), cfg.dt());
    let from = sim.layout().source + 25;
    let (s1, s2) = (400, 1400);
    let mut x1 = 0.0;
    for n in 1..=s2 {
        sim.step().unwrap();
        if n == s1 {
            x1 = centroid(&sim.fields().ez, ny, from, dx);
        }
    }
    let x2 = centroid(&sim.fields().ez, ny, from, dx);
    let expected = (s2 - s1) as f64 * dt;
    let rel = ((x2 - x1) - expected).abs() / expected;
    assert!(
        rel < 0.01,
        "travelled {} μm, expected {expected} μm",
        x2 - x1
    );
}

#[test]
fn energy_non_increasing_after_source_off() {
    let mut lossy = DrudeLorentzModel::drude(2.0, 0.0, 0.1);
    lossy.static_conductivity = 2e5;
    let stack = StackSpec::new(
        MaterialModel::vacuum(),
        vec![
            Layer::new("metal", Metal::Au.model(), 30.0),
            Layer::new("resistive", MaterialModel::DrudeLorentz(lossy), 200.0),
        ],
        MaterialModel::vacuum(),
    )
    .unwrap();
    let mut sim = build_simulation(&stack, &desk(vec![])).unwrap();
    let t_off = sim_source_end(&sim);
    while sim.time() <= t_off {
        sim.step().unwrap();
    }
    let mut prev = sim.energy();
    for n in 0..3000 {
        sim.step().unwrap();
        let e = sim.energy();
        assert!(
            e <= prev * (1.0 + 1e-12),
            "step {n}: energy rose from {prev:e} to {e:e}"
        );
        prev = e;
    }
}

fn sim_source_end(sim: &plasmo::fdtd::Simulation) -> f64 {
    plasmo::fdtd::GaussianPulse::for_band(sim.config().source_band_nm).end_time()
}

#[test]
fn pml_reflects_less_than_1e_minus_4() {
    let cfg = desk(vec![]);
    let mut sim = build_simulation(&StackSpec::empty(), &cfg).unwrap();
    let (lo, hi) = sim.layout().interior();
    let ny = sim.layout().ny;
    let interior = |ez: &[f64], hy: &[f64]| -> f64 {
        ez[lo * ny..(hi + 1) * ny]
            .iter()
            .chain(&hy[lo * ny..hi * ny])
            .map(|v| v * v)
            .sum()
    };
    let mut peak: f64 = 0.0;
    let mut late: f64 = 0.0;
    for n in 0..3000 {
        sim.step().unwrap();
        let e = interior(&sim.fields().ez, &sim.fields().hy);
        peak = peak.max(e);
        if n >= 2000 {
            late = late.max(e);
        }
    }
    assert!(late < 1e-4 * peak, "late {late:e} vs peak {peak:e}");
}

#[test]
fn stable_for_1e5_steps() {
    for (metal, t) in [(Metal::Au, 10.0), (Metal::Ag, 50.0)] {
        let mut sim =
            build_simulation(&StackSpec::plasmonic(metal, t).unwrap(), &desk(vec![])).unwrap();
        for _ in 0..100_000 {
            sim.step().unwrap();
        }
        assert!(sim.fields().ez.iter().all(|v| v.is_finite()));
        assert!(sim.energy() < 1.0, "energy {}", sim.energy());
    }
}

#[test]
fn empty_stack_transmits_everything() {
    let mut sim =
        build_simulation(&StackSpec::empty(), &desk(linspace(400.0, 1200.0, 17))).unwrap();
    let (r, maps) = sim.run().unwrap();
    assert!(r.decayed);
    for p in &r.points {
        assert!((p.transmittance - 1.0).abs() < 0.02, "{p:?}");
        assert_eq!(p.absorbed_power, 0.0);
    }
    assert!(maps.iter().all(|m| m.values.iter().all(|v| *v == 0.0)));
}

#[test]
fn vacuum_box_has_no_net_flux() {
    let mut sim = build_simulation(&StackSpec::empty(), &desk(linspace(400.0, 1200.0, 9))).unwrap();
    let (lo, _) = sim.layout().interior();
    sim.add_monitor_columns(lo + 40, lo + 60).unwrap();
    sim.run().unwrap();
    for rows in [(0, sim.layout().ny - 1), (10, 50)] {
        let flux = sim
            .flux_spectrum(FluxBox {
                col0: lo + 42,
                col1: lo + 58,
                row0: rows.0,
                row1: rows.1,
            })
            .unwrap();
        assert!(flux.iter().all(|f| f.abs() < 1e-3), "{flux:?}");
    }
}

#[test]
fn box_in_pml_or_unmonitored_is_rejected() {
    let mut sim = build_simulation(
        &StackSpec::plasmonic(Metal::Au, 20.0).unwrap(),
        &desk(vec![600.0]),
    )
    .unwrap();
    sim.run().unwrap();
    let ny = sim.layout().ny;
    let bad = FluxBox {
        col0: 2,
        col1: 80,
        row0: 0,
        row1: ny - 1,
    };
    assert!(matches!(sim.flux_spectrum(bad), Err(Error::Geometry(_))));
    let (lo, _) = sim.layout().interior();
    let unmonitored = FluxBox {
        col0: lo + 3,
        col1: lo + 5,
        row0: 0,
        row1: ny - 1,
    };
    assert!(matches!(
        sim.flux_spectrum(unmonitored),
        Err(Error::Geometry(_))
    ));
}

#[test]
fn add_monitor_rejects_pml_columns() {
    let mut sim = build_simulation(&StackSpec::empty(), &desk(vec![600.0])).unwrap();
    assert!(matches!(
        sim.add_monitor_columns(1, 10),
        Err(Error::Geometry(_))
    ));
}

#[test]
fn map_lookup_and_vacuum_cells() {
    let mut sim = build_simulation(
        &StackSpec::plasmonic(Metal::Au, 20.0).unwrap(),
        &desk(vec![500.0, 700.0]),
    )
    .unwrap();
    assert!(matches!(
        sim.absorbed_power_map(500.0),
        Err(Error::Usage(_))
    ));
    sim.run().unwrap();
    match sim.absorbed_power_map(600.0) {
        Err(Error::UnmonitoredWavelength { available, .. }) => {
            assert_eq!(available, vec![500.0, 700.0])
        }
        other => panic!("expected lookup error, got {other:?}"),
    }
    let map = sim.absorbed_power_map(500.0).unwrap();
    let (ito0, _) = sim.layer_columns("ito").unwrap();
    let (_, sio1) = sim.layer_columns("sio2").unwrap();
    for j in 0..map.ny {
        for i in 0..map.nx {
            let v = map.get(i, j);
            assert!(v >= 0.0);
            if i < ito0 || i > sio1 {
                assert_eq!(v, 0.0, "vacuum cell ({i}, {j})");
            }
        }
    }
}

#[test]
fn run_is_bit_deterministic() {
    let cfg = desk(linspace(450.0, 900.0, 4));
    let stack = StackSpec::plasmonic(Metal::Ag, 20.0).unwrap();
    let a = build_simulation(&stack, &cfg).unwrap().run().unwrap();
    let b = build_simulation(&stack, &cfg).unwrap().run().unwrap();
    assert_eq!(a, b);
}

#[test]
fn metadata_records_hash_and_orientation() {
    let sim = build_simulation(
        &StackSpec::plasmonic(Metal::Au, 20.0).unwrap(),
        &desk(vec![600.0]),
    )
    .unwrap();
    let meta = sim.metadata();
    assert_eq!(meta.materials_manifest_hash.len(), 64);
    assert!(meta.orientation.contains("normal incidence"));
    let json = serde_json::to_string(&meta).unwrap();
    assert!(json.contains("\"resolution\":50"));
}

#[test]
fn missing_monitors_is_an_error() {
    let mut sim = build_simulation(&StackSpec::empty(), &desk(vec![])).unwrap();
    assert!(matches!(sim.run(), Err(Error::InvalidArgument(_))));
}

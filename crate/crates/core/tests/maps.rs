use backscatter_core::channel::{
    friis_channel, ChannelField, FieldPoint, ModulationFactor, PathSet, PhysicalConfig, PlanarArray,
};
use backscatter_core::mapping::*;
use backscatter_core::metrics::{
    closed_form, delta_snr_general, IlluminationSnr, LinkSample, QosTarget,
};
use backscatter_core::precoding::*;
use backscatter_core::rng::{stream, Purpose};

struct Scene {
    phys: PhysicalConfig<f64>,
    field: ChannelField<f64>,
    tag: FieldPoint<f64>,
    reader: FieldPoint<f64>,
}

fn scene(seed: u64) -> Scene {
    let phys = PhysicalConfig::default();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    let ps = PathSet::sample(100, &mut stream(seed, Purpose::Scratch, 0)).unwrap();
    let lambda = phys.wavelength();
    Scene {
        phys,
        field: ChannelField::new(&ps, &array, &phys),
        tag: FieldPoint::new(0.0, 0.0),
        reader: FieldPoint::new(2.0 * lambda, 0.0),
    }
}

fn snr() -> IlluminationSnr<f64> {
    IlluminationSnr::from_db(24.0).unwrap()
}

fn small_grid(s: &Scene) -> MapGrid<f64> {
    let l = s.phys.wavelength();
    MapGrid::new(-l, 3.0 * l, -l, l, l / 8.0).unwrap()
}

fn scenario_precoder(s: &Scene, kind: PrecoderKind) -> Precoder<f64> {
    let h_st = s.field.at(s.tag);
    let h_sr = s.field.at(s.reader);
    let h_tr = friis_channel(s.tag.distance(&s.reader), &s.phys).unwrap();
    build_precoder(
        kind,
        &h_st,
        &h_sr,
        h_tr,
        &ModulationFactor::default(),
        &CcGrid::paper(),
    )
    .unwrap()
}

#[test]
fn ref_illumination_is_first_antenna() {
    let s = scene(1);
    let g = small_grid(&s);
    let m = map_snr_off(&s.field, &ref_precoder(), snr(), &g);
    for (i, v) in m.values.iter().enumerate() {
        let h = s.field.at(g.point(i)).coefficients()[0];
        let want = h.norm_sqr() * snr().linear();
        assert!((v.unwrap() - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn zf_quiet_spot_on_reader() {
    let s = scene(2);
    let l = s.phys.wavelength();
    let g = MapGrid::new(0.0, 4.0 * l, -l, l, l / 4.0).unwrap();
    let i = g.nearest(s.reader).unwrap();
    assert_eq!(g.point(i), s.reader);
    let m = map_snr_off(
        &s.field,
        &scenario_precoder(&s, PrecoderKind::Zf),
        snr(),
        &g,
    );
    assert!(m.values[i].unwrap() < 1e-20 * snr().linear());
}

#[test]
fn mrt_hot_spot_on_tag() {
    let phys = PhysicalConfig::default();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    let l = phys.wavelength();
    let tag = FieldPoint::new(0.0, 0.0);
    let g = MapGrid::centered(tag, l, l, l / 16.0).unwrap();
    let center = g.nearest(tag).unwrap();
    let (cx, cy) = (center % g.nx(), center / g.nx());
    let mut hits = 0;
    for seed in 0..100 {
        let ps = PathSet::sample(100, &mut stream(seed, Purpose::Scratch, 1)).unwrap();
        let field = ChannelField::new(&ps, &array, &phys);
        let p = mrt_precoder(&field.at(tag)).unwrap();
        let m = map_snr_off(&field, &p, snr(), &g);
        let best = (0..g.len())
            .max_by(|a, b| m.values[*a].unwrap().total_cmp(&m.values[*b].unwrap()))
            .unwrap();
        let (bx, by) = (best % g.nx(), best / g.nx());
        if bx.abs_diff(cx) <= 1 && by.abs_diff(cy) <= 1 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits} of 100");
}

#[test]
fn backscatter_map_decays_inverse_square() {
    let s = scene(3);
    let l = s.phys.wavelength();
    let g = MapGrid::new(0.0, 8.0 * l, 0.0, 0.0, l / 2.0).unwrap();
    let m = map_snr_tr(
        &s.field,
        &scenario_precoder(&s, PrecoderKind::Mrt),
        snr(),
        s.tag,
        &g,
    );
    assert!(m.values[0].is_none());
    for i in 1..g.nx() - 1 {
        let (a, b) = (m.values[i].unwrap(), m.values[i + 1].unwrap());
        let want = ((i + 1) as f64 / i as f64).powi(2);
        assert!((a / b - want).abs() < 1e-9 * want);
    }
}

#[test]
fn backscatter_maps_are_proportional() {
    let s = scene(4);
    let g = small_grid(&s);
    let h_st = s.field.at(s.tag);
    let (zf, mrt) = (
        scenario_precoder(&s, PrecoderKind::Zf),
        scenario_precoder(&s, PrecoderKind::Mrt),
    );
    let ratio = h_st.project(&zf).norm_sqr() / h_st.project(&mrt).norm_sqr();
    assert!(ratio <= 1.0);
    let a = map_snr_tr(&s.field, &zf, snr(), s.tag, &g);
    let b = map_snr_tr(&s.field, &mrt, snr(), s.tag, &g);
    for (x, y) in a.values.iter().zip(&b.values) {
        match (x, y) {
            (Some(x), Some(y)) => assert!((x - ratio * y).abs() <= 1e-9 * y),
            (None, None) => {}
            _ => panic!("mask mismatch"),
        }
    }
}

#[test]
fn cc_without_tag_share_gives_zero_backscatter() {
    let s = scene(5);
    let basis = zf_basis(&s.field.at(s.tag), &s.field.at(s.reader)).unwrap();
    let p = cc_precoder(&basis, 0.3, 0.0).unwrap();
    let m = map_snr_tr(&s.field, &p, snr(), s.tag, &small_grid(&s));
    for v in m.values.iter().flatten() {
        assert!(*v < 1e-20);
    }
}

#[test]
fn delta_map_at_reader_matches_closed_form() {
    let s = scene(6);
    let l = s.phys.wavelength();
    let g = MapGrid::new(0.0, 4.0 * l, -l, l, l / 4.0).unwrap();
    let basis = zf_basis(&s.field.at(s.tag), &s.field.at(s.reader)).unwrap();
    let p = zf_precoder(&basis);
    let m = map_delta_snr(&s.field, &p, snr(), s.tag, &ModulationFactor::default(), &g);
    let h_tr = friis_channel(s.tag.distance(&s.reader), &s.phys).unwrap();
    let alpha = basis.gram().q1_norm_sqr.recip().sqrt();
    let want = closed_form::zf(alpha, h_tr) * snr().linear();
    let got = m.values[g.nearest(s.reader).unwrap()].unwrap();
    assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
}

#[test]
fn delta_map_matches_pointwise_evaluation() {
    let s = scene(7);
    let g = small_grid(&s);
    let gamma = ModulationFactor::new(0.8, 0.1).unwrap();
    for kind in PrecoderKind::ALL {
        let p = scenario_precoder(&s, kind);
        let m = map_delta_snr(&s.field, &p, snr(), s.tag, &gamma, &g);
        for (i, v) in m.values.iter().enumerate() {
            let z = g.point(i);
            let Ok(h_tr) = friis_channel(s.tag.distance(&z), &s.phys) else {
                assert!(v.is_none());
                continue;
            };
            let sample =
                LinkSample::new(s.field.at(s.tag), s.field.at(z), h_tr, snr(), gamma).unwrap();
            let want = delta_snr_general(&sample, &p).linear();
            let got = v.unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE),
                "{kind} {i}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn mask_covers_near_field() {
    let s = scene(8);
    let g = small_grid(&s);
    let m = map_delta_snr(
        &s.field,
        &ref_precoder(),
        snr(),
        s.tag,
        &ModulationFactor::default(),
        &g,
    );
    for (i, v) in m.values.iter().enumerate() {
        let near = g.point(i).distance(&s.tag) < s.phys.far_field_bound();
        assert_eq!(v.is_none(), near);
    }
}

fn fo_scenario(kind: PrecoderKind, snr_db: f64) -> FoScenario<f64> {
    FoScenario {
        kind,
        tag: FieldPoint::new(0.0, 0.0),
        snr_illum: IlluminationSnr::from_db(snr_db).unwrap(),
        gamma: ModulationFactor::default(),
        target: QosTarget::default(),
        cc_grid: CcGrid::uniform(36, 10).unwrap(),
    }
}

fn fo_grid(phys: &PhysicalConfig<f64>) -> MapGrid<f64> {
    let l = phys.wavelength();
    MapGrid::centered(FieldPoint::new(0.0, 0.0), 4.0 * l, 4.0 * l, l / 4.0).unwrap()
}

fn ensemble(n: usize) -> (PhysicalConfig<f64>, Vec<ChannelField<f64>>) {
    let phys = PhysicalConfig::default();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    let e = sample_ensemble(n, 100, 11, &array, &phys).unwrap();
    (phys, e)
}

#[test]
fn single_draw_is_binary() {
    let (phys, e) = ensemble(1);
    for kind in PrecoderKind::ALL {
        let m = map_f_o(&e, &fo_scenario(kind, 24.0), &fo_grid(&phys)).unwrap();
        for v in m.map.values.iter().flatten() {
            assert!(*v == 0.0 || *v == 100.0);
        }
    }
}

fn mean(m: &ScalarMap<f64>) -> f64 {
    let v: Vec<f64> = m.values.iter().flatten().copied().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn detection_maps_order_and_range() {
    let (phys, e) = ensemble(20);
    let g = fo_grid(&phys);
    let r = map_f_o(&e, &fo_scenario(PrecoderKind::Ref, 24.0), &g).unwrap();
    let m = map_f_o(&e, &fo_scenario(PrecoderKind::Mrt, 24.0), &g).unwrap();
    assert!(
        mean(&r.map) < mean(&m.map),
        "{} vs {}",
        mean(&r.map),
        mean(&m.map)
    );
    for v in r.map.values.iter().chain(&m.map.values).flatten() {
        assert!((0.0..=100.0).contains(v));
    }
    assert_eq!(m.draws, 20);
}

#[test]
fn zf_full_coverage_disc_around_tag() {
    let (phys, e) = ensemble(20);
    let g = fo_grid(&phys);
    let m = map_f_o(&e, &fo_scenario(PrecoderKind::Zf, 24.0), &g).unwrap();
    let tag = FieldPoint::new(0.0, 0.0);
    // The innermost unmasked ring is fully covered.
    let ring: Vec<f64> = (0..g.len())
        .filter(|i| {
            let d = g.point(*i).distance(&tag);
            d >= phys.far_field_bound() && d < phys.far_field_bound() + g.step()
        })
        .map(|i| m.map.values[i].unwrap())
        .collect();
    assert!(!ring.is_empty());
    assert!(ring.iter().all(|v| *v == 100.0), "{ring:?}");
    // 100% pixels form one region connected to that ring.
    let full: Vec<bool> = m.map.values.iter().map(|v| *v == Some(100.0)).collect();
    let mut seen = vec![false; g.len()];
    let start = (0..g.len()).find(|i| full[*i]).unwrap();
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % g.nx()) as isize, (i / g.nx()) as isize);
        for (dx, dy) in [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= g.nx() as isize || ny >= g.ny() as isize {
                continue;
            }
            let j = ny as usize * g.nx() + nx as usize;
            if full[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    let inner =
        (0..g.len()).filter(|i| full[*i] && g.point(*i).distance(&tag) < 2.0 * phys.wavelength());
    assert!(inner.into_iter().all(|i| seen[i]));
}

#[test]
fn zf_detection_grows_with_illumination() {
    let (phys, e) = ensemble(10);
    let g = fo_grid(&phys);
    let lo = map_f_o(&e, &fo_scenario(PrecoderKind::Zf, 20.0), &g).unwrap();
    let hi = map_f_o(&e, &fo_scenario(PrecoderKind::Zf, 26.0), &g).unwrap();
    for (a, b) in lo.map.values.iter().zip(&hi.map.values) {
        assert!(a <= b);
    }
}

#[test]
fn parallel_equals_serial() {
    let (phys, e) = ensemble(4);
    let g = fo_grid(&phys);
    let s = fo_scenario(PrecoderKind::Cc, 24.0);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| map_f_o(&e, &s, &g).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| map_f_o(&e, &s, &g).unwrap());
    assert_eq!(serial, parallel);
    let again = map_f_o(&ensemble(4).1, &s, &g).unwrap();
    assert_eq!(serial, again);
}

#[test]
fn single_precision_map_tracks_double() {
    let phys = PhysicalConfig::<f32>::default();
    let array = PlanarArray::half_wavelength(8, 8, &phys).unwrap();
    let ps = PathSet::<f32>::sample(100, &mut stream(2, Purpose::Scratch, 0)).unwrap();
    let field = ChannelField::new(&ps, &array, &phys);
    let l = phys.wavelength();
    let g = MapGrid::new(-l, l, -l, l, l / 4.0).unwrap();
    let p = mrt_precoder(&field.at(FieldPoint::new(0.0, 0.0))).unwrap();
    let m32 = map_snr_off(&field, &p, IlluminationSnr::from_db(24.0).unwrap(), &g);

    let s = scene(2);
    let l64 = s.phys.wavelength();
    let g64 = MapGrid::new(-l64, l64, -l64, l64, l64 / 4.0).unwrap();
    let p64 = mrt_precoder(&s.field.at(s.tag)).unwrap();
    let m64 = map_snr_off(&s.field, &p64, snr(), &g64);
    let peak = m64.values.iter().flatten().copied().fold(0.0, f64::max);
    for (a, b) in m32.values.iter().zip(&m64.values) {
        assert!((f64::from(a.unwrap()) - b.unwrap()).abs() < 1e-3 * peak);
    }
}

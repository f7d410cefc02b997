use evoxplain::classifier::presence_vector;
use evoxplain::slic::segment_detailed;
use evoxplain::{
    decode_mask, evolve, segment, softmax, Chromosome, Classifier, GaParams, LinearSuperpixelClassifier, Logits,
    RasterImage, SlicParams, SuperpixelMap,
};
use proptest::prelude::*;

fn block_image(w: u32, h: u32, seed: u8) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| {
        let cell = (x / 4 + 3 * (y / 4)) as u8;
        [40 + cell.wrapping_mul(37).wrapping_add(seed) % 200, 60 + cell.wrapping_mul(11) % 180, 90]
    })
    .unwrap()
}

fn linear_fixture(ns_hint: usize, weights_seed: u64) -> LinearSuperpixelClassifier {
    let img = block_image(32, 24, 5);
    let map = segment(&img, &SlicParams::new(ns_hint)).unwrap();
    let ns = map.ns();
    let row: Vec<f64> = (0..ns).map(|j| ((j as u64 * 7 + weights_seed) % 5) as f64 - 2.0).collect();
    let other: Vec<f64> = row.iter().map(|w| -w * 0.5).collect();
    LinearSuperpixelClassifier::new(img, map, vec![row, other], vec![0.1, -0.1]).unwrap()
}

fn chromosome(ns: usize) -> impl Strategy<Value = Chromosome> {
    prop::collection::vec(any::<bool>(), ns).prop_map(Chromosome::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn presence_inverts_decode(bits in prop::collection::vec(any::<bool>(), 1..64), seed in any::<u8>()) {
        let img = block_image(24, 16, seed);
        let map = segment(&img, &SlicParams::new(bits.len())).unwrap();
        let c = Chromosome::new((0..map.ns()).map(|j| bits[j % bits.len()]).collect());
        let masked = decode_mask(&c, &img, &map).unwrap();
        prop_assert_eq!(presence_vector(&masked, &img, &map).unwrap(), c.bits().to_vec());
    }

    #[test]
    fn linear_predict_matches_chromosome_formula(c in chromosome(64), wseed in 0u64..20) {
        let cls = linear_fixture(12, wseed);
        let c = Chromosome::new(c.bits()[..cls.map().ns()].to_vec());
        let masked = decode_mask(&c, cls.reference(), cls.map()).unwrap();
        let via_image = cls.predict(&masked).unwrap();
        prop_assert_eq!(&via_image, &cls.predict_chromosome(&c).unwrap());
        let sum: f64 = via_image.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        z in prop::collection::vec(-50.0f64..50.0, 2..200),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&Logits::new(z.clone()).unwrap());
        let q = softmax(&Logits::new(z.iter().map(|v| v + shift).collect()).unwrap());
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.probs().iter().all(|&v| v >= 0.0));
        for (a, b) in p.probs().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(z[p.argmax()], zmax);
    }

    #[test]
    fn slic_invariants(w in 8u32..40, h in 8u32..40, k in 1usize..30, m in 1.0f64..40.0, seed in any::<u8>()) {
        let img = block_image(w, h, seed);
        let params = SlicParams::new(k).with_compactness(m);
        let seg = segment_detailed(&img, &params).unwrap();
        let map = &seg.map;
        prop_assert_eq!(map.labels().len(), (w * h) as usize);
        prop_assert!(map.ns() >= 1 && map.ns() <= k);
        prop_assert!(map.sizes().iter().all(|&s| s > 0));
        prop_assert!(map.is_four_connected());
        prop_assert!(seg.iterations <= params.max_iters);
        prop_assert_eq!(&segment(&img, &params).unwrap(), map);
    }

    #[test]
    fn label_map_json_round_trip(w in 4u32..20, h in 4u32..20, k in 1usize..10) {
        let map = segment(&block_image(w, h, 1), &SlicParams::new(k)).unwrap();
        prop_assert_eq!(SuperpixelMap::from_json(&map.to_json().unwrap()).unwrap(), map);
    }

    #[test]
    fn from_index_is_msb_first(v in any::<u64>(), len in 1usize..64) {
        let v = v & ((1u64 << len) - 1);
        let c = Chromosome::from_index(v, len);
        let back = c.bits().iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        prop_assert_eq!(back, v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn archive_is_monotone_and_bounds_initial_best(seed in any::<u64>(), half in 2usize..10, gens in 1usize..15) {
        let cls = linear_fixture(10, seed % 7);
        let pop = 2 * half;
        let params = GaParams { population_size: pop, generations: gens, seed, ..GaParams::default() };
        let e = evolve(&cls, cls.reference(), cls.map(), &params).unwrap();
        prop_assert_eq!(e.history.len(), gens + 1);
        prop_assert!(e.history.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*e.history.last().unwrap(), e.best_fitness);
        prop_assert!(e.best_fitness >= e.history[0]);
        prop_assert_eq!(e.classifier_calls, pop * (gens + 1) + 1);
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>(), workers in 2usize..6) {
        let cls = linear_fixture(16, 3);
        let base = GaParams { population_size: 20, generations: 10, seed, ..GaParams::default() };
        let a = evolve(&cls, cls.reference(), cls.map(), &base).unwrap();
        let b = evolve(&cls, cls.reference(), cls.map(), &GaParams { workers, ..base }).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert_eq!(a.history, b.history);
    }
}

#[test]
fn decode_extremes() {
    let cls = linear_fixture(12, 1);
    let (img, map) = (cls.reference(), cls.map());
    assert_eq!(&decode_mask(&Chromosome::ones(map.ns()), img, map).unwrap(), img);
    let black = decode_mask(&Chromosome::zeros(map.ns()), img, map).unwrap();
    assert!(black.pixels().iter().all(|p| *p == [0, 0, 0]));
}

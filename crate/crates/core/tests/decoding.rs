mod common;

use common::{exhaustive_beam, random_instance, Instance};
use fusedec::fusion::{beam_search, beam_search_base, exhaustive_decode, ilm_logprob_dist, CachedSource, DecodeOptions, FusionSystem};
use fusedec::types::{FusionWeights, TokenSeq};
use proptest::prelude::*;

/// Independent re-scoring of `tokens` + EOS: (base, ilm, elm) sums.
fn components(inst: &Instance, tokens: &TokenSeq, fuse_eos: bool) -> (f64, f64, f64) {
    let enc = inst.model.encode(&inst.src).unwrap();
    let eos = inst.model.tgt_vocab().eos();
    let mut prefix = TokenSeq::empty();
    let (mut b, mut i, mut e) = (0.0, 0.0, 0.0);
    for &t in tokens.ids().iter().chain(std::iter::once(&eos)) {
        b += inst.model.decoder_logprob_dist(&prefix, &enc).unwrap().get(t);
        if t != eos || fuse_eos {
            i += ilm_logprob_dist(&inst.model, &inst.ctx, &prefix).unwrap().get(t);
            e += inst.elm.logprob_dist(prefix.ids()).get(t);
        }
        prefix.push(t);
    }
    (b, i, e)
}

fn opts(beam: usize, max_len: usize) -> DecodeOptions {
    DecodeOptions { beam, max_len, ..DecodeOptions::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wide_beam_is_exhaustive(seed in any::<u64>(), words in 1usize..=2, max_len in 1usize..=3, fuse_eos: bool) {
        let inst = random_instance(seed, words);
        let v = inst.model.tgt_vocab().len();
        let o = DecodeOptions { fuse_eos, ..opts(exhaustive_beam(v, max_len), max_len) };
        let b = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, inst.weights, &o).unwrap();
        let x = exhaustive_decode(&inst.model, &inst.ctx, &inst.elm, &inst.src, inst.weights, max_len, fuse_eos).unwrap();
        prop_assert_eq!(&b.tokens, &x.tokens);
        prop_assert!((b.fused_score - x.fused_score).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_match_base_search(seed in any::<u64>(), beam in 1usize..6) {
        let inst = random_instance(seed, 3);
        let o = opts(beam, 5);
        let fused = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, FusionWeights::OFF, &o).unwrap();
        let base = beam_search_base(&inst.model, &inst.src, &o).unwrap();
        prop_assert_eq!(&fused.tokens, &base.tokens);
        prop_assert_eq!(fused.fused_score, base.base_score);
    }

    #[test]
    fn score_decomposes(seed in any::<u64>(), beam in 1usize..6, fuse_eos: bool) {
        let inst = random_instance(seed, 3);
        let o = DecodeOptions { fuse_eos, ..opts(beam, 5) };
        let r = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, inst.weights, &o).unwrap();
        let (b, i, e) = components(&inst, &r.tokens, fuse_eos);
        prop_assert!((r.base_score - b).abs() < 1e-9);
        prop_assert!((r.ilm_score - i).abs() < 1e-9);
        prop_assert!((r.elm_score - e).abs() < 1e-9);
        let w = inst.weights;
        prop_assert!((r.fused_score - (b - w.beta_ilm * i + w.beta_elm * e)).abs() < 1e-9);
        prop_assert!((r.recombined(w) - r.fused_score).abs() < 1e-9);
    }

    #[test]
    fn score_gap_is_affine_in_beta_elm(seed in any::<u64>(), beta_ilm in 0.0f64..=1.0) {
        let inst = random_instance(seed, 3);
        let v = inst.model.tgt_vocab();
        let (y1, y2) = (v.encode("t0 t1"), v.encode("t2"));
        let c1 = components(&inst, &y1, true);
        let c2 = components(&inst, &y2, true);
        let gap = |be: f64| {
            let f = |c: (f64, f64, f64)| c.0 - beta_ilm * c.1 + be * c.2;
            f(c1) - f(c2)
        };
        let (g0, g1, g2) = (gap(0.0), gap(0.5), gap(1.0));
        prop_assert!(((g1 - g0) - (g2 - g1)).abs() < 1e-9);
        prop_assert!(((g2 - g0) - (c1.2 - c2.2)).abs() < 1e-9);
    }

    #[test]
    fn ilm_ignores_the_source(seed in any::<u64>()) {
        let inst = random_instance(seed, 3);
        let other = inst.model.src_vocab().encode("d d c");
        let prefix = inst.model.tgt_vocab().encode("t1");
        let before = ilm_logprob_dist(&inst.model, &inst.ctx, &prefix).unwrap();
        let _ = inst.model.encode(&other).unwrap();
        let after = ilm_logprob_dist(&inst.model, &inst.ctx, &prefix).unwrap();
        prop_assert_eq!(before.values(), after.values());
        let direct = inst.model.decoder_logprob_dist(&prefix, inst.ctx.as_encoder_output()).unwrap();
        prop_assert_eq!(before.values(), direct.values());
    }

    #[test]
    fn cached_source_matches_beam_search(seed in any::<u64>(), beam in 1usize..5) {
        let inst = random_instance(seed, 3);
        let sys = FusionSystem::new(&inst.model, &inst.ctx, &inst.elm).unwrap();
        let mut cached = CachedSource::new(sys, &inst.src).unwrap();
        let o = opts(beam, 4);
        for w in [inst.weights, FusionWeights::OFF, FusionWeights::new(0.3, 0.9).unwrap(), inst.weights] {
            let a = cached.decode(w, &o).unwrap();
            let b = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, w, &o).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn wider_beam_never_scores_lower_than_greedy_when_exhaustive() {
    for seed in 0..10 {
        let inst = random_instance(seed, 2);
        let greedy = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, inst.weights, &opts(1, 3)).unwrap();
        let full = beam_search(&inst.model, &inst.ctx, &inst.elm, &inst.src, inst.weights, &opts(exhaustive_beam(5, 3), 3)).unwrap();
        assert!(full.fused_score >= greedy.fused_score - 1e-12, "seed {seed}");
    }
}

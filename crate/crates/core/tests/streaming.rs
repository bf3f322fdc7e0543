use simulmt_core::corpus::TokenSequence;
use simulmt_core::metrics::{average_lagging, bleu, normalized_erasure};
use simulmt_core::mock_mt::{build_vocabulary, LexiconTranslator};
use simulmt_core::noise::{apply_noise_corpus, rescale_to_wer, train_noise_model, WerTarget};
use simulmt_core::simul::{offline_decode, run_simul, Combiner, SimulConfig, SimulMember};
use simulmt_core::synthetic::{parallel_toy_corpus, ToyAsrChannel, ToyCorpusSpec};

#[test]
fn agreement_sizes_trade_latency_for_nothing_else() {
    let c = parallel_toy_corpus(&ToyCorpusSpec::new(&["en"], 100, 200, 4));
    let vocab = build_vocabulary(&c.lexicons, &[] as &[&str]);
    let t = LexiconTranslator::new("en", c.lexicons[0].clone(), vocab).strict(true);
    let mut prev = f64::NEG_INFINITY;
    for n in [1, 2, 5, 10, 15] {
        let mut al = 0.0;
        for s in &c.sources[0] {
            let m = [SimulMember { language: "en", source: s, translator: &t }];
            let out = run_simul(&m, &SimulConfig { la_n: n, ..Default::default() }).unwrap();
            assert_eq!(out.output, offline_decode(&m, Combiner::MeanRaw).unwrap());
            assert_eq!(normalized_erasure(&out.log).unwrap().ne, 0.0);
            al += average_lagging(&out.log, "en").unwrap().al;
        }
        al /= c.sources[0].len() as f64;
        println!("LA-{n}: AL {al:.3}");
        assert!(al >= prev);
        prev = al;
    }
}

fn corpus_bleu(out: &[Vec<String>], refs: &[TokenSequence]) -> f64 {
    let hyps: Vec<String> = out.iter().map(|o| o.join(" ")).collect();
    let refs: Vec<String> = refs.iter().map(TokenSequence::joined).collect();
    bleu(&hyps, &[refs]).unwrap()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn late_averaging_helps_under_independent_noise() {
    let c = parallel_toy_corpus(&ToyCorpusSpec::new(&["en", "de"], 150, 1500, 21));
    let vocab = build_vocabulary(&c.lexicons, &[] as &[&str]);
    let t: Vec<LexiconTranslator> = (0..2)
        .map(|k| LexiconTranslator::new(c.languages[k].clone(), c.lexicons[k].clone(), vocab.clone()))
        .collect();
    let channel = ToyAsrChannel::default();
    let models: Vec<_> = (0..2)
        .map(|k| train_noise_model(&channel.training_pairs(&c.sources[k][..1200], &c.source_vocab[k], 70 + k as u64)).unwrap())
        .collect();
    let refs = &c.target[1200..];
    for pct in [10, 20, 30] {
        let mut scores = [0.0; 3];
        for seed in 0..3u64 {
            let noisy: Vec<Vec<TokenSequence>> = (0..2)
                .map(|k| {
                    let m = rescale_to_wer(&models[k], WerTarget::new(pct as f64 / 100.0).unwrap()).unwrap();
                    apply_noise_corpus(&m, &c.sources[k][1200..], 1000 * seed + 17 * k as u64 + 1)
                })
                .collect();
            let mut outs: [Vec<Vec<String>>; 3] = Default::default();
            for i in 0..refs.len() {
                let members: Vec<SimulMember> = (0..2)
                    .map(|k| SimulMember { language: &c.languages[k], source: &noisy[k][i], translator: &t[k] })
                    .collect();
                let cfg = SimulConfig::default();
                outs[0].push(run_simul(&members[..1], &cfg).unwrap().output);
                outs[1].push(run_simul(&members[1..], &cfg).unwrap().output);
                outs[2].push(run_simul(&members, &cfg).unwrap().output);
            }
            for (s, o) in scores.iter_mut().zip(&outs) {
                *s += corpus_bleu(o, refs) / 3.0;
            }
        }
        println!("WER {pct}%: en {:.2} de {:.2} multi {:.2}", scores[0], scores[1], scores[2]);
        assert!(scores[2] > scores[0].max(scores[1]));
    }
}

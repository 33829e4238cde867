// Scratch harness for tuning corpus/probe constants. Not part of the
// deliverable; removed once fixtures are frozen.

use isle::codestream;
use isle::optimizer;
use isle::scorer::{self, ScorerSpec};
use isle::stats;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(48);
    let size: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(512);
    let n_labels: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(6);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(01_514);
    let input: u32 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(64);

    eprintln!("corpus: n={n} size={size} labels={n_labels} seed={seed} input={input}");
    let corpus = scorer::make_synthetic_corpus(n, size, n_labels, seed).unwrap();

    // class balance
    for l in 0..n_labels {
        let pos = corpus.labels.rows().iter().filter(|(_, v)| v[l]).count();
        eprint!("label{l}: {pos}/{n}  ");
    }
    eprintln!();

    let plan = codestream::plan_decompositions(size, size, 32).unwrap();
    eprintln!("plan: N={} ladder={:?}", plan.n_levels, plan.ladder);

    let streams: Vec<(String, isle::codestream::Codestream)> = corpus
        .images
        .iter()
        .map(|(id, img)| (id.clone(), codestream::encode(img, 32).unwrap()))
        .collect();

    let spec = ScorerSpec::linear_probe(input, seed, n_labels);

    // per-d per-label AUROC
    let truth: Vec<&[bool]> = corpus
        .images
        .iter()
        .map(|(id, _)| corpus.labels.get(id).unwrap())
        .collect();
    let mut reference: Vec<f64> = Vec::new();
    for d in (0..=plan.n_levels).rev() {
        let mut per_label = Vec::new();
        let mut rows = Vec::new();
        for (asset, cs) in &streams {
            let img = codestream::decode_partial(cs, d).unwrap();
            rows.push(spec.score(&img, asset, d).unwrap());
        }
        for l in 0..n_labels {
            let col: Vec<f64> = rows.iter().map(|r| r[l]).collect();
            let t: Vec<bool> = truth.iter().map(|r| r[l]).collect();
            per_label.push(stats::auroc(&col, &t).unwrap());
        }
        if d == plan.n_levels {
            reference = per_label.clone();
        }
        let diffs: Vec<f64> =
            per_label.iter().zip(&reference).map(|(c, r)| c - r).collect();
        let gate = if diffs.windows(2).all(|w| w[0] == w[1]) {
            format!("degenerate(all_nonneg={})", diffs[0] >= 0.0)
        } else {
            match stats::paired_t_test_one_tailed(&per_label, &reference) {
                Ok(t) => format!("t={:+.3} p={:.4}", t.t_statistic, t.p_value),
                Err(e) => format!("err: {e}"),
            }
        };
        let mean: f64 = per_label.iter().sum::<f64>() / n_labels as f64;
        let aurocs: Vec<String> = per_label.iter().map(|a| format!("{a:.3}")).collect();
        eprintln!("d={d} res={:?}  mean={mean:.4}  per-label=[{}]  {gate}", plan.rung(d), aurocs.join(" "));
    }

    let report = optimizer::select_optimal(&streams, &corpus.labels, &spec, &plan, 0.05).unwrap();
    eprintln!(
        "select_optimal: chosen_d={} floor={} dropped={:?}",
        report.chosen_d, report.d_min_architecture, report.dropped_labels
    );
    for (d, eval) in &report.per_decomposition {
        eprintln!(
            "  d={d}: mean={:.4} passed={} shapiro_p={:?} test={:?}",
            eval.auroc.mean, eval.passed, eval.shapiro_p, eval.test
        );
    }
}

//! The whole file-based pipeline, stage by stage, exactly as the `muver`
//! binary runs it: synth, build-views, train, merge, index, retrieve,
//! evaluate. Files go to a directory given as the first argument (a fresh
//! temporary directory otherwise).
//!
//! ```bash
//! cargo run --release --example synthetic_pipeline -- /tmp/muver-run
//! ```

use std::path::PathBuf;

use muver::pipeline::run_from;

fn main() -> muver::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            std::env::temp_dir().join(format!("muver-pipeline-{}", std::process::id()))
        });
    std::fs::create_dir_all(&dir).map_err(|e| muver::Error::InvalidArgument(e.to_string()))?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(
        p("muver.conf"),
        "seed = 1\nlearning_rate = 0.5\nepochs = 20\n",
    )
    .map_err(|e| muver::Error::InvalidArgument(e.to_string()))?;

    let stages: Vec<Vec<String>> = vec![
        vec![
            "synth",
            "--entities",
            &p("entities.jsonl"),
            "--mentions",
            &p("train.jsonl"),
            "--test-mentions",
            &p("test.jsonl"),
            "--holdout",
            "200",
            "--config",
            &p("muver.conf"),
        ],
        vec![
            "build-views",
            "--entities",
            &p("entities.jsonl"),
            "--mentions",
            &p("train.jsonl"),
            "--mentions",
            &p("test.jsonl"),
            "--out",
            &p("views.jsonl"),
        ],
        vec![
            "train",
            "--entities",
            &p("entities.jsonl"),
            "--mentions",
            &p("train.jsonl"),
            "--views",
            &p("views.jsonl"),
            "--checkpoint",
            &p("model.ckpt"),
            "--log",
            &p("train_log.jsonl"),
            "--config",
            &p("muver.conf"),
        ],
        vec![
            "merge",
            "--checkpoint",
            &p("model.ckpt"),
            "--views",
            &p("views.jsonl"),
            "--out",
            &p("merged.jsonl"),
            "--strategy",
            "distant",
        ],
        vec![
            "index",
            "--entities",
            &p("entities.jsonl"),
            "--views",
            &p("merged.jsonl"),
            "--checkpoint",
            &p("model.ckpt"),
            "--index",
            &p("entities.idx"),
        ],
        vec![
            "retrieve",
            "--entities",
            &p("entities.jsonl"),
            "--mentions",
            &p("test.jsonl"),
            "--checkpoint",
            &p("model.ckpt"),
            "--index",
            &p("entities.idx"),
            "--k",
            "64",
            "--out",
            &p("results.jsonl"),
        ],
        vec![
            "evaluate",
            "--entities",
            &p("entities.jsonl"),
            "--mentions",
            &p("test.jsonl"),
            "--results",
            &p("results.jsonl"),
            "--label",
            "multi-view",
            "--views",
            &p("views.jsonl"),
            "--out",
            &p("report.txt"),
            "--jsonl",
            &p("report.jsonl"),
        ],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();

    for stage in stages {
        println!("$ muver {}", stage[0]);
        print!(
            "{}",
            run_from(std::iter::once("muver".to_string()).chain(stage))?
        );
    }
    println!("files in {}", dir.display());
    Ok(())
}

//! mAP protocol over observation horizons with a FREQ/RARE class split.
//!
//! ```bash
//! cargo run -p lta --example map_eval
//! ```

use lta::cli::map_table;
use lta::metrics::{make_freq_rare_split, map_eval, HorizonData};
use lta::rng::{stream, Stream};
use rand::Rng;

fn main() -> lta::Result<()> {
    let classes = 8;
    let examples = 60;
    let mut rng = stream(11, Stream::Synthesis);
    // Class c is positive with probability decreasing in c, so the tail is rare.
    let prevalence: Vec<f64> = (0..classes).map(|c| 0.6 / (1.0 + c as f64)).collect();
    let counts: Vec<u64> = prevalence.iter().map(|p| (p * 1000.0) as u64).collect();
    let split = make_freq_rare_split(&counts, None)?;
    println!("FREQ {:?}  RARE {:?}", split.freq, split.rare);

    let horizons = [25u32, 50, 75]
        .iter()
        .map(|&h| {
            // Later horizons see more of the clip, so scores are more informative.
            let signal = h as f64 / 100.0;
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..examples {
                let y: Vec<bool> = prevalence.iter().map(|&p| rng.random::<f64>() < p).collect();
                let s = y
                    .iter()
                    .map(|&l| signal * f64::from(u8::from(l)) + rng.random::<f64>())
                    .collect();
                labels.push(y);
                scores.push(s);
            }
            HorizonData {
                horizon: h,
                scores,
                labels,
            }
        })
        .collect::<Vec<_>>();

    let report = map_eval(&horizons, &split)?;
    print!("{}", map_table(&report));
    Ok(())
}

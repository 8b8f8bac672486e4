//! Per-class average precision and macro mAP on a small table, written
//! out as the CSV the eval stage produces.

use bowtag::metrics::{average_precision, macro_map, EvalTable, MetricsReport};
use ndarray::array;

fn main() -> bowtag::Result<()> {
    let scores = array![[0.9, 0.2, 0.1], [0.8, 0.7, 0.3], [0.4, 0.6, 0.2], [0.3, 0.1, 0.4], [0.1, 0.9, 0.5]];
    let labels = array![
        [true, false, false],
        [false, true, false],
        [true, true, false],
        [false, false, false],
        [false, true, false]
    ];

    let col: Vec<f64> = scores.column(0).to_vec();
    let pos: Vec<bool> = labels.column(0).to_vec();
    // ranks 1 and 3 are positives: (1/1 + 2/3) / 2
    println!("class 0 AP = {:?}", average_precision(&col, &pos)?);

    let table = EvalTable::new(scores, labels)?;
    println!("macro mAP = {:.4} (class 2 has no positives and is left out)", macro_map(&table)?);

    let names: Vec<String> = ["dog", "siren", "rain"].iter().map(|s| s.to_string()).collect();
    let report = MetricsReport::from_table("chunk", &table, &names)?;
    report.write_csv(std::io::stdout())?;
    println!("{}", report.to_json()?);
    Ok(())
}

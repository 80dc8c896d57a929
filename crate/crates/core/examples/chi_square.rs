//! Compares transition rows with the homogeneity test and prints a few
//! critical values.

use mesh_sentinel::detect::{chi2_critical, chi2_statistic, pearson_row_test, Row};

fn main() -> mesh_sentinel::Result<()> {
    // columns follow the state numbering; only the forward/time-out split differs
    let forwarder: Row = [0, 0, 0, 18, 2, 0, 0, 0];
    let similar: Row = [0, 0, 0, 15, 3, 0, 0, 0];
    let dropper: Row = [0, 0, 0, 4, 16, 0, 0, 0];

    for (name, other) in [("similar", similar), ("dropper", dropper)] {
        let outcome = pearson_row_test(&forwarder, &other, 0.1, 5)?;
        println!(
            "forwarder vs {name}: chi2 {:.4} (direct {:.4}), reject {}",
            outcome.chi2,
            chi2_statistic(&forwarder, &other),
            outcome.reject
        );
    }

    let sparse: Row = [0, 0, 0, 2, 1, 0, 0, 0];
    let outcome = pearson_row_test(&forwarder, &sparse, 0.1, 5)?;
    println!("forwarder vs sparse row: applicable {}", outcome.applicable);

    println!("df   alpha=0.10  alpha=0.05  alpha=0.01");
    for df in 1..=7 {
        println!(
            "{df:>2}  {:>10.4}  {:>10.4}  {:>10.4}",
            chi2_critical(df, 0.10)?,
            chi2_critical(df, 0.05)?,
            chi2_critical(df, 0.01)?
        );
    }
    Ok(())
}

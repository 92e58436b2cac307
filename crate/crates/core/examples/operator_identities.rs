//! Largest discrepancy of each identity linking the operators over random
//! jets.

use aronsson_lab::operators::identity_suite;

fn main() -> aronsson_lab::error::Result<()> {
    let s = identity_suite(1000, 7)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&s).expect("serialisable")
    );
    Ok(())
}

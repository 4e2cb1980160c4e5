//! Print the desk-scale run configuration as JSON.

use seril::cli::RunConfig;

fn main() -> seril::Result<()> {
    let cfg = RunConfig::desk("runs/desk/data", "runs/desk");
    cfg.validate()?;
    println!("{}", serde_json::to_string_pretty(&cfg)?);
    Ok(())
}

//! Regenerate docs/config_reference.md:
//! `cargo run -p abdmot --example config_reference > docs/config_reference.md`

fn main() {
    print!("{}", abdmot::config::EngineConfig::reference_markdown());
}

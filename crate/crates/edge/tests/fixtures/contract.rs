//! Source scan: the fourth scene must not require transport or protocol
//! changes.

use std::path::{Path, PathBuf};

fn rust_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            rust_files(&p, out);
        } else if p.extension().is_some_and(|e| e == "rs" || e == "toml") {
            out.push(p);
        }
    }
}

pub fn transport_and_protocol_untouched() -> Result<(), String> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut files = Vec::new();
    for c in ["crates/transport", "crates/protocol"] {
        rust_files(&root.join(c), &mut files);
    }
    if files.is_empty() {
        return Err("no sources found".into());
    }
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        for needle in [super::lighthouse::NAME, super::lighthouse::TOGGLE, "lamp.state"] {
            if text.contains(needle) {
                return Err(format!("{} mentions {needle}", f.display()));
            }
        }
    }
    let fixture = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lighthouse.rs")).unwrap();
    if fixture.contains("gewu_transport") {
        return Err("fixture reaches into the transport".into());
    }
    let handlers = fixture.matches("register_command(").count();
    if handlers > 1 {
        return Err(format!("fixture adds {handlers} command handlers"));
    }
    Ok(())
}

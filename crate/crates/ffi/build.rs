use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    let mut config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("SUBPRIV_H".into()),
        cpp_compat: true,
        documentation: true,
        ..Default::default()
    };
    // C enumerators share one namespace; emit SubprivStatus_Ok etc.
    config.enumeration.prefix_with_name = true;
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(crate_dir.join("include/subpriv.h"));
}

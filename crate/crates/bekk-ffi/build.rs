fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let config_path = std::path::Path::new(&crate_dir).join("cbindgen.toml");
    let out_path = std::path::Path::new(&crate_dir).join("include").join("bekk.h");

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(&config_path).unwrap_or_default();
    match cbindgen::Builder::new().with_config(config).with_crate(&crate_dir).generate() {
        Ok(bindings) => {
            std::fs::create_dir_all(out_path.parent().unwrap()).expect("create include dir");
            bindings.write_to_file(out_path);
        }
        // keep the committed header when generation fails (e.g. offline)
        Err(e) => println!("cargo:warning=cbindgen failed, keeping committed header: {e}"),
    }
}

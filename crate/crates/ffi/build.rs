fn main() {
    let dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(format!("{dir}/cbindgen.toml")).expect("cbindgen.toml");
    match cbindgen::generate_with_config(&dir, config) {
        Ok(b) => {
            b.write_to_file(format!("{dir}/include/casimir.h"));
        }
        // keep the checked-in header if generation fails (e.g. mid-edit syntax errors)
        Err(e) => println!("cargo:warning=header not regenerated: {e}"),
    }
}

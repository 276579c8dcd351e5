use std::path::PathBuf;
use std::process::Command;

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/christoffel.h")
}

#[test]
fn header_declares_api() {
    let h = std::fs::read_to_string(header_path()).unwrap();
    for name in [
        "typedef struct CfModel CfModel;",
        "CF_STATUS_OK = 0",
        "CF_STATUS_NULL_POINTER = 1",
        "CF_STATUS_INVALID_ARGUMENT = 2",
        "CF_STATUS_DATA = 3",
        "CF_STATUS_NUMERICAL = 4",
        "CF_STATUS_IO = 5",
        "CF_STATUS_PANIC = 6",
        "cf_model_fit(",
        "cf_model_load(",
        "cf_model_save(",
        "cf_model_free(",
        "cf_model_dim(",
        "cf_model_num_classes(",
        "cf_model_degree(",
        "cf_model_scores(",
        "cf_model_classify(",
        "cf_last_error_message(void)",
        "cf_status_message(",
    ] {
        assert!(h.contains(name), "header is missing `{name}`");
    }
    assert!(h.starts_with("/* Generated by cbindgen"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let path = header_path();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&path)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not found, skipping"),
        }
    }
}

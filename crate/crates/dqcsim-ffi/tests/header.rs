use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("dqcsim.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "dqcsim_config_from_json",
        "dqcsim_config_free",
        "dqcsim_run",
        "dqcsim_result_outcome",
        "dqcsim_result_json",
        "dqcsim_result_free",
        "dqcsim_string_free",
        "dqcsim_bound",
        "dqcsim_last_error",
        "DQC_STATUS_OK",
        "DQC_MODE_ENUMERATE",
        "typedef struct DqcConfig DqcConfig",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = std::env::temp_dir().join(format!("dqcsim-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"dqcsim.h\"\n\
         int check(void) {\n\
           DqcConfig *cfg = 0;\n\
           DqcStatus s = dqcsim_config_from_json(\"{}\", &cfg);\n\
           dqcsim_config_free(cfg);\n\
           return s == DQC_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(status.success());
}

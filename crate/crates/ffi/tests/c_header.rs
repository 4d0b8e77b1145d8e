//! Compiles a C program against the generated header and static library.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration tests live in <target>/<profile>/deps; the library sits one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libhplk_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out_file = dir.path().join("p.bin");
    let out = Command::new(&bin).arg(&out_file).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("ok\n"));
    let p = hplk_core::io::read_portrait_binary(std::fs::File::open(&out_file).unwrap()).unwrap();
    assert_eq!((p.grid.b.n, p.grid.a.n), (3, 2));
}

use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "stabflow.h"
#include <stdio.h>

int main(void) {
    size_t a[4] = {1, 1, 2, 2}, b[4] = {1, 2, 1, 2};
    double v = 0.0;
    SfStatus s = sf_ari(a, b, 4, &v);
    SfConsensus *c = NULL;
    if (s == SF_STATUS_OK && sf_consensus_from_labels(a, 4, 1, &c) == SF_STATUS_OK) {
        printf("%s %f %zu\n", sf_version(), v, sf_consensus_len(c));
    } else {
        printf("%s\n", sf_last_error());
    }
    sf_consensus_free(c);
    return 0;
}
"#;

#[test]
fn header_compiles_as_c99() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; header check skipped");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

//! Inputs shared by the benchmarks.

use std::path::PathBuf;

/// The committed fixture corpus.
pub fn fixture_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

/// A Java class with `methods` methods, each resolving its algorithm
/// through a local, a concatenation and a class constant.
pub fn dataflow_heavy_source(methods: usize) -> String {
    let mut out = String::from("package bench;\n\nimport java.security.MessageDigest;\nimport javax.crypto.Cipher;\n\npublic class Heavy {\n");
    out.push_str("    private static final String FAMILY = \"SHA-\";\n");
    for i in 0..methods {
        out.push_str(&format!(
            "    public Object m{i}(boolean f) throws Exception {{\n        String size = \"256\";\n        String name = FAMILY + size;\n        MessageDigest.getInstance(name);\n        String t = \"AES/CBC/PKCS5Padding\";\n        return Cipher.getInstance(t);\n    }}\n"
        ));
    }
    out.push_str("}\n");
    out
}

//! Reading and writing LIBSVM files.
//!
//! ```not_rust
//! cargo run --release --example libsvm_io
//! ```

use std::fs::File;
use std::io::BufWriter;

use libcod::data::{gen_synthetic, parse_libsvm, read_libsvm_file, write_libsvm};

fn main() -> libcod::Result<()> {
    let text = "# two samples\n+1 1:0.5 3:-2\n0 2:1   # 0/1 labels map to -1/+1\n";
    let ds = parse_libsvm(text.as_bytes(), None)?;
    println!("parsed {} samples, {} features, labels {:?}", ds.num_samples(), ds.num_features(), ds.labels());

    match parse_libsvm("+1 2:1 2:3\n".as_bytes(), None) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("duplicate index must be rejected"),
    }

    let synthetic = gen_synthetic(1, 50, 30, 0.2, 0.1)?;
    let path = std::env::temp_dir().join("libcod_example.svm");
    write_libsvm(&synthetic, BufWriter::new(File::create(&path)?))?;
    let back = read_libsvm_file(&path, Some(synthetic.num_features()))?;
    println!("round trip through {}: identical = {}", path.display(), back == synthetic);
    std::fs::remove_file(&path)?;
    Ok(())
}

//! Regenerate the synthetic benchmark CSVs (optionally at a different
//! geometry scale, for calibration runs).
//!
//! Usage: gen_bench [--dir DIR] [--binary-spread S] [--multi-sep S] [--seed N]

use std::path::PathBuf;

fn main() {
    let mut dir = PathBuf::from("/tmp/sdfbench");
    let mut binary_freq = sdf_cli::benchdata::BINARY_FREQ;
    let mut multi_sep = sdf_cli::benchdata::MULTICLASS_SEP;
    let mut binary_twins = sdf_cli::benchdata::BINARY_TWINS;
    let mut multi_twins = sdf_cli::benchdata::MULTICLASS_TWINS;
    let mut seed = 1u64;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut i = 0;
    while i + 1 < args.len() {
        match args[i].as_str() {
            "--dir" => dir = PathBuf::from(&args[i + 1]),
            "--binary-freq" => binary_freq = args[i + 1].parse().unwrap(),
            "--multi-sep" => multi_sep = args[i + 1].parse().unwrap(),
            "--binary-twins" => binary_twins = args[i + 1].parse().unwrap(),
            "--multi-twins" => multi_twins = args[i + 1].parse().unwrap(),
            "--seed" => seed = args[i + 1].parse().unwrap(),
            other => panic!("unknown flag {other}"),
        }
        i += 2;
    }
    std::fs::create_dir_all(&dir).unwrap();
    let b = sdf_cli::benchdata::binary_benchmark_scaled(binary_freq, binary_twins, seed);
    sdf_cli::benchdata::write_dataset_csv(&b, &dir.join("parkinsons_like.csv")).unwrap();
    let m = sdf_cli::benchdata::multiclass_benchmark_scaled(multi_sep, multi_twins, seed);
    sdf_cli::benchdata::write_dataset_csv(&m, &dir.join("ecoli_like.csv")).unwrap();
    println!(
        "wrote {} (freq {binary_freq}) and {} (sep {multi_sep})",
        dir.join("parkinsons_like.csv").display(),
        dir.join("ecoli_like.csv").display()
    );
}

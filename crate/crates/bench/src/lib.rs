//! Criterion benchmarks for the estimators, the filterbank and the
//! dereverberation pipeline. The benchmarks live in `benches/`.

# Benchmarks and acceptance runs

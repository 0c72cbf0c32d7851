"""Benchmark systems, simulators and the WIDENT1 dataset format."""

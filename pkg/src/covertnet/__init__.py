"""Covert throughput scaling in wireless ad-hoc networks with wardens."""
__version__ = "0.1.0"

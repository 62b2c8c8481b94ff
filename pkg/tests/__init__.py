"""
Tests package for trackmpc.

This package contains unit tests and closed-loop checks for:
- LTI model, ball-and-plate benchmark and harmonic algebra
- ADMM conic solver and the controller formulations
- Reachable-reference oracles, simulator, property suites and CLI
"""

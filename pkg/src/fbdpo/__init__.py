"""Forward/backward reasoning preference pipeline.

Generates preference pairs from solver and verifier traces, trains a
desk-scale policy with weighted direct preference optimization over
low-rank adapters, and evaluates two-stage (solve then verify) inference
with a verification-calibration metric suite.
"""

__version__ = "0.1.0"

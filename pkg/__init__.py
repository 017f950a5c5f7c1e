"""
BugForge - taint-style bug insertion for C corpora

Finds user-controlled data flowing into sensitive sinks, locates the checks
guarding those flows, and disables one of them to produce a vulnerable
program together with machine-readable ground truth.
"""

__version__ = "1.0.0"
__author__ = "BugForge Team"
__description__ = "Taint-style bug insertion with ground truth for C code"

"""
BugForge CLI Module

Command line interface for the BugForge bug-insertion toolkit.
"""

from .bugforge_cli import main, BugForgeCLI

__all__ = ['main', 'BugForgeCLI']

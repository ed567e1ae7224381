"""
Setup script for CrossPrompt.

This file exists for backward compatibility.
All configuration is in pyproject.toml.
"""

from setuptools import setup

setup()

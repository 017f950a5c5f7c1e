#!/usr/bin/env python3
"""
Setup script for BugForge - taint-style bug insertion for C corpora
"""

from setuptools import setup, find_packages
import os

# Read the README file for long description
def read_readme():
    readme_path = os.path.join(os.path.dirname(__file__), 'README.md')
    if os.path.exists(readme_path):
        with open(readme_path, 'r', encoding='utf-8') as f:
            return f.read()
    return "BugForge - taint-style bug insertion with ground truth for C code"

# Read requirements
def read_requirements():
    req_path = os.path.join(os.path.dirname(__file__), 'requirements.txt')
    if os.path.exists(req_path):
        with open(req_path, 'r', encoding='utf-8') as f:
            return [line.strip() for line in f
                    if line.strip() and not line.startswith('#') and not line.startswith('pytest')]
    return []

setup(
    name="bugforge",
    version="1.0.0",
    author="BugForge Team",
    description="Taint-style bug insertion with ground truth for C code",
    long_description=read_readme(),
    long_description_content_type="text/markdown",

    # Package discovery
    packages=find_packages(exclude=["evaluation", "evaluation.*", "examples", "examples.*"]),

    # Summary files and JSON schemas ship with the package
    package_data={
        'core.interproc': ['summaries/*.summ'],
    },
    data_files=[
        ('docs/schemas', ['docs/schemas/report.schema.json', 'docs/schemas/ground_truth.schema.json']),
    ],
    include_package_data=True,

    # Python version requirement
    python_requires=">=3.9",

    # Dependencies
    install_requires=read_requirements(),
    extras_require={
        'test': ['pytest>=7.0.0'],
    },

    # Console scripts entry points
    entry_points={
        'console_scripts': [
            'bugforge=cli.bugforge_cli:main',
        ],
    },

    # Classifiers
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: C",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Security",
        "Topic :: Software Development :: Testing",
    ],

    # Keywords
    keywords="taint analysis code property graph bug insertion vulnerability corpus ground truth",
)

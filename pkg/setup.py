#!/usr/bin/env python3
# Inspired from https://github.com/kennethreitz/setup.py

from pathlib import Path

from setuptools import setup

NAME = 'srblab'
DESCRIPTION = (
    'Central Lyapunov exponents, Ulam transfer operators and SRB densities'
    ' of partially hyperbolic skew products on the 2-torus.')

REQUIRES_PYTHON = '>=3.8.0'
VERSION = "0.1.0"

HERE = Path(__file__).parent


REQUIRED = [
    'colorlog>=6.0',
    'hydra_core>=1.3.2',
    'hydra_colorlog>=1.0.0',
    'numba>=0.57',
    'numpy>=1.22',
    'PyYAML>=6.0',
    'scipy>=1.9',
]

EXTRAS = {
    'test': ['pytest>=7.0'],
}

try:
    with open(HERE / "README.md", encoding='utf-8') as f:
        long_description = '\n' + f.read()
except FileNotFoundError:
    long_description = DESCRIPTION

setup(
    name=NAME,
    version=VERSION,
    description=DESCRIPTION,
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires=REQUIRES_PYTHON,
    packages=['srblab'],
    install_requires=REQUIRED,
    extras_require=EXTRAS,
    entry_points={'console_scripts': ['srblab=srblab.cli:main']},
    include_package_data=True,
    classifiers=[
        # Trove classifiers
        # Full list: https://pypi.python.org/pypi?%3Aaction=list_classifiers
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Scientific/Engineering :: Physics',
    ],
)

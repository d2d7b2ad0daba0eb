#!/usr/bin/env setup.py
"""Local install compatibility; poetry builds and publishes gridnadir."""

from setuptools import setup


if __name__ == "__main__":
    setup()

"""Charged-particle dynamics on twisted cotangent bundles."""

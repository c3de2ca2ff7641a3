"""
Run module for the codesign package.
"""

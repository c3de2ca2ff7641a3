#!/usr/bin/env python3
"""
Entry point for the run module.
"""
import sys
from codesign.run.run import main

if __name__ == "__main__":
    sys.exit(main())

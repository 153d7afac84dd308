#!/usr/bin/env python3
"""
Main entry point: python -m src
"""

import sys

from gramsos import main

if __name__ == "__main__":
    sys.exit(main())

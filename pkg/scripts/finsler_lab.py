#!/usr/bin/env python3
"""
Entry point for the finsler-lab command-line interface.
"""

import sys
import os

# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())

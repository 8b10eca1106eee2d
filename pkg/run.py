#!/usr/bin/env python3
"""Development run script for Peaks Solver.

    python run.py example --p 30 --mu 1/3
    python run.py solve --input src/data/examples/worked_pair.json
    python run.py tables 2
"""

import sys
import os

# Resolve `src` from a source checkout
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.main import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())

"""
birthchain entry point: python app.py <command> [options]
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from core.cli import main

if __name__ == '__main__':
    raise SystemExit(main())

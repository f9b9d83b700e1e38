"""
Entry point for noether-bench when run from the repository root
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / "backend"))

from app.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())

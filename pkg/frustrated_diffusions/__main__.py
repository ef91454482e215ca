# frustrated_diffusions/__main__.py
import sys

from frustrated_diffusions.tools.cli import main

if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python
"""BackEISNN command line tool"""

import sys


def main():
    try:
        from .cli import app

        app()
    except KeyboardInterrupt:
        print("Ctrl-C pressed. Aborting")
        sys.exit(130)


if __name__ == "__main__":
    main()

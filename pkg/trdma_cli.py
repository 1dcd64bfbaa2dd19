#!/usr/bin/env python3
import sys

from trdma import cli

#Execute the following only when invoked directly.
if __name__ == "__main__":
    sys.exit(cli.main())

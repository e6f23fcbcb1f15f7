"""Print the G_p1 / G_p2 derivative tables for the three appendix cases."""

import sys

from gratingsweep.cli import cmd_greens
from gratingsweep.config import RunConfig

if __name__ == "__main__":
    for case in (1, 2, 3):
        cmd_greens(RunConfig(), case, out=sys.stdout)
        print()

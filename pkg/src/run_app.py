#!/usr/bin/env python3
"""
Launcher for running risalign from a source checkout

The first Ctrl-C cancels the pending Monte Carlo chunks (the run then exits
with status 3 and writes no artifact), a second one exits at once.
"""
import os
import signal
import sys
from typing import Any

# Add paths
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

_interrupted = False


def signal_handler(sig: int, frame: Any) -> None:
    global _interrupted
    from RisAlign.cli import cancel_active_runs

    if not _interrupted and cancel_active_runs():
        _interrupted = True
        print("\nInterrupted, cancelling remaining trial chunks...", file=sys.stderr)
        return
    print("\nInterrupted, exiting...", file=sys.stderr)
    sys.exit(130)


signal.signal(signal.SIGINT, signal_handler)


def main() -> int:
    from RisAlign.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())

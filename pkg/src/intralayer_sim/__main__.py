"""Run the command line with python -m intralayer_sim.

:author: Shay Hill
:created: 2025-02-20
"""

from intralayer_sim.cli import app

if __name__ == "__main__":
    app(prog_name="intralayer-sim")

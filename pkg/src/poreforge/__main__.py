"""Allow running as `python -m poreforge`."""

from poreforge._entry import main

main()

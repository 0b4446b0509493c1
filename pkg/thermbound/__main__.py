"""Module entry for `python -m thermbound`."""

from .cli import main


if __name__ == "__main__":
    raise SystemExit(main())

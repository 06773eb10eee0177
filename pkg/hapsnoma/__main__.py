"""Module entrypoint for `python -m hapsnoma`."""

from .bootstrap import main

if __name__ == "__main__":
    main()

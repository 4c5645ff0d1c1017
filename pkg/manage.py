#!/usr/bin/env python
"""Command line for the rcm engines and Django administration.

    ./manage.py sat solve --dimacs five_scientists
    ./manage.py tm recursive --machine parity --input 11
"""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'recursion_project.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Is the virtual environment from "
            "requirements.txt active?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()

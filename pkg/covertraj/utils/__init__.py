# This file marks the utils directory as a Python package

# This file marks the ml directory as a Python package

# This makes commands a Python package

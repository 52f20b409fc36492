# This makes services a Python package

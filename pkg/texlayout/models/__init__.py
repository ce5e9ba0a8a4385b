# texlayout/models/__init__.py

# This file makes the 'models' directory a Python package.
# The data types of every pipeline stage live here; they carry no logic
# beyond validation and dictionary conversion.

import sys
import os

# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------

project = "dimest"
copyright = "2026, dimest developers"
author = "dimest developers"
release = "0.1"

# -- General configuration ---------------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]

templates_path = ["_templates"]
exclude_patterns = []

sys.path.insert(0, os.path.abspath("../.."))

# -- Options for HTML output -------------------------------------------------

# Napoleon settings
napoleon_numpy_docstring = True


html_theme = "alabaster"
html_static_path = ["_static"]

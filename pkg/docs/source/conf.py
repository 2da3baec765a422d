# Sphinx configuration for the DiskChain API docs.
import os
import pathlib
import sys
from importlib.metadata import version as importlib_version

import sphinx_rtd_theme  # noqa: F401

# ReadTheDocs builds from a checkout, not an installed package
if "READTHEDOCS" in os.environ:
    sys.path.append(str(pathlib.Path(__file__).resolve().parents[2] / "src"))

project = "DiskChain"
copyright = "2022, DiskChain contributors"
author = "DiskChain contributors"
release = version = ".".join(importlib_version("diskchain").split(".")[:3])

extensions = [
    "sphinx_rtd_theme",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.autodoc",
    "sphinx_autodoc_typehints",
]
autodoc_member_order = "bysource"
napoleon_google_docstring = True

exclude_patterns = ["tests", "logs"]

html_theme = "sphinx_rtd_theme"
html_theme_options = {"display_version": True}

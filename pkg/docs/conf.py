#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# moqa documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

from packaging.version import parse

sys.path.insert(0, os.path.abspath(".."))
sys.path.insert(0, os.path.abspath("../src/"))

import moqa  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.doctest", "sphinx_click.ext"]

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "moqa"
copyright = "2025, moqa developers"
author = "moqa developers"

# The short X.Y version
version = parse(moqa.__version__).base_version
version = ".".join(version.split(".")[:2])
# The full version, including alpha/beta/rc tags
release = moqa.__version__

language = "EN"

exclude_patterns = ["_build"]

pygments_style = "sphinx"

todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_rtd_theme"

html_static_path = ["_static"]

htmlhelp_basename = "moqadoc"

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}

latex_documents = [
    (master_doc, "moqa.tex", "moqa Documentation", author, "manual"),
]

# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "moqa", "moqa Documentation", [author], 1)]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (
        master_doc,
        "moqa",
        "moqa Documentation",
        author,
        "moqa",
        "multi-objective approximations of constrained binary optimization",
        "Miscellaneous",
    ),
]

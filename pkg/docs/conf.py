# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
#
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

from twisted_noon import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = "twisted-noon"
copyright = "2024, twisted-noon developers"
author = "twisted-noon developers"

# The short X.Y version
version = ".".join(__version__.split(".")[:2])
# The full version, including alpha/beta/rc tags
release = __version__


# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
]

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

pygments_style = None

autodoc_default_options = {
    "member-order": "bysource",
    "special-members": "__init__",
    "undoc-members": None,
    "exclude-members": "__weakref__",
}

# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_rtd_theme"

html_static_path = ["_static"]


# -- Options for HTMLHelp output ---------------------------------------------

htmlhelp_basename = "twisted-noondoc"


# -- Options for LaTeX output ------------------------------------------------

latex_elements = {}

latex_documents = [
    (
        master_doc,
        "twisted-noon.tex",
        "twisted-noon Documentation",
        author,
        "manual",
    ),
]


# -- Options for manual page output ------------------------------------------

man_pages = [(master_doc, "twisted-noon", "twisted-noon Documentation", [author], 1)]


# -- Options for Epub output -------------------------------------------------

epub_title = project

epub_exclude_files = ["search.html"]

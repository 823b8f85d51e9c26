#
# rsonerf documentation build configuration file.
#
import os
import sys


sys.path.insert(0, os.path.abspath(".."))

import sphinx_rtd_theme  # noqa: E402

from rsonerf import __version__  # noqa: E402


extensions = [
    "sphinx.ext.viewcode",
    "sphinx.ext.autosectionlabel",
]

autosectionlabel_prefix_document = True

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "rsonerf"
copyright = "2024, rsonerf contributors"
author = "rsonerf contributors"

version = release = __version__

language = "en"

exclude_patterns = ["_build"]

pygments_style = "sphinx"

todo_include_todos = False

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]

html_static_path = ["_static"]

htmlhelp_basename = "rsonerfdoc"

latex_documents = [
    (master_doc, "rsonerf.tex", "rsonerf Documentation", author, "manual"),
]

man_pages = [(master_doc, "rsonerf", "rsonerf Documentation", [author], 1)]

suppress_warnings = ["image.nonlocal_uri"]

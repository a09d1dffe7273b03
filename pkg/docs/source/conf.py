# Sphinx configuration for the stlfleet API reference.
# pylint: skip-file
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT))

from stlfleet import __version__  # noqa: E402

project = "python-stlfleet"
copyright = "2024, the stlfleet developers"
author = "the stlfleet developers"
version = ".".join(__version__.split(".")[:2])
release = __version__

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
]

# model fields are listed by the :ivar: entries of each class docstring
autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_class_signature = "separated"
autodoc_default_options = {"exclude-members": "model_config, model_fields, model_computed_fields"}

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "pydantic": ("https://docs.pydantic.dev/latest", None),
}

exclude_patterns = []

html_theme = "sphinx_rtd_theme"
html_title = f"stlfleet {release}"
html_theme_options = {"navigation_depth": 3}

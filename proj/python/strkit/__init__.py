"""Prompt ordering and emphasis toolkit.

Thin package wrapper around the compiled `_strkit` extension: byte-level
tokenization with offset tracking, prompt construction (question-first /
context-first, marked prompting), attention steering over a minimal
decoder-only transformer, and the matching evaluation metrics.
"""

from ._strkit import *  # noqa: F401,F403
from ._strkit import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"

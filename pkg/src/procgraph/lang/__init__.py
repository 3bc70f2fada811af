"""Statement language: parsing, printing and translation to core forms."""

from .ast import format_statement
from .parser import parse, split_statements
from .translate import translate_entity, translate_metadata

__all__ = ["format_statement", "parse", "split_statements", "translate_entity", "translate_metadata"]

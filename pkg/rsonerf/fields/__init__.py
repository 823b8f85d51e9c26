from django.utils.module_loading import import_string

from ..exceptions import ContractError
from ..settings import FIELD_KINDS
from .base import BaseField, FieldOutput, FieldQuery
from .checkpoint import read_blob, write_blob


__all__ = (
    "BaseField",
    "FieldOutput",
    "FieldQuery",
    "init_field",
    "get_field_class",
    "query_vanilla",
    "query_instant",
    "query_deformed",
    "read_blob",
    "write_blob",
)


def get_field_class(kind):
    try:
        return import_string(FIELD_KINDS[kind])
    except KeyError:
        raise ContractError("Unknown field kind %r, expected one of %s" % (kind, ", ".join(sorted(FIELD_KINDS))))


def init_field(kind, seed=0, **options):
    """
    Builds a field of the given kind with deterministically seeded parameters.
    """
    return get_field_class(kind)(seed=seed, **options)


def _query(expected, query, field):
    if field.kind != expected:
        raise ContractError("Expected a %s field, got %r" % (expected, field.kind))
    return field.query(query)


def query_vanilla(query, field):
    return _query("vanilla", query, field)


def query_instant(query, field):
    return _query("instant", query, field)


def query_deformed(query, field):
    return _query("deformed", query, field)

"""Inline conformance markers.

These decorators do nothing at runtime. ``hybridos.conformance`` reads them
from the source tree, collects them into a manifest, and checks each one
against the code.
"""


def not_duplicable(cls):
    return cls


def private_fields(*fields):
    def mark(cls):
        return cls
    return mark


def fields_type(field, inner):
    def mark(cls):
        return cls
    return mark


def nomutates(*fields):
    def mark(fn):
        return fn
    return mark


def nocalls(*names):
    def mark(fn):
        return fn
    return mark

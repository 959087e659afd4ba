from __future__ import annotations

import pytest

from errors import (
    IoFailure,
    MetroTimetableError,
    ParseError,
    SchemaError,
    TimeLimitReached,
    UnknownFixture,
    UnknownStation,
)


def test_every_error_shares_the_base_class() -> None:
    for exc in (
        UnknownStation(7),
        ParseError(3, "bad"),
        SchemaError("/config/h_min", "must be positive"),
        IoFailure("x.csv", "No such file"),
        UnknownFixture("nope", ("tiny8",)),
    ):
        assert isinstance(exc, MetroTimetableError)


def test_messages_carry_location() -> None:
    assert str(SchemaError("/config/h_min", "must be positive")) == "/config/h_min: must be positive"
    assert str(SchemaError("", "bad root")) == "/: bad root"
    assert str(ParseError(12, "unexpected token")) == "line 12: unexpected token"
    assert str(UnknownStation(9)) == "Unknown station: 9"
    assert str(IoFailure("x.csv", "denied")) == "x.csv: denied"


def test_time_limit_keeps_incumbent() -> None:
    exc = TimeLimitReached("stopped", incumbent=42.0)
    assert exc.incumbent == 42.0


def test_key_error_subclasses_catchable_as_key_error() -> None:
    with pytest.raises(KeyError):
        raise UnknownFixture("nope", ("tiny8", "santiago16"))

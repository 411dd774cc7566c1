from fractions import Fraction
from typing import Union

Number = Union[int, float, str, Fraction]


def parse_rational(value: Number, field: str = "value") -> Fraction:
    """Parses decimals, integers and 'p/q' strings into an exact Fraction

    Args:
        value (Number): the raw value, usually from a document or the command line
        field (str): name reported when parsing fails

    Returns:
        Fraction: the exact value
    """
    from utils.errors import InstanceParseError

    if isinstance(value, bool):
        raise InstanceParseError(f"expected a number, got {value!r}", field=field)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # ? floats written by hand are meant as decimals, not binary expansions
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise InstanceParseError(f"malformed rational {value!r}", field=field) from None
    raise InstanceParseError(f"expected a number, got {type(value).__name__}", field=field)


def format_rational(value: Fraction) -> Union[int, str]:
    """Integers stay integers, everything else becomes 'p/q'"""
    value = Fraction(value)
    if value.denominator == 1:
        return value.numerator
    return f"{value.numerator}/{value.denominator}"


def ceil_log2(n: int) -> int:
    """ceil(log2 n) for n >= 1, with ceil_log2(1) == 0"""
    if n < 1:
        raise ValueError("ceil_log2 needs n >= 1")
    return (n - 1).bit_length()


def floor_log2(q: Fraction) -> int:
    """floor(log2 q) for a positive rational, exact"""
    q = Fraction(q)
    if q <= 0:
        raise ValueError("floor_log2 needs a positive value")
    k = q.numerator.bit_length() - q.denominator.bit_length()
    # ? k is off by at most one from the true exponent
    if Fraction(2) ** k > q:
        k -= 1
    elif Fraction(2) ** (k + 1) <= q:
        k += 1
    return k


def ceil_div(a: Fraction, b: Fraction) -> int:
    q = Fraction(a) / Fraction(b)
    return -((-q.numerator) // q.denominator)
